#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "noisere/errors.hpp"
#include "noisere/tape.hpp"
#include "noisere/tensor.hpp"
#include "noisere/vocabulary.hpp"

namespace noisere {

struct EncoderConfig {
  int word_dim = 100;
  int pos_dim = 20;
  int kernels = 200;
  int window = 3;
  int max_relative_distance = 30;

  int input_width() const { return word_dim + 2 * pos_dim; }
  int output_width() const { return 3 * kernels; }
  int pos_rows() const { return 2 * max_relative_distance + 1; }
  int halo() const { return (window - 1) / 2; }

  void validate() const {
    if (kernels < 1) throw UsageError("encoder: kernels must be >= 1");
    if (window < 1 || window % 2 == 0) throw UsageError("encoder: window must be odd and >= 1");
    if (word_dim < 1 || pos_dim < 1) throw UsageError("encoder: dims must be >= 1");
    if (max_relative_distance < 1) throw UsageError("encoder: distance bound must be >= 1");
  }
};

// One tokenized sentence with entity positions and its DS label.
struct SentenceInstance {
  std::vector<int> token_ids;
  int subj_pos = 0;
  int obj_pos = 0;
  int ds_label = 0;
  int reliability_tier = 0;

  int length() const { return static_cast<int>(token_ids.size()); }

  // Piecewise boundaries, subj/obj swapped so b1 <= b2.
  std::pair<int, int> boundaries() const {
    return {std::min(subj_pos, obj_pos), std::max(subj_pos, obj_pos)};
  }
};

inline int clip_distance(int d, int bound) { return std::clamp(d, -bound, bound) + bound; }

// Builds the [L + 2*halo x (word_dim + 2*pos_dim)] input matrix: row t
// concatenates the word embedding of token t with the embeddings of the
// clipped relative distances to the subject and object. Halo rows use the
// padding token (same-padding so the convolution keeps entity positions
// aligned with feature-map columns); out-of-range token ids map to the
// unknown token and are counted.
inline Var build_input_matrix(Tape& tape, Var word_table, Var pos_subj_table, Var pos_obj_table,
                              const SentenceInstance& inst, const EncoderConfig& cfg,
                              int halo = 0, long* unk_hits = nullptr) {
  const int L = inst.length();
  const int vocab_rows = tape.value(word_table).rows();
  std::vector<int> words, d1, d2;
  words.reserve(L + 2 * halo);
  for (int t = -halo; t < L + halo; ++t) {
    int id = Vocabulary::kPad;
    if (t >= 0 && t < L) {
      id = inst.token_ids[static_cast<size_t>(t)];
      if (id < 0 || id >= vocab_rows) {
        id = Vocabulary::kUnk;
        if (unk_hits) ++*unk_hits;
      }
    }
    words.push_back(id);
    d1.push_back(clip_distance(t - inst.subj_pos, cfg.max_relative_distance));
    d2.push_back(clip_distance(t - inst.obj_pos, cfg.max_relative_distance));
  }
  return tape.embed_concat(word_table, pos_subj_table, pos_obj_table, std::move(words),
                           std::move(d1), std::move(d2));
}

// PCNN encoding: convolution over the padded input, per-filter max over the
// three entity segments, concatenation, tanh. Output length 3 * kernels.
inline Var encode_sentence(Tape& tape, Var padded_input, Var filters, Var conv_bias,
                           const EncoderConfig& cfg, int b1, int b2) {
  auto fm = tape.conv1d_valid(padded_input, filters, conv_bias, cfg.window);
  auto pooled = tape.segment_max_pool(fm, b1, b2);
  return tape.tanh(tape.flatten(pooled));
}

// p = softmax(W x + bias).
inline Var predict_distribution(Tape& tape, Var classifier_weight, Var classifier_bias, Var x) {
  return tape.row_softmax(tape.add(tape.matvec(classifier_weight, x), classifier_bias));
}

// GloVe-style embedding file: whitespace-separated token then word_dim
// floats per line; an optional leading "count dim" header is auto-detected.
// Rows of `table` whose token appears in the file are overwritten; others
// keep their initialization. Returns the number of rows loaded.
inline int load_pretrained_embeddings(const std::string& path, const Vocabulary& vocab,
                                      int word_dim, Tensor& table) {
  std::ifstream in(path);
  if (!in) throw DataError("embeddings: cannot open '" + path + "'");
  int loaded = 0;
  std::string line;
  long line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<std::string> fields;
    std::string f;
    while (ls >> f) fields.push_back(f);
    if (first) {
      first = false;
      // "count dim" header: exactly two integer fields.
      if (fields.size() == 2 && fields[0].find_first_not_of("0123456789") == std::string::npos &&
          fields[1].find_first_not_of("0123456789") == std::string::npos) {
        if (std::stoi(fields[1]) != word_dim) {
          throw DataError("embeddings: header dim " + fields[1] + " does not match word_dim " +
                          std::to_string(word_dim));
        }
        continue;
      }
    }
    if (static_cast<int>(fields.size()) != word_dim + 1) {
      throw DataError("embeddings: line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size() - 1) + " values, expected " +
                      std::to_string(word_dim));
    }
    if (!vocab.contains(fields[0])) continue;
    const int id = vocab.lookup(fields[0]);
    for (int i = 0; i < word_dim; ++i) {
      try {
        table.at(id, i) = std::stod(fields[static_cast<size_t>(i) + 1]);
      } catch (const std::exception&) {
        throw DataError("embeddings: line " + std::to_string(line_no) + ": bad float '" +
                        fields[static_cast<size_t>(i) + 1] + "'");
      }
    }
    ++loaded;
  }
  return loaded;
}

}  // namespace noisere
