#pragma once

#include <string>
#include <vector>

#include "noisere/bags.hpp"
#include "noisere/encoder.hpp"
#include "noisere/errors.hpp"
#include "noisere/noise.hpp"
#include "noisere/params.hpp"
#include "noisere/vocabulary.hpp"

namespace noisere {

enum class Mode { sentence, bag_avg, bag_att };
enum class NoiseMode { none, dynamic_tm, global_tm };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::sentence: return "sentence";
    case Mode::bag_avg: return "bag_avg";
    case Mode::bag_att: return "bag_att";
  }
  return "?";
}

inline const char* to_string(NoiseMode m) {
  switch (m) {
    case NoiseMode::none: return "none";
    case NoiseMode::dynamic_tm: return "dynamic";
    case NoiseMode::global_tm: return "global";
  }
  return "?";
}

inline Mode mode_from_string(const std::string& s) {
  if (s == "sentence" || s == "sent") return Mode::sentence;
  if (s == "bag_avg") return Mode::bag_avg;
  if (s == "bag_att") return Mode::bag_att;
  throw UsageError("unknown mode '" + s + "' (expected sentence|bag_avg|bag_att)");
}

inline NoiseMode noise_mode_from_string(const std::string& s) {
  if (s == "none") return NoiseMode::none;
  if (s == "dynamic") return NoiseMode::dynamic_tm;
  if (s == "global") return NoiseMode::global_tm;
  throw UsageError("unknown noise mode '" + s + "' (expected none|dynamic|global)");
}

struct ModelConfig {
  Mode mode = Mode::sentence;
  NoiseMode noise = NoiseMode::none;
  EncoderConfig encoder;
  int relation_count = 0;
  int noise_dim = 0;  // width of x_n; 0 means "same as the encoder output"

  int resolved_noise_dim() const { return noise_dim > 0 ? noise_dim : encoder.output_width(); }

  void validate() const {
    encoder.validate();
    if (relation_count < 2) throw UsageError("model: relation_count must be >= 2");
  }

  bool is_bag() const { return mode != Mode::sentence; }
};

// Owns the vocabulary and every trainable parameter for one configuration.
// Forward passes are graph builders over a caller-provided tape; parameters
// are bound to the tape once per step and shared across the batch.
class Model {
 public:
  Model(ModelConfig cfg, Vocabulary vocab, uint64_t seed)
      : cfg_(cfg), vocab_(std::move(vocab)) {
    cfg_.validate();
    const EncoderConfig& e = cfg_.encoder;
    const int C = cfg_.relation_count;
    store_.add_uniform("embed.word", {vocab_.size(), e.word_dim}, seed, 0.25);
    store_.add_uniform("embed.pos_subj", {e.pos_rows(), e.pos_dim}, seed);
    store_.add_uniform("embed.pos_obj", {e.pos_rows(), e.pos_dim}, seed);
    store_.add_uniform("enc.filters", {e.kernels, e.window * e.input_width()}, seed);
    store_.add("enc.bias", Tensor({e.kernels}));
    store_.add_uniform("cls.weight", {C, e.output_width()}, seed);
    store_.add("cls.bias", Tensor({C}));
    if (cfg_.mode == Mode::bag_att) {
      store_.add_uniform("att.relation_embed", {C, e.output_width()}, seed);
    }
    if (cfg_.noise == NoiseMode::dynamic_tm) {
      if (cfg_.mode == Mode::sentence) {
        const int dn = cfg_.resolved_noise_dim();
        store_.add_uniform("noise.proj_weight", {dn, e.output_width()}, seed);
        store_.add("noise.proj_bias", Tensor({dn}));
        store_.add_uniform("noise.pair_weights", {C * C, dn}, seed);
        store_.add("noise.scalar_bias", Tensor({1}));
      } else {
        store_.add_uniform("noise.relation_embed", {C, e.output_width()}, seed);
        store_.add("noise.row_bias", Tensor({C}));
      }
    } else if (cfg_.noise == NoiseMode::global_tm) {
      store_.add("noise.global", Tensor::identity(C));
    }
  }

  const ModelConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }

  struct Bound {
    Var word, pos_subj, pos_obj, filters, conv_bias, cls_w, cls_b;
    Var att_rel;
    Var n_proj_w, n_proj_b, n_pair, n_scalar;
    Var n_rel, n_row_bias;
    Var n_global;
  };

  Bound bind(Tape& tape) {
    Bound b;
    b.word = tape.param(store_.at("embed.word"));
    b.pos_subj = tape.param(store_.at("embed.pos_subj"));
    b.pos_obj = tape.param(store_.at("embed.pos_obj"));
    b.filters = tape.param(store_.at("enc.filters"));
    b.conv_bias = tape.param(store_.at("enc.bias"));
    b.cls_w = tape.param(store_.at("cls.weight"));
    b.cls_b = tape.param(store_.at("cls.bias"));
    if (cfg_.mode == Mode::bag_att) b.att_rel = tape.param(store_.at("att.relation_embed"));
    if (cfg_.noise == NoiseMode::dynamic_tm) {
      if (cfg_.mode == Mode::sentence) {
        b.n_proj_w = tape.param(store_.at("noise.proj_weight"));
        b.n_proj_b = tape.param(store_.at("noise.proj_bias"));
        b.n_pair = tape.param(store_.at("noise.pair_weights"));
        b.n_scalar = tape.param(store_.at("noise.scalar_bias"));
      } else {
        b.n_rel = tape.param(store_.at("noise.relation_embed"));
        b.n_row_bias = tape.param(store_.at("noise.row_bias"));
      }
    } else if (cfg_.noise == NoiseMode::global_tm) {
      b.n_global = tape.param(store_.at("noise.global"));
    }
    return b;
  }

  // PCNN embedding of one sentence.
  Var embed_sentence(Tape& tape, const Bound& b, const SentenceInstance& inst,
                     long* unk_hits = nullptr) const {
    const auto [b1, b2] = inst.boundaries();
    auto input = build_input_matrix(tape, b.word, b.pos_subj, b.pos_obj, inst, cfg_.encoder,
                                    cfg_.encoder.halo(), unk_hits);
    return encode_sentence(tape, input, b.filters, b.conv_bias, cfg_.encoder, b1, b2);
  }

  struct SentenceForward {
    Var x, p, transition;
  };

  SentenceForward forward_sentence(Tape& tape, const Bound& b, const SentenceInstance& inst,
                                   bool with_noise = true, long* unk_hits = nullptr) const {
    SentenceForward out;
    out.x = embed_sentence(tape, b, inst, unk_hits);
    out.p = predict_distribution(tape, b.cls_w, b.cls_b, out.x);
    if (with_noise && cfg_.noise == NoiseMode::dynamic_tm) {
      auto xn = noise_embedding(tape, b.n_proj_w, b.n_proj_b, out.x);
      out.transition = sentence_transition(tape, b.n_pair, b.n_scalar, xn, cfg_.relation_count);
    } else if (with_noise && cfg_.noise == NoiseMode::global_tm) {
      out.transition = global_transition(tape, b.n_global);
    }
    return out;
  }

  struct BagForward {
    Var p, transition;
  };

  // visible selects sentence indices for the bag-content curriculum;
  // null means all sentences.
  BagForward forward_bag(Tape& tape, const Bound& b, const Bag& bag,
                         const std::vector<int>* visible = nullptr,
                         bool with_noise = true) const {
    if (cfg_.mode == Mode::sentence) throw UsageError("forward_bag: model is sentence-level");
    std::vector<Var> xs;
    const int n = bag.size();
    for (int i = 0; i < n; ++i) {
      if (visible && std::find(visible->begin(), visible->end(), i) == visible->end()) continue;
      xs.push_back(embed_sentence(tape, b, bag.sentences[static_cast<size_t>(i)]));
    }
    if (xs.empty()) throw DataError("forward_bag: no visible sentences in bag");
    BagForward out;
    if (cfg_.mode == Mode::bag_avg) {
      auto s = average_aggregate(tape, xs);
      out.p = bag_predict_avg(tape, b.cls_w, b.cls_b, s);
    } else {
      auto att = attention_aggregate(tape, xs, b.att_rel);
      out.p = bag_predict_att(tape, b.cls_w, b.cls_b, att.per_relation);
    }
    if (with_noise && cfg_.noise == NoiseMode::dynamic_tm) {
      auto noise_att = attention_aggregate(tape, xs, b.n_rel);
      out.transition = bag_transition(tape, noise_att.per_relation, b.n_rel, b.n_row_bias);
    } else if (with_noise && cfg_.noise == NoiseMode::global_tm) {
      out.transition = global_transition(tape, b.n_global);
    }
    return out;
  }

 private:
  ModelConfig cfg_;
  Vocabulary vocab_;
  ParameterStore store_;
};

}  // namespace noisere
