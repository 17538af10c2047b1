#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "noisere/corpus.hpp"
#include "noisere/errors.hpp"
#include "noisere/rng.hpp"
#include "noisere/tensor.hpp"

namespace noisere {

// One reliability tier of the synthetic corpus: lambda mixes the identity
// channel with Q, so the tier's true->DS channel is (1-lambda) I + lambda Q.
struct TierSpec {
  double lambda = 0.0;
  int count = 0;
  std::optional<Tensor> channel;  // per-tier override of the global Q
};

// Recipe for a distant-supervision corpus with a known injected noise
// channel. Sentences are rendered from templates; each carries a
// granularity marker token for its tier, mirroring how reliability is
// surface-visible in time-expression data.
struct SyntheticSpec {
  int relation_count = 4;  // includes the none-relation at index 0
  int templates_per_relation = 10;
  int vocab_size = 200;
  Tensor channel;  // C x C row-stochastic, true -> DS label
  std::vector<TierSpec> tiers;
  int val_count = 400;
  int test_count = 400;
  int pairs_per_relation = 0;  // entity pool size; 0 derives from counts
  uint64_t rng_seed = 1;
  // Optional explicit templates per relation index; tokens with <subj> and
  // <obj> placeholders. Auto-generated templates are used otherwise.
  std::map<int, std::vector<std::string>> custom_templates;

  int train_count() const {
    int n = 0;
    for (const auto& t : tiers) n += t.count;
    return n;
  }

  // Cyclic confusion among positive relations plus leakage into none;
  // none itself spreads uniformly over the positives.
  static Tensor default_channel(int C) {
    Tensor q({C, C});
    for (int j = 1; j < C; ++j) q.at(0, j) = 1.0 / (C - 1);
    for (int r = 1; r < C; ++r) {
      const int next = (r % (C - 1)) + 1;
      q.at(r, next) = 0.9;
      q.at(r, 0) = 0.1;
    }
    return q;
  }

  static SyntheticSpec defaults() {
    SyntheticSpec s;
    s.channel = default_channel(s.relation_count);
    s.tiers = {{0.05, 600, std::nullopt}, {0.3, 200, std::nullopt}, {0.5, 1200, std::nullopt}};
    return s;
  }

  void validate() const {
    if (relation_count < 2) throw DataError("synthetic: relation_count must be >= 2");
    if (templates_per_relation < 1) throw DataError("synthetic: need at least one template");
    if (vocab_size < 10) throw DataError("synthetic: vocab_size must be >= 10");
    if (tiers.empty()) throw DataError("synthetic: at least one tier required");
    check_channel(channel, "channel");
    double prev = -1.0;
    for (size_t t = 0; t < tiers.size(); ++t) {
      const auto& tier = tiers[t];
      if (tier.lambda < 0.0 || tier.lambda > 1.0) {
        throw DataError("synthetic: tier " + std::to_string(t) + ": lambda must be in [0,1]");
      }
      if (tier.lambda < prev) {
        throw DataError("synthetic: tier lambdas must be non-decreasing (higher tier = noisier)");
      }
      prev = tier.lambda;
      if (tier.count < 0) throw DataError("synthetic: tier counts must be >= 0");
      if (tier.channel) check_channel(*tier.channel, "tier " + std::to_string(t) + " channel");
    }
    for (const auto& [rel, templates] : custom_templates) {
      if (rel < 0 || rel >= relation_count) {
        throw DataError("synthetic: template for unknown relation index " + std::to_string(rel));
      }
      for (const auto& tpl : templates) validate_template(tpl);
    }
  }

  std::vector<std::string> relation_names() const {
    std::vector<std::string> names{kNoneRelation};
    for (int r = 1; r < relation_count; ++r) names.push_back("r" + std::to_string(r));
    return names;
  }

 private:
  void check_channel(const Tensor& q, const std::string& what) const {
    if (q.ndim() != 2 || q.rows() != relation_count || q.cols() != relation_count) {
      throw DataError("synthetic: " + what + " must be " + std::to_string(relation_count) + "x" +
                      std::to_string(relation_count));
    }
    for (int i = 0; i < q.rows(); ++i) {
      double s = 0.0;
      for (int j = 0; j < q.cols(); ++j) {
        if (q.at(i, j) < 0.0) throw DataError("synthetic: " + what + " has a negative entry");
        s += q.at(i, j);
      }
      if (std::abs(s - 1.0) > 1e-9) {
        throw DataError("synthetic: " + what + " row " + std::to_string(i) +
                        " sums to " + std::to_string(s) + ", expected 1");
      }
    }
  }

  static void validate_template(const std::string& tpl) {
    std::istringstream ss(tpl);
    std::vector<std::string> toks;
    std::string t;
    while (ss >> t) toks.push_back(t);
    int subj = -1, obj = -1;
    for (size_t i = 0; i < toks.size(); ++i) {
      if (toks[i] == "<subj>") subj = static_cast<int>(i);
      if (toks[i] == "<obj>") obj = static_cast<int>(i);
    }
    if (subj < 0 || obj < 0) {
      throw DataError("synthetic: template '" + tpl + "' must contain both <subj> and <obj>");
    }
    if (std::abs(subj - obj) < 2) {
      throw DataError("synthetic: template '" + tpl +
                      "' needs at least one token between <subj> and <obj>");
    }
  }
};

struct GeneratedCorpora {
  Corpus train, val, test;
};

namespace detail {

// The tier's effective channel (1-lambda) I + lambda Q as sampling weights.
inline std::vector<double> mixed_channel_row(const SyntheticSpec& spec, const TierSpec& tier,
                                             int true_relation) {
  const Tensor& q = tier.channel ? *tier.channel : spec.channel;
  std::vector<double> row(static_cast<size_t>(spec.relation_count));
  for (int j = 0; j < spec.relation_count; ++j) {
    double v = tier.lambda * q.at(true_relation, j);
    if (j == true_relation) v += 1.0 - tier.lambda;
    row[static_cast<size_t>(j)] = v;
  }
  return row;
}

struct Renderer {
  const SyntheticSpec& spec;
  int pair_pool;

  explicit Renderer(const SyntheticSpec& s) : spec(s) {
    const int total = s.train_count() + s.val_count + s.test_count;
    pair_pool = s.pairs_per_relation > 0 ? s.pairs_per_relation : std::max(4, total / 8);
  }

  std::string filler(Rng& rng) const {
    return "w" + std::to_string(rng.bounded(static_cast<size_t>(spec.vocab_size)));
  }

  CorpusRecord render(int true_relation, int tier_index, Rng& rng) const {
    CorpusRecord rec;
    const size_t pair = rng.bounded(static_cast<size_t>(pair_pool));
    rec.subj_text = "ent" + std::to_string(pair) + "s";
    rec.obj_text = "ent" + std::to_string(pair) + "o";
    const size_t tpl = rng.bounded(static_cast<size_t>(spec.templates_per_relation));

    auto custom = spec.custom_templates.find(true_relation);
    if (custom != spec.custom_templates.end() && !custom->second.empty()) {
      std::istringstream ss(custom->second[tpl % custom->second.size()]);
      std::string tok;
      while (ss >> tok) {
        if (tok == "<subj>") {
          rec.subj_pos = static_cast<int>(rec.tokens.size());
          rec.tokens.push_back(rec.subj_text);
        } else if (tok == "<obj>") {
          rec.obj_pos = static_cast<int>(rec.tokens.size());
          rec.tokens.push_back(rec.obj_text);
        } else {
          rec.tokens.push_back(tok);
        }
      }
    } else {
      const size_t pre = rng.bounded(3);
      for (size_t i = 0; i < pre; ++i) rec.tokens.push_back(filler(rng));
      rec.subj_pos = static_cast<int>(rec.tokens.size());
      rec.tokens.push_back(rec.subj_text);
      if (true_relation > 0) {
        // shared relation cue plus a template-specific token
        rec.tokens.push_back("rel" + std::to_string(true_relation) + "cue");
        rec.tokens.push_back("rel" + std::to_string(true_relation) + "t" + std::to_string(tpl));
      } else {
        rec.tokens.push_back(filler(rng));
        rec.tokens.push_back("bgt" + std::to_string(tpl));
      }
      rec.obj_pos = static_cast<int>(rec.tokens.size());
      rec.tokens.push_back(rec.obj_text);
    }
    // granularity marker makes the tier surface-visible, then trailing
    // fillers keep the last segment nonempty
    rec.tokens.push_back("grain" + std::to_string(tier_index));
    const size_t post = 1 + rng.bounded(2);
    for (size_t i = 0; i < post; ++i) rec.tokens.push_back(filler(rng));
    rec.tier = tier_index;
    return rec;
  }
};

}  // namespace detail

// Deterministic given the seed: identical specs produce byte-identical
// corpora. Validation/test labels are drawn noise-free (ds == true) while
// keeping the tier mix and its surface markers.
inline GeneratedCorpora generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const auto names = spec.relation_names();
  detail::Renderer renderer(spec);
  Rng rng(spec.rng_seed);
  GeneratedCorpora out;

  for (size_t t = 0; t < spec.tiers.size(); ++t) {
    const TierSpec& tier = spec.tiers[t];
    for (int i = 0; i < tier.count; ++i) {
      const int true_rel = static_cast<int>(rng.bounded(static_cast<size_t>(spec.relation_count)));
      CorpusRecord rec = renderer.render(true_rel, static_cast<int>(t), rng);
      const int ds = rng.categorical(detail::mixed_channel_row(spec, tier, true_rel));
      rec.ds_label = names[static_cast<size_t>(ds)];
      rec.true_label = names[static_cast<size_t>(true_rel)];
      out.train.records.push_back(std::move(rec));
    }
  }

  std::vector<double> tier_weights;
  for (const auto& tier : spec.tiers) tier_weights.push_back(static_cast<double>(tier.count));
  auto draw_clean = [&](Corpus& corpus, int count) {
    for (int i = 0; i < count; ++i) {
      const int tier_index = rng.categorical(tier_weights);
      const int true_rel = static_cast<int>(rng.bounded(static_cast<size_t>(spec.relation_count)));
      CorpusRecord rec = renderer.render(true_rel, tier_index, rng);
      rec.ds_label = names[static_cast<size_t>(true_rel)];
      rec.true_label = names[static_cast<size_t>(true_rel)];
      corpus.records.push_back(std::move(rec));
    }
  };
  draw_clean(out.val, spec.val_count);
  draw_clean(out.test, spec.test_count);

  for (Corpus* c : {&out.train, &out.val, &out.test}) {
    c->synthetic = true;
    c->relations = names;
  }
  return out;
}

// ---- config-text round trip (used by the CLI and the manifest echo) ----

inline std::string channel_to_string(const Tensor& q) {
  std::ostringstream os;
  os.precision(17);  // exact double round trip
  for (int i = 0; i < q.rows(); ++i) {
    if (i) os << " ; ";
    for (int j = 0; j < q.cols(); ++j) {
      if (j) os << " | ";
      os << q.at(i, j);
    }
  }
  return os.str();
}

inline Tensor parse_channel(const std::string& text, int C) {
  Tensor q({C, C});
  std::string row_text;
  std::istringstream rows(text);
  int i = 0;
  while (std::getline(rows, row_text, ';')) {
    if (i >= C) throw DataError("channel: more than " + std::to_string(C) + " rows");
    std::istringstream cols(row_text);
    std::string cell;
    int j = 0;
    while (std::getline(cols, cell, '|')) {
      if (j >= C) throw DataError("channel: row " + std::to_string(i) + " has too many columns");
      try {
        q.at(i, j) = std::stod(cell);
      } catch (const std::exception&) {
        throw DataError("channel: bad value '" + cell + "'");
      }
      ++j;
    }
    if (j != C) throw DataError("channel: row " + std::to_string(i) + " has " +
                                std::to_string(j) + " columns, expected " + std::to_string(C));
    ++i;
  }
  if (i != C) throw DataError("channel: got " + std::to_string(i) + " rows, expected " +
                              std::to_string(C));
  return q;
}

inline std::string to_config_text(const SyntheticSpec& spec) {
  std::ostringstream os;
  os << "[synthetic]\n";
  os << "relations = " << spec.relation_count << "\n";
  os << "templates_per_relation = " << spec.templates_per_relation << "\n";
  os << "vocab_size = " << spec.vocab_size << "\n";
  os << "val_count = " << spec.val_count << "\n";
  os << "test_count = " << spec.test_count << "\n";
  os << "pairs_per_relation = " << spec.pairs_per_relation << "\n";
  os << "seed = " << spec.rng_seed << "\n";
  os << "channel = " << channel_to_string(spec.channel) << "\n";
  for (const auto& tier : spec.tiers) {
    os << "tier = " << tier.lambda << " " << tier.count;
    if (tier.channel) os << " " << channel_to_string(*tier.channel);
    os << "\n";
  }
  for (const auto& [rel, templates] : spec.custom_templates)
    for (const auto& tpl : templates) os << "template = " << rel << ": " << tpl << "\n";
  return os.str();
}

// Writes train/val/test JSONL plus a manifest echoing the spec and seed.
inline void generate_to_dir(const SyntheticSpec& spec, const std::string& out_dir) {
  GeneratedCorpora corpora = generate_synthetic(spec);
  std::filesystem::create_directories(out_dir);
  const auto dir = std::filesystem::path(out_dir);
  save_jsonl((dir / "train.jsonl").string(), corpora.train);
  save_jsonl((dir / "val.jsonl").string(), corpora.val);
  save_jsonl((dir / "test.jsonl").string(), corpora.test);
  std::ofstream manifest(dir / "manifest.ini");
  if (!manifest) throw DataError("generate: cannot write manifest in '" + out_dir + "'");
  manifest << to_config_text(spec);
  manifest << "# records: train=" << corpora.train.records.size()
           << " val=" << corpora.val.records.size()
           << " test=" << corpora.test.records.size() << "\n";
}

}  // namespace noisere
