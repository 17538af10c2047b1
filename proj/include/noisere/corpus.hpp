#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "noisere/bags.hpp"
#include "noisere/encoder.hpp"
#include "noisere/errors.hpp"
#include "noisere/log.hpp"
#include "noisere/vocabulary.hpp"

namespace noisere {

inline constexpr const char* kNoneRelation = "none";

struct CorpusRecord {
  std::vector<std::string> tokens;
  std::string subj_text;
  int subj_pos = 0;
  std::string obj_text;
  int obj_pos = 0;
  std::string ds_label;
  int tier = 0;
  std::optional<std::string> true_label;  // synthetic corpora only
};

struct Corpus {
  std::vector<CorpusRecord> records;
  std::vector<std::string> relations;  // sorted inventory, none-relation at index 0
  bool synthetic = false;

  int relation_index(const std::string& name) const {
    for (size_t i = 0; i < relations.size(); ++i)
      if (relations[i] == name) return static_cast<int>(i);
    return -1;
  }
};

// Sorted unique labels with the none-relation forced to index 0 (inserted
// even when the data never mentions it, so that index 0 always means "no
// relation" in every downstream consumer).
inline std::vector<std::string> build_inventory(const std::vector<CorpusRecord>& records) {
  std::set<std::string> labels;
  for (const auto& r : records) {
    labels.insert(r.ds_label);
    if (r.true_label) labels.insert(*r.true_label);
  }
  labels.erase(kNoneRelation);
  std::vector<std::string> inv{kNoneRelation};
  inv.insert(inv.end(), labels.begin(), labels.end());
  return inv;
}

inline void validate_record(const CorpusRecord& r, long line_no) {
  const int L = static_cast<int>(r.tokens.size());
  if (L == 0) throw DataError("line " + std::to_string(line_no) + ": empty token list");
  if (r.subj_pos < 0 || r.subj_pos >= L || r.obj_pos < 0 || r.obj_pos >= L) {
    throw DataError("line " + std::to_string(line_no) + ": entity position out of range");
  }
  if (r.ds_label.empty()) {
    throw DataError("line " + std::to_string(line_no) + ": missing ds_label");
  }
}

// JSONL loader. One record per line: tokens (array), subj {text,pos},
// obj {text,pos}, ds_label (string), tier (int), true_label (optional
// string). Malformed lines fail with their line number; unknown fields
// only warn.
inline Corpus load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("corpus: cannot open '" + path + "'");
  Corpus corpus;
  std::string line;
  long line_no = 0;
  long with_true = 0;
  static const std::set<std::string> known = {"tokens", "subj", "obj",
                                              "ds_label", "tier", "true_label"};
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corpus: line " + std::to_string(line_no) + ": " + e.what());
    }
    CorpusRecord r;
    try {
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) {
          log_warn("corpus: line " + std::to_string(line_no) + ": unknown field '" + it.key() +
                   "'");
        }
      }
      r.tokens = j.at("tokens").get<std::vector<std::string>>();
      r.subj_text = j.at("subj").at("text").get<std::string>();
      r.subj_pos = j.at("subj").at("pos").get<int>();
      r.obj_text = j.at("obj").at("text").get<std::string>();
      r.obj_pos = j.at("obj").at("pos").get<int>();
      r.ds_label = j.at("ds_label").get<std::string>();
      if (j.contains("tier")) {
        r.tier = j.at("tier").get<int>();
      } else {
        r.tier = 0;
        log_warn("corpus: line " + std::to_string(line_no) + ": missing tier, defaulting to 0");
      }
      if (j.contains("true_label")) {
        r.true_label = j.at("true_label").get<std::string>();
        ++with_true;
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corpus: line " + std::to_string(line_no) + ": " + e.what());
    }
    validate_record(r, line_no);
    corpus.records.push_back(std::move(r));
  }
  if (corpus.records.empty()) throw DataError("corpus: no records in '" + path + "'");
  if (with_true != 0 && with_true != static_cast<long>(corpus.records.size())) {
    throw DataError("corpus: true_label present on " + std::to_string(with_true) + " of " +
                    std::to_string(corpus.records.size()) +
                    " records; must be all (synthetic) or none");
  }
  corpus.synthetic = with_true > 0;
  corpus.relations = build_inventory(corpus.records);
  return corpus;
}

inline void save_jsonl(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw DataError("corpus: cannot write '" + path + "'");
  for (const auto& r : corpus.records) {
    nlohmann::ordered_json j;
    j["tokens"] = r.tokens;
    j["subj"] = {{"text", r.subj_text}, {"pos", r.subj_pos}};
    j["obj"] = {{"text", r.obj_text}, {"pos", r.obj_pos}};
    j["ds_label"] = r.ds_label;
    j["tier"] = r.tier;
    if (r.true_label) j["true_label"] = *r.true_label;
    out << j.dump() << '\n';
  }
}

// One group of record indices per (subj surface, obj surface, ds_label)
// triple, ordered by key.
struct RecordBag {
  std::string subj, obj, ds_label;
  std::vector<int> record_indices;
};

inline std::vector<RecordBag> group_into_bags(const Corpus& corpus) {
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<int>> groups;
  for (size_t i = 0; i < corpus.records.size(); ++i) {
    const auto& r = corpus.records[i];
    groups[{r.subj_text, r.obj_text, r.ds_label}].push_back(static_cast<int>(i));
  }
  std::vector<RecordBag> bags;
  bags.reserve(groups.size());
  for (auto& [key, idx] : groups) {
    bags.push_back(RecordBag{std::get<0>(key), std::get<1>(key), std::get<2>(key),
                             std::move(idx)});
  }
  return bags;
}

// Tier-indexed partitions preserving record order within each tier.
inline std::map<int, std::vector<int>> split_by_reliability(const Corpus& corpus) {
  std::map<int, std::vector<int>> tiers;
  for (size_t i = 0; i < corpus.records.size(); ++i)
    tiers[corpus.records[i].tier].push_back(static_cast<int>(i));
  return tiers;
}

// ---- compilation into model-ready instances ----

inline Vocabulary build_vocabulary(const Corpus& corpus) {
  Vocabulary vocab;
  for (const auto& r : corpus.records)
    for (const auto& t : r.tokens) vocab.add(t);
  return vocab;
}

inline SentenceInstance compile_record(const CorpusRecord& r, const Vocabulary& vocab,
                                       const Corpus& corpus, long* unk_hits = nullptr) {
  SentenceInstance inst;
  inst.token_ids = vocab.encode(r.tokens, unk_hits);
  inst.subj_pos = r.subj_pos;
  inst.obj_pos = r.obj_pos;
  inst.ds_label = corpus.relation_index(r.ds_label);
  inst.reliability_tier = r.tier;
  if (inst.ds_label < 0) throw DataError("corpus: ds_label '" + r.ds_label + "' not in inventory");
  return inst;
}

// A corpus compiled against one vocabulary and relation inventory.
struct Dataset {
  std::vector<SentenceInstance> instances;  // aligned with corpus.records
  std::vector<int> true_labels;             // -1 when absent
  std::vector<Bag> bags;                    // one per (subj, obj, ds_label)
  std::vector<int> bag_true_labels;         // -1 when mixed or absent
  std::vector<std::string> relations;
  bool synthetic = false;
  long unk_hits = 0;
};

inline Dataset compile_dataset(const Corpus& corpus, const Vocabulary& vocab) {
  Dataset ds;
  ds.relations = corpus.relations;
  ds.synthetic = corpus.synthetic;
  ds.instances.reserve(corpus.records.size());
  for (const auto& r : corpus.records) {
    ds.instances.push_back(compile_record(r, vocab, corpus, &ds.unk_hits));
    ds.true_labels.push_back(r.true_label ? corpus.relation_index(*r.true_label) : -1);
  }
  for (const auto& rb : group_into_bags(corpus)) {
    Bag bag;
    bag.entity_pair = {rb.subj, rb.obj};
    bag.ds_label = corpus.relation_index(rb.ds_label);
    int agreed = -2;
    for (int idx : rb.record_indices) {
      bag.sentences.push_back(ds.instances[static_cast<size_t>(idx)]);
      const int tl = ds.true_labels[static_cast<size_t>(idx)];
      if (agreed == -2) agreed = tl;
      else if (agreed != tl) agreed = -1;
    }
    bag.true_label = (agreed == -2) ? -1 : agreed;
    ds.bag_true_labels.push_back(bag.true_label);
    ds.bags.push_back(std::move(bag));
  }
  return ds;
}

}  // namespace noisere
