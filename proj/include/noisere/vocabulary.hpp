#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "noisere/errors.hpp"

namespace noisere {

// Token-to-index map. Index 0 is the unknown token, index 1 the padding
// token; neither is ever remapped.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kPad = 1;

  Vocabulary() {
    tokens_ = {"<unk>", "<pad>"};
    index_ = {{"<unk>", kUnk}, {"<pad>", kPad}};
  }

  int add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    index_.emplace(token, id);
    return id;
  }

  int lookup(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return index_.count(token) != 0; }

  int size() const { return static_cast<int>(tokens_.size()); }

  const std::string& token(int id) const {
    if (id < 0 || id >= size()) throw UsageError("vocabulary: id out of range");
    return tokens_[static_cast<size_t>(id)];
  }

  std::vector<int> encode(const std::vector<std::string>& tokens, long* unk_hits = nullptr) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) {
      const int id = lookup(t);
      if (id == kUnk && unk_hits) ++*unk_hits;
      ids.push_back(id);
    }
    return ids;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace noisere
