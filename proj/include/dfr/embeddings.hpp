#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dfr/common.hpp"

namespace dfr {

// Word-embedding table with cosine similarity. Loads the standard text
// format ("word v1 v2 ..."; an optional "count dim" header line is
// skipped). The hashed variant derives a deterministic pseudo-random
// vector per word, for runs where no embedding file is configured.
class Embeddings {
 public:
  static Embeddings from_file(const std::string& path) {
    Embeddings e;
    bool first = true;
    for (const std::string& line : read_lines(path)) {
      if (line.empty()) continue;
      std::vector<std::string> parts = split(normalize_ws(line), ' ');
      if (first) {
        first = false;
        if (parts.size() == 2 && is_number(parts[0]) && is_number(parts[1]))
          continue;  // header line
      }
      if (parts.size() < 2) continue;
      std::vector<float> vec;
      vec.reserve(parts.size() - 1);
      for (std::size_t i = 1; i < parts.size(); ++i)
        vec.push_back(std::stof(parts[i]));
      e.table_[lowercase(parts[0])] = std::move(vec);
    }
    return e;
  }

  static Embeddings hashed(int dim, std::uint64_t seed) {
    Embeddings e;
    e.hash_dim_ = dim;
    e.hash_seed_ = seed;
    return e;
  }

  std::optional<std::vector<float>> vector_for(const std::string& word) const {
    std::string key = lowercase(word);
    auto it = table_.find(key);
    if (it != table_.end()) return it->second;
    if (hash_dim_ > 0) {
      Rng rng(hash_seed_ ^ fnv1a64(key));
      std::normal_distribution<float> dist(0.0f, 1.0f);
      std::vector<float> vec(static_cast<std::size_t>(hash_dim_));
      for (float& v : vec) v = dist(rng);
      return vec;
    }
    return std::nullopt;
  }

  bool contains(const std::string& word) const {
    return hash_dim_ > 0 || table_.count(lowercase(word)) > 0;
  }

  static double cosine(const std::vector<float>& a,
                       const std::vector<float>& b) {
    double dot = 0, na = 0, nb = 0;
    std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
      dot += static_cast<double>(a[i]) * b[i];
      na += static_cast<double>(a[i]) * a[i];
      nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
  }

  // Similarity between two word sequences: maximum word-level cosine.
  // Pairs with no in-vocabulary word score 0; `oov` reports that case.
  double span_similarity(const std::vector<std::string>& a,
                         const std::vector<std::string>& b,
                         bool* oov = nullptr) const {
    bool any = false;
    double best = -1.0;
    for (const auto& wa : a) {
      auto va = vector_for(wa);
      if (!va) continue;
      for (const auto& wb : b) {
        auto vb = vector_for(wb);
        if (!vb) continue;
        any = true;
        best = std::max(best, cosine(*va, *vb));
      }
    }
    if (oov) *oov = !any;
    return any ? best : 0.0;
  }

 private:
  static bool is_number(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
      if (c < '0' || c > '9') return false;
    return true;
  }

  std::unordered_map<std::string, std::vector<float>> table_;
  int hash_dim_ = 0;
  std::uint64_t hash_seed_ = 0;
};

}  // namespace dfr
