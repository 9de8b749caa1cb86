#pragma once

// Bag-of-words tf-idf featurizer for free-text incident fields.
//
// tf is the raw term count, idf = ln((1 + n) / (1 + df)) + 1, and each
// document row is L2-normalized over the full vocabulary before the top_n
// terms (by summed tf-idf over the corpus, ties lexicographic) are kept.

#include "sd4x/dataset.hpp"

#include <cctype>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

namespace sd4x {

struct TextFeatures {
  EncodedMatrix matrix;
  std::vector<std::string> vocabulary;
};

namespace detail {

inline bool is_word_byte(unsigned char c) {
  // Bytes >= 0x80 belong to UTF-8 sequences; accented words stay whole.
  return std::isalnum(c) || c >= 0x80;
}

inline std::size_t utf8_length(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

}  // namespace detail

// Splits on non-alphanumeric boundaries and lowercases ASCII letters.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (detail::is_word_byte(c)) {
      current += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

inline TextFeatures featurize_text(const std::vector<std::string>& documents, std::size_t top_n,
                                   const std::unordered_set<std::string>& stopwords, std::size_t min_token_len,
                                   const std::string& column_prefix = "") {
  if (top_n < 1) throw InputError("featurize: top_n must be at least 1");
  if (min_token_len < 1) throw InputError("featurize: min_token_len must be at least 1");

  const std::size_t n = documents.size();
  std::vector<std::map<std::string, double>> counts(n);
  std::map<std::string, std::size_t> df;
  for (std::size_t d = 0; d < n; ++d) {
    for (auto& tok : tokenize(documents[d])) {
      if (detail::utf8_length(tok) < min_token_len || stopwords.count(tok)) continue;
      counts[d][tok] += 1.0;
    }
    for (const auto& [term, _] : counts[d]) ++df[term];
  }

  std::map<std::string, double> idf;
  for (const auto& [term, f] : df)
    idf[term] = std::log((1.0 + static_cast<double>(n)) / (1.0 + static_cast<double>(f))) + 1.0;

  std::map<std::string, double> mass;
  std::vector<std::map<std::string, double>> weights(n);
  for (std::size_t d = 0; d < n; ++d) {
    double norm2 = 0.0;
    for (const auto& [term, tf] : counts[d]) {
      const double w = tf * idf[term];
      weights[d][term] = w;
      norm2 += w * w;
    }
    if (norm2 > 0.0) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (auto& [term, w] : weights[d]) {
        w *= inv;
        mass[term] += w;
      }
    }
  }

  std::vector<std::pair<std::string, double>> ranked(mass.begin(), mass.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > top_n) ranked.resize(top_n);

  TextFeatures out;
  for (std::size_t j = 0; j < ranked.size(); ++j) {
    out.vocabulary.push_back(ranked[j].first);
    EncodedColumn col;
    col.name = column_prefix + ranked[j].first;
    col.attribute = j;
    col.kind = ColumnKind::Numeric;
    col.origin = "tfidf";
    out.matrix.columns.push_back(std::move(col));
  }
  out.matrix.values = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(ranked.size()));
  for (std::size_t d = 0; d < n; ++d)
    for (std::size_t j = 0; j < ranked.size(); ++j)
      if (auto it = weights[d].find(ranked[j].first); it != weights[d].end())
        out.matrix.values(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(j)) = it->second;
  return out;
}

}  // namespace sd4x
