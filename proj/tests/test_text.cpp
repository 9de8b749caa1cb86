#include "sd4x/text.hpp"

#include <gtest/gtest.h>

using namespace sd4x;

namespace {

double cell(const TextFeatures& f, Eigen::Index row, const std::string& term) {
  for (std::size_t j = 0; j < f.vocabulary.size(); ++j)
    if (f.vocabulary[j] == term) return f.matrix.values(row, static_cast<Eigen::Index>(j));
  ADD_FAILURE() << "term not in vocabulary: " << term;
  return 0.0;
}

}  // namespace

TEST(Tokenize, SplitsAndLowercases) {
  const auto t = tokenize("Disk FULL on /var, error-404!");
  const std::vector<std::string> want{"disk", "full", "on", "var", "error", "404"};
  EXPECT_EQ(t, want);
}

TEST(TfIdf, TwoDocuments) {
  const auto f = featurize_text({"disk full", "swap full"}, 3, {}, 1);
  ASSERT_EQ(f.vocabulary.size(), 3u);
  // "full" is in both documents and carries the most mass; disk/swap tie and sort lexicographically.
  EXPECT_EQ(f.vocabulary[0], "full");
  EXPECT_EQ(f.vocabulary[1], "disk");
  EXPECT_EQ(f.vocabulary[2], "swap");
  EXPECT_DOUBLE_EQ(cell(f, 0, "full"), cell(f, 1, "full"));
  EXPECT_GT(cell(f, 0, "disk"), 0.0);
  EXPECT_EQ(cell(f, 1, "disk"), 0.0);

  // Independent hand computation: idf(full) = 1, idf(disk) = ln(3/2) + 1.
  const double idf_rare = std::log(1.5) + 1.0;
  const double norm = std::sqrt(1.0 + idf_rare * idf_rare);
  EXPECT_NEAR(cell(f, 0, "full"), 1.0 / norm, 1e-12);
  EXPECT_NEAR(cell(f, 0, "disk"), idf_rare / norm, 1e-12);
}

TEST(TfIdf, RepeatedDocumentGivesIdenticalRows) {
  const auto f = featurize_text({"java heap overflow heap", "java heap overflow heap"}, 10, {}, 1);
  EXPECT_TRUE(f.matrix.values.row(0).isApprox(f.matrix.values.row(1)));
  EXPECT_NEAR(f.matrix.values.row(0).norm(), 1.0, 1e-12);
}

TEST(TfIdf, StopwordOnlyDocumentIsZero) {
  const auto f = featurize_text({"the and of", "disk full"}, 10, {"the", "and", "of"}, 1);
  EXPECT_EQ(f.matrix.values.row(0).squaredNorm(), 0.0);
  EXPECT_GT(f.matrix.values.row(1).squaredNorm(), 0.0);
}

TEST(TfIdf, MinLengthAndNumbers) {
  const auto f = featurize_text({"db 404 error", "db 500 error"}, 10, {}, 3);
  for (const auto& t : f.vocabulary) EXPECT_GE(t.size(), 3u);
  EXPECT_NE(std::find(f.vocabulary.begin(), f.vocabulary.end(), "404"), f.vocabulary.end());
  EXPECT_EQ(std::find(f.vocabulary.begin(), f.vocabulary.end(), "db"), f.vocabulary.end());
}

TEST(TfIdf, UbiquitousTermHasMinimalIdfAndValuesNonNegative) {
  const auto f = featurize_text({"alpha beta", "alpha gamma", "alpha delta beta"}, 10, {}, 1);
  EXPECT_GE(f.matrix.values.minCoeff(), 0.0);
  // In row 2, tf = 1 for every term, so the ubiquitous term has the smallest value.
  EXPECT_LT(cell(f, 2, "alpha"), cell(f, 2, "beta"));
  EXPECT_LT(cell(f, 2, "alpha"), cell(f, 2, "delta"));
}

TEST(TfIdf, TopNTruncatesAndPrefixes) {
  const auto f = featurize_text({"a b c d", "a b", "a"}, 2, {}, 1, "summary_");
  ASSERT_EQ(f.vocabulary.size(), 2u);
  EXPECT_EQ(f.matrix.columns[0].name, "summary_" + f.vocabulary[0]);
  EXPECT_EQ(f.matrix.columns[0].origin, "tfidf");
}

TEST(TfIdf, EmptyCorpusAndBadArguments) {
  const auto f = featurize_text({}, 5, {}, 1);
  EXPECT_TRUE(f.vocabulary.empty());
  EXPECT_EQ(f.matrix.values.size(), 0);
  EXPECT_THROW(featurize_text({"x"}, 0, {}, 1), InputError);
}
