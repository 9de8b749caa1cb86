#include "sd4x/synthetic.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace sd4x;

namespace {

json two_regime_spec() {
  return json::parse(R"({
    "n": 200, "numeric": 2, "boolean": 1, "classes": ["c0", "c1"],
    "regimes": [
      {"name": "low",  "when": [{"attribute": "x1", "op": "le", "value": 0.5}], "weights": {"c0": {"x1": 10}}},
      {"name": "high", "when": [{"attribute": "x1", "op": "gt", "value": 0.5}], "weights": {"c0": {"x1": -10}}}
    ]})");
}

std::string dump(const Dataset& ds) {
  std::ostringstream out;
  write_dataset(out, ds);
  return out.str();
}

}  // namespace

TEST(Synthetic, SingleZeroRegimeIsUniform) {
  const auto spec = synth_spec_from_json(json::parse(R"({"n": 20, "numeric": 3, "p": 4, "regimes": [{}]})"));
  const auto data = generate_synthetic(spec, 1);
  const Matrix P = data.oracle->predict_batch(encode(data.dataset).values);
  EXPECT_TRUE(P.isApproxToConstant(0.25, 1e-15));
}

TEST(Synthetic, TwoRegimesByHand) {
  const auto spec = synth_spec_from_json(two_regime_spec());
  const auto data = generate_synthetic(spec, 5);
  Matrix centers(2, 3);
  centers << 0.25, 0.5, 0.0, 0.75, 0.5, 1.0;
  const Matrix P = data.oracle->predict_batch(centers);
  // Logit of c0 is 10 * 0.25 = 2.5 on the left and -10 * 0.75 = -7.5 on the right.
  EXPECT_NEAR(P(0, 0), 1.0 / (1.0 + std::exp(-2.5)), 1e-12);
  EXPECT_NEAR(P(1, 0), 1.0 / (1.0 + std::exp(7.5)), 1e-12);
  EXPECT_GT(P(0, 0), 0.9);
  EXPECT_LT(P(1, 0), 0.001);
  for (std::size_t i = 0; i < data.dataset.size(); ++i) {
    const double x1 = std::get<double>(data.dataset.rows[i][0]);
    EXPECT_EQ(data.regimes[i], x1 <= 0.5 ? 0u : 1u);
  }
}

TEST(Synthetic, DeterministicGivenSeed) {
  const auto spec = synth_spec_from_json(two_regime_spec());
  const auto a = generate_synthetic(spec, 42);
  const auto b = generate_synthetic(spec, 42);
  const auto c = generate_synthetic(spec, 43);
  EXPECT_EQ(dump(a.dataset), dump(b.dataset));
  EXPECT_EQ(a.regimes, b.regimes);
  EXPECT_NE(dump(a.dataset), dump(c.dataset));
}

TEST(Synthetic, RejectsOverlapAndGaps) {
  auto overlap = two_regime_spec();
  overlap["regimes"][1]["when"][0]["value"] = 0.4;
  overlap["regimes"][1]["when"][0]["op"] = "gt";
  EXPECT_THROW(synth_spec_from_json(overlap), InputError);

  auto gap = two_regime_spec();
  gap["regimes"][1]["when"][0]["value"] = 0.6;
  EXPECT_THROW(synth_spec_from_json(gap), InputError);

  auto missing = two_regime_spec();
  missing["regimes"].erase(1);
  EXPECT_THROW(synth_spec_from_json(missing), InputError);

  auto bad_attr = two_regime_spec();
  bad_attr["regimes"][0]["when"][0]["attribute"] = "nope";
  EXPECT_THROW(synth_spec_from_json(bad_attr), InputError);
}

TEST(Synthetic, MultiAttributeRegimesPartition) {
  const auto spec = synth_spec_from_json(json::parse(R"({
    "n": 50, "numeric": 2, "p": 2,
    "regimes": [
      {"when": [{"attribute": "x1", "op": "le", "value": 0.5}]},
      {"when": [{"attribute": "x1", "op": "gt", "value": 0.5}, {"attribute": "x2", "op": "le", "value": 0.3}]},
      {"when": [{"attribute": "x1", "op": "gt", "value": 0.5}, {"attribute": "x2", "op": "gt", "value": 0.3}]}
    ]})"));
  EXPECT_EQ(spec.regimes.size(), 3u);
}

TEST(Synthetic, OracleDumpRoundTrips) {
  const auto spec = synth_spec_from_json(two_regime_spec());
  const auto data = generate_synthetic(spec, 9);
  const auto back = synthetic_oracle_from_json(data.oracle->to_json());
  const Matrix X = encode(data.dataset).values;
  EXPECT_EQ(back.predict_batch(X), data.oracle->predict_batch(X));
  EXPECT_EQ(back.fingerprint(), data.oracle->fingerprint());
}

TEST(Synthetic, NumericRangesRespected) {
  const auto spec = synth_spec_from_json(json::parse(R"({
    "n": 100, "numeric": [{"name": "hr", "lo": 0, "hi": 24}], "boolean": ["weekend"], "p": 2,
    "regimes": [{}]})"));
  const auto data = generate_synthetic(spec, 3);
  for (const auto& row : data.dataset.rows) {
    EXPECT_GE(std::get<double>(row[0]), 0.0);
    EXPECT_LT(std::get<double>(row[0]), 24.0);
  }
  EXPECT_EQ(data.dataset.schema[1].kind.kind, Kind::Boolean);
}
