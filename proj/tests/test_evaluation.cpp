#include "sd4x/evaluation.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace sd4x;

namespace {

const std::string kData = SD4X_TEST_DATA;

std::vector<double> curve_of(double (*f)(double), int n) {
  std::vector<double> y;
  for (int k = 1; k <= n; ++k) y.push_back(f(k));
  return y;
}

std::vector<double> xs(std::size_t n) {
  std::vector<double> x;
  for (std::size_t k = 1; k <= n; ++k) x.push_back(static_cast<double>(k));
  return x;
}

NeighborhoodSet random_ns(std::mt19937_64& rng, std::size_t n, std::size_t k, std::size_t m, std::size_t p) {
  std::normal_distribution<double> g;
  NeighborhoodSet ns;
  for (std::size_t o = 0; o < n; ++o) {
    Matrix S(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m));
    for (Eigen::Index i = 0; i < S.size(); ++i) S.data()[i] = g(rng);
    Matrix logits(S.rows(), static_cast<Eigen::Index>(p));
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = g(rng);
    ns.samples.push_back(S);
    ns.outputs.push_back(softmax_rows(logits));
  }
  return ns;
}

}  // namespace

TEST(F1, HandExamples) {
  EXPECT_NEAR(weighted_f1({0, 0, 1}, {0, 1, 1}, 2), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(weighted_f1({0, 1, 0, 1}, {0, 0, 0, 0}, 2), 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(weighted_f1({2, 1, 0}, {2, 1, 0}, 3), 1.0);
  EXPECT_THROW(weighted_f1({0}, {0, 1}, 2), InputError);
}

TEST(F1, SurrogateEqualsBlackBox) {
  std::mt19937_64 rng(1);
  const auto ns = random_ns(rng, 30, 1, 2, 4);
  const Matrix bb = object_outputs(ns);
  for (std::size_t k = 1; k <= 4; ++k) EXPECT_DOUBLE_EQ(topk_f1(bb, bb, k), 1.0);
  EXPECT_THROW(topk_f1(bb, bb, 5), InputError);
}

TEST(F1, RankTiesAndNoClipping) {
  Matrix P(2, 3);
  P << 0.2, 0.4, 0.4, 1.7, -0.5, 0.1;
  EXPECT_EQ(rank_k_classes(P, 1), (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(rank_k_classes(P, 2), (std::vector<std::size_t>{2, 2}));
  EXPECT_EQ(rank_k_classes(P, 3), (std::vector<std::size_t>{0, 1}));
}

TEST(F1, MatchesConfusionMatrixOracle) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::size_t> n_dist(1, 400), p_dist(2, 10);
  std::normal_distribution<double> g;
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = n_dist(rng), p = p_dist(rng);
    Matrix S(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p)), B = S;
    for (Eigen::Index i = 0; i < S.size(); ++i) {
      S.data()[i] = std::round(3 * g(rng)) / 3;  // coarse values force rank ties
      B.data()[i] = g(rng);
    }
    for (std::size_t k = 1; k <= std::min<std::size_t>(p, 3); ++k) {
      std::vector<std::size_t> truth, pred;
      for (std::size_t r = 0; r < n; ++r) {
        const auto rr = static_cast<Eigen::Index>(r);
        truth.push_back(oracle::rank_k(std::vector<double>(B.row(rr).begin(), B.row(rr).end()), k));
        pred.push_back(oracle::rank_k(std::vector<double>(S.row(rr).begin(), S.row(rr).end()), k));
      }
      EXPECT_NEAR(topk_f1(S, B, k), oracle::weighted_f1(truth, pred, p), 1e-12);
    }
  }
}

TEST(Mse, ZeroModelsAgainstUniform) {
  NeighborhoodSet ns;
  const std::size_t k1 = 6, p = 3;
  for (int o = 0; o < 5; ++o) {
    ns.samples.push_back(Matrix::Random(k1, 2));
    ns.outputs.push_back(Matrix::Constant(k1, p, 1.0 / p));
  }
  Partition part;
  Subgroup s;
  s.members = {0, 1, 2, 3, 4};
  s.model = WhiteBoxModel::zero(p, 2);
  part.subgroups.push_back(s);
  EXPECT_NEAR(mse(part, ns), static_cast<double>(k1) / p, 1e-12);
  EXPECT_NEAR(mse(s.model, ns), static_cast<double>(k1) / p, 1e-12);
  EXPECT_NEAR(normalized_mse(mse(part, ns), ns), 1.0 / (p * p), 1e-12);
  EXPECT_THROW(mse(s.model, NeighborhoodSet{}), InputError);
}

TEST(Mse, TwoPathAgreementAndBaselineOrder) {
  std::mt19937_64 rng(3);
  const auto ns = random_ns(rng, 12, 8, 3, 3);
  Partition part;
  for (std::size_t g = 0; g < 3; ++g) {
    Subgroup s;
    for (std::size_t o = 4 * g; o < 4 * g + 4; ++o) s.members.push_back(o);
    s.model = solve_ridge(pooled_stats(s.members, ns), {0.0, true, false});
    part.subgroups.push_back(s);
  }
  // Independent path: score every sample explicitly against its subgroup model.
  double direct = 0.0;
  for (const auto& s : part.subgroups)
    for (auto o : s.members) {
      for (Eigen::Index r = 0; r < ns.samples[o].rows(); ++r)
        for (Eigen::Index c = 0; c < 3; ++c) {
          double pred = s.model.intercepts[c];
          for (Eigen::Index j = 0; j < 3; ++j) pred += s.model.coefficients(c, j) * ns.samples[o](r, j);
          direct += (ns.outputs[o](r, c) - pred) * (ns.outputs[o](r, c) - pred);
        }
    }
  EXPECT_NEAR(mse(part, ns), direct / 12.0, 1e-10);

  const RidgeOptions zero{0.0, true, false};
  const double global = mse(fit_global_wb(ns, zero), ns);
  const auto local = fit_local_wb(ns, zero, 2);
  EXPECT_GE(global + 1e-12, mse(part, ns));
  EXPECT_GE(mse(part, ns) + 1e-12, local.mse);
  double per_object = 0.0;
  for (std::size_t o = 0; o < ns.size(); ++o) per_object += sse(local.models[o], ns.samples[o], ns.outputs[o]);
  EXPECT_NEAR(local.mse, per_object / 12.0, 1e-12);
}

TEST(Baselines, SingleObjectLocalEqualsGlobal) {
  std::mt19937_64 rng(4);
  const auto ns = random_ns(rng, 1, 10, 2, 2);
  const RidgeOptions opt{1.0, true, false};
  const auto global = fit_global_wb(ns, opt);
  const auto local = fit_local_wb(ns, opt);
  EXPECT_TRUE(global.coefficients.isApprox(local.models[0].coefficients));
  EXPECT_NEAR(mse(global, ns), local.mse, 1e-12);
}

TEST(Baselines, GlobalEqualsSplitterRoot) {
  const auto ds = load_dataset(kData + "/toy.csv", kData + "/toy_schema.json");
  const auto em = encode(ds);
  auto ns = generate_neighborhoods(em, {10.0, 20, 3});
  LinearBlackBox bb({"TEC", "OT"}, {}, Matrix::Random(2, em.cols()), Vector::Zero(2));
  label_neighborhoods(ns, bb);
  SplitterConfig cfg;
  cfg.K = 1;
  const auto part = run(ds, em, ns, cfg);
  const auto global = fit_global_wb(ns, {1.0, true, false});
  EXPECT_EQ(global.coefficients, part.subgroups[0].model.coefficients);
  EXPECT_EQ(global.intercepts, part.subgroups[0].model.intercepts);
}

TEST(Elbow, KneedleReferenceValues) {
  // Reference values from the kneed package (convex, decreasing, S = 1).
  EXPECT_EQ(elbow(xs(10), curve_of([](double k) { return 100.0 / k; }, 10)), 3.0);
  EXPECT_EQ(elbow(xs(10), {100, 40, 10, 9, 8.5, 8, 7.6, 7.3, 7, 6.8}), 3.0);
  EXPECT_EQ(elbow(xs(10), {100, 20, 5, 4.9, 4.8, 4.7, 4.6, 4.5, 4.4, 4.3}), 3.0);
  EXPECT_EQ(elbow(xs(20), curve_of([](double k) { return std::exp(-0.5 * k); }, 20)), 6.0);
  EXPECT_EQ(elbow(xs(15), curve_of([](double k) { return 1.0 / (k * k); }, 15)), 3.0);
}

TEST(Elbow, HandEvaluationOfReciprocalCurve) {
  // Difference curve d(K) = (1 - y_n) - x_n with y_n = (100/K - 10)/90, x_n = (K-1)/9.
  std::vector<double> d;
  for (int k = 1; k <= 10; ++k) d.push_back((1.0 - (100.0 / k - 10.0) / 90.0) - (k - 1) / 9.0);
  const auto peak = std::max_element(d.begin(), d.end()) - d.begin() + 1;
  EXPECT_EQ(peak, 3);
  EXPECT_EQ(elbow(xs(10), curve_of([](double k) { return 100.0 / k; }, 10)), static_cast<double>(peak));
}

TEST(Elbow, StraightLineAndErrors) {
  EXPECT_FALSE(elbow(xs(10), curve_of([](double k) { return 10.0 - k; }, 10)));
  EXPECT_THROW(elbow(xs(2), {2, 1}), InputError);
  EXPECT_THROW(elbow({1, 1, 2}, {3, 2, 1}), InputError);
}

TEST(Elbow, ConvexCurvesNeverPickEndpoints) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  for (int t = 0; t < 50; ++t) {
    const double a = u(rng), b = u(rng);
    std::vector<double> y;
    for (int k = 1; k <= 12; ++k) y.push_back(std::exp(-a * k) + b / (k * k));
    const auto knee = elbow(xs(12), y);
    if (!knee) continue;
    EXPECT_GT(*knee, 1.0);
    EXPECT_LT(*knee, 12.0);
  }
}

TEST(Elbow, FromCurvePoints) {
  std::vector<CurvePoint> curve;
  for (std::size_t k = 1; k <= 10; ++k) curve.push_back({k, 100.0 / static_cast<double>(k), true});
  EXPECT_EQ(elbow(curve), std::optional<std::size_t>(3));
}

TEST(Diversity, CosineBasics) {
  WhiteBoxModel a = WhiteBoxModel::zero(1, 2), b = a, c = a, z = a;
  a.coefficients << 1, 0;
  b.coefficients << 0, 1;
  c.coefficients << 2, 0;
  auto rep = diversity({&a, &b, &c, &z}, 0, 0.4);
  EXPECT_DOUBLE_EQ(rep.cosine(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(rep.cosine(0, 2), 1.0);
  EXPECT_TRUE(std::isnan(rep.cosine(0, 3)));
  EXPECT_EQ(rep.pairs, 3u);
  EXPECT_EQ(rep.undefined, 3u);
  EXPECT_EQ(rep.below, 2u);
  EXPECT_NEAR(rep.fraction_below, 2.0 / 3.0, 1e-15);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_EQ(rep.cosine(i, i), 1.0);
  EXPECT_THROW(diversity({&a}, 0, 0.4), InputError);
}

TEST(Diversity, ConcatenatedClassesAndSymmetry) {
  std::mt19937_64 rng(5);
  std::vector<WhiteBoxModel> models;
  for (int i = 0; i < 5; ++i) {
    WhiteBoxModel m = WhiteBoxModel::zero(3, 4);
    m.coefficients = Matrix::Random(3, 4);
    models.push_back(m);
  }
  std::vector<const WhiteBoxModel*> ptrs;
  for (const auto& m : models) ptrs.push_back(&m);
  const auto rep = diversity(ptrs, std::nullopt, 0.4, {3, 1, 4, 1, 5});
  EXPECT_TRUE(rep.cosine.isApprox(rep.cosine.transpose()));
  const Matrix t0 = models[0].coefficients.transpose(), t1 = models[1].coefficients.transpose();
  const Eigen::Map<const Vector> u(t0.data(), 12), v(t1.data(), 12);
  EXPECT_NEAR(rep.cosine(0, 1), u.dot(v) / (u.norm() * v.norm()), 1e-12);
  EXPECT_EQ(rep.size_summary.median, 3.0);
  EXPECT_EQ(rep.size_summary.min, 1.0);
  EXPECT_EQ(rep.size_summary.max, 5.0);
}

TEST(Report, SingleSubgroupAndSections) {
  const auto ds = load_dataset(kData + "/toy.csv", kData + "/toy_schema.json");
  const auto em = encode(ds);
  auto ns = generate_neighborhoods(em, {10.0, 30, 5});
  Matrix w = Matrix::Zero(2, em.cols());
  w(0, 5) = 3.0;  // weekend pushes towards TEC
  LinearBlackBox bb({"TEC", "OT"}, {}, w, Vector::Zero(2));
  label_neighborhoods(ns, bb);

  for (std::size_t K : {1u, 3u}) {
    SplitterConfig cfg;
    cfg.K = K;
    const auto part = run(ds, em, ns, cfg);
    ReportInputs in;
    in.partition = &part;
    in.data = &ds;
    in.encoded = &em;
    in.neighborhoods = &ns;
    in.fidelity.push_back(fidelity("splitsd4x", mse(part, ns), surrogate_outputs(part, ns), ns));
    in.curve = loss_curve(part, K);
    const auto rep = make_report(in);
    std::size_t sections = 0;
    for (std::size_t pos = rep.markdown.find("\n## Subgroup "); pos != std::string::npos;
         pos = rep.markdown.find("\n## Subgroup ", pos + 1))
      ++sections;
    EXPECT_EQ(sections, part.subgroups.size());
    ASSERT_EQ(rep.document["subgroups"].size(), part.subgroups.size());
    if (K == 1) {
      EXPECT_EQ(rep.document["subgroups"][0]["pattern"], "⊤");
      EXPECT_EQ(rep.document["subgroups"][0]["size"], 7);
    }
  }
}
