#pragma once

// Multi-output ridge surrogates. The intercept is unpenalized and a single
// factorization of the (m'+1) normal equations serves all p outputs.

#include "sd4x/neighborhood.hpp"

namespace sd4x {

struct RidgeOptions {
  double lambda = 1.0;
  bool fit_intercept = true;
  // Penalize coefficients on the standardized scale (lambda * var_j per
  // column); coefficients are still reported on the original scale.
  bool standardize = false;
};

// Throw on a singular system, or fall back to the minimum-norm least-squares
// solution (still a global optimum of the unpenalized SSE).
enum class SingularPolicy { Throw, MinimumNorm };

struct WhiteBoxModel {
  Matrix coefficients;  // p x m'
  Vector intercepts;    // p
  double lambda = 0.0;
  std::string fitted_on;
  std::size_t samples = 0;

  Eigen::Index width() const { return coefficients.cols(); }
  Eigen::Index classes() const { return coefficients.rows(); }

  static WhiteBoxModel zero(Eigen::Index p, Eigen::Index m) {
    return {Matrix::Zero(p, m), Vector::Zero(p), 0.0, "", 0};
  }
};

// Sufficient statistics of the augmented design [X 1] against targets Y;
// index m' of gram/cross is the intercept.
struct RidgeStats {
  Matrix gram;
  Matrix cross;
  double yy = 0.0;
  std::size_t count = 0;

  static RidgeStats zeros(Eigen::Index m, Eigen::Index p) {
    return {Matrix::Zero(m + 1, m + 1), Matrix::Zero(m + 1, p), 0.0, 0};
  }

  static RidgeStats of(const Matrix& X, const Matrix& Y) {
    if (X.rows() != Y.rows()) throw InputError("design has " + std::to_string(X.rows()) + " rows, targets " +
                                               std::to_string(Y.rows()));
    Matrix A(X.rows(), X.cols() + 1);
    A.leftCols(X.cols()) = X;
    A.col(X.cols()).setOnes();
    RidgeStats s;
    s.gram = A.transpose() * A;
    s.cross = A.transpose() * Y;
    s.yy = Y.squaredNorm();
    s.count = static_cast<std::size_t>(X.rows());
    return s;
  }

  RidgeStats& operator+=(const RidgeStats& o) {
    gram += o.gram;
    cross += o.cross;
    yy += o.yy;
    count += o.count;
    return *this;
  }

  RidgeStats& operator-=(const RidgeStats& o) {
    gram -= o.gram;
    cross -= o.cross;
    yy -= o.yy;
    count -= o.count;
    return *this;
  }

  Eigen::Index width() const { return gram.rows() - 1; }
};

inline RidgeStats operator-(RidgeStats a, const RidgeStats& b) { return a -= b; }

inline WhiteBoxModel solve_ridge(const RidgeStats& stats, const RidgeOptions& opt,
                                 SingularPolicy policy = SingularPolicy::Throw) {
  if (!(opt.lambda >= 0.0)) throw InputError("lambda must be >= 0");
  if (stats.count == 0) throw InputError("cannot fit a surrogate on zero samples");
  const Eigen::Index m = stats.width();
  const Eigen::Index p = stats.cross.cols();
  const Eigen::Index d = opt.fit_intercept ? m + 1 : m;

  Matrix A = stats.gram.topLeftCorner(d, d);
  const Matrix B = stats.cross.topRows(d);
  const double n = static_cast<double>(stats.count);
  for (Eigen::Index j = 0; j < m; ++j) {
    double scale = 1.0;
    if (opt.standardize) {
      const double mean = stats.gram(j, m) / n;
      const double var = stats.gram(j, j) / n - mean * mean;
      if (var > 0.0) scale = var;
    }
    A(j, j) += opt.lambda * scale;
  }

  Matrix beta;
  bool solved = false;
  if (opt.lambda > 0.0) {
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() == Eigen::Success) {
      beta = llt.solve(B);
      solved = true;
    }
  }
  if (!solved) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A);
    if (cod.rank() < d && policy == SingularPolicy::Throw)
      throw SingularSystemError("normal equations are singular (rank " + std::to_string(cod.rank()) + " of " +
                                std::to_string(d) + "); use lambda > 0");
    beta = cod.solve(B);
  }

  WhiteBoxModel model;
  model.coefficients = beta.topRows(m).transpose();
  model.intercepts = opt.fit_intercept ? Vector(beta.row(m).transpose()) : Vector::Zero(p);
  model.lambda = opt.lambda;
  model.samples = stats.count;
  return model;
}

// SSE of `model` on the samples summarized by `stats`, without revisiting
// them. Loses precision when the SSE is tiny relative to stats.yy.
inline double stats_loss(const RidgeStats& stats, const WhiteBoxModel& model) {
  const Eigen::Index m = stats.width();
  Matrix beta(m + 1, stats.cross.cols());
  beta.topRows(m) = model.coefficients.transpose();
  beta.row(m) = model.intercepts.transpose();
  const double quad = (beta.transpose() * stats.gram * beta).trace();
  const double lin = beta.cwiseProduct(stats.cross).sum();
  return std::max(0.0, stats.yy - 2.0 * lin + quad);
}

inline WhiteBoxModel fit_ridge(const Matrix& X, const Matrix& Y, const RidgeOptions& opt,
                               SingularPolicy policy = SingularPolicy::Throw) {
  if (X.rows() < 1) throw InputError("fit_ridge needs at least one sample");
  return solve_ridge(RidgeStats::of(X, Y), opt, policy);
}

inline WhiteBoxModel fit_ridge(const Matrix& X, const Matrix& Y, double lambda) {
  return fit_ridge(X, Y, RidgeOptions{lambda, true, false});
}

// Affine map, deliberately not clipped to [0, 1].
inline Matrix predict(const WhiteBoxModel& model, const Matrix& X) {
  if (X.cols() != model.width()) throw WidthMismatch(model.width(), X.cols());
  Matrix out = X * model.coefficients.transpose();
  out.rowwise() += model.intercepts.transpose();
  return out;
}

inline double sse(const WhiteBoxModel& model, const Matrix& X, const Matrix& Y) {
  return (Y - predict(model, X)).squaredNorm();
}

// Sum over members o, neighbors o' in N(o) and classes i of (b(o')_i - w(o')_i)^2.
inline double subgroup_loss(std::span<const std::size_t> members, const NeighborhoodSet& ns,
                            const WhiteBoxModel& model) {
  double total = 0.0;
  for (auto o : members) {
    if (o >= ns.outputs.size() || ns.outputs[o].rows() != ns.samples[o].rows())
      throw InputError("no cached black-box outputs for object " + std::to_string(o));
    total += sse(model, ns.samples[o], ns.outputs[o]);
  }
  return total;
}

inline RidgeStats pooled_stats(std::span<const std::size_t> members, const NeighborhoodSet& ns) {
  auto stats = RidgeStats::zeros(ns.width(), ns.classes());
  for (auto o : members) stats += RidgeStats::of(ns.samples[o], ns.outputs[o]);
  return stats;
}

// ---------------------------------------------------------------- importance

struct FeatureImportance {
  std::size_t column = 0;
  double coefficient = 0.0;
  double ratio = 0.0;  // |coef| / sum |coef| of the class row
};

struct ImportanceReport {
  std::vector<FeatureImportance> features;  // ratio descending, then column
  std::string note;                         // set when the ratio is undefined
};

inline ImportanceReport feature_importance(const WhiteBoxModel& model, std::size_t class_index) {
  if (static_cast<Eigen::Index>(class_index) >= model.classes())
    throw InputError("class index " + std::to_string(class_index) + " out of range");
  const RowVector row = model.coefficients.row(static_cast<Eigen::Index>(class_index));
  const double total = row.cwiseAbs().sum();
  ImportanceReport report;
  if (total == 0.0) {
    report.note = "all coefficients are zero; importance ratios are undefined";
    return report;
  }
  for (Eigen::Index j = 0; j < row.size(); ++j)
    if (row[j] != 0.0) report.features.push_back({static_cast<std::size_t>(j), row[j], std::abs(row[j]) / total});
  std::stable_sort(report.features.begin(), report.features.end(),
                   [](const auto& a, const auto& b) { return a.ratio > b.ratio; });
  return report;
}

// ---------------------------------------------------------------- JSON

inline json model_to_json(const WhiteBoxModel& model, const std::vector<std::string>& columns,
                          const std::vector<std::string>& classes) {
  json coef = json::array();
  for (Eigen::Index r = 0; r < model.coefficients.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < model.coefficients.cols(); ++c) row.push_back(model.coefficients(r, c));
    coef.push_back(std::move(row));
  }
  json icpt = json::array();
  for (Eigen::Index r = 0; r < model.intercepts.size(); ++r) icpt.push_back(model.intercepts[r]);
  return json{{"columns", columns}, {"classes", classes}, {"coefficients", coef},
              {"intercepts", icpt}, {"lambda", model.lambda}};
}

inline WhiteBoxModel model_from_json(const json& doc) {
  WhiteBoxModel model;
  try {
    model.coefficients = matrix_from_json(doc.at("coefficients"), "coefficients");
    model.intercepts = vector_from_json(doc.at("intercepts"), "intercepts");
    model.lambda = doc.value("lambda", 0.0);
  } catch (const json::exception& e) {
    throw InputError(std::string("surrogate model: ") + e.what());
  }
  if (model.intercepts.size() != model.coefficients.rows())
    throw InputError("surrogate model: intercepts do not match coefficient rows");
  return model;
}

}  // namespace sd4x
