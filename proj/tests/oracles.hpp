#pragma once

// Independent reference implementations used as test oracles. None of them
// call into the library's numerical code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, std::vector<double>(c, 0.0)); }

inline Mat transpose(const Mat& A) {
  Mat T = zeros(A.empty() ? 0 : A[0].size(), A.size());
  for (std::size_t i = 0; i < A.size(); ++i)
    for (std::size_t j = 0; j < A[i].size(); ++j) T[j][i] = A[i][j];
  return T;
}

inline Mat matmul(const Mat& A, const Mat& B) {
  Mat C = zeros(A.size(), B.empty() ? 0 : B[0].size());
  for (std::size_t i = 0; i < A.size(); ++i)
    for (std::size_t k = 0; k < B.size(); ++k)
      for (std::size_t j = 0; j < B[k].size(); ++j) C[i][j] += A[i][k] * B[k][j];
  return C;
}

// Gauss-Jordan inverse with partial pivoting.
inline Mat inverse(Mat A) {
  const std::size_t n = A.size();
  Mat I = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) I[i][i] = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    if (A[piv][c] == 0.0) throw std::runtime_error("singular");
    std::swap(A[piv], A[c]);
    std::swap(I[piv], I[c]);
    const double d = A[c][c];
    for (std::size_t j = 0; j < n; ++j) {
      A[c][j] /= d;
      I[c][j] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c || A[r][c] == 0.0) continue;
      const double f = A[r][c];
      for (std::size_t j = 0; j < n; ++j) {
        A[r][j] -= f * A[c][j];
        I[r][j] -= f * I[c][j];
      }
    }
  }
  return I;
}

// Ridge with unpenalized intercept by explicit inversion of the augmented
// normal equations. Returns (m+1) x p; the last row is the intercept.
inline Mat ridge(const Mat& X, const Mat& Y, double lambda, bool intercept = true) {
  const std::size_t m = X[0].size();
  Mat A = zeros(X.size(), m + (intercept ? 1 : 0));
  for (std::size_t i = 0; i < X.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) A[i][j] = X[i][j];
    if (intercept) A[i][m] = 1.0;
  }
  const Mat At = transpose(A);
  Mat G = matmul(At, A);
  for (std::size_t j = 0; j < m; ++j) G[j][j] += lambda;
  return matmul(inverse(G), matmul(At, Y));
}

// Penalized objective sum ||Y - X B - 1 c'||^2 + lambda ||B||^2 for a flat
// parameter layout matching ridge()'s output.
inline double objective(const Mat& X, const Mat& Y, const Mat& beta, double lambda) {
  const std::size_t m = X[0].size();
  double total = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i)
    for (std::size_t c = 0; c < Y[0].size(); ++c) {
      double pred = beta[m][c];
      for (std::size_t j = 0; j < m; ++j) pred += X[i][j] * beta[j][c];
      total += (Y[i][c] - pred) * (Y[i][c] - pred);
    }
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t c = 0; c < Y[0].size(); ++c) total += lambda * beta[j][c] * beta[j][c];
  return total;
}

// One-dimensional least-squares line through (x_i, y_i) with intercept;
// returns the SSE of the best fit (0 for fewer than 3 distinct points on a line).
inline double line_sse(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxx > 0 ? sxy / sxx : 0.0;
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (my + slope * (x[i] - mx));
    sse += r * r;
  }
  return sse;
}

// Weighted F1 from an explicit confusion matrix.
inline double weighted_f1(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& pred,
                          std::size_t classes) {
  Mat cm = zeros(classes, classes);
  for (std::size_t i = 0; i < truth.size(); ++i) cm[truth[i]][pred[i]] += 1.0;
  double score = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    double row = 0, col = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      row += cm[c][k];
      col += cm[k][c];
    }
    if (row == 0) continue;
    const double precision = col > 0 ? cm[c][c] / col : 0.0;
    const double recall = cm[c][c] / row;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    score += f1 * row / static_cast<double>(truth.size());
  }
  return score;
}

// Rank-k class by repeated removal of the current maximum (lowest index on ties).
inline std::size_t rank_k(std::vector<double> row, std::size_t k) {
  std::size_t pick = 0;
  for (std::size_t step = 0; step < k; ++step) {
    pick = 0;
    while (std::isinf(row[pick]) && row[pick] < 0) ++pick;
    for (std::size_t c = 0; c < row.size(); ++c)
      if (row[c] > row[pick]) pick = c;
    row[pick] = -INFINITY;
  }
  return pick;
}

}  // namespace oracle
