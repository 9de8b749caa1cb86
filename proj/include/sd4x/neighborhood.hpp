#pragma once

// Synthetic neighborhoods N(o): Gaussian samples around each object drawn
// with the shared covariance of the objects to explain shrunk by z, snapped
// back to valid encoded rows and labeled once by the black box.

#include "sd4x/blackbox.hpp"

#include <cstring>
#include <fstream>

namespace sd4x {

inline Matrix sample_covariance(const Matrix& X) {
  if (X.rows() < 2) throw InputError("covariance needs at least 2 objects, got " + std::to_string(X.rows()));
  const RowVector mean = X.colwise().mean();
  const Matrix centered = X.rowwise() - mean;
  const Matrix S = (centered.transpose() * centered) / static_cast<double>(X.rows() - 1);
  return (S + S.transpose()) * 0.5;
}

struct CovarianceEstimate {
  Matrix covariance;
  double jitter = 0.0;  // eps added to the diagonal, 0 when the raw estimate factorized
};

// Sample covariance (n-1 denominator). If it does not admit a Cholesky
// factorization, eps*I is added with eps = 1e-9 * trace / m' (1e-9 when the
// trace is zero).
inline CovarianceEstimate estimate_covariance(const Matrix& X) {
  CovarianceEstimate est{sample_covariance(X), 0.0};
  if (est.covariance.size() == 0) return est;
  // Rounding lets LLT succeed on singular input, so tiny pivots also count as failure.
  const Eigen::LLT<Matrix> llt(est.covariance);
  if (llt.info() == Eigen::Success) {
    const Vector pivots = llt.matrixLLT().diagonal().array().square();
    if (pivots.minCoeff() > 1e-12 * est.covariance.diagonal().maxCoeff()) return est;
  }
  const double trace = est.covariance.trace();
  est.jitter = trace > 0.0 ? 1e-9 * trace / static_cast<double>(est.covariance.rows()) : 1e-9;
  est.covariance.diagonal().array() += est.jitter;
  return est;
}

// Snaps a raw Gaussian draw to the nearest valid encoded row.
inline void discretize(RowRef row, const std::vector<EncodedColumn>& cols) {
  for (std::size_t j = 0; j < cols.size();) {
    const auto jj = static_cast<Eigen::Index>(j);
    switch (cols[j].kind) {
      case ColumnKind::Numeric:
        ++j;
        break;
      case ColumnKind::Boolean:
        row[jj] = row[jj] >= 0.5 ? 1.0 : 0.0;
        ++j;
        break;
      case ColumnKind::Ordinal: {
        const double top = static_cast<double>(cols[j].levels.size() - 1);
        row[jj] = std::clamp(std::round(row[jj]), 0.0, top);
        ++j;
        break;
      }
      case ColumnKind::OneHot: {
        std::size_t end = j;
        while (end < cols.size() && cols[end].kind == ColumnKind::OneHot && cols[end].attribute == cols[j].attribute)
          ++end;
        std::size_t best = j;
        for (std::size_t k = j + 1; k < end; ++k)
          if (std::abs(row[static_cast<Eigen::Index>(k)] - 1.0) < std::abs(row[static_cast<Eigen::Index>(best)] - 1.0))
            best = k;
        for (std::size_t k = j; k < end; ++k) row[static_cast<Eigen::Index>(k)] = k == best ? 1.0 : 0.0;
        j = end;
        break;
      }
    }
  }
}

// Cholesky factor of covariance / z, computed once and shared by all objects.
class GaussianSampler {
 public:
  GaussianSampler(const Matrix& covariance, double z) {
    if (!(z >= 1.0)) throw InputError("shrink factor z must be >= 1");
    if (covariance.rows() != covariance.cols()) throw InputError("covariance must be square");
    if (covariance.size() == 0) return;
    Eigen::LLT<Matrix> llt(covariance / z);
    if (llt.info() != Eigen::Success) throw Error("Cholesky factorization of the shrunk covariance failed");
    factor_ = llt.matrixL();
  }

  const Matrix& factor() const { return factor_; }

  Matrix draw(const RowVector& center, std::size_t count, std::mt19937_64& rng) const {
    const auto m = center.size();
    Matrix g(static_cast<Eigen::Index>(count), m);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index r = 0; r < g.rows(); ++r)
      for (Eigen::Index c = 0; c < m; ++c) g(r, c) = normal(rng);
    Matrix out = m ? Matrix(g * factor_.transpose()) : g;
    out.rowwise() += center;
    return out;
  }

 private:
  Matrix factor_;
};

// Row 0 is o itself; rows 1..n_synth are discretized draws. The random stream
// is (seed, stream), so objects can be generated in any order.
inline Matrix generate_neighbors(const RowVector& o, const GaussianSampler& sampler, std::size_t n_synth,
                                 std::uint64_t seed, std::uint64_t stream, const std::vector<EncodedColumn>& cols) {
  auto rng = make_stream(seed, stream);
  Matrix out(static_cast<Eigen::Index>(1 + n_synth), o.size());
  out.row(0) = o;
  if (n_synth > 0) out.bottomRows(static_cast<Eigen::Index>(n_synth)) = sampler.draw(o, n_synth, rng);
  if (!cols.empty())
    for (Eigen::Index r = 1; r < out.rows(); ++r) discretize(out.row(r), cols);
  return out;
}

inline Matrix generate_neighbors(const RowVector& o, const Matrix& covariance, double z, std::size_t n_synth,
                                 std::uint64_t seed, const std::vector<EncodedColumn>& cols = {}) {
  return generate_neighbors(o, GaussianSampler(covariance, z), n_synth, seed, 0, cols);
}

struct NeighborhoodParams {
  double z = 10.0;
  std::size_t n_synth = 250;
  std::uint64_t seed = 0;
};

struct NeighborhoodSet {
  std::vector<Matrix> samples;  // per object, (1 + n_synth) x m'
  std::vector<Matrix> outputs;  // per object, (1 + n_synth) x p; empty until labeled
  Matrix covariance;
  double jitter = 0.0;
  NeighborhoodParams params;

  std::size_t size() const { return samples.size(); }
  bool labeled() const { return !samples.empty() && outputs.size() == samples.size(); }
  Eigen::Index width() const { return samples.empty() ? 0 : samples.front().cols(); }
  Eigen::Index classes() const { return outputs.empty() ? 0 : outputs.front().cols(); }
};

// Covariance defaults to estimate_covariance over the objects; with
// n_synth = 0 no covariance is needed.
inline NeighborhoodSet generate_neighborhoods(const EncodedMatrix& objects, const NeighborhoodParams& params,
                                              unsigned threads = 1,
                                              const std::optional<Matrix>& covariance = std::nullopt) {
  NeighborhoodSet ns;
  ns.params = params;
  const auto m = objects.cols();
  if (covariance) {
    ns.covariance = *covariance;
  } else if (params.n_synth > 0) {
    auto est = estimate_covariance(objects.values);
    ns.covariance = std::move(est.covariance);
    ns.jitter = est.jitter;
  } else {
    ns.covariance = Matrix::Zero(m, m);
  }
  if (ns.covariance.rows() != m) throw WidthMismatch(static_cast<std::size_t>(m), ns.covariance.rows());
  const GaussianSampler sampler = params.n_synth > 0 ? GaussianSampler(ns.covariance, params.z)
                                                     : GaussianSampler(Matrix(), params.z);
  ns.samples.resize(static_cast<std::size_t>(objects.rows()));
  parallel_for(ns.samples.size(), threads, [&](std::size_t i) {
    ns.samples[i] = generate_neighbors(objects.values.row(static_cast<Eigen::Index>(i)), sampler, params.n_synth,
                                       params.seed, i, objects.columns);
  });
  return ns;
}

// Labels every neighbor with one black-box call per chunk of rows.
inline void label_neighborhoods(NeighborhoodSet& ns, const BlackBox& bb, std::size_t chunk_size = 65536) {
  if (chunk_size == 0) throw InputError("chunk size must be positive");
  std::vector<std::pair<std::size_t, Eigen::Index>> index;  // (object, row) of each stacked row
  for (std::size_t o = 0; o < ns.samples.size(); ++o)
    for (Eigen::Index r = 0; r < ns.samples[o].rows(); ++r) index.emplace_back(o, r);

  std::vector<Matrix> outputs(ns.samples.size());
  const auto p = static_cast<Eigen::Index>(bb.num_classes());
  for (std::size_t o = 0; o < ns.samples.size(); ++o) outputs[o].resize(ns.samples[o].rows(), p);

  for (std::size_t start = 0; start < index.size(); start += chunk_size) {
    const std::size_t stop = std::min(index.size(), start + chunk_size);
    Matrix batch(static_cast<Eigen::Index>(stop - start), ns.width());
    for (std::size_t k = start; k < stop; ++k)
      batch.row(static_cast<Eigen::Index>(k - start)) = ns.samples[index[k].first].row(index[k].second);
    const Matrix P = bb.predict_batch(batch);
    if (P.rows() != batch.rows() || P.cols() != p)
      throw InvariantError("black box returned a " + std::to_string(P.rows()) + "x" + std::to_string(P.cols()) +
                           " matrix for a batch of " + std::to_string(batch.rows()));
    if (!is_row_stochastic(P)) throw InvariantError("black box output is not row-stochastic");
    for (std::size_t k = start; k < stop; ++k)
      outputs[index[k].first].row(index[k].second) = P.row(static_cast<Eigen::Index>(k - start));
  }
  ns.outputs = std::move(outputs);
}

// ---------------------------------------------------------------- cache

struct NeighborhoodCacheKey {
  std::uint64_t data_hash = 0;
  std::uint64_t blackbox_hash = 0;
  std::uint64_t seed = 0;
  double z = 0.0;
  std::uint64_t n_synth = 0;

  bool operator==(const NeighborhoodCacheKey&) const = default;
};

namespace detail {

inline constexpr char kCacheMagic[8] = {'S', 'D', '4', 'X', 'N', 'B', '0', '1'};

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw InputError("neighborhood cache: truncated file");
  return v;
}

inline void put_matrix(std::ostream& out, const Matrix& M) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = M;
  out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
}

inline Matrix get_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
  if (!in) throw InputError("neighborhood cache: truncated file");
  return rm;
}

}  // namespace detail

inline void save_neighborhoods(const std::filesystem::path& path, const NeighborhoodSet& ns,
                               const NeighborhoodCacheKey& key) {
  if (!ns.labeled()) throw InputError("only labeled neighborhoods can be cached");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out.write(detail::kCacheMagic, sizeof(detail::kCacheMagic));
  detail::put(out, key.data_hash);
  detail::put(out, key.blackbox_hash);
  detail::put(out, key.seed);
  detail::put(out, key.z);
  detail::put(out, key.n_synth);
  detail::put(out, static_cast<std::uint64_t>(ns.size()));
  detail::put(out, static_cast<std::uint64_t>(ns.width()));
  detail::put(out, static_cast<std::uint64_t>(ns.classes()));
  detail::put(out, ns.jitter);
  detail::put_matrix(out, ns.covariance);
  for (std::size_t o = 0; o < ns.size(); ++o) {
    detail::put_matrix(out, ns.samples[o]);
    detail::put_matrix(out, ns.outputs[o]);
  }
}

// Returns nullopt when the file is missing or was written for another key.
inline std::optional<NeighborhoodSet> load_neighborhoods(const std::filesystem::path& path,
                                                         const NeighborhoodCacheKey& key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[sizeof(detail::kCacheMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, detail::kCacheMagic, sizeof(magic)) != 0) return std::nullopt;
  NeighborhoodCacheKey stored;
  stored.data_hash = detail::get<std::uint64_t>(in);
  stored.blackbox_hash = detail::get<std::uint64_t>(in);
  stored.seed = detail::get<std::uint64_t>(in);
  stored.z = detail::get<double>(in);
  stored.n_synth = detail::get<std::uint64_t>(in);
  if (!(stored == key)) return std::nullopt;
  const auto n = detail::get<std::uint64_t>(in);
  const auto m = static_cast<Eigen::Index>(detail::get<std::uint64_t>(in));
  const auto p = static_cast<Eigen::Index>(detail::get<std::uint64_t>(in));
  NeighborhoodSet ns;
  ns.params = {key.z, static_cast<std::size_t>(key.n_synth), key.seed};
  ns.jitter = detail::get<double>(in);
  ns.covariance = detail::get_matrix(in, m, m);
  const auto rows = static_cast<Eigen::Index>(1 + key.n_synth);
  for (std::uint64_t o = 0; o < n; ++o) {
    ns.samples.push_back(detail::get_matrix(in, rows, m));
    ns.outputs.push_back(detail::get_matrix(in, rows, p));
  }
  return ns;
}

}  // namespace sd4x
