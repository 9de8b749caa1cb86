#pragma once

// Black-box prediction contract b: encoded rows -> row-stochastic [k x p],
// a softmax-linear reference model, and an adapter that delegates to an
// external process through a file-based batch protocol.

#include "sd4x/dataset.hpp"

#include <sys/types.h>
#include <sys/wait.h>
#include <signal.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace sd4x {

class BlackBox {
 public:
  virtual ~BlackBox() = default;

  virtual Matrix predict_batch(const Matrix& X) const = 0;
  virtual std::size_t input_width() const = 0;
  virtual const std::vector<std::string>& classes() const = 0;
  // Stable description used as part of cache keys.
  virtual std::string fingerprint() const = 0;

  std::size_t num_classes() const { return classes().size(); }

 protected:
  void check_width(const Matrix& X) const {
    if (static_cast<std::size_t>(X.cols()) != input_width()) throw WidthMismatch(input_width(), X.cols());
  }
};

inline bool is_row_stochastic(const Matrix& P, double tol = 1e-9) {
  for (Eigen::Index r = 0; r < P.rows(); ++r) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < P.cols(); ++c) {
      const double v = P(r, c);
      if (!(v >= 0.0 && v <= 1.0)) return false;
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

inline Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double top = logits.row(r).maxCoeff();
    RowVector e = (logits.row(r).array() - top).exp().matrix();
    out.row(r) = e / e.sum();
  }
  return out;
}

// ---------------------------------------------------------------- linear

class LinearBlackBox : public BlackBox {
 public:
  LinearBlackBox(std::vector<std::string> classes, std::vector<std::string> columns, Matrix weights, Vector biases)
      : classes_(std::move(classes)), columns_(std::move(columns)), weights_(std::move(weights)), biases_(std::move(biases)) {
    const auto p = static_cast<Eigen::Index>(classes_.size());
    if (p == 0) throw InputError("linear black box: no classes");
    if (weights_.rows() != p)
      throw InputError("linear black box: weights have " + std::to_string(weights_.rows()) + " rows for " +
                       std::to_string(p) + " classes");
    if (biases_.size() != p)
      throw InputError("linear black box: biases length " + std::to_string(biases_.size()) + " does not match " +
                       std::to_string(p) + " classes");
    if (!columns_.empty() && static_cast<Eigen::Index>(columns_.size()) != weights_.cols())
      throw InputError("linear black box: " + std::to_string(columns_.size()) + " column names for " +
                       std::to_string(weights_.cols()) + " weight columns");
    if (!weights_.allFinite() || !biases_.allFinite()) throw InputError("linear black box: non-finite parameter");
  }

  Matrix predict_batch(const Matrix& X) const override {
    check_width(X);
    Matrix logits = X * weights_.transpose();
    logits.rowwise() += biases_.transpose();
    return softmax_rows(logits);
  }

  std::size_t input_width() const override { return static_cast<std::size_t>(weights_.cols()); }
  const std::vector<std::string>& classes() const override { return classes_; }
  std::string fingerprint() const override { return "linear:" + hex64(fnv1a(to_json().dump())); }

  const std::vector<std::string>& columns() const { return columns_; }
  const Matrix& weights() const { return weights_; }
  const Vector& biases() const { return biases_; }

  // Reorders the weight columns to match a dataset's encoded columns.
  LinearBlackBox bind(const std::vector<std::string>& dataset_columns) const {
    if (columns_.empty()) {
      if (dataset_columns.size() != input_width()) throw WidthMismatch(input_width(), dataset_columns.size());
      return LinearBlackBox(classes_, dataset_columns, weights_, biases_);
    }
    for (const auto& name : columns_)
      if (std::find(dataset_columns.begin(), dataset_columns.end(), name) == dataset_columns.end())
        throw InputError("linear black box: unknown column '" + name + "'");
    Matrix w(weights_.rows(), static_cast<Eigen::Index>(dataset_columns.size()));
    for (std::size_t j = 0; j < dataset_columns.size(); ++j) {
      auto it = std::find(columns_.begin(), columns_.end(), dataset_columns[j]);
      if (it == columns_.end())
        throw InputError("linear black box: no weights for dataset column '" + dataset_columns[j] + "'");
      w.col(static_cast<Eigen::Index>(j)) = weights_.col(it - columns_.begin());
    }
    return LinearBlackBox(classes_, dataset_columns, std::move(w), biases_);
  }

  json to_json() const {
    json w = json::array();
    for (Eigen::Index r = 0; r < weights_.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < weights_.cols(); ++c) row.push_back(weights_(r, c));
      w.push_back(std::move(row));
    }
    json b = json::array();
    for (Eigen::Index r = 0; r < biases_.size(); ++r) b.push_back(biases_[r]);
    return json{{"classes", classes_}, {"columns", columns_}, {"weights", w}, {"biases", b}};
  }

 private:
  std::vector<std::string> classes_;
  std::vector<std::string> columns_;
  Matrix weights_;
  Vector biases_;
};

inline Matrix matrix_from_json(const json& rows, const std::string& what) {
  if (!rows.is_array()) throw InputError(what + ": expected an array of rows");
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c)
      throw InputError(what + ": ragged matrix at row " + std::to_string(i));
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

inline Vector vector_from_json(const json& values, const std::string& what) {
  if (!values.is_array()) throw InputError(what + ": expected an array");
  Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i].get<double>();
  return v;
}

// Accepts both the black-box naming (weights/biases) and the surrogate dump
// naming (coefficients/intercepts).
inline LinearBlackBox linear_blackbox_from_json(const json& doc) {
  try {
    const auto& w = doc.contains("weights") ? doc.at("weights") : doc.at("coefficients");
    const auto& b = doc.contains("biases") ? doc.at("biases") : doc.at("intercepts");
    std::vector<std::string> columns;
    if (doc.contains("columns")) columns = doc.at("columns").get<std::vector<std::string>>();
    return LinearBlackBox(doc.at("classes").get<std::vector<std::string>>(), std::move(columns),
                          matrix_from_json(w, "weights"), vector_from_json(b, "biases"));
  } catch (const json::exception& e) {
    throw InputError(std::string("linear black box: ") + e.what());
  }
}

inline LinearBlackBox load_linear_blackbox(const std::filesystem::path& path) {
  try {
    return linear_blackbox_from_json(read_json_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline void save_linear_blackbox(const LinearBlackBox& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << model.to_json().dump(2) << '\n';
}

// ---------------------------------------------------------------- external

// Rows from external processes: tiny negatives are clipped, sums within 1e-6
// of one are renormalized (with a warning), anything else is an error.
inline void sanitize_probabilities(Matrix& P, std::vector<std::string>& warnings) {
  for (Eigen::Index r = 0; r < P.rows(); ++r) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < P.cols(); ++c) {
      double& v = P(r, c);
      if (!std::isfinite(v)) throw ExternalError("row " + std::to_string(r) + ": non-finite probability");
      if (v < 0.0) {
        if (v < -1e-12) throw ExternalError("row " + std::to_string(r) + ": negative probability " + format_number(v));
        v = 0.0;
      }
      sum += v;
    }
    const double dev = std::abs(sum - 1.0);
    if (dev > 1e-6) throw ExternalError("row " + std::to_string(r) + ": probabilities sum to " + format_number(sum));
    if (dev > 1e-12) {
      P.row(r) /= sum;
      warnings.push_back("row " + std::to_string(r) + ": renormalized (sum " + format_number(sum) + ")");
    }
  }
}

struct ExternalAdapter {
  std::string command;
  std::filesystem::path working_dir;
  std::chrono::milliseconds timeout{60000};
  std::vector<std::string> columns;  // request header
  std::vector<std::string> classes;  // expected response columns, in output order
};

namespace detail {

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  return out + "'";
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "sd4x-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw ExternalError("cannot create temporary directory");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Runs `command <arg>` through /bin/sh; returns the exit status.
inline int run_with_timeout(const std::string& command, const std::filesystem::path& arg,
                            const std::filesystem::path& cwd, std::chrono::milliseconds timeout) {
  const std::string line = command + " " + shell_quote(arg.string());
  const std::string dir = cwd.string();
  const pid_t pid = fork();
  if (pid < 0) throw ExternalError("fork failed");
  if (pid == 0) {
    setpgid(0, 0);
    if (!dir.empty() && chdir(dir.c_str()) != 0) _exit(126);
    execl("/bin/sh", "sh", "-c", line.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    int status = 0;
    const pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) {
      if (WIFEXITED(status)) return WEXITSTATUS(status);
      return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
    }
    if (r < 0) throw ExternalError("waitpid failed");
    if (std::chrono::steady_clock::now() > deadline) {
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      throw ExternalError("external black box timed out after " + std::to_string(timeout.count()) + " ms");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
}

}  // namespace detail

inline void write_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                             const Matrix& X) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  csv::write_record(out, header);
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    csv::Record rec;
    for (Eigen::Index c = 0; c < X.cols(); ++c) rec.push_back(format_number(X(r, c)));
    csv::write_record(out, rec);
  }
}

// Reads a numeric CSV whose header must contain `columns`; returns them in
// that order.
inline Matrix read_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  const auto records = csv::read(in);
  if (records.empty()) throw InputError(path.string() + ": missing header");
  const auto& header = records.front();
  std::vector<std::size_t> pos;
  for (const auto& name : columns) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InputError(path.string() + ": missing column '" + name + "'");
    pos.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  Matrix M(static_cast<Eigen::Index>(records.size() - 1), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size())
      throw InputError(path.string() + ": row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                       " fields, expected " + std::to_string(header.size()));
    for (std::size_t c = 0; c < pos.size(); ++c) {
      auto v = parse_number(records[r][pos[c]]);
      if (!v) throw InputError(path.string() + ": row " + std::to_string(r) + ": malformed number '" +
                               records[r][pos[c]] + "'");
      M(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c)) = *v;
    }
  }
  return M;
}

inline Matrix external_predict(const ExternalAdapter& adapter, const Matrix& X, std::vector<std::string>& warnings) {
  if (adapter.classes.empty()) throw InputError("external black box: no classes configured");
  std::vector<std::string> header = adapter.columns;
  if (header.empty())
    for (Eigen::Index c = 0; c < X.cols(); ++c) header.push_back("c" + std::to_string(c));
  if (static_cast<Eigen::Index>(header.size()) != X.cols()) throw WidthMismatch(header.size(), X.cols());

  detail::TempDir dir;
  write_matrix_csv(dir.path() / "request.csv", header, X);
  const int status = detail::run_with_timeout(adapter.command, dir.path(), adapter.working_dir, adapter.timeout);
  if (status != 0) throw ExternalError("external black box exited with status " + std::to_string(status));
  Matrix P;
  try {
    P = read_matrix_csv(dir.path() / "response.csv", adapter.classes);
  } catch (const InputError& e) {
    throw ExternalError(std::string("malformed response: ") + e.what());
  }
  if (P.rows() != X.rows())
    throw ExternalError("row count mismatch: sent " + std::to_string(X.rows()) + ", received " +
                        std::to_string(P.rows()));
  sanitize_probabilities(P, warnings);
  return P;
}

// Concurrent callers queue on the child process.
class ExternalBlackBox : public BlackBox {
 public:
  explicit ExternalBlackBox(ExternalAdapter adapter) : adapter_(std::move(adapter)) {
    if (adapter_.columns.empty()) throw InputError("external black box: encoded column names are required");
  }

  Matrix predict_batch(const Matrix& X) const override {
    check_width(X);
    std::lock_guard lock(mutex_);
    return external_predict(adapter_, X, warnings_);
  }

  std::size_t input_width() const override { return adapter_.columns.size(); }
  const std::vector<std::string>& classes() const override { return adapter_.classes; }
  std::string fingerprint() const override { return "external:" + adapter_.command; }

  std::vector<std::string> warnings() const {
    std::lock_guard lock(mutex_);
    return warnings_;
  }

 private:
  ExternalAdapter adapter_;
  mutable std::mutex mutex_;
  mutable std::vector<std::string> warnings_;
};

}  // namespace sd4x
