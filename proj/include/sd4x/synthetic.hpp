#pragma once

// Multi-regime synthetic data with a closed-form black box. Each regime is a
// conjunction of threshold conditions; inside a regime the black box is
// softmax(W_r x + b_r). Used as ground truth for recovery tests.

#include "sd4x/blackbox.hpp"

#include <map>
#include <set>

namespace sd4x {

struct Condition {
  std::size_t column = 0;
  bool less_equal = true;  // x <= value, otherwise x > value
  double value = 0.0;

  bool holds(double x) const { return less_equal ? x <= value : x > value; }
};

struct Regime {
  std::string name;
  std::vector<Condition> conditions;
  Matrix weights;  // p x m
  Vector biases;   // p
};

struct NumericRange {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
};

struct SynthSpec {
  std::size_t n = 0;
  std::vector<NumericRange> numeric;
  std::vector<std::string> booleans;
  std::vector<std::string> classes;
  std::vector<Regime> regimes;
  double noise = 0.0;  // std-dev of Gaussian noise added to probabilities before drawing labels

  std::vector<std::string> columns() const {
    std::vector<std::string> names;
    for (const auto& r : numeric) names.push_back(r.name);
    for (const auto& b : booleans) names.push_back(b);
    return names;
  }
};

// Throws InputError unless the regimes partition R^m: every cell of the grid
// induced by the condition thresholds is matched by exactly one regime.
inline void validate_regimes(const std::vector<Regime>& regimes, std::size_t m, std::size_t p) {
  if (regimes.empty()) throw InputError("synthetic spec: no regimes");
  std::vector<std::set<double>> cuts(m);
  for (const auto& r : regimes) {
    if (static_cast<std::size_t>(r.weights.rows()) != p || static_cast<std::size_t>(r.weights.cols()) != m)
      throw InputError("regime '" + r.name + "': weights must be " + std::to_string(p) + " x " + std::to_string(m));
    if (static_cast<std::size_t>(r.biases.size()) != p)
      throw InputError("regime '" + r.name + "': biases must have length " + std::to_string(p));
    for (const auto& c : r.conditions) {
      if (c.column >= m) throw InputError("regime '" + r.name + "': condition on unknown column");
      cuts[c.column].insert(c.value);
    }
  }
  // One representative per cell: each threshold (right-closed cells) plus one
  // point beyond the last threshold.
  std::vector<std::vector<double>> reps(m);
  std::size_t cells = 1;
  for (std::size_t j = 0; j < m; ++j) {
    if (cuts[j].empty()) {
      reps[j] = {0.0};
      continue;
    }
    reps[j].assign(cuts[j].begin(), cuts[j].end());
    reps[j].push_back(*cuts[j].rbegin() + 1.0);
    cells *= reps[j].size();
    if (cells > 1'000'000) throw InputError("synthetic spec: regime grid too large to validate");
  }
  std::vector<std::size_t> idx(m, 0);
  std::vector<double> point(m);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    for (std::size_t j = 0; j < m; ++j) point[j] = reps[j][idx[j]];
    std::size_t hits = 0;
    for (const auto& r : regimes) {
      bool all = true;
      for (const auto& c : r.conditions) all = all && c.holds(point[c.column]);
      hits += all;
    }
    if (hits != 1) {
      std::string where;
      for (std::size_t j = 0; j < m; ++j)
        if (!cuts[j].empty()) where += " col" + std::to_string(j) + "=" + format_number(point[j]);
      throw InputError(std::string("synthetic spec: regimes ") + (hits ? "overlap" : "do not cover") + " at" + where);
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (++idx[j] < reps[j].size()) break;
      idx[j] = 0;
    }
  }
}

class SyntheticOracle : public BlackBox {
 public:
  SyntheticOracle(std::vector<std::string> classes, std::vector<std::string> columns, std::vector<Regime> regimes)
      : classes_(std::move(classes)), columns_(std::move(columns)), regimes_(std::move(regimes)) {
    validate_regimes(regimes_, columns_.size(), classes_.size());
  }

  std::size_t regime_of(const Eigen::Ref<const RowVector>& x) const {
    for (std::size_t r = 0; r < regimes_.size(); ++r) {
      bool all = true;
      for (const auto& c : regimes_[r].conditions) all = all && c.holds(x[static_cast<Eigen::Index>(c.column)]);
      if (all) return r;
    }
    throw InvariantError("synthetic oracle: point matches no regime");
  }

  Matrix predict_batch(const Matrix& X) const override {
    check_width(X);
    Matrix logits(X.rows(), static_cast<Eigen::Index>(classes_.size()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const auto& r = regimes_[regime_of(X.row(i))];
      logits.row(i) = (r.weights * X.row(i).transpose() + r.biases).transpose();
    }
    return softmax_rows(logits);
  }

  std::size_t input_width() const override { return columns_.size(); }
  const std::vector<std::string>& classes() const override { return classes_; }
  std::string fingerprint() const override { return "regimes:" + hex64(fnv1a(to_json().dump())); }

  const std::vector<Regime>& regimes() const { return regimes_; }
  const std::vector<std::string>& columns() const { return columns_; }

  json to_json() const {
    json regs = json::array();
    for (const auto& r : regimes_) {
      json when = json::array();
      for (const auto& c : r.conditions)
        when.push_back({{"attribute", columns_[c.column]}, {"op", c.less_equal ? "le" : "gt"}, {"value", c.value}});
      json w = json::array();
      for (Eigen::Index i = 0; i < r.weights.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < r.weights.cols(); ++j) row.push_back(r.weights(i, j));
        w.push_back(std::move(row));
      }
      json b = json::array();
      for (Eigen::Index i = 0; i < r.biases.size(); ++i) b.push_back(r.biases[i]);
      regs.push_back({{"name", r.name}, {"when", when}, {"weights", w}, {"biases", b}});
    }
    return json{{"type", "regimes"}, {"classes", classes_}, {"columns", columns_}, {"regimes", regs}};
  }

 private:
  std::vector<std::string> classes_;
  std::vector<std::string> columns_;
  std::vector<Regime> regimes_;
};

namespace detail {

inline std::size_t column_index(const std::vector<std::string>& columns, const std::string& name) {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw InputError("unknown attribute '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

// Dense [[...]] or sparse {"class": {"column": w}} weights.
inline Matrix parse_regime_weights(const json& j, const std::vector<std::string>& classes,
                                   const std::vector<std::string>& columns) {
  const auto p = static_cast<Eigen::Index>(classes.size());
  const auto m = static_cast<Eigen::Index>(columns.size());
  if (j.is_null()) return Matrix::Zero(p, m);
  if (j.is_array()) return matrix_from_json(j, "regime weights");
  Matrix w = Matrix::Zero(p, m);
  for (const auto& [cls, row] : j.items()) {
    const auto ci = static_cast<Eigen::Index>(column_index(classes, cls));
    for (const auto& [col, v] : row.items())
      w(ci, static_cast<Eigen::Index>(column_index(columns, col))) = v.get<double>();
  }
  return w;
}

inline Vector parse_regime_biases(const json& j, const std::vector<std::string>& classes) {
  const auto p = static_cast<Eigen::Index>(classes.size());
  if (j.is_null()) return Vector::Zero(p);
  if (j.is_array()) return vector_from_json(j, "regime biases");
  Vector b = Vector::Zero(p);
  for (const auto& [cls, v] : j.items()) b[static_cast<Eigen::Index>(column_index(classes, cls))] = v.get<double>();
  return b;
}

inline std::vector<Regime> parse_regimes(const json& regs, const std::vector<std::string>& classes,
                                         const std::vector<std::string>& columns) {
  std::vector<Regime> out;
  for (const auto& r : regs) {
    Regime reg;
    reg.name = r.value("name", "regime" + std::to_string(out.size()));
    if (r.contains("when")) {
      for (const auto& c : r.at("when")) {
        Condition cond;
        cond.column = column_index(columns, c.at("attribute").get<std::string>());
        const auto op = c.at("op").get<std::string>();
        if (op != "le" && op != "gt") throw InputError("regime '" + reg.name + "': op must be 'le' or 'gt'");
        cond.less_equal = op == "le";
        cond.value = c.at("value").get<double>();
        reg.conditions.push_back(cond);
      }
    }
    reg.weights = parse_regime_weights(r.contains("weights") ? r.at("weights") : json(), classes, columns);
    reg.biases = parse_regime_biases(r.contains("biases") ? r.at("biases") : json(), classes);
    out.push_back(std::move(reg));
  }
  return out;
}

}  // namespace detail

inline SynthSpec synth_spec_from_json(const json& doc) {
  SynthSpec spec;
  try {
    spec.n = doc.at("n").get<std::size_t>();
    const auto& num = doc.at("numeric");
    if (num.is_number_integer()) {
      for (std::size_t i = 0; i < num.get<std::size_t>(); ++i) spec.numeric.push_back({"x" + std::to_string(i + 1), 0.0, 1.0});
    } else {
      for (const auto& r : num) spec.numeric.push_back({r.at("name"), r.value("lo", 0.0), r.value("hi", 1.0)});
    }
    if (doc.contains("boolean")) {
      const auto& b = doc.at("boolean");
      if (b.is_number_integer()) {
        for (std::size_t i = 0; i < b.get<std::size_t>(); ++i) spec.booleans.push_back("b" + std::to_string(i + 1));
      } else {
        spec.booleans = b.get<std::vector<std::string>>();
      }
    }
    if (doc.contains("classes")) {
      spec.classes = doc.at("classes").get<std::vector<std::string>>();
    } else {
      for (std::size_t i = 0; i < doc.at("p").get<std::size_t>(); ++i) spec.classes.push_back("c" + std::to_string(i));
    }
    spec.noise = doc.value("noise", 0.0);
    spec.regimes = detail::parse_regimes(doc.at("regimes"), spec.classes, spec.columns());
  } catch (const json::exception& e) {
    throw InputError(std::string("synthetic spec: ") + e.what());
  }
  for (const auto& r : spec.numeric)
    if (!(r.lo < r.hi)) throw InputError("synthetic spec: empty range for '" + r.name + "'");
  if (spec.noise < 0) throw InputError("synthetic spec: negative noise");
  if (spec.classes.empty()) throw InputError("synthetic spec: no classes");
  validate_regimes(spec.regimes, spec.columns().size(), spec.classes.size());
  return spec;
}

// Accepts either a generator spec or a dumped oracle (blackbox.json).
inline SyntheticOracle synthetic_oracle_from_json(const json& doc) {
  try {
    if (doc.contains("columns")) {
      auto classes = doc.at("classes").get<std::vector<std::string>>();
      auto columns = doc.at("columns").get<std::vector<std::string>>();
      auto regimes = detail::parse_regimes(doc.at("regimes"), classes, columns);
      return SyntheticOracle(std::move(classes), std::move(columns), std::move(regimes));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("synthetic oracle: ") + e.what());
  }
  auto spec = synth_spec_from_json(doc);
  return SyntheticOracle(spec.classes, spec.columns(), spec.regimes);
}

struct SyntheticData {
  Dataset dataset;
  std::shared_ptr<const SyntheticOracle> oracle;
  std::vector<std::size_t> regimes;  // ground-truth regime per object
};

inline SyntheticData generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  SyntheticData out;
  auto& ds = out.dataset;
  for (const auto& r : spec.numeric) ds.schema.attributes.push_back({r.name, AttributeKind::numeric(), 0, ""});
  for (const auto& b : spec.booleans) ds.schema.attributes.push_back({b, AttributeKind::boolean(), 0, ""});
  ds.schema.classes = spec.classes;
  validate_schema(ds.schema);
  out.oracle = std::make_shared<const SyntheticOracle>(spec.classes, spec.columns(), spec.regimes);

  auto features = make_stream(seed, 0);
  const std::size_t m = spec.numeric.size() + spec.booleans.size();
  Matrix X(static_cast<Eigen::Index>(spec.n), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < spec.n; ++i) {
    Row row;
    for (std::size_t j = 0; j < spec.numeric.size(); ++j) {
      std::uniform_real_distribution<double> u(spec.numeric[j].lo, spec.numeric[j].hi);
      const double v = u(features);
      row.emplace_back(v);
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
    for (std::size_t j = 0; j < spec.booleans.size(); ++j) {
      const bool v = std::bernoulli_distribution(0.5)(features);
      row.emplace_back(v);
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(spec.numeric.size() + j)) = v ? 1.0 : 0.0;
    }
    ds.rows.push_back(std::move(row));
  }

  const Matrix P = out.oracle->predict_batch(X);
  auto label_noise = make_stream(seed, 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out.regimes.push_back(out.oracle->regime_of(X.row(ii)));
    Eigen::Index best = 0;
    double best_score = -kInf;
    for (Eigen::Index c = 0; c < P.cols(); ++c) {
      const double score = P(ii, c) + (spec.noise > 0 ? spec.noise * gauss(label_noise) : 0.0);
      if (score > best_score) {
        best_score = score;
        best = c;
      }
    }
    ds.labels.push_back(spec.classes[static_cast<std::size_t>(best)]);
  }
  return out;
}

}  // namespace sd4x
