#pragma once

// Greedy partition refinement: start from one subgroup holding every object,
// repeatedly apply the single attribute split with the largest loss reduction
// until K subgroups exist or no split improves the global loss.

#include "sd4x/pattern.hpp"
#include "sd4x/ridge.hpp"

#include <map>

namespace sd4x {

struct SplitterConfig {
  std::size_t K = 10;
  double lambda = 1.0;
  std::size_t min_support = 2;
  bool standardize = false;
  std::vector<std::size_t> split_columns;  // encoded column indices; empty means all
  unsigned threads = 1;
  std::size_t top_features = 5;
};

struct CandidateSplit {
  std::size_t subgroup = 0;
  std::size_t column = 0;
  double threshold = 0.0;
  std::vector<std::size_t> left, right;  // positions into the explained objects
  WhiteBoxModel left_model, right_model;
  double left_loss = 0.0;
  double right_loss = 0.0;
  double gain = 0.0;
};

struct Subgroup {
  std::size_t id = 0;
  std::vector<std::size_t> members;  // positions into the explained objects, ascending
  Pattern pattern;                   // split-path form
  WhiteBoxModel model;
  double loss = 0.0;
  std::size_t depth = 0;
  std::optional<CandidateSplit> best_split;
};

struct TraceEntry {
  std::size_t iteration = 0;
  std::size_t subgroup = 0;
  std::size_t column = 0;
  std::string column_name;
  double threshold = 0.0;
  std::size_t left_id = 0;
  std::size_t right_id = 0;
  double gain = 0.0;
  double loss_after = 0.0;
};

struct Partition {
  std::vector<Subgroup> subgroups;
  std::size_t K = 1;
  double root_loss = 0.0;
  std::vector<TraceEntry> trace;
  bool improve = true;  // false when the run stopped before reaching K
  json config;          // resolved run parameters, echoed into dumps
  std::vector<std::size_t> object_ids;  // dataset row of each explained object

  double global_loss() const {
    double total = 0.0;
    for (const auto& s : subgroups) total += s.loss;
    return total;
  }

  // Subgroup position holding each explained object.
  std::vector<std::size_t> assignment(std::size_t n) const {
    std::vector<std::size_t> out(n, subgroups.size());
    for (std::size_t g = 0; g < subgroups.size(); ++g)
      for (auto o : subgroups[g].members) out.at(o) = g;
    return out;
  }
};

// ---------------------------------------------------------------- candidates

inline std::vector<double> candidate_thresholds(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<double> out;
  for (std::size_t i = 1; i < values.size(); ++i) out.push_back(values[i - 1] + (values[i] - values[i - 1]) / 2.0);
  return out;
}

// Per-object sufficient statistics over labeled neighborhoods, shared by all
// candidate evaluations.
class SplitContext {
 public:
  SplitContext(const Dataset& data, const EncodedMatrix& encoded, const NeighborhoodSet& ns)
      : data_(data), encoded_(encoded), ns_(ns) {
    if (!ns.labeled()) throw InputError("neighborhoods must be labeled before splitting");
    if (ns.size() != data.size() || static_cast<std::size_t>(encoded.rows()) != data.size())
      throw InputError("dataset, encoding and neighborhoods disagree on the object count");
    stats_.reserve(ns.size());
    for (std::size_t o = 0; o < ns.size(); ++o) stats_.push_back(RidgeStats::of(ns.samples[o], ns.outputs[o]));
  }

  const Dataset& data() const { return data_; }
  const EncodedMatrix& encoded() const { return encoded_; }
  const NeighborhoodSet& neighborhoods() const { return ns_; }
  const RidgeStats& stats(std::size_t o) const { return stats_[o]; }
  std::size_t size() const { return stats_.size(); }

  RidgeStats pooled(std::span<const std::size_t> members) const {
    auto s = RidgeStats::zeros(ns_.width(), ns_.classes());
    for (auto o : members) s += stats_[o];
    return s;
  }

  WhiteBoxModel fit(std::span<const std::size_t> members, const RidgeOptions& opt) const {
    return solve_ridge(pooled(members), opt, SingularPolicy::MinimumNorm);
  }

  double loss(std::span<const std::size_t> members, const WhiteBoxModel& model) const {
    return subgroup_loss(members, ns_, model);
  }

 private:
  const Dataset& data_;
  const EncodedMatrix& encoded_;
  const NeighborhoodSet& ns_;
  std::vector<RidgeStats> stats_;
};

namespace detail {

struct ColumnBest {
  bool found = false;
  double total = kInf;
  double threshold = 0.0;
};

// Scans one column's candidate thresholds with running sums; child losses are
// evaluated from sufficient statistics.
inline ColumnBest scan_column(const SplitContext& ctx, std::span<const std::size_t> members, std::size_t column,
                              const RidgeOptions& opt, std::size_t min_support, double tie_tol) {
  const auto& X = ctx.encoded().values;
  const auto col = static_cast<Eigen::Index>(column);
  std::vector<std::size_t> order(members.begin(), members.end());
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return X(static_cast<Eigen::Index>(a), col) < X(static_cast<Eigen::Index>(b), col);
  });
  auto value = [&](std::size_t k) { return X(static_cast<Eigen::Index>(order[k]), col); };

  const std::size_t n = order.size();
  std::vector<std::size_t> cuts;  // left child = order[0, cut)
  for (std::size_t k = 1; k < n; ++k)
    if (value(k) != value(k - 1) && k >= min_support && n - k >= min_support) cuts.push_back(k);
  ColumnBest best;
  if (cuts.empty()) return best;

  // Left losses from a forward pass, right losses from a backward pass, so no
  // child's statistics are formed by subtraction.
  std::vector<double> left(cuts.size()), right(cuts.size());
  auto acc = RidgeStats::zeros(X.cols(), ctx.neighborhoods().classes());
  std::size_t k = 0;
  for (std::size_t c = 0; c < cuts.size(); ++c) {
    for (; k < cuts[c]; ++k) acc += ctx.stats(order[k]);
    left[c] = stats_loss(acc, solve_ridge(acc, opt, SingularPolicy::MinimumNorm));
  }
  acc = RidgeStats::zeros(X.cols(), ctx.neighborhoods().classes());
  k = n;
  for (std::size_t c = cuts.size(); c-- > 0;) {
    for (; k > cuts[c]; --k) acc += ctx.stats(order[k - 1]);
    right[c] = stats_loss(acc, solve_ridge(acc, opt, SingularPolicy::MinimumNorm));
  }

  for (std::size_t c = 0; c < cuts.size(); ++c) {
    const double total = left[c] + right[c];
    if (!best.found || total < best.total - tie_tol) {
      best.found = true;
      best.total = total;
      best.threshold = value(cuts[c] - 1) + (value(cuts[c]) - value(cuts[c] - 1)) / 2.0;
    }
  }
  return best;
}

}  // namespace detail

inline std::vector<std::size_t> resolve_split_columns(const SplitterConfig& cfg, std::size_t width) {
  if (cfg.split_columns.empty()) {
    std::vector<std::size_t> all(width);
    for (std::size_t j = 0; j < width; ++j) all[j] = j;
    return all;
  }
  for (auto j : cfg.split_columns)
    if (j >= width) throw InputError("split column " + std::to_string(j) + " out of range");
  auto cols = cfg.split_columns;
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  return cols;
}

// Exhaustive scan over the allowed columns and their midpoint thresholds.
// Returns the split minimizing the summed child loss; ties go to the lower
// column, then the smaller threshold.
inline std::optional<CandidateSplit> best_split(const SplitContext& ctx, const Subgroup& s, const SplitterConfig& cfg) {
  const std::size_t support = std::max<std::size_t>(cfg.min_support, 1);
  if (s.members.size() < 2 * support) return std::nullopt;
  const RidgeOptions opt{cfg.lambda, true, cfg.standardize};
  const auto columns = resolve_split_columns(cfg, static_cast<std::size_t>(ctx.encoded().cols()));

  double yy = 0.0;
  for (auto o : s.members) yy += ctx.stats(o).yy;
  const double tie_tol = 1e-12 * std::max(yy, 1e-300);

  std::vector<detail::ColumnBest> per_column(columns.size());
  parallel_for(columns.size(), cfg.threads, [&](std::size_t i) {
    per_column[i] = detail::scan_column(ctx, s.members, columns[i], opt, support, tie_tol);
  });

  std::optional<std::size_t> winner;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (!per_column[i].found) continue;
    if (!winner || per_column[i].total < per_column[*winner].total - tie_tol) winner = i;
  }
  if (!winner) return std::nullopt;

  CandidateSplit split;
  split.subgroup = s.id;
  split.column = columns[*winner];
  split.threshold = per_column[*winner].threshold;
  const auto col = static_cast<Eigen::Index>(split.column);
  for (auto o : s.members)
    (ctx.encoded().values(static_cast<Eigen::Index>(o), col) <= split.threshold ? split.left : split.right).push_back(o);
  split.left_model = ctx.fit(split.left, opt);
  split.right_model = ctx.fit(split.right, opt);
  split.left_loss = ctx.loss(split.left, split.left_model);
  split.right_loss = ctx.loss(split.right, split.right_model);
  split.gain = s.loss - (split.left_loss + split.right_loss);
  return split;
}

// ---------------------------------------------------------------- checks

// Disjoint cover of the explained objects, |S| <= K, and exact pattern extents.
// Throws InvariantError on the first violation.
inline void check_partition(const Partition& part, const Dataset& data) {
  if (part.subgroups.size() > part.K)
    throw InvariantError("partition has " + std::to_string(part.subgroups.size()) + " subgroups, budget " +
                         std::to_string(part.K));
  std::vector<int> seen(data.size(), 0);
  for (const auto& s : part.subgroups) {
    for (auto o : s.members) {
      if (o >= data.size()) throw InvariantError("subgroup member out of range");
      if (seen[o]++) throw InvariantError("object " + std::to_string(o) + " belongs to two subgroups");
    }
    if (extent(s.pattern, data) != s.members)
      throw InvariantError("pattern of subgroup " + std::to_string(s.id) + " does not describe its members");
  }
  for (std::size_t o = 0; o < data.size(); ++o)
    if (!seen[o]) throw InvariantError("object " + std::to_string(o) + " is not covered");
}

// ---------------------------------------------------------------- run

inline Partition run(const Dataset& data, const EncodedMatrix& encoded, const NeighborhoodSet& ns,
                     const SplitterConfig& cfg) {
  if (cfg.K < 1) throw InputError("K must be at least 1");
  if (!(cfg.lambda >= 0.0)) throw InputError("lambda must be >= 0");
  if (data.size() < 1) throw InputError("no objects to explain");
  const SplitContext ctx(data, encoded, ns);
  const RidgeOptions opt{cfg.lambda, true, cfg.standardize};

  Partition part;
  part.K = cfg.K;
  part.object_ids.resize(data.size());
  for (std::size_t o = 0; o < data.size(); ++o) part.object_ids[o] = o;

  Subgroup root;
  root.id = 0;
  root.members = part.object_ids;
  root.pattern = Pattern::top(data.schema);
  root.model = ctx.fit(root.members, opt);
  root.loss = ctx.loss(root.members, root.model);
  part.root_loss = root.loss;
  part.subgroups.push_back(std::move(root));

  // Gains below this are rounding noise relative to the output energy.
  double energy = 0.0;
  for (std::size_t o = 0; o < ctx.size(); ++o) energy += ctx.stats(o).yy;
  const double min_gain = 1e-12 * std::max(energy, 1e-300);

  std::size_t next_id = 1;
  std::vector<std::size_t> fresh{0};  // positions needing a best split
  while (part.subgroups.size() < cfg.K) {
    for (auto g : fresh) part.subgroups[g].best_split = best_split(ctx, part.subgroups[g], cfg);
    fresh.clear();

    std::optional<std::size_t> pick;
    for (std::size_t g = 0; g < part.subgroups.size(); ++g) {
      const auto& c = part.subgroups[g].best_split;
      if (!c) continue;
      if (!pick) {
        pick = g;
        continue;
      }
      const auto& b = *part.subgroups[*pick].best_split;
      const double tol = 1e-12 * std::max(std::abs(c->gain), std::abs(b.gain));
      bool better = c->gain > b.gain + tol;
      if (!better && std::abs(c->gain - b.gain) <= tol)
        better = std::tie(c->column, c->threshold, c->subgroup) < std::tie(b.column, b.threshold, b.subgroup);
      if (better) pick = g;
    }
    const Subgroup& parent = part.subgroups[pick ? *pick : 0];
    if (!pick || !(parent.best_split->gain > min_gain)) {
      part.improve = false;
      break;
    }

    CandidateSplit split = std::move(*part.subgroups[*pick].best_split);
    const auto& column = encoded.columns[split.column];
    Subgroup left, right;
    left.id = next_id++;
    right.id = next_id++;
    left.members = std::move(split.left);
    right.members = std::move(split.right);
    left.pattern = refine(parent.pattern, data.schema, column, Side::LessEqual, split.threshold);
    right.pattern = refine(parent.pattern, data.schema, column, Side::Greater, split.threshold);
    left.model = std::move(split.left_model);
    right.model = std::move(split.right_model);
    left.loss = split.left_loss;
    right.loss = split.right_loss;
    left.depth = right.depth = parent.depth + 1;

    TraceEntry t;
    t.iteration = part.trace.size() + 1;
    t.subgroup = parent.id;
    t.column = split.column;
    t.column_name = column.name;
    t.threshold = split.threshold;
    t.left_id = left.id;
    t.right_id = right.id;
    t.gain = split.gain;

    const std::size_t g = *pick;
    part.subgroups[g] = std::move(left);
    part.subgroups.insert(part.subgroups.begin() + static_cast<std::ptrdiff_t>(g) + 1, std::move(right));
    t.loss_after = part.global_loss();
    part.trace.push_back(std::move(t));
    fresh = {g, g + 1};
  }

  for (auto& s : part.subgroups) {
    s.model.fitted_on = "subgroup " + std::to_string(s.id);
    s.best_split.reset();
  }
  check_partition(part, data);
  return part;
}

// Encodes the objects, generates and labels every neighborhood once, then runs
// the greedy refinement.
struct Explanation {
  EncodedMatrix encoded;
  NeighborhoodSet neighborhoods;
  Partition partition;
};

inline Explanation explain(const Dataset& data, const BlackBox& bb, const NeighborhoodParams& params,
                           const SplitterConfig& cfg) {
  Explanation out;
  out.encoded = encode(data);
  if (static_cast<std::size_t>(out.encoded.cols()) != bb.input_width())
    throw WidthMismatch(bb.input_width(), out.encoded.cols());
  out.neighborhoods = generate_neighborhoods(out.encoded, params, cfg.threads);
  label_neighborhoods(out.neighborhoods, bb);
  out.partition = run(data, out.encoded, out.neighborhoods, cfg);
  return out;
}

// ---------------------------------------------------------------- curve

struct CurvePoint {
  std::size_t K = 0;
  double loss = 0.0;
  bool reached = true;  // false when the run stopped before K subgroups
};

// Global loss at the first time each subgroup count was reached; counts past
// the stopping point repeat the final loss.
inline std::vector<CurvePoint> loss_curve(const Partition& part, std::size_t K_max) {
  std::vector<CurvePoint> out;
  double current = part.root_loss;
  for (std::size_t k = 1; k <= K_max; ++k) {
    const bool reached = k == 1 || k - 2 < part.trace.size();
    if (k >= 2 && reached) current = part.trace[k - 2].loss_after;
    out.push_back({k, current, reached});
  }
  return out;
}

// ---------------------------------------------------------------- dump

inline json importance_to_json(const ImportanceReport& rep, const std::vector<std::string>& columns,
                               std::size_t top_m) {
  json feats = json::array();
  for (std::size_t i = 0; i < rep.features.size() && i < top_m; ++i) {
    const auto& f = rep.features[i];
    feats.push_back({{"column", columns.at(f.column)}, {"coefficient", f.coefficient}, {"ratio", f.ratio}});
  }
  json out = {{"features", feats}};
  if (!rep.note.empty()) out["note"] = rep.note;
  return out;
}

inline json partition_to_json(const Partition& part, const Dataset& data, const EncodedMatrix& encoded,
                              std::size_t top_m = 5) {
  const auto columns = encoded.column_names();
  json subgroups = json::array();
  for (const auto& s : part.subgroups) {
    json members = json::array();
    for (auto o : s.members) members.push_back(part.object_ids.at(o));
    json top = json::object();
    for (std::size_t c = 0; c < data.schema.classes.size(); ++c)
      top[data.schema.classes[c]] = importance_to_json(feature_importance(s.model, c), columns, top_m);
    const json model = model_to_json(s.model, columns, data.schema.classes);
    subgroups.push_back({{"id", s.id},
                         {"size", s.members.size()},
                         {"depth", s.depth},
                         {"members", members},
                         {"pattern", pattern_to_json(s.pattern, data.schema)},
                         {"pattern_text", render(s.pattern, data.schema)},
                         {"pattern_closed", render_closed(s.pattern, data, s.members)},
                         {"model", {{"coefficients", model["coefficients"]}, {"intercepts", model["intercepts"]}}},
                         {"loss", s.loss},
                         {"top_features", top}});
  }
  json trace = json::array();
  for (const auto& t : part.trace)
    trace.push_back({{"iter", t.iteration},
                     {"subgroup", t.subgroup},
                     {"column", t.column_name},
                     {"threshold", t.threshold},
                     {"left", t.left_id},
                     {"right", t.right_id},
                     {"gain", t.gain},
                     {"loss_after", t.loss_after}});
  return json{{"config", part.config},
              {"columns", columns},
              {"classes", data.schema.classes},
              {"K", part.K},
              {"root_loss", part.root_loss},
              {"global_loss", part.global_loss()},
              {"improve", part.improve},
              {"subgroups", subgroups},
              {"trace", trace}};
}

// Rebuilds subgroups from a dump. Member ids are dataset rows and are mapped
// back to positions through object_ids.
inline Partition partition_from_json(const json& doc, const Dataset& data, std::span<const std::size_t> object_ids) {
  Partition part;
  try {
    part.K = doc.at("K").get<std::size_t>();
    part.root_loss = doc.at("root_loss").get<double>();
    part.improve = doc.value("improve", true);
    part.config = doc.value("config", json::object());
    part.object_ids.assign(object_ids.begin(), object_ids.end());
    std::map<std::size_t, std::size_t> position;
    for (std::size_t i = 0; i < object_ids.size(); ++i) position[object_ids[i]] = i;
    for (const auto& js : doc.at("subgroups")) {
      Subgroup s;
      s.id = js.at("id").get<std::size_t>();
      s.depth = js.value("depth", std::size_t{0});
      for (const auto& m : js.at("members")) {
        auto it = position.find(m.get<std::size_t>());
        if (it == position.end()) throw InputError("partition member " + m.dump() + " is not an explained object");
        s.members.push_back(it->second);
      }
      std::sort(s.members.begin(), s.members.end());
      s.pattern = pattern_from_json(js.at("pattern"), data.schema);
      s.model = model_from_json(js.at("model"));
      s.loss = js.at("loss").get<double>();
      part.subgroups.push_back(std::move(s));
    }
    for (const auto& jt : doc.at("trace")) {
      TraceEntry t;
      t.iteration = jt.at("iter").get<std::size_t>();
      t.subgroup = jt.at("subgroup").get<std::size_t>();
      t.column_name = jt.at("column").get<std::string>();
      t.threshold = jt.at("threshold").get<double>();
      t.left_id = jt.value("left", std::size_t{0});
      t.right_id = jt.value("right", std::size_t{0});
      t.gain = jt.value("gain", 0.0);
      t.loss_after = jt.at("loss_after").get<double>();
      part.trace.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("partition file: ") + e.what());
  }
  return part;
}

}  // namespace sd4x
