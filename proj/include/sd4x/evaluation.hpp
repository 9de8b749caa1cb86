#pragma once

// Fidelity and diversity metrics for partitions and the two baselines
// (one surrogate for everything, one surrogate per object), elbow detection
// on the loss curve, and JSON/Markdown reports.

#include "sd4x/splitter.hpp"

#include <iomanip>
#include <numeric>

namespace sd4x {

// ---------------------------------------------------------------- MSE

inline std::size_t total_samples(const NeighborhoodSet& ns) {
  std::size_t n = 0;
  for (const auto& s : ns.samples) n += static_cast<std::size_t>(s.rows());
  return n;
}

// Summed neighborhood loss over all subgroups divided by the number of
// explained objects.
inline double mse(const Partition& part, const NeighborhoodSet& ns) {
  if (ns.size() == 0) throw InputError("MSE of an empty object set");
  double total = 0.0;
  for (const auto& s : part.subgroups) total += subgroup_loss(s.members, ns, s.model);
  return total / static_cast<double>(ns.size());
}

inline double mse(const WhiteBoxModel& model, const NeighborhoodSet& ns) {
  if (ns.size() == 0) throw InputError("MSE of an empty object set");
  std::vector<std::size_t> all(ns.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return subgroup_loss(all, ns, model) / static_cast<double>(ns.size());
}

// Same loss per neighborhood sample and class, comparable across n_synth and p.
inline double normalized_mse(double mse_value, const NeighborhoodSet& ns) {
  const double cells = static_cast<double>(total_samples(ns)) * static_cast<double>(ns.classes());
  return cells > 0 ? mse_value * static_cast<double>(ns.size()) / cells : 0.0;
}

// ---------------------------------------------------------------- baselines

inline WhiteBoxModel fit_global_wb(const NeighborhoodSet& ns, const RidgeOptions& opt) {
  std::vector<std::size_t> all(ns.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto model = solve_ridge(pooled_stats(all, ns), opt, SingularPolicy::MinimumNorm);
  model.fitted_on = "global-wb";
  return model;
}

struct LocalBaseline {
  std::vector<WhiteBoxModel> models;  // one per object
  double mse = 0.0;
};

inline LocalBaseline fit_local_wb(const NeighborhoodSet& ns, const RidgeOptions& opt, unsigned threads = 1) {
  if (ns.size() == 0) throw InputError("local baseline on an empty object set");
  LocalBaseline out;
  out.models.resize(ns.size());
  std::vector<double> losses(ns.size());
  parallel_for(ns.size(), threads, [&](std::size_t o) {
    out.models[o] = solve_ridge(RidgeStats::of(ns.samples[o], ns.outputs[o]), opt, SingularPolicy::MinimumNorm);
    out.models[o].fitted_on = "local-wb " + std::to_string(o);
    losses[o] = sse(out.models[o], ns.samples[o], ns.outputs[o]);
  });
  out.mse = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(ns.size());
  return out;
}

// ---------------------------------------------------------------- F1

// Black-box output at each explained object (row 0 of its neighborhood).
inline Matrix object_outputs(const NeighborhoodSet& ns) {
  Matrix out(static_cast<Eigen::Index>(ns.size()), ns.classes());
  for (std::size_t o = 0; o < ns.size(); ++o) out.row(static_cast<Eigen::Index>(o)) = ns.outputs[o].row(0);
  return out;
}

inline Matrix surrogate_outputs(const std::vector<const WhiteBoxModel*>& model_of, const NeighborhoodSet& ns) {
  Matrix out(static_cast<Eigen::Index>(ns.size()), ns.classes());
  for (std::size_t o = 0; o < ns.size(); ++o)
    out.row(static_cast<Eigen::Index>(o)) = predict(*model_of.at(o), ns.samples[o].topRows(1));
  return out;
}

inline Matrix surrogate_outputs(const Partition& part, const NeighborhoodSet& ns) {
  std::vector<const WhiteBoxModel*> model_of(ns.size(), nullptr);
  for (const auto& s : part.subgroups)
    for (auto o : s.members) model_of.at(o) = &s.model;
  for (auto* m : model_of)
    if (!m) throw InvariantError("an explained object has no subgroup");
  return surrogate_outputs(model_of, ns);
}

inline Matrix surrogate_outputs(const WhiteBoxModel& model, const NeighborhoodSet& ns) {
  return surrogate_outputs(std::vector<const WhiteBoxModel*>(ns.size(), &model), ns);
}

inline Matrix surrogate_outputs(const std::vector<WhiteBoxModel>& per_object, const NeighborhoodSet& ns) {
  std::vector<const WhiteBoxModel*> model_of;
  for (const auto& m : per_object) model_of.push_back(&m);
  return surrogate_outputs(model_of, ns);
}

// Class at rank k (1 = most probable) of each row; ties by class index.
inline std::vector<std::size_t> rank_k_classes(const Matrix& P, std::size_t k) {
  if (k < 1 || static_cast<Eigen::Index>(k) > P.cols())
    throw InputError("rank " + std::to_string(k) + " outside 1.." + std::to_string(P.cols()));
  std::vector<std::size_t> out(static_cast<std::size_t>(P.rows()));
  std::vector<std::size_t> idx(static_cast<std::size_t>(P.cols()));
  for (Eigen::Index r = 0; r < P.rows(); ++r) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
      return P(r, static_cast<Eigen::Index>(a)) > P(r, static_cast<Eigen::Index>(b));
    });
    out[static_cast<std::size_t>(r)] = idx[k - 1];
  }
  return out;
}

// Support-weighted mean of per-class F1 with `truth` as ground truth; a class
// never predicted has precision 0.
inline double weighted_f1(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& pred,
                          std::size_t num_classes) {
  if (truth.size() != pred.size()) throw InputError("label vectors differ in length");
  if (truth.empty()) return 0.0;
  std::vector<double> tp(num_classes, 0.0), support(num_classes, 0.0), predicted(num_classes, 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || pred[i] >= num_classes) throw InputError("label out of range");
    support[truth[i]] += 1.0;
    predicted[pred[i]] += 1.0;
    if (truth[i] == pred[i]) tp[truth[i]] += 1.0;
  }
  double total = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (support[c] == 0.0) continue;
    const double denom = support[c] + predicted[c];
    total += support[c] * (denom > 0 ? 2.0 * tp[c] / denom : 0.0);
  }
  return total / static_cast<double>(truth.size());
}

inline double topk_f1(const Matrix& surrogate, const Matrix& blackbox, std::size_t k) {
  if (surrogate.rows() != blackbox.rows() || surrogate.cols() != blackbox.cols())
    throw InputError("surrogate and black-box outputs differ in shape");
  return weighted_f1(rank_k_classes(blackbox, k), rank_k_classes(surrogate, k),
                     static_cast<std::size_t>(blackbox.cols()));
}

// ---------------------------------------------------------------- elbow

// Knee of a decreasing convex curve: normalize both axes, flip y, take the
// difference to the diagonal and report the first local maximum whose
// threshold (sensitivity 1) is undercut before a new extremum. Absent for
// straight or knee-free curves.
inline std::optional<double> elbow(const std::vector<double>& x, const std::vector<double>& y,
                                   double sensitivity = 1.0) {
  const std::size_t n = x.size();
  if (n != y.size()) throw InputError("elbow: x and y differ in length");
  if (n < 3) throw InputError("elbow needs at least 3 points");
  for (std::size_t i = 1; i < n; ++i)
    if (!(x[i] > x[i - 1])) throw InputError("elbow: x must be strictly increasing");

  auto normalize = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    std::vector<double> out(v.size(), 0.0);
    const double range = *hi - *lo;
    if (range > 0)
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / range;
    return out;
  };
  const auto xn = normalize(x);
  const auto yn = normalize(y);
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = (1.0 - yn[i]) - xn[i];
    if (std::abs(d[i]) < 1e-12) d[i] = 0.0;
  }

  // Relative extrema with endpoints compared against themselves.
  auto at = [&](std::ptrdiff_t i) { return d[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1))]; };
  std::vector<bool> is_max(n), is_min(n);
  std::vector<std::size_t> maxima;
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::ptrdiff_t>(i);
    is_max[i] = d[i] >= at(s - 1) && d[i] >= at(s + 1);
    is_min[i] = d[i] <= at(s - 1) && d[i] <= at(s + 1);
    if (is_max[i]) maxima.push_back(i);
  }
  if (maxima.empty()) return std::nullopt;
  double step = 0.0;
  for (std::size_t i = 1; i < n; ++i) step += xn[i] - xn[i - 1];
  step = std::abs(step / static_cast<double>(n - 1));

  double threshold = 0.0;
  std::size_t threshold_index = 0;
  for (std::size_t i = maxima.front(); i + 1 < n; ++i) {
    if (is_max[i]) {
      threshold = d[i] - sensitivity * step;
      threshold_index = i;
    }
    if (is_min[i]) threshold = 0.0;
    if (d[i + 1] < threshold) return x[threshold_index];
  }
  return std::nullopt;
}

inline std::optional<std::size_t> elbow(const std::vector<CurvePoint>& curve) {
  std::vector<double> x, y;
  for (const auto& p : curve) {
    x.push_back(static_cast<double>(p.K));
    y.push_back(p.loss);
  }
  const auto k = elbow(x, y);
  if (!k) return std::nullopt;
  return static_cast<std::size_t>(*k);
}

// ---------------------------------------------------------------- diversity

struct FiveNumber {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline FiveNumber five_number(const std::vector<double>& v) {
  return {quantile(v, 0.0), quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75), quantile(v, 1.0)};
}

struct DiversityReport {
  Matrix cosine;  // NaN where a model has a zero coefficient vector
  double threshold = 0.4;
  std::size_t pairs = 0;      // unordered pairs with a defined cosine
  std::size_t undefined = 0;  // pairs involving a zero vector
  std::size_t below = 0;      // defined pairs with |cos| <= threshold
  double fraction_below = 0.0;
  std::vector<std::size_t> sizes;
  FiveNumber size_summary;
};

// Cosine between coefficient vectors: one class row, or every row
// concatenated when class_index is absent.
inline DiversityReport diversity(const std::vector<const WhiteBoxModel*>& models, std::optional<std::size_t> class_index,
                                 double threshold, const std::vector<std::size_t>& sizes = {}) {
  if (models.size() < 2) throw InputError("diversity needs at least 2 models");
  std::vector<Vector> vecs;
  for (const auto* m : models) {
    if (class_index) {
      if (static_cast<Eigen::Index>(*class_index) >= m->classes()) throw InputError("class index out of range");
      vecs.emplace_back(m->coefficients.row(static_cast<Eigen::Index>(*class_index)).transpose());
    } else {
      const Matrix t = m->coefficients.transpose();  // column-major: rows laid end to end
      vecs.emplace_back(Eigen::Map<const Vector>(t.data(), t.size()));
    }
  }
  DiversityReport rep;
  rep.threshold = threshold;
  const auto k = static_cast<Eigen::Index>(vecs.size());
  rep.cosine = Matrix::Constant(k, k, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a; b < k; ++b) {
      const auto& u = vecs[static_cast<std::size_t>(a)];
      const auto& v = vecs[static_cast<std::size_t>(b)];
      if (u.size() != v.size()) throw InputError("models of different width");
      const double nu = u.norm(), nv = v.norm();
      const bool defined = nu > 0 && nv > 0;
      const double c = defined ? (a == b ? 1.0 : std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0))
                               : std::numeric_limits<double>::quiet_NaN();
      rep.cosine(a, b) = rep.cosine(b, a) = c;
      if (a == b) continue;
      if (!defined) {
        ++rep.undefined;
        continue;
      }
      ++rep.pairs;
      if (std::abs(c) <= threshold) ++rep.below;
    }
  }
  rep.fraction_below = rep.pairs ? static_cast<double>(rep.below) / static_cast<double>(rep.pairs) : 0.0;
  rep.sizes = sizes;
  std::vector<double> sz(sizes.begin(), sizes.end());
  rep.size_summary = five_number(sz);
  return rep;
}

inline DiversityReport diversity(const Partition& part, std::optional<std::size_t> class_index, double threshold) {
  std::vector<const WhiteBoxModel*> models;
  std::vector<std::size_t> sizes;
  for (const auto& s : part.subgroups) {
    models.push_back(&s.model);
    sizes.push_back(s.members.size());
  }
  return diversity(models, class_index, threshold, sizes);
}

// ---------------------------------------------------------------- report

struct FidelityReport {
  std::string tag;
  double mse = 0.0;
  double mse_normalized = 0.0;
  std::vector<std::pair<std::size_t, double>> f1_by_rank;
};

inline FidelityReport fidelity(std::string tag, double mse_value, const Matrix& surrogate, const NeighborhoodSet& ns,
                               std::size_t max_rank = 3) {
  FidelityReport rep{std::move(tag), mse_value, normalized_mse(mse_value, ns), {}};
  const Matrix bb = object_outputs(ns);
  const std::size_t ranks = std::min<std::size_t>(max_rank, static_cast<std::size_t>(bb.cols()));
  for (std::size_t k = 1; k <= ranks; ++k) rep.f1_by_rank.emplace_back(k, topk_f1(surrogate, bb, k));
  return rep;
}

inline json fidelity_to_json(const FidelityReport& f) {
  json ranks = json::array();
  for (const auto& [k, v] : f.f1_by_rank) ranks.push_back({{"rank", k}, {"f1", v}});
  return {{"tag", f.tag}, {"mse", f.mse}, {"mse_normalized", f.mse_normalized}, {"f1_by_rank", ranks}};
}

inline json diversity_to_json(const DiversityReport& d) {
  json matrix = json::array();
  for (Eigen::Index a = 0; a < d.cosine.rows(); ++a) {
    json row = json::array();
    for (Eigen::Index b = 0; b < d.cosine.cols(); ++b)
      row.push_back(std::isnan(d.cosine(a, b)) ? json(nullptr) : json(d.cosine(a, b)));
    matrix.push_back(std::move(row));
  }
  const auto& s = d.size_summary;
  return {{"threshold", d.threshold},
          {"pairs", d.pairs},
          {"undefined_pairs", d.undefined},
          {"pairs_below", d.below},
          {"fraction_below", d.fraction_below},
          {"cosine", matrix},
          {"sizes", d.sizes},
          {"size_summary", {{"min", s.min}, {"q1", s.q1}, {"median", s.median}, {"q3", s.q3}, {"max", s.max}}}};
}

struct ReportInputs {
  const Partition* partition = nullptr;
  const Dataset* data = nullptr;
  const EncodedMatrix* encoded = nullptr;
  const NeighborhoodSet* neighborhoods = nullptr;
  std::vector<FidelityReport> fidelity;
  std::vector<CurvePoint> curve;
  std::optional<std::size_t> elbow;
  std::optional<DiversityReport> diversity;
  std::size_t top_m = 5;
};

struct Report {
  json document;
  std::string markdown;
};

namespace detail {

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline std::string md_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|' || c == '*' || c == '_') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace detail

inline Report make_report(const ReportInputs& in) {
  const auto& part = *in.partition;
  const auto& data = *in.data;
  const auto& ns = *in.neighborhoods;
  const auto columns = in.encoded->column_names();
  const auto& classes = data.schema.classes;
  const Matrix bb = object_outputs(ns);
  const auto bb_top = rank_k_classes(bb, 1);

  Report rep;
  std::ostringstream md;
  md << "# Subgroup explanation report\n\n";
  md << "Objects explained: " << data.size() << "  \nSubgroups: " << part.subgroups.size() << " (budget " << part.K
     << ")  \nGlobal loss: " << format_number(part.global_loss()) << "\n\n";

  json groups = json::array();
  for (const auto& s : part.subgroups) {
    std::vector<std::size_t> votes(classes.size(), 0);
    for (auto o : s.members) ++votes[bb_top[o]];
    const auto dominant = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    const double share = static_cast<double>(votes[dominant]) / static_cast<double>(s.members.size());
    const auto imp = feature_importance(s.model, dominant);
    const std::string split_text = render(s.pattern, data.schema);
    const std::string closed_text = render_closed(s.pattern, data, s.members);

    groups.push_back({{"id", s.id},
                      {"size", s.members.size()},
                      {"pattern", split_text},
                      {"pattern_closed", closed_text},
                      {"loss", s.loss},
                      {"dominant_class", classes[dominant]},
                      {"dominant_share", share},
                      {"top_features", importance_to_json(imp, columns, in.top_m)["features"]}});

    md << "## Subgroup " << s.id << "\n\n";
    md << "- Pattern: `" << split_text << "`\n";
    md << "- Closed pattern: `" << closed_text << "`\n";
    md << "- Size: " << s.members.size() << "\n";
    md << "- Dominant black-box class: " << detail::md_escape(classes[dominant]) << " (" << detail::fixed(100 * share, 1)
       << "%)\n";
    md << "- Loss: " << format_number(s.loss) << "\n\n";
    if (imp.features.empty()) {
      md << imp.note << "\n\n";
    } else {
      md << "| Feature | Coefficient | Importance |\n|---|---:|---:|\n";
      for (std::size_t i = 0; i < imp.features.size() && i < in.top_m; ++i) {
        const auto& f = imp.features[i];
        md << "| " << detail::md_escape(columns[f.column]) << " | " << detail::fixed(f.coefficient) << " | "
           << detail::fixed(f.ratio) << " |\n";
      }
      md << "\n";
    }
  }
  rep.document["subgroups"] = groups;

  if (!in.fidelity.empty()) {
    json fid = json::array();
    md << "## Fidelity\n\n| Model | MSE | MSE per sample and class |";
    for (const auto& [k, _] : in.fidelity.front().f1_by_rank) md << " F1 top" << k << " |";
    md << "\n|---|---:|---:|";
    for (std::size_t i = 0; i < in.fidelity.front().f1_by_rank.size(); ++i) md << "---:|";
    md << "\n";
    for (const auto& f : in.fidelity) {
      fid.push_back(fidelity_to_json(f));
      md << "| " << f.tag << " | " << format_number(f.mse) << " | " << format_number(f.mse_normalized) << " |";
      for (const auto& [k, v] : f.f1_by_rank) md << " " << detail::fixed(v) << " |";
      md << "\n";
    }
    md << "\n";
    rep.document["fidelity"] = fid;
  }

  if (!in.curve.empty()) {
    json curve = json::array();
    md << "## Loss curve\n\n| K | Loss |\n|---:|---:|\n";
    for (const auto& p : in.curve) {
      curve.push_back({{"K", p.K}, {"loss", p.loss}, {"reached", p.reached}});
      md << "| " << p.K << (in.elbow && *in.elbow == p.K ? " (elbow)" : "") << " | " << format_number(p.loss)
         << (p.reached ? "" : " (stopped)") << " |\n";
    }
    md << "\n";
    rep.document["curve"] = curve;
  }
  rep.document["elbow"] = in.elbow ? json(*in.elbow) : json(nullptr);
  if (in.curve.size() >= 3) md << "Elbow: " << (in.elbow ? std::to_string(*in.elbow) : "none") << "\n\n";

  if (in.diversity) {
    const auto& d = *in.diversity;
    rep.document["diversity"] = diversity_to_json(d);
    md << "## Diversity\n\n";
    md << "Pairs with |cos| <= " << format_number(d.threshold) << ": " << d.below << " of " << d.pairs << " ("
       << detail::fixed(100 * d.fraction_below, 1) << "%)";
    if (d.undefined) md << "; " << d.undefined << " pairs undefined (zero coefficients)";
    md << "  \nSubgroup sizes: min " << format_number(d.size_summary.min) << ", q1 " << format_number(d.size_summary.q1)
       << ", median " << format_number(d.size_summary.median) << ", q3 " << format_number(d.size_summary.q3) << ", max "
       << format_number(d.size_summary.max) << "\n";
  } else {
    md << "## Diversity\n\nNot available (fewer than 2 subgroups).\n";
  }
  rep.document["config"] = part.config;
  rep.markdown = md.str();
  return rep;
}

}  // namespace sd4x
