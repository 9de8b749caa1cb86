// sd4x: synth | featurize | explain | eval | predict-batch

#include "sd4x/sd4x.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <set>

namespace fs = std::filesystem;
using namespace sd4x;

namespace {

// ---------------------------------------------------------------- config

struct RunConfig {
  std::string data;
  std::string schema;
  std::string blackbox;  // linear:PATH | external:COMMAND | synthetic:PATH
  std::string select = "all";
  std::size_t K = 10;
  double z = 10.0;
  std::size_t n_synth = 250;
  double lambda = 1.0;
  std::size_t min_support = 2;
  bool standardize = false;
  std::vector<std::string> split_columns;  // names, or a single "all" / "non-text"
  std::uint64_t seed = 0;
  std::size_t top_features = 5;
  double diversity_threshold = 0.4;
  std::string diversity_class = "all";
  std::uint64_t timeout_ms = 60000;
  std::string out = "sd4x-out";
  std::string cache;
  std::optional<unsigned> threads;

  // Everything that determines the result; threads, paths for output and the
  // cache location are excluded so dumps compare across machines and runs.
  json echo() const {
    return {{"data", data},
            {"schema", schema},
            {"blackbox", blackbox},
            {"select", select},
            {"K", K},
            {"z", z},
            {"n_synth", n_synth},
            {"lambda", lambda},
            {"min_support", min_support},
            {"standardize", standardize},
            {"split_columns", split_columns},
            {"seed", seed},
            {"top_features", top_features},
            {"diversity_threshold", diversity_threshold},
            {"diversity_class", diversity_class}};
  }
};

template <class T>
void take(const json& doc, const char* key, T& slot) {
  if (!doc.contains(key) || doc.at(key).is_null()) return;
  try {
    slot = doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string("config field '") + key + "': " + e.what());
  }
}

RunConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw InputError("config must be a JSON object");
  static const std::set<std::string> known{
      "data",        "schema",       "blackbox",      "select",         "K",
      "z",           "n_synth",      "lambda",        "min_support",    "standardize",
      "split_columns", "seed",       "top_features",  "diversity_threshold", "diversity_class",
      "timeout_ms",  "out",          "cache",         "threads",        "data_hash"};
  for (const auto& [key, _] : doc.items())
    if (!known.count(key)) throw InputError("config: unknown field '" + key + "'");
  RunConfig c;
  take(doc, "data", c.data);
  take(doc, "schema", c.schema);
  take(doc, "blackbox", c.blackbox);
  take(doc, "select", c.select);
  take(doc, "K", c.K);
  take(doc, "z", c.z);
  take(doc, "n_synth", c.n_synth);
  take(doc, "lambda", c.lambda);
  take(doc, "min_support", c.min_support);
  take(doc, "standardize", c.standardize);
  if (doc.contains("split_columns") && doc.at("split_columns").is_string())
    c.split_columns = {doc.at("split_columns").get<std::string>()};
  else
    take(doc, "split_columns", c.split_columns);
  take(doc, "seed", c.seed);
  take(doc, "top_features", c.top_features);
  take(doc, "diversity_threshold", c.diversity_threshold);
  take(doc, "diversity_class", c.diversity_class);
  take(doc, "timeout_ms", c.timeout_ms);
  take(doc, "out", c.out);
  take(doc, "cache", c.cache);
  if (doc.contains("threads") && !doc.at("threads").is_null()) c.threads = doc.at("threads").get<unsigned>();
  return c;
}

void validate(const RunConfig& c) {
  if (c.data.empty()) throw InputError("no data file given (--data)");
  if (c.schema.empty()) throw InputError("no schema file given (--schema)");
  if (c.blackbox.empty()) throw InputError("no black box given (--blackbox)");
  if (c.K < 1) throw InputError("K must be at least 1");
  if (!(c.z >= 1.0)) throw InputError("z must be at least 1");
  if (!(c.lambda >= 0.0)) throw InputError("lambda must be >= 0");
  if (c.top_features < 1) throw InputError("top_features must be at least 1");
}

// Flags registered on a subcommand; any flag given on the command line wins
// over the config file.
struct RunFlags {
  std::string config;
  RunConfig values;
  std::vector<CLI::Option*> given;
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App* app) {
    auto& v = values;
    app->add_option("--config", config, "JSON run configuration")->check(CLI::ExistingFile);
    opts["data"] = app->add_option("--data", v.data, "dataset CSV");
    opts["schema"] = app->add_option("--schema", v.schema, "schema JSON");
    opts["blackbox"] = app->add_option("--blackbox", v.blackbox, "linear:PATH | external:COMMAND | synthetic:PATH");
    opts["select"] = app->add_option("--select", v.select, "objects to explain: all | label:NAME | sample:N");
    opts["K"] = app->add_option("-K,--K", v.K, "subgroup budget");
    opts["z"] = app->add_option("--z", v.z, "covariance shrink factor (>= 1)");
    opts["n_synth"] = app->add_option("--n-synth", v.n_synth, "synthetic neighbors per object");
    opts["lambda"] = app->add_option("--lambda", v.lambda, "ridge penalty");
    opts["min_support"] = app->add_option("--min-support", v.min_support, "minimum objects per child");
    opts["standardize"] = app->add_flag("--standardize", v.standardize, "penalize standardized coefficients");
    opts["split_columns"] =
        app->add_option("--split-columns", v.split_columns, "columns allowed in splits (names, all, non-text)")
            ->delimiter(',');
    opts["seed"] = app->add_option("--seed", v.seed, "random seed");
    opts["top_features"] = app->add_option("--top-features", v.top_features, "features listed per subgroup");
    opts["diversity_threshold"] = app->add_option("--diversity-threshold", v.diversity_threshold, "cosine threshold");
    opts["diversity_class"] = app->add_option("--diversity-class", v.diversity_class, "class name or all");
    opts["timeout_ms"] = app->add_option("--timeout-ms", v.timeout_ms, "external black box timeout");
    opts["out"] = app->add_option("--out", v.out, "output directory");
    opts["cache"] = app->add_option("--cache", v.cache, "neighborhood cache file");
    opts["threads"] = app->add_option("--threads", v.threads, "worker threads (default SD4X_THREADS or all cores)");
    for (auto& [name, opt] : opts)
      if (name != "split_columns") opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }

  RunConfig resolve(const json& base = json::object()) const {
    json doc = base;
    if (!config.empty()) doc.update(read_json_file(config));
    RunConfig c = config_from_json(doc);
    auto set = [&](const char* key, auto member) {
      if (opts.at(key)->count() > 0) c.*member = values.*member;
    };
    set("data", &RunConfig::data);
    set("schema", &RunConfig::schema);
    set("blackbox", &RunConfig::blackbox);
    set("select", &RunConfig::select);
    set("K", &RunConfig::K);
    set("z", &RunConfig::z);
    set("n_synth", &RunConfig::n_synth);
    set("lambda", &RunConfig::lambda);
    set("min_support", &RunConfig::min_support);
    set("standardize", &RunConfig::standardize);
    set("split_columns", &RunConfig::split_columns);
    set("seed", &RunConfig::seed);
    set("top_features", &RunConfig::top_features);
    set("diversity_threshold", &RunConfig::diversity_threshold);
    set("diversity_class", &RunConfig::diversity_class);
    set("timeout_ms", &RunConfig::timeout_ms);
    set("out", &RunConfig::out);
    set("cache", &RunConfig::cache);
    set("threads", &RunConfig::threads);
    validate(c);
    return c;
  }
};

// ---------------------------------------------------------------- run setup

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

std::unique_ptr<BlackBox> make_blackbox(const RunConfig& c, const EncodedMatrix& em, const Schema& schema) {
  const auto colon = c.blackbox.find(':');
  if (colon == std::string::npos) throw InputError("black box must be linear:PATH, external:COMMAND or synthetic:PATH");
  const std::string kind = c.blackbox.substr(0, colon);
  const std::string arg = c.blackbox.substr(colon + 1);
  const auto names = em.column_names();
  std::unique_ptr<BlackBox> bb;
  if (kind == "linear") {
    auto lin = load_linear_blackbox(arg);
    bb = std::make_unique<LinearBlackBox>(lin.columns().empty() ? lin : lin.bind(names));
  } else if (kind == "synthetic") {
    auto oracle = synthetic_oracle_from_json(read_json_file(arg));
    if (oracle.columns() != names)
      throw InputError("synthetic black box columns do not match the encoded dataset columns");
    bb = std::make_unique<SyntheticOracle>(std::move(oracle));
  } else if (kind == "external") {
    ExternalAdapter a;
    a.command = arg;
    a.columns = names;
    a.classes = schema.classes;
    a.timeout = std::chrono::milliseconds(c.timeout_ms);
    bb = std::make_unique<ExternalBlackBox>(std::move(a));
  } else {
    throw InputError("unknown black box kind '" + kind + "'");
  }
  if (bb->classes() != schema.classes) throw InputError("black box classes do not match the schema classes");
  if (bb->input_width() != static_cast<std::size_t>(em.cols())) throw WidthMismatch(bb->input_width(), em.cols());
  return bb;
}

std::vector<std::size_t> select_objects(const RunConfig& c, const Dataset& ds) {
  std::vector<std::size_t> rows;
  if (c.select == "all") {
    rows.resize(ds.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  } else if (c.select.rfind("label:", 0) == 0) {
    if (!ds.has_labels()) throw InputError("select " + c.select + ": the dataset has no class column");
    const std::string label = c.select.substr(6);
    for (std::size_t r = 0; r < ds.size(); ++r)
      if (ds.labels[r] == label) rows.push_back(r);
  } else if (c.select.rfind("sample:", 0) == 0) {
    const auto n = parse_number(c.select.substr(7));
    if (!n || *n < 1 || *n != std::floor(*n)) throw InputError("select " + c.select + ": expected a positive count");
    rows.resize(ds.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    auto rng = make_stream(c.seed, 0x5e1ec7ull);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(std::min(rows.size(), static_cast<std::size_t>(*n)));
    std::sort(rows.begin(), rows.end());
  } else {
    throw InputError("select must be all, label:NAME or sample:N");
  }
  if (rows.empty()) throw InputError("select " + c.select + " matches no objects");
  return rows;
}

std::vector<std::size_t> split_column_indices(const RunConfig& c, const EncodedMatrix& em) {
  std::vector<std::size_t> out;
  if (c.split_columns.empty() || (c.split_columns.size() == 1 && c.split_columns[0] == "all")) return out;
  if (c.split_columns.size() == 1 && c.split_columns[0] == "non-text") {
    for (std::size_t j = 0; j < em.columns.size(); ++j)
      if (em.columns[j].origin != "tfidf") out.push_back(j);
    if (out.empty()) throw InputError("split columns: every column is a text feature");
    return out;
  }
  for (const auto& name : c.split_columns) {
    bool found = false;
    for (std::size_t j = 0; j < em.columns.size(); ++j) {
      // A nominal attribute name selects all of its one-hot columns.
      const auto& col = em.columns[j];
      if (col.name == name || (col.kind == ColumnKind::OneHot && name == col.name.substr(0, col.name.rfind('_')))) {
        out.push_back(j);
        found = true;
      }
    }
    if (!found) throw InputError("split columns: unknown column '" + name + "'");
  }
  return out;
}

struct Prepared {
  Dataset full;
  Dataset explained;
  std::vector<std::size_t> rows;
  EncodedMatrix encoded;
  std::unique_ptr<BlackBox> bb;
  NeighborhoodSet ns;
  std::string data_hash;
  unsigned threads = 1;
};

Prepared prepare(const RunConfig& c) {
  Prepared p;
  p.threads = resolve_threads(c.threads);
  p.full = load_dataset(c.data, c.schema);
  const auto h = fnv1a(read_bytes(c.schema), fnv1a(read_bytes(c.data)));
  p.data_hash = hex64(h);
  p.rows = select_objects(c, p.full);
  p.explained = p.full.subset(p.rows);
  const auto full_encoded = encode(p.full);
  p.encoded = encode(p.explained);
  p.bb = make_blackbox(c, p.encoded, p.full.schema);

  const NeighborhoodParams params{c.z, c.n_synth, c.seed};
  const NeighborhoodCacheKey key{fnv1a(c.select, h), fnv1a(p.bb->fingerprint()), c.seed, c.z, c.n_synth};
  if (!c.cache.empty())
    if (auto cached = load_neighborhoods(c.cache, key)) {
      p.ns = std::move(*cached);
      return p;
    }
  // Covariance comes from the whole dataset, not only the explained objects.
  const auto cov = full_encoded.rows() >= 2 ? std::optional<Matrix>(estimate_covariance(full_encoded.values).covariance)
                                            : std::nullopt;
  p.ns = generate_neighborhoods(p.encoded, params, p.threads, cov);
  label_neighborhoods(p.ns, *p.bb);
  if (!c.cache.empty()) save_neighborhoods(c.cache, p.ns, key);
  return p;
}

SplitterConfig splitter_config(const RunConfig& c, const Prepared& p) {
  SplitterConfig s;
  s.K = c.K;
  s.lambda = c.lambda;
  s.min_support = c.min_support;
  s.standardize = c.standardize;
  s.split_columns = split_column_indices(c, p.encoded);
  s.threads = p.threads;
  s.top_features = c.top_features;
  return s;
}

std::optional<std::size_t> diversity_class(const RunConfig& c, const Schema& schema) {
  if (c.diversity_class == "all") return std::nullopt;
  const auto idx = schema.class_index(c.diversity_class);
  if (!idx) throw InputError("diversity class '" + c.diversity_class + "' is not a schema class");
  return *idx;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "K,loss,reached\n";
  for (const auto& p : curve) out += std::to_string(p.K) + "," + format_number(p.loss) + "," + (p.reached ? "1" : "0") + "\n";
  return out;
}

std::vector<CurvePoint> read_curve_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  const auto records = csv::read(in);
  std::vector<CurvePoint> out;
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() < 2) throw InputError(path.string() + ": malformed row " + std::to_string(r));
    const auto k = parse_number(records[r][0]);
    const auto loss = parse_number(records[r][1]);
    if (!k || !loss) throw InputError(path.string() + ": malformed row " + std::to_string(r));
    out.push_back({static_cast<std::size_t>(*k), *loss, records[r].size() < 3 || records[r][2] != "0"});
  }
  return out;
}

// ---------------------------------------------------------------- commands

int cmd_synth(const std::string& spec_path, std::uint64_t seed, const fs::path& out) {
  const auto spec = synth_spec_from_json(read_json_file(spec_path));
  const auto data = generate_synthetic(spec, seed);
  fs::create_directories(out);
  {
    std::ofstream f(out / "data.csv", std::ios::binary);
    write_dataset(f, data.dataset);
  }
  write_json(out / "schema.json", schema_to_json(data.dataset.schema));
  write_json(out / "blackbox.json", data.oracle->to_json());
  json regimes = json::array();
  std::vector<std::size_t> counts(data.oracle->regimes().size(), 0);
  for (auto r : data.regimes) ++counts[r];
  const auto& columns = data.oracle->columns();
  for (std::size_t r = 0; r < data.oracle->regimes().size(); ++r) {
    const auto& reg = data.oracle->regimes()[r];
    json conds = json::array();
    for (const auto& cnd : reg.conditions)
      conds.push_back({{"attribute", columns[cnd.column]}, {"op", cnd.less_equal ? "le" : "gt"}, {"value", cnd.value}});
    regimes.push_back({{"index", r}, {"name", reg.name}, {"when", conds}, {"count", counts[r]}});
  }
  write_json(out / "ground_truth.json", {{"seed", seed}, {"regimes", regimes}, {"assignments", data.regimes}});
  std::cout << "wrote " << data.dataset.size() << " objects and " << regimes.size() << " regimes to " << out.string()
            << "\n";
  return 0;
}

int cmd_featurize(const std::string& data_path, const std::string& schema_path, const std::vector<std::string>& fields,
                  std::size_t top_n, const std::string& stopwords_path, std::size_t min_token_len, const fs::path& out) {
  if (top_n < 1) throw InputError("top-n must be at least 1");
  const auto ds = load_dataset(data_path, schema_path, true);
  std::unordered_set<std::string> stopwords;
  if (!stopwords_path.empty()) {
    std::istringstream in(read_bytes(stopwords_path));
    for (std::string w; in >> w;) stopwords.insert(w);
  }
  std::vector<std::size_t> text_attrs;
  for (const auto& name : fields) {
    const auto idx = ds.schema.find(name);
    if (!idx) throw InputError("featurize: unknown attribute '" + name + "'");
    if (ds.schema[*idx].kind.kind != Kind::Text) throw InputError("featurize: '" + name + "' is not a text attribute");
    text_attrs.push_back(*idx);
  }
  if (text_attrs.empty()) throw InputError("featurize: no text columns given");

  json schema_doc = schema_to_json(ds.schema);
  json attrs = json::array();
  for (std::size_t i = 0; i < ds.schema.size(); ++i)
    if (std::find(text_attrs.begin(), text_attrs.end(), i) == text_attrs.end())
      attrs.push_back(schema_doc["attributes"][i]);
  std::vector<std::vector<Value>> extra(ds.size());
  json vocabulary = json::object();
  for (auto i : text_attrs) {
    std::vector<std::string> docs;
    for (const auto& row : ds.rows) docs.push_back(std::get<std::string>(row[i]));
    const auto& name = ds.schema[i].name;
    const auto tf = featurize_text(docs, top_n, stopwords, min_token_len, name + "_");
    vocabulary[name] = tf.vocabulary;
    for (const auto& col : tf.matrix.columns) {
      if (ds.schema.find(col.name)) throw InputError("featurize: column '" + col.name + "' already exists");
      attrs.push_back({{"name", col.name}, {"kind", "numeric"}, {"origin", "tfidf"}});
    }
    for (std::size_t r = 0; r < ds.size(); ++r)
      for (Eigen::Index j = 0; j < tf.matrix.values.cols(); ++j)
        extra[r].emplace_back(tf.matrix.values(static_cast<Eigen::Index>(r), j));
  }
  schema_doc["attributes"] = attrs;
  Dataset outds;
  outds.schema = schema_from_json(schema_doc);
  outds.labels = ds.labels;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    Row row;
    for (std::size_t i = 0; i < ds.schema.size(); ++i)
      if (std::find(text_attrs.begin(), text_attrs.end(), i) == text_attrs.end()) row.push_back(ds.rows[r][i]);
    row.insert(row.end(), extra[r].begin(), extra[r].end());
    outds.rows.push_back(std::move(row));
  }
  fs::create_directories(out);
  {
    std::ofstream f(out / "data.csv", std::ios::binary);
    write_dataset(f, outds);
  }
  write_json(out / "schema.json", schema_doc);
  write_json(out / "vocabulary.json", vocabulary);
  std::cout << "wrote " << outds.schema.size() << " attributes to " << out.string() << "\n";
  return 0;
}

int cmd_explain(const RunConfig& c) {
  auto p = prepare(c);
  const auto cfg = splitter_config(c, p);
  auto part = run(p.explained, p.encoded, p.ns, cfg);
  part.object_ids = p.rows;
  part.config = c.echo();
  part.config["data_hash"] = p.data_hash;

  const fs::path out = c.out;
  fs::create_directories(out);
  write_json(out / "partition.json", partition_to_json(part, p.explained, p.encoded, c.top_features));
  const auto curve = loss_curve(part, c.K);
  write_text(out / "curve.csv", curve_csv(curve));

  ReportInputs in;
  in.partition = &part;
  in.data = &p.explained;
  in.encoded = &p.encoded;
  in.neighborhoods = &p.ns;
  in.top_m = c.top_features;
  in.fidelity.push_back(
      fidelity("splitsd4x(K=" + std::to_string(part.subgroups.size()) + ")", mse(part, p.ns), surrogate_outputs(part, p.ns), p.ns));
  in.curve = curve;
  if (curve.size() >= 3) in.elbow = elbow(curve);
  if (part.subgroups.size() >= 2) in.diversity = diversity(part, diversity_class(c, p.full.schema), c.diversity_threshold);
  const auto rep = make_report(in);
  write_json(out / "report.json", rep.document);
  write_text(out / "report.md", rep.markdown);
  std::cout << part.subgroups.size() << " subgroups, global loss " << format_number(part.global_loss())
            << (part.improve ? "" : " (stopped: no improving split)") << "; wrote " << out.string() << "\n";
  return 0;
}

int cmd_eval(const fs::path& partition_path, const RunFlags& flags) {
  const json dump = read_json_file(partition_path);
  json base = dump.value("config", json::object());
  base.erase("data_hash");
  const RunConfig c = flags.resolve(base);
  auto p = prepare(c);
  const auto part = partition_from_json(dump, p.explained, p.rows);
  check_partition(part, p.explained);
  const RidgeOptions opt{c.lambda, true, c.standardize};

  const auto global = fit_global_wb(p.ns, opt);
  const auto local = fit_local_wb(p.ns, opt, p.threads);
  std::vector<FidelityReport> fid;
  fid.push_back(fidelity("splitsd4x(K=" + std::to_string(part.subgroups.size()) + ")", mse(part, p.ns),
                         surrogate_outputs(part, p.ns), p.ns));
  fid.push_back(fidelity("global-wb", mse(global, p.ns), surrogate_outputs(global, p.ns), p.ns));
  fid.push_back(fidelity("local-wb", local.mse, surrogate_outputs(local.models, p.ns), p.ns));

  const fs::path curve_path = partition_path.parent_path() / "curve.csv";
  const auto curve = fs::exists(curve_path) ? read_curve_csv(curve_path) : loss_curve(part, part.K);
  ReportInputs in;
  in.partition = &part;
  in.data = &p.explained;
  in.encoded = &p.encoded;
  in.neighborhoods = &p.ns;
  in.top_m = c.top_features;
  in.fidelity = fid;
  in.curve = curve;
  if (curve.size() >= 3) in.elbow = elbow(curve);
  if (part.subgroups.size() >= 2) in.diversity = diversity(part, diversity_class(c, p.full.schema), c.diversity_threshold);
  auto rep = make_report(in);
  rep.document["config"] = c.echo();
  rep.document["config"]["data_hash"] = p.data_hash;

  const fs::path out = c.out;
  fs::create_directories(out);
  write_json(out / "eval.json", rep.document);
  write_text(out / "eval.md", rep.markdown);
  for (const auto& f : fid) std::cout << f.tag << ": MSE " << format_number(f.mse) << "\n";
  return 0;
}

// External black box protocol: reads DIR/request.csv, writes DIR/response.csv.
int cmd_predict_batch(const std::string& model_path, const fs::path& dir) {
  const auto bb = load_linear_blackbox(model_path);
  std::vector<std::string> columns = bb.columns();
  if (columns.empty()) {
    std::ifstream in(dir / "request.csv", std::ios::binary);
    const auto records = csv::read(in);
    if (records.empty()) throw InputError("request.csv has no header");
    columns = records.front();
  }
  const Matrix X = read_matrix_csv(dir / "request.csv", columns);
  write_matrix_csv(dir / "response.csv", bb.classes(), bb.predict_batch(X));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Summarize black-box explanations with subgroup discovery"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-regime dataset and its black box");
  std::string spec_path, synth_out = "synth";
  std::uint64_t synth_seed = 0;
  synth->add_option("--spec", spec_path, "synthetic spec JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--seed", synth_seed, "random seed");
  synth->add_option("--out", synth_out, "output directory");

  auto* feat = app.add_subcommand("featurize", "replace text attributes by tf-idf columns");
  std::string f_data, f_schema, f_stop, f_out = "featurized";
  std::vector<std::string> f_fields;
  std::size_t f_top = 50, f_min_len = 2;
  feat->add_option("--data", f_data, "dataset CSV")->required();
  feat->add_option("--schema", f_schema, "schema JSON")->required();
  feat->add_option("--text-columns", f_fields, "text attributes to featurize")->required()->delimiter(',');
  feat->add_option("--top-n", f_top, "terms kept per field");
  feat->add_option("--stopwords", f_stop, "whitespace-separated stopword file");
  feat->add_option("--min-token-len", f_min_len, "minimum token length in characters");
  feat->add_option("--out", f_out, "output directory");

  auto* explain = app.add_subcommand("explain", "run the subgroup search and write partition and report");
  RunFlags explain_flags;
  explain_flags.add(explain);

  auto* eval = app.add_subcommand("eval", "fidelity, baselines, elbow and diversity of a partition");
  RunFlags eval_flags;
  std::string partition_path;
  eval->add_option("partition", partition_path, "partition.json written by explain")->required();
  eval_flags.add(eval);

  auto* predict = app.add_subcommand("predict-batch", "answer an external black box request with a linear model");
  std::string model_path, request_dir;
  predict->add_option("model", model_path, "linear model JSON")->required();
  predict->add_option("dir", request_dir, "directory holding request.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) return cmd_synth(spec_path, synth_seed, synth_out);
    if (*feat) return cmd_featurize(f_data, f_schema, f_fields, f_top, f_stop, f_min_len, f_out);
    if (*explain) return cmd_explain(explain_flags.resolve());
    if (*eval) return cmd_eval(partition_path, eval_flags);
    if (*predict) return cmd_predict_batch(model_path, request_dir);
  } catch (const ExternalError& e) {
    std::cerr << "error: external black box: " << e.what() << "\n";
    return 3;
  } catch (const InvariantError& e) {
    std::cerr << "error: invariant violated: " << e.what() << "\n";
    return 1;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
