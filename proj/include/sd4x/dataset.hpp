#pragma once

// Unified dataset (objects x typed attributes x class labels), its CSV/JSON
// file formats, and the reversible numeric encoding used by every numerical
// stage downstream.

#include "sd4x/common.hpp"
#include "sd4x/csv.hpp"
#include "sd4x/error.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace sd4x {

using json = nlohmann::json;

enum class Kind { Numeric, Ordinal, Nominal, Boolean, Text };

inline std::string kind_name(Kind k) {
  switch (k) {
    case Kind::Numeric: return "numeric";
    case Kind::Ordinal: return "ordinal";
    case Kind::Nominal: return "nominal";
    case Kind::Boolean: return "boolean";
    case Kind::Text: return "text";
  }
  return "?";
}

inline Kind parse_kind(const std::string& s) {
  if (s == "numeric") return Kind::Numeric;
  if (s == "ordinal") return Kind::Ordinal;
  if (s == "nominal") return Kind::Nominal;
  if (s == "boolean") return Kind::Boolean;
  if (s == "text") return Kind::Text;
  throw InputError("unknown attribute kind '" + s + "'");
}

struct AttributeKind {
  Kind kind = Kind::Numeric;
  // Ordinal: ascending order, significant. Nominal: declared order, used only
  // for deterministic output.
  std::vector<std::string> categories;

  static AttributeKind numeric() { return {Kind::Numeric, {}}; }
  static AttributeKind boolean() { return {Kind::Boolean, {}}; }
  static AttributeKind text() { return {Kind::Text, {}}; }
  static AttributeKind ordinal(std::vector<std::string> levels) { return {Kind::Ordinal, std::move(levels)}; }
  static AttributeKind nominal(std::vector<std::string> cats) { return {Kind::Nominal, std::move(cats)}; }

  std::optional<std::size_t> category_index(std::string_view name) const {
    for (std::size_t i = 0; i < categories.size(); ++i)
      if (categories[i] == name) return i;
    return std::nullopt;
  }

  bool operator==(const AttributeKind&) const = default;
};

struct Attribute {
  std::string name;
  AttributeKind kind;
  std::size_t index = 0;
  std::string origin;  // "tfidf" for featurizer output, empty otherwise
};

struct Schema {
  std::vector<Attribute> attributes;
  std::vector<std::string> classes;

  std::size_t size() const { return attributes.size(); }
  const Attribute& operator[](std::size_t i) const { return attributes[i]; }

  std::optional<std::size_t> find(std::string_view name) const {
    for (const auto& a : attributes)
      if (a.name == name) return a.index;
    return std::nullopt;
  }

  std::optional<std::size_t> class_index(std::string_view name) const {
    for (std::size_t i = 0; i < classes.size(); ++i)
      if (classes[i] == name) return i;
    return std::nullopt;
  }
};

// Raw attribute value: numeric attributes hold doubles, Boolean attributes
// hold bool, ordinal and nominal attributes hold the category name.
using Value = std::variant<double, bool, std::string>;
using Row = std::vector<Value>;

struct Dataset {
  Schema schema;
  std::vector<Row> rows;
  std::vector<std::string> labels;  // empty when the file has no class column

  std::size_t size() const { return rows.size(); }
  bool has_labels() const { return !labels.empty(); }

  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.schema = schema;
    out.rows.reserve(indices.size());
    for (auto i : indices) {
      out.rows.push_back(rows.at(i));
      if (!labels.empty()) out.labels.push_back(labels.at(i));
    }
    return out;
  }
};

// ---------------------------------------------------------------- schema

inline void validate_schema(Schema& schema) {
  std::set<std::string> names;
  for (std::size_t i = 0; i < schema.attributes.size(); ++i) {
    auto& a = schema.attributes[i];
    a.index = i;
    if (a.name.empty()) throw InputError("schema: attribute " + std::to_string(i) + " has no name");
    if (a.name == "class") throw InputError("schema: 'class' is reserved for the label column");
    if (!names.insert(a.name).second) throw InputError("schema: duplicate attribute name '" + a.name + "'");
    if (a.kind.kind == Kind::Ordinal || a.kind.kind == Kind::Nominal) {
      std::set<std::string> distinct(a.kind.categories.begin(), a.kind.categories.end());
      if (distinct.size() != a.kind.categories.size())
        throw InputError("schema: attribute '" + a.name + "' lists a category twice");
      if (distinct.size() < 2)
        throw InputError("schema: attribute '" + a.name + "' needs at least 2 categories");
    } else if (!a.kind.categories.empty()) {
      throw InputError("schema: attribute '" + a.name + "' of kind " + kind_name(a.kind.kind) +
                       " cannot declare categories");
    }
  }
  std::set<std::string> classes(schema.classes.begin(), schema.classes.end());
  if (schema.classes.empty()) throw InputError("schema: no classes declared");
  if (classes.size() != schema.classes.size()) throw InputError("schema: duplicate class name");
}

inline Schema schema_from_json(const json& doc) {
  Schema schema;
  try {
    for (const auto& a : doc.at("attributes")) {
      Attribute attr;
      attr.name = a.at("name").get<std::string>();
      attr.kind.kind = parse_kind(a.at("kind").get<std::string>());
      if (a.contains("categories")) attr.kind.categories = a.at("categories").get<std::vector<std::string>>();
      if (a.contains("origin")) attr.origin = a.at("origin").get<std::string>();
      schema.attributes.push_back(std::move(attr));
    }
    schema.classes = doc.at("classes").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw InputError(std::string("schema: ") + e.what());
  }
  validate_schema(schema);
  return schema;
}

inline json schema_to_json(const Schema& schema) {
  json attrs = json::array();
  for (const auto& a : schema.attributes) {
    json j{{"name", a.name}, {"kind", kind_name(a.kind.kind)}};
    if (!a.kind.categories.empty()) j["categories"] = a.kind.categories;
    if (!a.origin.empty()) j["origin"] = a.origin;
    attrs.push_back(std::move(j));
  }
  return json{{"attributes", attrs}, {"classes", schema.classes}};
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw InputError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline Schema load_schema(const std::filesystem::path& path) { return schema_from_json(read_json_file(path)); }

// ---------------------------------------------------------------- values

inline Value parse_value(const std::string& field, const Attribute& attr) {
  switch (attr.kind.kind) {
    case Kind::Numeric: {
      auto v = parse_number(field);
      if (!v) throw InputError("non-numeric value '" + field + "'");
      return *v;
    }
    case Kind::Boolean:
      if (field == "True" || field == "true" || field == "TRUE" || field == "1") return true;
      if (field == "False" || field == "false" || field == "FALSE" || field == "0") return false;
      throw InputError("value '" + field + "' is not Boolean");
    case Kind::Ordinal:
    case Kind::Nominal:
      if (!attr.kind.category_index(field)) throw InputError("unknown category '" + field + "'");
      return field;
    case Kind::Text:
      return field;
  }
  return field;
}

inline std::string value_to_string(const Value& v) {
  if (auto d = std::get_if<double>(&v)) return format_number(*d);
  if (auto b = std::get_if<bool>(&v)) return *b ? "True" : "False";
  return std::get<std::string>(v);
}

inline bool value_conforms(const Value& v, const Attribute& attr) {
  switch (attr.kind.kind) {
    case Kind::Numeric: return std::holds_alternative<double>(v) && std::isfinite(std::get<double>(v));
    case Kind::Boolean: return std::holds_alternative<bool>(v);
    case Kind::Ordinal:
    case Kind::Nominal:
      return std::holds_alternative<std::string>(v) && attr.kind.category_index(std::get<std::string>(v));
    case Kind::Text: return std::holds_alternative<std::string>(v);
  }
  return false;
}

// ---------------------------------------------------------------- CSV files

// Text attributes are only accepted by the featurizer (allow_text).
inline Dataset parse_dataset(std::istream& in, Schema schema, bool allow_text = false) {
  validate_schema(schema);
  for (const auto& a : schema.attributes)
    if (a.kind.kind == Kind::Text && !allow_text)
      throw InputError("attribute '" + a.name + "' is a text field; run `sd4x featurize` first");

  Dataset ds;
  ds.schema = std::move(schema);
  const auto records = csv::read(in);
  if (records.empty()) return ds;

  const auto& header = records.front();
  const std::size_t m = ds.schema.size();
  std::vector<std::size_t> attr_of_field(header.size(), m);  // m marks the class column
  std::vector<bool> seen(m, false);
  bool has_class = false;
  for (std::size_t f = 0; f < header.size(); ++f) {
    if (header[f] == "class") {
      if (has_class) throw InputError("header: duplicate 'class' column");
      has_class = true;
      continue;
    }
    auto idx = ds.schema.find(header[f]);
    if (!idx) throw InputError("header: column '" + header[f] + "' is not declared in the schema");
    if (seen[*idx]) throw InputError("header: duplicate column '" + header[f] + "'");
    seen[*idx] = true;
    attr_of_field[f] = *idx;
  }
  for (std::size_t i = 0; i < m; ++i)
    if (!seen[i]) throw InputError("header: missing column '" + ds.schema[i].name + "'");

  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = "row " + std::to_string(r);
    if (rec.size() != header.size())
      throw InputError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                       std::to_string(rec.size()));
    Row row(m);
    for (std::size_t f = 0; f < rec.size(); ++f) {
      if (attr_of_field[f] == m) {
        if (!ds.schema.class_index(rec[f]))
          throw InputError(where + ", column 'class': unknown class '" + rec[f] + "'");
        ds.labels.push_back(rec[f]);
        continue;
      }
      const auto& attr = ds.schema[attr_of_field[f]];
      try {
        row[attr.index] = parse_value(rec[f], attr);
      } catch (const InputError& e) {
        throw InputError(where + ", column '" + attr.name + "': " + e.what());
      }
    }
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

inline Dataset load_dataset(const std::filesystem::path& data_path, const std::filesystem::path& schema_path,
                            bool allow_text = false) {
  Schema schema = load_schema(schema_path);
  std::ifstream in(data_path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + data_path.string() + "'");
  try {
    return parse_dataset(in, std::move(schema), allow_text);
  } catch (const InputError& e) {
    throw InputError(data_path.string() + ": " + e.what());
  }
}

inline void write_dataset(std::ostream& out, const Dataset& ds) {
  csv::Record header;
  for (const auto& a : ds.schema.attributes) header.push_back(a.name);
  if (!ds.labels.empty()) header.push_back("class");
  csv::write_record(out, header);
  for (std::size_t r = 0; r < ds.rows.size(); ++r) {
    csv::Record rec;
    for (const auto& v : ds.rows[r]) rec.push_back(value_to_string(v));
    if (!ds.labels.empty()) rec.push_back(ds.labels[r]);
    csv::write_record(out, rec);
  }
}

// ---------------------------------------------------------------- encoding

enum class ColumnKind { Numeric, Ordinal, Boolean, OneHot };

struct EncodedColumn {
  std::string name;
  std::size_t attribute = 0;
  ColumnKind kind = ColumnKind::Numeric;
  std::size_t category = 0;         // one-hot: category this column stands for
  std::vector<std::string> levels;  // ordinal levels or nominal categories
  std::string origin;

  // Columns whose values are restricted to a finite set (split candidates 0.5).
  bool is_binary() const { return kind == ColumnKind::Boolean || kind == ColumnKind::OneHot; }
};

struct EncodedMatrix {
  Matrix values;
  std::vector<EncodedColumn> columns;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }

  std::vector<std::string> column_names() const {
    std::vector<std::string> names;
    for (const auto& c : columns) names.push_back(c.name);
    return names;
  }
};

inline std::vector<EncodedColumn> encode_columns(const Schema& schema) {
  std::vector<EncodedColumn> cols;
  for (const auto& a : schema.attributes) {
    switch (a.kind.kind) {
      case Kind::Numeric: cols.push_back({a.name, a.index, ColumnKind::Numeric, 0, {}, a.origin}); break;
      case Kind::Boolean: cols.push_back({a.name, a.index, ColumnKind::Boolean, 0, {}, a.origin}); break;
      case Kind::Ordinal:
        cols.push_back({a.name, a.index, ColumnKind::Ordinal, 0, a.kind.categories, a.origin});
        break;
      case Kind::Nominal:
        for (std::size_t c = 0; c < a.kind.categories.size(); ++c)
          cols.push_back({a.name + "_" + a.kind.categories[c], a.index, ColumnKind::OneHot, c, a.kind.categories,
                          a.origin});
        break;
      case Kind::Text: throw InputError("attribute '" + a.name + "' is a text field and cannot be encoded");
    }
  }
  std::set<std::string> names;
  for (const auto& c : cols)
    if (!names.insert(c.name).second) throw InputError("encoded column name collision: '" + c.name + "'");
  return cols;
}

inline void encode_row_into(const Row& row, const Schema& schema, Eigen::Ref<RowVector> out) {
  Eigen::Index j = 0;
  for (const auto& a : schema.attributes) {
    const Value& v = row.at(a.index);
    switch (a.kind.kind) {
      case Kind::Numeric: out[j++] = std::get<double>(v); break;
      case Kind::Boolean: out[j++] = std::get<bool>(v) ? 1.0 : 0.0; break;
      case Kind::Ordinal: out[j++] = static_cast<double>(*a.kind.category_index(std::get<std::string>(v))); break;
      case Kind::Nominal: {
        const auto hit = *a.kind.category_index(std::get<std::string>(v));
        for (std::size_t c = 0; c < a.kind.categories.size(); ++c) out[j++] = c == hit ? 1.0 : 0.0;
        break;
      }
      case Kind::Text: throw InputError("text attributes cannot be encoded");
    }
  }
}

inline EncodedMatrix encode(const Dataset& ds) {
  EncodedMatrix em;
  em.columns = encode_columns(ds.schema);
  em.values.resize(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(em.columns.size()));
  for (std::size_t r = 0; r < ds.size(); ++r) {
    RowVector row(em.values.cols());
    encode_row_into(ds.rows[r], ds.schema, row);
    em.values.row(static_cast<Eigen::Index>(r)) = row;
  }
  return em;
}

// Throws InputError describing the first violation of one-hot, Boolean or
// ordinal validity.
inline void validate_encoded_row(const Eigen::Ref<const RowVector>& row, const std::vector<EncodedColumn>& cols) {
  if (static_cast<std::size_t>(row.size()) != cols.size()) throw WidthMismatch(cols.size(), row.size());
  for (std::size_t j = 0; j < cols.size();) {
    const auto& col = cols[j];
    const double v = row[static_cast<Eigen::Index>(j)];
    switch (col.kind) {
      case ColumnKind::Numeric:
        if (!std::isfinite(v)) throw InputError("column '" + col.name + "': non-finite value");
        ++j;
        break;
      case ColumnKind::Boolean:
        if (v != 0.0 && v != 1.0) throw InputError("column '" + col.name + "': Boolean value " + format_number(v));
        ++j;
        break;
      case ColumnKind::Ordinal:
        if (v != std::floor(v) || v < 0 || v >= static_cast<double>(col.levels.size()))
          throw InputError("column '" + col.name + "': invalid ordinal level " + format_number(v));
        ++j;
        break;
      case ColumnKind::OneHot: {
        std::size_t ones = 0;
        std::size_t k = j;
        for (; k < cols.size() && cols[k].kind == ColumnKind::OneHot && cols[k].attribute == col.attribute; ++k) {
          const double x = row[static_cast<Eigen::Index>(k)];
          if (x == 1.0) {
            ++ones;
          } else if (x != 0.0) {
            throw InputError("column '" + cols[k].name + "': one-hot value " + format_number(x));
          }
        }
        if (ones != 1)
          throw InputError("one-hot block of attribute " + std::to_string(col.attribute) + " has " +
                           std::to_string(ones) + " active categories");
        j = k;
        break;
      }
    }
  }
}

inline bool is_valid_encoded_row(const Eigen::Ref<const RowVector>& row, const std::vector<EncodedColumn>& cols) {
  try {
    validate_encoded_row(row, cols);
    return true;
  } catch (const InputError&) {
    return false;
  }
}

// Inverse of encode for a single row. Returns values in attribute order.
inline Row decode_row(const Eigen::Ref<const RowVector>& row, const std::vector<EncodedColumn>& cols) {
  validate_encoded_row(row, cols);
  std::size_t m = 0;
  for (const auto& c : cols) m = std::max(m, c.attribute + 1);
  Row out(m);
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const auto& c = cols[j];
    const double v = row[static_cast<Eigen::Index>(j)];
    switch (c.kind) {
      case ColumnKind::Numeric: out[c.attribute] = v; break;
      case ColumnKind::Boolean: out[c.attribute] = v == 1.0; break;
      case ColumnKind::Ordinal: out[c.attribute] = c.levels[static_cast<std::size_t>(v)]; break;
      case ColumnKind::OneHot:
        if (v == 1.0) out[c.attribute] = c.levels[c.category];
        break;
    }
  }
  return out;
}

}  // namespace sd4x
