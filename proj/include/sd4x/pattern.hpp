#pragma once

// Pattern language over the attributes of a Schema: one restriction per
// attribute, the specialization order, cover/extent, the closure of an object
// set, split refinement and rendering.
//
// Ordinal restrictions are held as closed intervals of level indices; nominal
// and Boolean restrictions as membership masks in declared order.

#include "sd4x/dataset.hpp"

#include <sstream>

namespace sd4x {

struct Unrestricted {
  bool operator==(const Unrestricted&) const = default;
};

struct Interval {
  double lo = -kInf;
  double hi = kInf;
  bool lo_open = true;
  bool hi_open = true;

  static Interval closed(double a, double b) { return {a, b, false, false}; }
  static Interval point(double v) { return {v, v, false, false}; }

  bool contains(double x) const {
    const bool above = lo_open ? x > lo : x >= lo;
    const bool below = hi_open ? x < hi : x <= hi;
    return above && below;
  }
  bool empty() const { return lo > hi || (lo == hi && (lo_open || hi_open)); }
  bool is_point() const { return lo == hi && !lo_open && !hi_open; }

  bool contains(const Interval& o) const {
    const bool lo_ok = lo < o.lo || (lo == o.lo && (!lo_open || o.lo_open));
    const bool hi_ok = hi > o.hi || (hi == o.hi && (!hi_open || o.hi_open));
    return lo_ok && hi_ok;
  }

  Interval intersect(const Interval& o) const {
    Interval r = *this;
    if (o.lo > r.lo || (o.lo == r.lo && o.lo_open)) {
      r.lo = o.lo;
      r.lo_open = o.lo_open;
    }
    if (o.hi < r.hi || (o.hi == r.hi && o.hi_open)) {
      r.hi = o.hi;
      r.hi_open = o.hi_open;
    }
    return r;
  }

  bool operator==(const Interval&) const = default;
};

// Membership mask over a nominal attribute's categories.
struct CategorySet {
  std::vector<bool> allowed;
  bool operator==(const CategorySet&) const = default;
};

struct BoolSet {
  bool allow_false = true;
  bool allow_true = true;
  bool operator==(const BoolSet&) const = default;
};

using Restriction = std::variant<Unrestricted, Interval, CategorySet, BoolSet>;

enum class Side { LessEqual, Greater };

class Pattern {
 public:
  Pattern() = default;
  explicit Pattern(std::size_t m) : restrictions_(m, Unrestricted{}) {}

  static Pattern top(const Schema& schema) { return Pattern(schema.size()); }

  std::size_t size() const { return restrictions_.size(); }
  const Restriction& operator[](std::size_t i) const { return restrictions_.at(i); }
  const std::vector<Restriction>& restrictions() const { return restrictions_; }

  // Attributes in the order they were first restricted; drives rendering.
  const std::vector<std::size_t>& order() const { return order_; }

  bool is_top() const {
    return std::all_of(restrictions_.begin(), restrictions_.end(),
                       [](const auto& r) { return std::holds_alternative<Unrestricted>(r); });
  }

  void set(std::size_t i, Restriction r) {
    restrictions_.at(i) = std::move(r);
    const bool restricted = !std::holds_alternative<Unrestricted>(restrictions_[i]);
    const auto it = std::find(order_.begin(), order_.end(), i);
    if (restricted && it == order_.end()) order_.push_back(i);
    if (!restricted && it != order_.end()) order_.erase(it);
  }

  bool operator==(const Pattern& o) const { return restrictions_ == o.restrictions_; }

 private:
  std::vector<Restriction> restrictions_;
  std::vector<std::size_t> order_;
};

// ---------------------------------------------------------------- values

// Position of a raw value on its attribute's axis: numbers as-is, ordinal and
// nominal values as category indices, Booleans as 0/1.
inline double axis_value(const Value& v, const Attribute& a) {
  switch (a.kind.kind) {
    case Kind::Numeric: return std::get<double>(v);
    case Kind::Boolean: return std::get<bool>(v) ? 1.0 : 0.0;
    case Kind::Ordinal:
    case Kind::Nominal: {
      const auto idx = a.kind.category_index(std::get<std::string>(v));
      if (!idx) throw InputError("attribute '" + a.name + "': unknown category '" + std::get<std::string>(v) + "'");
      return static_cast<double>(*idx);
    }
    case Kind::Text: break;
  }
  throw InputError("attribute '" + a.name + "': text values cannot be matched by patterns");
}

inline bool restriction_admits(const Restriction& r, double x) {
  return std::visit(
      [x](const auto& d) -> bool {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Unrestricted>) {
          return true;
        } else if constexpr (std::is_same_v<T, Interval>) {
          return d.contains(x);
        } else if constexpr (std::is_same_v<T, CategorySet>) {
          const auto i = static_cast<std::size_t>(x);
          return i < d.allowed.size() && d.allowed[i];
        } else {
          return x == 0.0 ? d.allow_false : d.allow_true;
        }
      },
      r);
}

inline bool covers(const Pattern& d, const Row& row, const Schema& schema) {
  if (d.size() != schema.size() || row.size() != schema.size())
    throw InputError("pattern arity " + std::to_string(d.size()) + " does not match object arity " +
                     std::to_string(row.size()));
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (std::holds_alternative<Unrestricted>(d[i])) continue;
    if (!restriction_admits(d[i], axis_value(row[i], schema[i]))) return false;
  }
  return true;
}

inline std::vector<std::size_t> extent(const Pattern& d, const Dataset& data) {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < data.size(); ++r)
    if (covers(d, data.rows[r], data.schema)) out.push_back(r);
  return out;
}

// ---------------------------------------------------------------- order

namespace detail {

inline Interval ordinal_interval(const Interval& iv, std::size_t levels) {
  // Snap to the closed range of level indices it admits.
  const double top = static_cast<double>(levels) - 1.0;
  double lo = std::max(0.0, iv.lo_open ? std::floor(iv.lo) + 1.0 : std::ceil(iv.lo));
  double hi = std::min(top, iv.hi_open ? std::ceil(iv.hi) - 1.0 : std::floor(iv.hi));
  return Interval::closed(lo, hi);
}

}  // namespace detail

// Maps full-domain restrictions to Unrestricted and snaps ordinal intervals to
// level indices, so that equal admitted sets compare equal.
inline Pattern canonicalize(const Pattern& d, const Schema& schema) {
  if (d.size() != schema.size()) throw InputError("pattern arity does not match schema");
  Pattern out = d;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& a = schema[i];
    Restriction r = d[i];
    if (auto* iv = std::get_if<Interval>(&r)) {
      if (a.kind.kind == Kind::Ordinal) {
        *iv = detail::ordinal_interval(*iv, a.kind.categories.size());
        if (iv->lo <= 0.0 && iv->hi >= static_cast<double>(a.kind.categories.size()) - 1.0) r = Unrestricted{};
      } else if (iv->lo == -kInf && iv->hi == kInf) {
        r = Unrestricted{};
      }
    } else if (auto* cs = std::get_if<CategorySet>(&r)) {
      if (cs->allowed.size() == a.kind.categories.size() &&
          std::all_of(cs->allowed.begin(), cs->allowed.end(), [](bool b) { return b; }))
        r = Unrestricted{};
    } else if (auto* bs = std::get_if<BoolSet>(&r)) {
      if (bs->allow_false && bs->allow_true) r = Unrestricted{};
    }
    out.set(i, r);
  }
  return out;
}

inline bool equivalent(const Pattern& a, const Pattern& b, const Schema& schema) {
  return canonicalize(a, schema) == canonicalize(b, schema);
}

namespace detail {

inline bool restriction_contains(const Restriction& c, const Restriction& d) {
  if (std::holds_alternative<Unrestricted>(c)) return true;
  if (std::holds_alternative<Unrestricted>(d)) return false;  // c is canonical, so not full-domain
  if (c.index() != d.index()) throw InputError("restrictions of different kinds cannot be compared");
  if (auto* ci = std::get_if<Interval>(&c)) {
    const auto& di = std::get<Interval>(d);
    return di.empty() || ci->contains(di);
  }
  if (auto* cs = std::get_if<CategorySet>(&c)) {
    const auto& ds = std::get<CategorySet>(d);
    for (std::size_t k = 0; k < ds.allowed.size(); ++k)
      if (ds.allowed[k] && !(k < cs->allowed.size() && cs->allowed[k])) return false;
    return true;
  }
  const auto& cb = std::get<BoolSet>(c);
  const auto& db = std::get<BoolSet>(d);
  return (!db.allow_false || cb.allow_false) && (!db.allow_true || cb.allow_true);
}

}  // namespace detail

// c ⊑ d: every restriction of c contains the matching restriction of d.
inline bool is_more_general(const Pattern& c, const Pattern& d, const Schema& schema) {
  if (c.size() != d.size()) throw InputError("patterns of different arity");
  const Pattern cc = canonicalize(c, schema);
  const Pattern dc = canonicalize(d, schema);
  for (std::size_t i = 0; i < cc.size(); ++i)
    if (!detail::restriction_contains(cc[i], dc[i])) return false;
  return true;
}

// ---------------------------------------------------------------- closure

inline Restriction closure_of(const Dataset& data, std::span<const std::size_t> members, std::size_t attr) {
  const auto& a = data.schema[attr];
  switch (a.kind.kind) {
    case Kind::Numeric:
    case Kind::Ordinal: {
      double lo = kInf, hi = -kInf;
      for (auto o : members) {
        const double x = axis_value(data.rows.at(o)[attr], a);
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
      return Interval::closed(lo, hi);
    }
    case Kind::Nominal: {
      CategorySet cs{std::vector<bool>(a.kind.categories.size(), false)};
      for (auto o : members) cs.allowed[static_cast<std::size_t>(axis_value(data.rows.at(o)[attr], a))] = true;
      return cs;
    }
    case Kind::Boolean: {
      BoolSet bs{false, false};
      for (auto o : members) (std::get<bool>(data.rows.at(o)[attr]) ? bs.allow_true : bs.allow_false) = true;
      return bs;
    }
    case Kind::Text: break;
  }
  throw InputError("attribute '" + a.name + "': text attributes have no closure");
}

// δ(members): the most restrictive pattern covering every member.
inline Pattern most_restrictive(const Dataset& data, std::span<const std::size_t> members) {
  if (members.empty()) throw InputError("the closure of an empty object set is undefined");
  Pattern d = Pattern::top(data.schema);
  for (std::size_t i = 0; i < data.schema.size(); ++i) d.set(i, closure_of(data, members, i));
  return d;
}

// Replaces each restricted attribute of d by its closure over members, keeping
// unrestricted attributes free and the render order intact.
inline Pattern tighten(const Pattern& d, const Dataset& data, std::span<const std::size_t> members) {
  if (members.empty()) throw InputError("the closure of an empty object set is undefined");
  Pattern out = d;
  for (auto i : d.order()) out.set(i, closure_of(data, members, i));
  return out;
}

// ---------------------------------------------------------------- refinement

// d ∧ (column ≤ v) or d ∧ (column > v), with the encoded column mapped back
// to its attribute. One-hot columns act on the category set of their nominal
// attribute.
inline Pattern refine(const Pattern& d, const Schema& schema, const EncodedColumn& col, Side side, double v) {
  const std::size_t i = col.attribute;
  if (i >= d.size() || d.size() != schema.size()) throw InputError("refine: column outside the pattern");
  const auto& a = schema[i];
  auto admits = [&](double x) { return side == Side::LessEqual ? x <= v : x > v; };
  Restriction r = d[i];
  bool empty = false;

  switch (col.kind) {
    case ColumnKind::Numeric:
    case ColumnKind::Ordinal: {
      Interval cur = std::holds_alternative<Interval>(r) ? std::get<Interval>(r) : Interval{};
      const Interval cut = side == Side::LessEqual ? Interval{-kInf, v, true, false} : Interval{v, kInf, true, true};
      Interval next = cur.intersect(cut);
      if (col.kind == ColumnKind::Ordinal) next = detail::ordinal_interval(next, a.kind.categories.size());
      empty = next.empty();
      r = next;
      break;
    }
    case ColumnKind::Boolean: {
      BoolSet cur = std::holds_alternative<BoolSet>(r) ? std::get<BoolSet>(r) : BoolSet{};
      cur.allow_false = cur.allow_false && admits(0.0);
      cur.allow_true = cur.allow_true && admits(1.0);
      empty = !cur.allow_false && !cur.allow_true;
      r = cur;
      break;
    }
    case ColumnKind::OneHot: {
      CategorySet cur = std::holds_alternative<CategorySet>(r)
                            ? std::get<CategorySet>(r)
                            : CategorySet{std::vector<bool>(a.kind.categories.size(), true)};
      for (std::size_t k = 0; k < cur.allowed.size(); ++k)
        cur.allowed[k] = cur.allowed[k] && admits(k == col.category ? 1.0 : 0.0);
      empty = std::none_of(cur.allowed.begin(), cur.allowed.end(), [](bool b) { return b; });
      r = cur;
      break;
    }
  }
  if (empty)
    throw InputError("refining '" + a.name + "' with " + (side == Side::LessEqual ? "<= " : "> ") +
                     format_number(v) + " leaves an empty restriction");
  Pattern out = d;
  out.set(i, r);
  return out;
}

// ---------------------------------------------------------------- rendering

namespace detail {

inline std::string render_interval(const std::string& name, const Interval& iv, const Attribute& a) {
  const bool ordinal = a.kind.kind == Kind::Ordinal;
  auto num = [&](double x) {
    if (ordinal) return a.kind.categories.at(static_cast<std::size_t>(x));
    if (x == kInf) return std::string("∞");
    if (x == -kInf) return std::string("-∞");
    return format_number(x);
  };
  if (iv.is_point()) return name + " = " + num(iv.lo);
  if (ordinal) {
    const double top = static_cast<double>(a.kind.categories.size()) - 1.0;
    if (iv.lo <= 0.0) return name + " ≤ " + num(iv.hi);
    if (iv.hi >= top) return name + " ≥ " + num(iv.lo);
    return name + " ∈ [" + num(iv.lo) + ", " + num(iv.hi) + "]";
  }
  if (iv.lo == -kInf && iv.hi != kInf) return name + (iv.hi_open ? " < " : " ≤ ") + num(iv.hi);
  if (iv.hi == kInf && iv.lo != -kInf) return name + (iv.lo_open ? " > " : " ≥ ") + num(iv.lo);
  return name + " ∈ " + (iv.lo_open ? "(" : "[") + num(iv.lo) + ", " + num(iv.hi) + (iv.hi_open ? ")" : "]");
}

inline std::string render_set(const std::string& name, const std::vector<std::string>& names) {
  if (names.empty()) return name + " ∈ ∅";
  if (names.size() == 1) return name + " = " + names.front();
  std::string out = name + " ∈ {";
  for (std::size_t k = 0; k < names.size(); ++k) out += (k ? ", " : "") + names[k];
  return out + "}";
}

}  // namespace detail

inline std::string render_restriction(const Restriction& r, const Attribute& a) {
  if (auto* iv = std::get_if<Interval>(&r)) return detail::render_interval(a.name, *iv, a);
  if (auto* cs = std::get_if<CategorySet>(&r)) {
    std::vector<std::string> names;
    for (std::size_t k = 0; k < cs->allowed.size(); ++k)
      if (cs->allowed[k]) names.push_back(a.kind.categories.at(k));
    return detail::render_set(a.name, names);
  }
  if (auto* bs = std::get_if<BoolSet>(&r)) {
    std::vector<std::string> names;
    if (bs->allow_false) names.emplace_back("False");
    if (bs->allow_true) names.emplace_back("True");
    return detail::render_set(a.name, names);
  }
  return "";
}

// Conjunction of restricted attributes in first-restricted order; "⊤" if none.
inline std::string render(const Pattern& d, const Schema& schema) {
  std::vector<std::size_t> order = d.order();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!std::holds_alternative<Unrestricted>(d[i]) && std::find(order.begin(), order.end(), i) == order.end())
      order.push_back(i);
  std::string out;
  for (auto i : order) {
    if (std::holds_alternative<Unrestricted>(d[i])) continue;
    if (!out.empty()) out += " ∧ ";
    out += render_restriction(d[i], schema[i]);
  }
  return out.empty() ? "⊤" : out;
}

inline std::string render_closed(const Pattern& d, const Dataset& data, std::span<const std::size_t> members) {
  return render(tighten(d, data, members), data.schema);
}

// ---------------------------------------------------------------- JSON

inline json pattern_to_json(const Pattern& d, const Schema& schema) {
  json out = json::array();
  auto level = [](const Attribute& a, double x) -> json {
    if (a.kind.kind == Kind::Ordinal) return a.kind.categories.at(static_cast<std::size_t>(x));
    return x;
  };
  std::vector<std::size_t> order = d.order();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (std::find(order.begin(), order.end(), i) == order.end()) order.push_back(i);
  for (auto i : order) {
    const auto& a = schema[i];
    const Restriction& r = d[i];
    if (std::holds_alternative<Unrestricted>(r)) continue;
    if (auto* iv = std::get_if<Interval>(&r)) {
      if (iv->is_point()) {
        out.push_back({{"attribute", a.name}, {"op", "eq"}, {"value", level(a, iv->lo)}});
      } else if ((iv->lo == -kInf || iv->lo_open) && (iv->hi == kInf || !iv->hi_open)) {
        if (iv->lo != -kInf) out.push_back({{"attribute", a.name}, {"op", "gt"}, {"value", level(a, iv->lo)}});
        if (iv->hi != kInf) out.push_back({{"attribute", a.name}, {"op", "le"}, {"value", level(a, iv->hi)}});
      } else {
        json e = {{"attribute", a.name}, {"op", "in"}, {"value", json::array({level(a, iv->lo), level(a, iv->hi)})}};
        if (iv->lo_open || iv->hi_open) e["open"] = json::array({iv->lo_open, iv->hi_open});
        out.push_back(std::move(e));
      }
    } else {
      json names = json::array();
      if (auto* cs = std::get_if<CategorySet>(&r)) {
        for (std::size_t k = 0; k < cs->allowed.size(); ++k)
          if (cs->allowed[k]) names.push_back(a.kind.categories[k]);
      } else {
        const auto& bs = std::get<BoolSet>(r);
        if (bs.allow_false) names.push_back(false);
        if (bs.allow_true) names.push_back(true);
      }
      if (names.size() == 1)
        out.push_back({{"attribute", a.name}, {"op", "eq"}, {"value", names[0]}});
      else
        out.push_back({{"attribute", a.name}, {"op", "in"}, {"value", names}});
    }
  }
  return out;
}

inline Pattern pattern_from_json(const json& doc, const Schema& schema) {
  if (!doc.is_array()) throw InputError("pattern: expected an array of conditions");
  Pattern d = Pattern::top(schema);
  for (const auto& e : doc) {
    try {
      const std::string name = e.at("attribute").get<std::string>();
      const std::string op = e.at("op").get<std::string>();
      const auto idx = schema.find(name);
      if (!idx) throw InputError("pattern: unknown attribute '" + name + "'");
      const auto& a = schema[*idx];
      const json& v = e.at("value");
      auto axis = [&](const json& x) -> double {
        if (a.kind.kind == Kind::Ordinal || a.kind.kind == Kind::Nominal) {
          const auto c = a.kind.category_index(x.get<std::string>());
          if (!c) throw InputError("pattern: unknown category '" + x.get<std::string>() + "' of '" + name + "'");
          return static_cast<double>(*c);
        }
        if (a.kind.kind == Kind::Boolean) return x.get<bool>() ? 1.0 : 0.0;
        return x.get<double>();
      };
      std::vector<double> values;
      if (op == "in") {
        for (const auto& x : v) values.push_back(axis(x));
      } else if (op == "eq" || op == "le" || op == "gt") {
        values.push_back(axis(v));
      } else {
        throw InputError("pattern: unknown op '" + op + "'");
      }

      Restriction r;
      if (a.kind.kind == Kind::Numeric || a.kind.kind == Kind::Ordinal) {
        Interval cur = std::holds_alternative<Interval>(d[*idx]) ? std::get<Interval>(d[*idx]) : Interval{};
        Interval cut;
        if (op == "eq") cut = Interval::point(values[0]);
        if (op == "le") cut = {-kInf, values[0], true, false};
        if (op == "gt") cut = {values[0], kInf, true, true};
        if (op == "in") {
          if (values.size() != 2) throw InputError("pattern: interval for '" + name + "' needs two bounds");
          cut = Interval::closed(values[0], values[1]);
          if (e.contains("open")) {
            cut.lo_open = e["open"].at(0).get<bool>();
            cut.hi_open = e["open"].at(1).get<bool>();
          }
        }
        r = cur.intersect(cut);
      } else if (a.kind.kind == Kind::Nominal) {
        if (op == "le" || op == "gt") throw InputError("pattern: '" + op + "' is not defined for nominal '" + name + "'");
        CategorySet cs{std::vector<bool>(a.kind.categories.size(), false)};
        for (double x : values) cs.allowed[static_cast<std::size_t>(x)] = true;
        r = cs;
      } else if (a.kind.kind == Kind::Boolean) {
        if (op == "le" || op == "gt") throw InputError("pattern: '" + op + "' is not defined for Boolean '" + name + "'");
        BoolSet bs{false, false};
        for (double x : values) (x == 1.0 ? bs.allow_true : bs.allow_false) = true;
        r = bs;
      } else {
        throw InputError("pattern: text attribute '" + name + "' cannot be restricted");
      }
      d.set(*idx, r);
    } catch (const json::exception& ex) {
      throw InputError(std::string("pattern: ") + ex.what());
    }
  }
  return d;
}

}  // namespace sd4x
