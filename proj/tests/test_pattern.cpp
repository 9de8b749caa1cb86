#include "sd4x/pattern.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace sd4x;

namespace {

const std::string kData = SD4X_TEST_DATA;

Dataset toy() { return load_dataset(kData + "/toy.csv", kData + "/toy_schema.json"); }

std::size_t attr(const Schema& s, const std::string& name) { return *s.find(name); }

// Random objects over the toy schema, drawn from small value pools so that
// ties and repeated values are common.
Dataset random_toy(std::mt19937_64& rng, std::size_t n) {
  Dataset ds;
  ds.schema = toy().schema;
  std::uniform_int_distribution<int> small(0, 4);
  for (std::size_t r = 0; r < n; ++r) {
    Row row;
    for (const auto& a : ds.schema.attributes) {
      switch (a.kind.kind) {
        case Kind::Numeric: row.emplace_back(0.25 * small(rng)); break;
        case Kind::Boolean: row.emplace_back(small(rng) % 2 == 0); break;
        default: row.emplace_back(a.kind.categories[static_cast<std::size_t>(small(rng)) % a.kind.categories.size()]);
      }
    }
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

std::vector<std::size_t> brute_extent(const Pattern& d, const Dataset& ds) {
  // Direct membership check per attribute, independent of extent().
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    bool ok = true;
    for (std::size_t i = 0; i < d.size() && ok; ++i) {
      const auto& a = ds.schema[i];
      const Value& v = ds.rows[r][i];
      if (auto* iv = std::get_if<Interval>(&d[i])) {
        double x = a.kind.kind == Kind::Numeric ? std::get<double>(v)
                                                : static_cast<double>(*a.kind.category_index(std::get<std::string>(v)));
        ok = (iv->lo_open ? x > iv->lo : x >= iv->lo) && (iv->hi_open ? x < iv->hi : x <= iv->hi);
      } else if (auto* cs = std::get_if<CategorySet>(&d[i])) {
        ok = cs->allowed[*a.kind.category_index(std::get<std::string>(v))];
      } else if (auto* bs = std::get_if<BoolSet>(&d[i])) {
        ok = std::get<bool>(v) ? bs->allow_true : bs->allow_false;
      }
    }
    if (ok) out.push_back(r);
  }
  return out;
}

bool subset(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

TEST(Pattern, ToyCoverAndClosure) {
  const auto ds = toy();
  const auto& s = ds.schema;
  Pattern d = Pattern::top(s);
  d.set(attr(s, "java"), Interval{0.0, kInf, false, true});
  d.set(attr(s, "weekend"), BoolSet{false, true});
  d.set(attr(s, "Soft. type"), CategorySet{{true, false}});
  d.set(attr(s, "%used heap"), Interval::closed(0, 100));
  const std::vector<std::size_t> want{0, 1};
  EXPECT_EQ(extent(d, ds), want);

  const Pattern delta = most_restrictive(ds, want);
  EXPECT_EQ(std::get<Interval>(delta[attr(s, "java")]), Interval::point(0));
  EXPECT_EQ(std::get<BoolSet>(delta[attr(s, "weekend")]), (BoolSet{false, true}));
  EXPECT_EQ(std::get<CategorySet>(delta[attr(s, "Soft. type")]).allowed, (std::vector<bool>{true, false}));
  EXPECT_EQ(std::get<Interval>(delta[attr(s, "%used heap")]), Interval::closed(50, 60));
  EXPECT_TRUE(is_more_general(d, delta, s));
  EXPECT_FALSE(is_more_general(delta, d, s));
  EXPECT_EQ(extent(delta, ds), want);
}

TEST(Pattern, ToyClosedRendering) {
  const auto ds = toy();
  const auto& s = ds.schema;
  Pattern d = Pattern::top(s);
  d.set(attr(s, "weekend"), BoolSet{false, true});
  d.set(attr(s, "java"), Interval{-kInf, 0.3, true, false});
  const auto members = extent(d, ds);
  EXPECT_EQ(members, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(render(d, s), "weekend = True ∧ java ≤ 0.3");
  EXPECT_EQ(render_closed(d, ds, members), "weekend = True ∧ java = 0");
}

TEST(Pattern, RenderingForms) {
  const auto s = toy().schema;
  EXPECT_EQ(render(Pattern::top(s), s), "⊤");
  Pattern d = Pattern::top(s);
  d.set(attr(s, "%used heap"), Interval::point(60));
  EXPECT_EQ(render(d, s), "%used heap = 60");
  d = Pattern::top(s);
  d.set(attr(s, "Soft. type"), CategorySet{{true, true}});
  EXPECT_EQ(render(d, s), "Soft. type ∈ {Sales, Factory}");
  EXPECT_TRUE(canonicalize(d, s).is_top());
}

TEST(Refine, NumericOneHotOrdinalBoolean) {
  const auto ds = toy();
  const auto& s = ds.schema;
  const auto cols = encode_columns(s);
  ASSERT_EQ(cols.size(), 11u);
  const auto& heap = cols[10];
  Pattern d = refine(Pattern::top(s), s, heap, Side::Greater, 50);
  d = refine(d, s, heap, Side::LessEqual, 96);
  EXPECT_EQ(render(d, s), "%used heap ∈ (50, 96]");
  EXPECT_EQ(extent(d, ds), (std::vector<std::size_t>{0, 2, 4, 5, 6}));

  ASSERT_EQ(cols[7].name, "Soft. type_Sales");
  const Pattern sales = refine(Pattern::top(s), s, cols[7], Side::Greater, 0.5);
  EXPECT_EQ(render(sales, s), "Soft. type = Sales");
  const Pattern not_sales = refine(Pattern::top(s), s, cols[7], Side::LessEqual, 0.5);
  EXPECT_EQ(render(not_sales, s), "Soft. type = Factory");
  EXPECT_THROW(refine(sales, s, cols[8], Side::Greater, 0.5), InputError);

  ASSERT_EQ(cols[9].name, "Memory usage");
  const Pattern low = refine(Pattern::top(s), s, cols[9], Side::LessEqual, 2.5);
  EXPECT_EQ(render(low, s), "Memory usage ≤ Alarm");
  const Pattern high = refine(Pattern::top(s), s, cols[9], Side::Greater, 2.5);
  EXPECT_EQ(render(high, s), "Memory usage ≥ Critical");
  const Pattern mid = refine(high, s, cols[9], Side::LessEqual, 3.5);
  EXPECT_EQ(render(mid, s), "Memory usage = Critical");

  ASSERT_EQ(cols[5].name, "weekend");
  const Pattern off = refine(Pattern::top(s), s, cols[5], Side::LessEqual, 0.5);
  EXPECT_EQ(render(off, s), "weekend = False");
  EXPECT_THROW(refine(off, s, cols[5], Side::Greater, 0.5), InputError);
}

TEST(Refine, RenderOrderFollowsFirstRestriction) {
  const auto s = toy().schema;
  const auto cols = encode_columns(s);
  Pattern d = refine(Pattern::top(s), s, cols[10], Side::Greater, 70);
  d = refine(d, s, cols[0], Side::LessEqual, 0.2);
  d = refine(d, s, cols[10], Side::LessEqual, 96.5);
  EXPECT_EQ(render(d, s), "%used heap ∈ (70, 96.5] ∧ disk ≤ 0.2");
}

TEST(PatternLaws, ExtentAndClosureOnRandomData) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const auto ds = random_toy(rng, 30);
    const auto cols = encode_columns(ds.schema);
    const auto em = encode(ds);
    std::uniform_int_distribution<std::size_t> pick_col(0, cols.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_row(0, ds.size() - 1);

    // Random refinement chain: soundness, monotonicity and order at each step.
    Pattern d = Pattern::top(ds.schema);
    for (int step = 0; step < 5; ++step) {
      const auto members = extent(d, ds);
      ASSERT_EQ(members, brute_extent(d, ds));
      const std::size_t c = pick_col(rng);
      const double v = em.values(static_cast<Eigen::Index>(pick_row(rng)), static_cast<Eigen::Index>(c)) + 0.1;
      std::vector<std::size_t> left, right;
      std::optional<Pattern> dl, dr;
      try {
        dl = refine(d, ds.schema, cols[c], Side::LessEqual, v);
        left = extent(*dl, ds);
      } catch (const InputError&) {
      }
      try {
        dr = refine(d, ds.schema, cols[c], Side::Greater, v);
        right = extent(*dr, ds);
      } catch (const InputError&) {
      }
      ASSERT_TRUE(dl || dr);
      std::vector<std::size_t> both = left;
      both.insert(both.end(), right.begin(), right.end());
      std::sort(both.begin(), both.end());
      EXPECT_EQ(both, members);
      EXPECT_TRUE(std::adjacent_find(both.begin(), both.end()) == both.end());
      for (std::size_t r : left) EXPECT_LE(em.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)), v);
      for (std::size_t r : right) EXPECT_GT(em.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)), v);
      if (dl) EXPECT_TRUE(is_more_general(d, *dl, ds.schema));
      if (dr) EXPECT_TRUE(is_more_general(d, *dr, ds.schema));
      d = (dl && (!dr || left.size() >= right.size())) ? *dl : *dr;
    }

    // δ is the tightest cover: S ⊆ ext(δ(S)), and d ⊑ δ(ext(d)).
    std::vector<std::size_t> sample;
    for (std::size_t r = 0; r < ds.size(); ++r)
      if (r % 3 == static_cast<std::size_t>(trial) % 3) sample.push_back(r);
    const Pattern delta = most_restrictive(ds, sample);
    EXPECT_TRUE(subset(sample, extent(delta, ds)));
    const auto ext = extent(d, ds);
    if (!ext.empty()) {
      const Pattern closed = most_restrictive(ds, ext);
      EXPECT_TRUE(is_more_general(d, closed, ds.schema));
      EXPECT_EQ(extent(closed, ds), ext);
      EXPECT_EQ(extent(tighten(d, ds, ext), ds), ext);
    }
    // Order reflexivity and ⊤ on top.
    EXPECT_TRUE(is_more_general(d, d, ds.schema));
    EXPECT_TRUE(is_more_general(Pattern::top(ds.schema), d, ds.schema));
  }
}

TEST(PatternLaws, AntiMonotoneExtent) {
  std::mt19937_64 rng(4);
  const auto ds = random_toy(rng, 40);
  const auto& s = ds.schema;
  std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
  for (int t = 0; t < 30; ++t) {
    std::vector<std::size_t> a{pick(rng), pick(rng)};
    std::vector<std::size_t> b = a;
    b.push_back(pick(rng));
    b.push_back(pick(rng));
    const Pattern da = most_restrictive(ds, a);
    const Pattern db = most_restrictive(ds, b);
    EXPECT_TRUE(is_more_general(db, da, s));
    EXPECT_TRUE(subset(extent(da, ds), extent(db, ds)));
  }
}

TEST(PatternLaws, EquivalenceIgnoresFullDomainAndOrdinalSnapping) {
  const auto s = toy().schema;
  Pattern a = Pattern::top(s);
  a.set(attr(s, "weekend"), BoolSet{true, true});
  a.set(attr(s, "Memory usage"), Interval{0.5, 3.2, true, false});
  Pattern b = Pattern::top(s);
  b.set(attr(s, "Memory usage"), Interval::closed(1, 3));
  EXPECT_TRUE(equivalent(a, b, s));
  EXPECT_FALSE(a == b);
}

TEST(PatternJson, RoundTrip) {
  const auto ds = toy();
  const auto& s = ds.schema;
  const auto cols = encode_columns(s);
  Pattern d = refine(Pattern::top(s), s, cols[10], Side::Greater, 50);
  d = refine(d, s, cols[10], Side::LessEqual, 96);
  d = refine(d, s, cols[9], Side::Greater, 1.5);
  d = refine(d, s, cols[7], Side::LessEqual, 0.5);
  d = refine(d, s, cols[5], Side::Greater, 0.5);
  d.set(attr(s, "java"), Interval{0, 0.6, false, true});
  const json doc = pattern_to_json(d, s);
  const Pattern back = pattern_from_json(json::parse(doc.dump()), s);
  EXPECT_TRUE(equivalent(back, d, s));
  EXPECT_EQ(extent(back, ds), extent(d, ds));
  EXPECT_EQ(pattern_to_json(Pattern::top(s), s), json::array());
  EXPECT_THROW(pattern_from_json(json::parse(R"([{"attribute":"nope","op":"eq","value":1}])"), s), InputError);
}

TEST(PatternErrors, EmptyClosureAndArity) {
  const auto ds = toy();
  EXPECT_THROW(most_restrictive(ds, std::vector<std::size_t>{}), InputError);
  EXPECT_THROW(covers(Pattern(3), ds.rows[0], ds.schema), InputError);
}
