#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "rolespace/churn.hpp"

using namespace rolespace;

namespace {

UserHistory history(const std::string& user, std::initializer_list<int> quarters, std::vector<double> poap) {
  UserHistory h{user, {}};
  for (int q : quarters) h.poap[q] = poap;
  return h;
}

std::set<int> range_set(int lo, int hi) {
  std::set<int> s;
  for (int q = lo; q <= hi; ++q) s.insert(q);
  return s;
}

}  // namespace

TEST(Windows, Enumeration) {
  ChurnConfig c;
  c.window = 4;
  c.staying_horizon = 3;
  auto w8 = enumerate_windows(8, c);
  EXPECT_EQ(w8, (std::vector<Window>{{0, 0, 3}, {1, 1, 4}}));
  EXPECT_EQ(enumerate_windows(7, c), (std::vector<Window>{{0, 0, 3}}));
  std::vector<std::string> warnings;
  EXPECT_TRUE(enumerate_windows(6, c, &warnings).empty());
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(Labels, DepartedStayingExcluded) {
  ChurnConfig c;
  c.staying_horizon = 3;
  const Window w{0, 2, 5};
  EXPECT_EQ(label_user({2, 3, 4, 5}, w, c), ChurnLabel::Departed);
  EXPECT_EQ(label_user({2, 3, 4, 5, 9}, w, c), ChurnLabel::Staying);
  EXPECT_EQ(label_user({2, 3, 4, 5, 6}, w, c), ChurnLabel::Excluded);
  EXPECT_EQ(label_user({2, 3, 4, 5, 8}, w, c), ChurnLabel::Staying);
  EXPECT_EQ(label_user({2, 3, 4, 5, 7}, w, c), ChurnLabel::Excluded);
  EXPECT_THROW(label_user({0, 1, 6}, w, c), std::invalid_argument);
  EXPECT_THROW(label_user({}, w, c), std::invalid_argument);
}

TEST(Labels, StringRoundTrip) {
  for (auto l : {ChurnLabel::Departed, ChurnLabel::Staying, ChurnLabel::Excluded})
    EXPECT_EQ(parse_label(to_string(l)), l);
  EXPECT_THROW(parse_label("gone"), std::invalid_argument);
}

TEST(Features, LifespanFraction) {
  // joined quarter 10, 8 active quarters up to window [16,19]
  UserHistory h = history("u", {10, 12, 14, 16, 17, 18, 19}, {1.0, 0.0});
  h.poap[11] = {1.0, 0.0};
  ChurnConfig c;
  auto f = compute_features(h, {0, 16, 19}, c, 30, 2);
  EXPECT_EQ(f[0], 10.0);
  EXPECT_EQ(f[1], 8.0);
  EXPECT_EQ(f[2], 0.80);
  EXPECT_EQ(f[3], 1.0);
}

TEST(Features, RelativePoapChange) {
  UserHistory h{"u", {{3, {0.2, 0.8}}, {4, {0.3, 0.7}}}};
  ChurnConfig c;
  c.window = 2;
  auto f = compute_features(h, {0, 3, 4}, c, 10, 2);
  const auto K = 2u;
  EXPECT_NEAR(f[5 + K], 0.101 / 0.201, 1e-12);
  EXPECT_NEAR(f[5 + 2 * K], 0.101 / 0.201, 1e-12);
  EXPECT_NEAR(f[5 + K + 1], -0.099 / 0.801, 1e-12);
}

TEST(Features, UniformEntropy) {
  UserHistory h = history("u", {0, 1, 2, 3}, std::vector<double>(7, 1.0 / 7));
  auto f = compute_features(h, {0, 0, 3}, ChurnConfig{}, 8, 7);
  EXPECT_NEAR(f[4], std::log(7.0), 1e-12);
  EXPECT_EQ(f.size(), 5u + 3 * 7);
  EXPECT_EQ(feature_names(7).size(), f.size());
}

TEST(Features, ConstantPoapIdentity) {
  ChurnConfig c;
  UserHistory h = history("u", {0, 1, 2, 3}, {0.25, 0.75, 0.0});
  auto f = compute_features(h, {0, 0, 3}, c, 8, 3);
  for (std::size_t k = 0; k < 3; ++k) {
    const double p = h.poap[0][k];
    EXPECT_NEAR(f[5 + 3 + k], c.delta / (p + c.delta), 1e-12);
    EXPECT_NEAR(f[5 + 6 + k], c.delta / (p + c.delta), 1e-12);
  }
  EXPECT_EQ(f[5 + 3 + 2], 1.0);
}

TEST(Features, InactiveQuartersAreZero) {
  UserHistory h{"u", {{0, {1.0, 0.0}}, {2, {1.0, 0.0}}}};
  ChurnConfig c;
  auto f = compute_features(h, {0, 0, 3}, c, 8, 2);
  EXPECT_EQ(f[3], 0.5);
  EXPECT_EQ(f[5], 0.5);
  // role 0 goes 1, 0, 1, 0
  const double a = (c.delta - 1.0) / (1.0 + c.delta), b = (1.0 + c.delta) / c.delta;
  EXPECT_NEAR(f[7], (2 * a + b) / 3, 1e-9);
  EXPECT_NEAR(f[9], b, 1e-9);
}

TEST(Features, RangeChecks) {
  UserHistory h = history("u", {0, 1}, {1.0});
  EXPECT_THROW(compute_features(h, {0, 5, 8}, ChurnConfig{}, 8, 1), std::invalid_argument);
  EXPECT_THROW(compute_features(h, {0, -1, 2}, ChurnConfig{}, 8, 1), std::invalid_argument);
  UserHistory empty{"e", {}};
  EXPECT_THROW(compute_features(empty, {0, 0, 1}, ChurnConfig{}, 8, 1), std::invalid_argument);
}

TEST(Features, GroupsCoverColumns) {
  auto groups = feature_groups(4);
  ASSERT_EQ(groups.size(), 7u);
  std::vector<int> seen(5 + 3 * 4, 0);
  for (const auto& g : groups)
    for (auto c : g.columns) ++seen[c];
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_EQ(groups[6].name, "delta_poap");
  EXPECT_EQ(groups[6].columns.size(), 8u);
}

namespace {

/// `churn` users departed after quarter 3 and `stay` users active through quarter 7.
std::vector<UserHistory> population(int churn, int stay) {
  std::vector<UserHistory> users;
  for (int i = 0; i < churn; ++i) {
    UserHistory h{"c" + std::to_string(i), {}};
    for (int q : range_set(0, 3)) h.poap[q] = {0.5, 0.5};
    users.push_back(h);
  }
  for (int i = 0; i < stay; ++i) {
    UserHistory h{"s" + std::to_string(i), {}};
    for (int q : range_set(0, 7)) h.poap[q] = {0.5, 0.5};
    users.push_back(h);
  }
  return users;
}

std::pair<int, int> class_counts(const ChurnDataset& ds) {
  int c = 0, s = 0;
  for (const auto& ex : ds.examples) (ex.label == ChurnLabel::Departed ? c : s)++;
  return {c, s};
}

}  // namespace

TEST(Dataset, BalancesToOneTwo) {
  ChurnConfig c;
  const std::vector<Window> windows = {{0, 0, 3}};
  auto ds = build_dataset(population(10, 50), windows, c, 8, 2, 1);
  EXPECT_EQ(class_counts(ds), std::make_pair(10, 20));
  ds = build_dataset(population(10, 15), windows, c, 8, 2, 1);
  EXPECT_EQ(class_counts(ds), std::make_pair(7, 14));
}

TEST(Dataset, SkipsOneClassWindow) {
  ChurnConfig c;
  auto ds = build_dataset(population(0, 30), std::vector<Window>{{0, 0, 3}}, c, 8, 2, 1);
  EXPECT_TRUE(ds.examples.empty());
  ASSERT_EQ(ds.warnings.size(), 1u);
  EXPECT_NE(ds.warnings[0].find("window 0"), std::string::npos);
}

TEST(Dataset, DeterministicGivenSeed) {
  ChurnConfig c;
  const std::vector<Window> windows = {{0, 0, 3}};
  auto users = population(10, 50);
  auto a = build_dataset(users, windows, c, 8, 2, 5), b = build_dataset(users, windows, c, 8, 2, 5);
  ASSERT_EQ(a.examples.size(), b.examples.size());
  for (std::size_t i = 0; i < a.examples.size(); ++i) EXPECT_EQ(a.examples[i].user, b.examples[i].user);
}

TEST(Dataset, CensoringAndEligibility) {
  ChurnConfig c;
  EXPECT_THROW(build_dataset(population(2, 4), std::vector<Window>{{0, 2, 5}}, c, 8, 2, 1), std::invalid_argument);
  // a user with only 2 quarters before the window end is left out even if active later
  std::vector<UserHistory> users = population(3, 6);
  UserHistory late{"late", {}};
  for (int q : {2, 3, 4, 5, 6, 7}) late.poap[q] = {1.0, 0.0};
  users.push_back(late);
  auto ds = build_dataset(users, std::vector<Window>{{0, 0, 3}}, c, 8, 2, 1);
  for (const auto& ex : ds.examples) EXPECT_NE(ex.user, "late");
}

TEST(Dataset, CsvRoundTrip) {
  ChurnConfig c;
  auto ds = build_dataset(population(5, 10), std::vector<Window>{{0, 0, 3}}, c, 8, 2, 1);
  std::stringstream s;
  write_dataset_csv(s, ds);
  auto back = read_dataset_csv(s);
  EXPECT_EQ(back.feature_names, ds.feature_names);
  ASSERT_EQ(back.examples.size(), ds.examples.size());
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    EXPECT_EQ(back.examples[i].user, ds.examples[i].user);
    EXPECT_EQ(back.examples[i].label, ds.examples[i].label);
    EXPECT_EQ(back.examples[i].features, ds.examples[i].features);
  }
}
