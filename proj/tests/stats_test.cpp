#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "cubatlas/stats.hpp"

using namespace cubatlas;

namespace {

// Textbook Kruskal-Wallis: sort, walk tie runs, sum ranks per group.
double naive_H(const std::vector<int>& labels, const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::pair<double, int>> v;
  for (std::size_t i = 0; i != n; ++i)
    v.emplace_back(values[i], labels[i]);
  std::sort(v.begin(), v.end());
  std::map<int, double> R, m;
  double T = 0;
  for (std::size_t i = 0; i != n;) {
    std::size_t j = i;
    while (j != n && v[j].first == v[i].first)
      ++j;
    const double t = static_cast<double>(j - i);
    const double rank = (static_cast<double>(i) + static_cast<double>(j) + 1) / 2;
    for (std::size_t q = i; q != j; ++q) {
      R[v[q].second] += rank;
      m[v[q].second] += 1;
    }
    T += t * t * t - t;
    i = j;
  }
  const double N = static_cast<double>(n);
  double s = 0;
  for (const auto& [g, r] : R)
    s += r * r / m[g];
  const double H = 12 / (N * (N + 1)) * s - 3 * (N + 1);
  return H / (1 - T / (N * N * N - N));
}

// Composite Simpson on the chi-square density after substituting x = u^2,
// which removes the x^(k/2 - 1) behaviour at the origin.
double chi2_pdf(double x, double k) {
  return std::exp((k / 2 - 1) * std::log(x) - x / 2 - (k / 2) * std::log(2.0) - std::lgamma(k / 2));
}

double integrate_cdf(double x, double k) {
  const int N = 200000;
  const double b = std::sqrt(x), h = b / N;
  auto g = [&](double u) {
    if (u == 0)
      return k == 1 ? 2 / std::sqrt(2 * M_PI) : 0.0;
    return 2 * u * chi2_pdf(u * u, k);
  };
  double s = 0;
  for (int i = 0; i <= N; ++i)
    s += (i == 0 || i == N ? 1 : (i % 2 ? 4 : 2)) * g(i * h);
  return s * h / 3;
}

GroupedSample<int> sample(const std::vector<int>& l, const std::vector<double>& v) {
  GroupedSample<int> s;
  for (std::size_t i = 0; i != l.size(); ++i)
    s.add(l[i], v[i]);
  return s;
}

} // namespace

TEST(Stats, EffectSizeGoldens) {
  const double a = epsilon_sq(40018.2, 500663);
  EXPECT_NEAR(a, 0.0799, 5e-5);
  EXPECT_DOUBLE_EQ(report_effect(a), 0.08);
  EXPECT_EQ(interpret(report_effect(a)), EffectSize::Moderate);
  const double b = epsilon_sq(169858.8, 500663);
  EXPECT_NEAR(b, 0.3393, 5e-5);
  EXPECT_DOUBLE_EQ(report_effect(b), 0.34);
  EXPECT_EQ(interpret(report_effect(b)), EffectSize::Large);
  const double c = epsilon_sq(9264.9, 500663);
  EXPECT_DOUBLE_EQ(report_effect(c), 0.02);
  EXPECT_EQ(interpret(report_effect(c)), EffectSize::Small);
  EXPECT_EQ(epsilon_sq(0, 10), 0.0);
  EXPECT_THROW(epsilon_sq(1, 1), DomainError);
}

TEST(Stats, InterpretationBands) {
  EXPECT_EQ(interpret(0.0), EffectSize::Negligible);
  EXPECT_EQ(interpret(0.009), EffectSize::Negligible);
  EXPECT_EQ(interpret(0.01), EffectSize::Small);
  EXPECT_EQ(interpret(0.07), EffectSize::Small);
  EXPECT_EQ(interpret(0.08), EffectSize::Moderate);
  EXPECT_EQ(interpret(0.19), EffectSize::Moderate);
  EXPECT_EQ(interpret(0.26), EffectSize::Large);
  EXPECT_EQ(interpret(0.33), EffectSize::Large);
  EXPECT_THROW(interpret(-0.1), DomainError);
}

TEST(Stats, HandCase) {
  const TestResult r = kruskal_wallis(sample({0, 0, 0, 1, 1, 1}, {1, 2, 3, 4, 5, 6}));
  EXPECT_NEAR(r.H, 3.857, 1e-3);
  EXPECT_NEAR(r.H, 27.0 / 7, 1e-12);
  EXPECT_EQ(r.df, 1);
  EXPECT_EQ(r.n, 6u);
  EXPECT_NEAR(r.p, 0.0495, 1e-4);
}

TEST(Stats, ChiSquareTailMatchesIntegratedDensity) {
  EXPECT_NEAR(chi2_sf(5.991, 2), 0.0500, 1e-3);
  EXPECT_NEAR(chi2_sf(5.991, 2), 1 - integrate_cdf(5.991, 2), 1e-10);
  EXPECT_NEAR(chi2_sf(3.857, 1), 1 - integrate_cdf(3.857, 1), 1e-10);
  for (double k : {3.0, 5.0, 10.0, 35.0})
    for (double x : {0.5, 2.0, 10.0, 40.0})
      EXPECT_NEAR(chi2_sf(x, k), 1 - integrate_cdf(x, k), 1e-9) << k << " " << x;
  EXPECT_EQ(chi2_sf(0, 3), 1.0);
  EXPECT_LT(chi2_sf(1e4, 35), 1e-100);
  EXPECT_THROW(chi2_sf(-1, 2), DomainError);
  EXPECT_THROW(chi2_sf(1, 0.5), DomainError);
}

TEST(Stats, AgreesWithNaiveImplementation) {
  std::mt19937 rng(4);
  for (int trial = 0; trial != 1000; ++trial) {
    const int k = 2 + trial % 4;
    const int n = k + 2 + trial % 17;
    std::vector<int> labels;
    std::vector<double> values;
    std::uniform_int_distribution<int> lab(0, k - 1), val(0, 6);  // plenty of ties
    for (int i = 0; i != n; ++i) {
      labels.push_back(i < k ? i : lab(rng));
      values.push_back(val(rng));
    }
    if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; }))
      continue;
    const TestResult r = kruskal_wallis(sample(labels, values));
    ASSERT_NEAR(r.H, std::max(0.0, naive_H(labels, values)), 1e-9 * (1 + r.H)) << trial;
    ASSERT_EQ(r.df, k - 1);
    ASSERT_LE(r.epsilon_sq, 1.0 + 1e-12);
  }
}

TEST(Stats, RankInvariance) {
  std::mt19937 rng(12);
  std::normal_distribution<double> g;
  std::vector<int> labels;
  std::vector<double> values, warped;
  for (int i = 0; i != 60; ++i) {
    labels.push_back(i % 3);
    values.push_back(g(rng) + (i % 3) * 0.3);
    warped.push_back(std::exp(3 * values.back()));
  }
  const double h = kruskal_wallis(sample(labels, values)).H;
  EXPECT_DOUBLE_EQ(kruskal_wallis(sample(labels, warped)).H, h);
  // shuffle observations within groups
  std::vector<int> l2;
  std::vector<double> v2;
  for (int grp = 2; grp >= 0; --grp)
    for (int i = 59; i >= 0; --i)
      if (labels[i] == grp) {
        l2.push_back(grp);
        v2.push_back(values[i]);
      }
  EXPECT_NEAR(kruskal_wallis(sample(l2, v2)).H, h, 1e-12 * h);
}

TEST(Stats, NullBehaviour) {
  std::mt19937 rng(77);
  std::normal_distribution<double> g;
  double sumH = 0, below = 0;
  const int reps = 2000;
  for (int r = 0; r != reps; ++r) {
    std::vector<int> labels;
    std::vector<double> values;
    for (int i = 0; i != 40; ++i) {
      labels.push_back(i % 3);
      values.push_back(g(rng));
    }
    const TestResult t = kruskal_wallis(sample(labels, values));
    sumH += t.H;
    below += t.p < 0.05;
  }
  EXPECT_NEAR(sumH / reps, 2.0, 0.15);
  EXPECT_NEAR(below / reps, 0.05, 0.015);
}

TEST(Stats, Degenerate) {
  EXPECT_THROW(kruskal_wallis(sample({0, 0, 1}, {1, 1, 1})), DegenerateError);
  EXPECT_THROW(kruskal_wallis(sample({0, 0, 0}, {1, 2, 3})), DomainError);
  EXPECT_THROW(kruskal_wallis(sample({0, 1}, {1, NAN})), DomainError);
}

TEST(Stats, PermutationAndBalance) {
  const auto s = sample({0, 0, 0, 0, 1, 1, 1, 1}, {1, 2, 3, 4, 5, 6, 7, 8});
  // exact: 2 of the 70 splits are as extreme as the observed one
  const double p = permutation_p(s, 20000, 3);
  EXPECT_NEAR(p, 2.0 / 70, 0.006);
  EXPECT_EQ(permutation_p(s, 500, 9), permutation_p(s, 500, 9));
  EXPECT_THROW(permutation_p(s, 0, 1), DomainError);

  const auto uneven = sample({0, 0, 0, 0, 0, 1, 1, 2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  const auto b = balance(uneven, 5);
  std::map<int, int> counts;
  for (int l : b.labels)
    ++counts[l];
  EXPECT_EQ(counts, (std::map<int, int>{{0, 2}, {1, 2}, {2, 2}}));
  EXPECT_EQ(balance(uneven, 5).values, b.values);
}

TEST(Stats, MidRanks) {
  double ties = 0;
  const std::vector<double> v{3, 1, 3, 2, 3};
  EXPECT_EQ(midranks(v, &ties), (std::vector<double>{4, 1, 4, 2, 4}));
  EXPECT_EQ(ties, 24.0);
}
