// Kruskal-Wallis rank test with tie correction, chi-square tail
// probabilities and epsilon-squared effect sizes.

#ifndef CUBATLAS_STATS_HPP_
#define CUBATLAS_STATS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "errors.hpp"
#include "rng.hpp"

namespace cubatlas {

enum class EffectSize { Negligible, Small, Moderate, Large };

inline const char* to_string(EffectSize e) {
  switch (e) {
  case EffectSize::Negligible:
    return "Negligible";
  case EffectSize::Small:
    return "Small";
  case EffectSize::Moderate:
    return "Moderate";
  case EffectSize::Large:
    return "Large";
  }
  return "?";
}

template <class Label>
struct GroupedSample {
  std::vector<Label> labels;
  std::vector<double> values;

  void add(Label l, double v) {
    labels.push_back(std::move(l));
    values.push_back(v);
  }
  std::size_t size() const { return values.size(); }
};

struct TestResult {
  double H = 0;
  int df = 0;
  std::size_t n = 0;
  double p = 1;
  double epsilon_sq = 0;
  double epsilon_sq_reported = 0;  // two decimals; the interpretation uses this
  EffectSize interpretation = EffectSize::Negligible;
  double tie_correction = 1;  // the divisor applied to H
};

// Upper tail of the chi-square distribution, Q(df/2, x/2).
inline double chi2_sf(double x, double df) {
  if (!(x >= 0) || !std::isfinite(x) || !(df >= 1))
    throw DomainError("chi2_sf: need x >= 0 and df >= 1");
  if (x == 0)
    return 1.0;
  return boost::math::gamma_q(df / 2, x / 2);
}

inline double epsilon_sq(double H, std::size_t n) {
  if (n < 2)
    throw DomainError("epsilon_sq: need at least 2 observations");
  if (!(H >= 0))
    throw DomainError("epsilon_sq: H must be non-negative");
  return H / static_cast<double>(n - 1);
}

// Effect sizes are reported to two decimals, and the label belongs to the
// reported value (0.0799 prints as 0.08 and reads as moderate).
inline double report_effect(double eps2) { return std::round(eps2 * 100) / 100; }

// Thresholds 0.01 / 0.08 / 0.26.
inline EffectSize interpret(double eps2) {
  if (!(eps2 >= 0))
    throw DomainError("effect size must be non-negative");
  if (eps2 < 0.01)
    return EffectSize::Negligible;
  if (eps2 < 0.08)
    return EffectSize::Small;
  if (eps2 < 0.26)
    return EffectSize::Moderate;
  return EffectSize::Large;
}

// Mid-ranks (1-based); ties share the mean of their positions. Also
// returns sum(t^3 - t) over tie groups.
inline std::vector<double> midranks(std::span<const double> v, double* tie_sum = nullptr) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  double ties = 0;
  for (std::size_t i = 0; i != idx.size();) {
    std::size_t j = i + 1;
    while (j != idx.size() && v[idx[j]] == v[idx[i]])
      ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2;
    for (std::size_t k = i; k != j; ++k)
      rank[idx[k]] = r;
    const double t = static_cast<double>(j - i);
    ties += t * t * t - t;
    i = j;
  }
  if (tie_sum)
    *tie_sum = ties;
  return rank;
}

namespace impl {

template <class Label>
std::vector<std::size_t> group_codes(const GroupedSample<Label>& s, std::size_t* k) {
  std::map<Label, std::size_t> code;
  for (const Label& l : s.labels)
    code.emplace(l, 0);
  std::size_t c = 0;
  for (auto& [label, v] : code)
    v = c++;
  std::vector<std::size_t> out;
  out.reserve(s.labels.size());
  for (const Label& l : s.labels)
    out.push_back(code.at(l));
  *k = code.size();
  return out;
}

inline double h_statistic(const std::vector<double>& ranks, const std::vector<std::size_t>& codes,
                          std::size_t k) {
  std::vector<double> R(k, 0.0);
  std::vector<double> m(k, 0.0);
  for (std::size_t i = 0; i != ranks.size(); ++i) {
    R[codes[i]] += ranks[i];
    m[codes[i]] += 1;
  }
  const double n = static_cast<double>(ranks.size());
  double s = 0;
  for (std::size_t j = 0; j != k; ++j)
    s += R[j] * R[j] / m[j];
  return 12.0 / (n * (n + 1)) * s - 3 * (n + 1);
}

} // namespace impl

template <class Label>
void check_sample(const GroupedSample<Label>& s) {
  if (s.labels.size() != s.values.size())
    throw DomainError("labels and values differ in length");
  for (double v : s.values)
    if (!std::isfinite(v))
      throw DomainError("sample contains non-finite values");
  std::size_t k = 0;
  impl::group_codes(s, &k);
  if (k < 2)
    throw DomainError("need at least two non-empty groups");
}

template <class Label>
TestResult kruskal_wallis(const GroupedSample<Label>& s) {
  check_sample(s);
  std::size_t k = 0;
  const auto codes = impl::group_codes(s, &k);
  double ties = 0;
  const auto ranks = midranks(s.values, &ties);
  const double n = static_cast<double>(s.size());
  TestResult r;
  r.n = s.size();
  r.df = static_cast<int>(k) - 1;
  r.tie_correction = 1 - ties / (n * n * n - n);
  if (!(r.tie_correction > 0))
    throw DegenerateError("all values are tied");
  r.H = std::max(0.0, impl::h_statistic(ranks, codes, k) / r.tie_correction);
  r.p = chi2_sf(r.H, r.df);
  r.epsilon_sq = epsilon_sq(r.H, r.n);
  r.epsilon_sq_reported = report_effect(r.epsilon_sq);
  r.interpretation = interpret(r.epsilon_sq_reported);
  return r;
}

// Monte-Carlo permutation p-value for small samples: the fraction of label
// shuffles whose H is at least the observed one (with the +1 correction).
template <class Label>
double permutation_p(const GroupedSample<Label>& s, int permutations, std::uint64_t seed) {
  check_sample(s);
  if (s.size() >= 50)
    throw DomainError("permutation p-values are offered for n < 50 only");
  if (permutations < 1)
    throw DomainError("need at least one permutation");
  std::size_t k = 0;
  auto codes = impl::group_codes(s, &k);
  double ties = 0;
  const auto ranks = midranks(s.values, &ties);
  const double h0 = impl::h_statistic(ranks, codes, k);
  SplitMix64 rng(seed);
  int hits = 0;
  for (int i = 0; i != permutations; ++i) {
    rng.shuffle(std::span<std::size_t>(codes));
    if (impl::h_statistic(ranks, codes, k) >= h0 - 1e-12 * std::abs(h0))
      ++hits;
  }
  return (hits + 1.0) / (permutations + 1.0);
}

// Random down-sampling of every group to the size of the smallest one.
template <class Label>
GroupedSample<Label> balance(const GroupedSample<Label>& s, std::uint64_t seed) {
  check_sample(s);
  std::map<Label, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i != s.size(); ++i)
    members[s.labels[i]].push_back(i);
  std::size_t smallest = s.size();
  for (const auto& [l, m] : members)
    smallest = std::min(smallest, m.size());
  SplitMix64 rng(seed);
  std::vector<std::size_t> keep;
  for (auto& [l, m] : members) {
    rng.shuffle(std::span<std::size_t>(m));
    keep.insert(keep.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(smallest));
  }
  std::sort(keep.begin(), keep.end());
  GroupedSample<Label> out;
  for (std::size_t i : keep)
    out.add(s.labels[i], s.values[i]);
  return out;
}

} // namespace cubatlas

#endif
