#include "rkmt/kendall.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

#include "rkmt/error.hpp"

namespace rkmt {
namespace {

// Pairs within equal-value groups: sum of t(t-1)/2.
std::uint64_t tied_pairs(const std::vector<double>& sorted) {
  std::uint64_t pairs = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const std::uint64_t t = j - i;
    pairs += t * (t - 1) / 2;
    i = j;
  }
  return pairs;
}

// Sizes of equal-value groups in a sorted vector.
std::vector<std::uint64_t> tie_group_sizes(const std::vector<double>& sorted) {
  std::vector<std::uint64_t> sizes;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    if (j - i > 1) sizes.push_back(j - i);
    i = j;
  }
  return sizes;
}

// Strict inversions (i < j, v[i] > v[j]) counted by bottom-up merge sort;
// sorts v in place.
std::uint64_t count_inversions(std::vector<double>& v) {
  std::vector<double> buf(v.size());
  std::uint64_t inversions = 0;
  for (std::size_t width = 1; width < v.size(); width *= 2) {
    for (std::size_t left = 0; left + width < v.size(); left += 2 * width) {
      const std::size_t mid = left + width;
      const std::size_t right = std::min(left + 2 * width, v.size());
      std::size_t i = left, j = mid, k = left;
      while (i < mid && j < right) {
        if (v[i] <= v[j]) {
          buf[k++] = v[i++];
        } else {
          inversions += mid - i;
          buf[k++] = v[j++];
        }
      }
      while (i < mid) buf[k++] = v[i++];
      while (j < right) buf[k++] = v[j++];
      std::copy(buf.begin() + static_cast<std::ptrdiff_t>(left),
                buf.begin() + static_cast<std::ptrdiff_t>(right),
                v.begin() + static_cast<std::ptrdiff_t>(left));
    }
  }
  return inversions;
}

// C' - D' for one arrangement, by pair enumeration.
std::int64_t concordance_statistic(std::span<const double> xs,
                                   std::span<const double> ys) {
  std::int64_t stat = 0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      const double dx = xs[i] - xs[j];
      const double dy = ys[i] - ys[j];
      if (dx * dy > 0) ++stat;
      else if (dx * dy < 0) --stat;
    }
  return stat;
}

// Exact two-sided p: fraction of distinct arrangements of ys whose
// |C' - D'| reaches the observed value. Distinct arrangements of a multiset
// are equiprobable under random permutation, so counting them gives the
// same fraction as enumerating all n! index permutations.
double exact_permutation_p(std::span<const double> xs,
                           std::span<const double> ys,
                           std::uint64_t observed) {
  std::vector<double> perm(ys.begin(), ys.end());
  std::sort(perm.begin(), perm.end());
  std::uint64_t total = 0;
  std::uint64_t at_least = 0;
  do {
    ++total;
    const std::int64_t stat = concordance_statistic(xs, perm);
    if (static_cast<std::uint64_t>(std::abs(stat)) >= observed) ++at_least;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(at_least) / static_cast<double>(total);
}

// Tie-adjusted normal approximation for the distribution of C - D.
double normal_approximation_p(std::uint64_t n, std::int64_t numerator,
                              const std::vector<std::uint64_t>& x_groups,
                              const std::vector<std::uint64_t>& y_groups) {
  const double dn = static_cast<double>(n);
  double vt = 0, vu = 0, t1 = 0, u1 = 0, t2 = 0, u2 = 0;
  for (std::uint64_t t : x_groups) {
    const double dt = static_cast<double>(t);
    vt += dt * (dt - 1) * (2 * dt + 5);
    t1 += dt * (dt - 1);
    t2 += dt * (dt - 1) * (dt - 2);
  }
  for (std::uint64_t u : y_groups) {
    const double du = static_cast<double>(u);
    vu += du * (du - 1) * (2 * du + 5);
    u1 += du * (du - 1);
    u2 += du * (du - 1) * (du - 2);
  }
  const double v0 = dn * (dn - 1) * (2 * dn + 5);
  double variance = (v0 - vt - vu) / 18.0 +
                    t1 * u1 / (2.0 * dn * (dn - 1));
  if (n > 2) variance += t2 * u2 / (9.0 * dn * (dn - 1) * (dn - 2));
  if (!(variance > 0.0)) return 1.0;
  const double z = static_cast<double>(numerator) / std::sqrt(variance);
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

}  // namespace

CorrelationResult kendall_tau(std::span<const double> xs,
                              std::span<const double> ys) {
  if (xs.size() != ys.size())
    throw InputError("kendall_tau: length mismatch: " +
                     std::to_string(xs.size()) + " vs " +
                     std::to_string(ys.size()));
  const std::uint64_t n = xs.size();
  if (n < 2)
    throw InputError("kendall_tau: need at least 2 observations, got " +
                     std::to_string(n));
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]))
      throw InputError("kendall_tau: non-finite observation at index " +
                       std::to_string(i));

  CorrelationResult result;
  result.n_pairs = n;

  // Sort observation indices by (x, y); within an x group the ys are then
  // ascending, so the inversion count below sees no within-group pairs.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (xs[a] != xs[b]) return xs[a] < xs[b];
    return ys[a] < ys[b];
  });

  // Tie pair counts over x groups and (x, y) groups.
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && xs[order[j]] == xs[order[i]]) ++j;
    const std::uint64_t t = j - i;
    result.tied_x += t * (t - 1) / 2;
    std::size_t a = i;
    while (a < j) {
      std::size_t b = a + 1;
      while (b < j && ys[order[b]] == ys[order[a]]) ++b;
      const std::uint64_t v = b - a;
      result.tied_xy += v * (v - 1) / 2;
      a = b;
    }
    i = j;
  }

  std::vector<double> ys_by_x(n);
  for (std::size_t k = 0; k < n; ++k) ys_by_x[k] = ys[order[k]];
  result.discordant = count_inversions(ys_by_x);  // sorts ys_by_x
  result.tied_y = tied_pairs(ys_by_x);

  const std::uint64_t n0 = n * (n - 1) / 2;
  result.concordant =
      n0 - result.tied_x - result.tied_y + result.tied_xy - result.discordant;

  if (result.tied_x == n0 || result.tied_y == n0) {
    result.degenerate = true;
    return result;
  }

  const std::int64_t numerator = static_cast<std::int64_t>(result.concordant) -
                                 static_cast<std::int64_t>(result.discordant);
  result.tau = static_cast<double>(numerator) /
               std::sqrt(static_cast<double>(n0 - result.tied_x) *
                         static_cast<double>(n0 - result.tied_y));

  if (n <= 8) {
    result.p_value = exact_permutation_p(
        xs, ys, static_cast<std::uint64_t>(std::abs(numerator)));
  } else {
    std::vector<double> x_sorted(xs.begin(), xs.end());
    std::sort(x_sorted.begin(), x_sorted.end());
    result.p_value = normal_approximation_p(
        n, numerator, tie_group_sizes(x_sorted), tie_group_sizes(ys_by_x));
  }
  return result;
}

std::string grouping_name(Grouping grouping) {
  switch (grouping) {
    case Grouping::per_layer: return "layer";
    case Grouping::per_task: return "task";
    case Grouping::per_layer_and_task: return "layer_task";
    case Grouping::pooled: return "pooled";
  }
  throw std::logic_error("unknown grouping");
}

Grouping grouping_from_name(const std::string& name) {
  if (name == "layer") return Grouping::per_layer;
  if (name == "task") return Grouping::per_task;
  if (name == "layer_task") return Grouping::per_layer_and_task;
  if (name == "pooled") return Grouping::pooled;
  throw InputError("unknown grouping '" + name +
                   "' (expected layer, task, layer_task or pooled)");
}

GroupedCorrelations tau_by_group(std::span<const Observation> observations,
                                 Grouping grouping) {
  // Composite key sorts layers numerically before tasks lexicographically.
  using Key = std::pair<std::int64_t, std::string>;
  std::map<Key, std::pair<std::vector<double>, std::vector<double>>> buckets;
  for (const Observation& obs : observations) {
    Key key{-1, ""};
    switch (grouping) {
      case Grouping::per_layer: key.first = obs.layer; break;
      case Grouping::per_task: key.second = obs.task; break;
      case Grouping::per_layer_and_task:
        key = {obs.layer, obs.task};
        break;
      case Grouping::pooled: break;
    }
    auto& [xs, ys] = buckets[key];
    xs.push_back(obs.rank);
    ys.push_back(obs.performance);
  }

  GroupedCorrelations out;
  for (const auto& [key, lists] : buckets) {
    std::string name;
    switch (grouping) {
      case Grouping::per_layer: name = "layer=" + std::to_string(key.first); break;
      case Grouping::per_task: name = "task=" + key.second; break;
      case Grouping::per_layer_and_task:
        name = "layer=" + std::to_string(key.first) + ",task=" + key.second;
        break;
      case Grouping::pooled: name = "pooled"; break;
    }
    const auto& [xs, ys] = lists;
    if (xs.size() < 2) {
      out.diagnostics.push_back("group " + name + ": insufficient data (n=" +
                                std::to_string(xs.size()) + ")");
      continue;
    }
    CorrelationResult result = kendall_tau(xs, ys);
    if (result.degenerate) {
      out.diagnostics.push_back("group " + name +
                                ": degenerate (all ranks or all "
                                "performances tied, n=" +
                                std::to_string(xs.size()) + ")");
      continue;
    }
    out.groups.push_back({std::move(name), result});
  }
  return out;
}

}  // namespace rkmt
