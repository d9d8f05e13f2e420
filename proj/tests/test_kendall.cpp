#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "rkmt/error.hpp"
#include "rkmt/kendall.hpp"
#include "rkmt/metrics.hpp"

using namespace rkmt;

namespace {

// O(n^2) pair-enumeration oracle, independent of the merge-sort route.
struct BruteKendall {
  std::uint64_t concordant = 0, discordant = 0;
  std::uint64_t tied_x = 0, tied_y = 0, tied_xy = 0;
  double tau = 0.0;
  bool degenerate = false;
};

BruteKendall brute_kendall(const std::vector<double>& xs,
                           const std::vector<double>& ys) {
  BruteKendall out;
  const std::size_t n = xs.size();
  for (std::size_t i = 0; i + 1 < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = xs[i] - xs[j];
      const double dy = ys[i] - ys[j];
      if (dx == 0 && dy == 0) {
        ++out.tied_x;
        ++out.tied_y;
        ++out.tied_xy;
      } else if (dx == 0) {
        ++out.tied_x;
      } else if (dy == 0) {
        ++out.tied_y;
      } else if (dx * dy > 0) {
        ++out.concordant;
      } else {
        ++out.discordant;
      }
    }
  const std::uint64_t n0 = n * (n - 1) / 2;
  if (out.tied_x == n0 || out.tied_y == n0) {
    out.degenerate = true;
    return out;
  }
  out.tau = (static_cast<double>(out.concordant) -
             static_cast<double>(out.discordant)) /
            std::sqrt(static_cast<double>(n0 - out.tied_x) *
                      static_cast<double>(n0 - out.tied_y));
  return out;
}

std::int64_t brute_statistic(const std::vector<double>& xs,
                             const std::vector<double>& ys) {
  std::int64_t stat = 0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      const double prod = (xs[i] - xs[j]) * (ys[i] - ys[j]);
      if (prod > 0) ++stat;
      else if (prod < 0) --stat;
    }
  return stat;
}

// Exact p by enumerating all n! index permutations of ys.
double brute_exact_p(const std::vector<double>& xs,
                     const std::vector<double>& ys) {
  const std::uint64_t observed =
      static_cast<std::uint64_t>(std::abs(brute_statistic(xs, ys)));
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::uint64_t total = 0, at_least = 0;
  std::vector<double> permuted(ys.size());
  do {
    ++total;
    for (std::size_t i = 0; i < idx.size(); ++i) permuted[i] = ys[idx[i]];
    if (static_cast<std::uint64_t>(std::abs(brute_statistic(xs, permuted))) >=
        observed)
      ++at_least;
  } while (std::next_permutation(idx.begin(), idx.end()));
  return static_cast<double>(at_least) / static_cast<double>(total);
}

}  // namespace

TEST_SUITE_BEGIN("kendall");

TEST_CASE("identical and reversed orders") {
  const std::vector<double> xs{1, 2, 3, 4};
  CHECK(kendall_tau(xs, xs).tau == doctest::Approx(1.0));
  const std::vector<double> rev{4, 3, 2, 1};
  CHECK(kendall_tau(xs, rev).tau == doctest::Approx(-1.0));
}

TEST_CASE("hand pair count") {
  const std::vector<double> xs{1, 2, 3, 4};
  const std::vector<double> ys{1, 3, 2, 4};
  const CorrelationResult r = kendall_tau(xs, ys);
  CHECK(r.concordant == 5);
  CHECK(r.discordant == 1);
  CHECK(r.tied_x == 0);
  CHECK(r.tied_y == 0);
  CHECK(std::abs(r.tau - 4.0 / 6.0) <= 1e-12);
  CHECK(r.p_value == brute_exact_p(xs, ys));
}

TEST_CASE("matches the pair-enumeration oracle without ties") {
  std::mt19937 rng(67);
  std::uniform_int_distribution<int> n_dist(2, 200);
  std::uniform_real_distribution<double> value(-10, 10);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = n_dist(rng);
    std::vector<double> xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
      xs[i] = value(rng);
      ys[i] = value(rng);
    }
    const CorrelationResult fast = kendall_tau(xs, ys);
    const BruteKendall slow = brute_kendall(xs, ys);
    CHECK(fast.concordant == slow.concordant);
    CHECK(fast.discordant == slow.discordant);
    CHECK(fast.tied_x == slow.tied_x);
    CHECK(fast.tied_y == slow.tied_y);
    CHECK(std::abs(fast.tau - slow.tau) <= 1e-12);
  }
}

TEST_CASE("matches the pair-enumeration oracle with heavy ties") {
  std::mt19937 rng(71);
  std::uniform_int_distribution<int> n_dist(2, 200);
  std::uniform_int_distribution<int> value(0, 6);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = n_dist(rng);
    std::vector<double> xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
      xs[i] = value(rng);
      ys[i] = value(rng);
    }
    const CorrelationResult fast = kendall_tau(xs, ys);
    const BruteKendall slow = brute_kendall(xs, ys);
    CHECK(fast.degenerate == slow.degenerate);
    CHECK(fast.concordant == slow.concordant);
    CHECK(fast.discordant == slow.discordant);
    CHECK(fast.tied_x == slow.tied_x);
    CHECK(fast.tied_y == slow.tied_y);
    CHECK(fast.tied_xy == slow.tied_xy);
    if (!fast.degenerate) CHECK(std::abs(fast.tau - slow.tau) <= 1e-12);
  }
}

TEST_CASE("exact p-values match full permutation enumeration") {
  std::mt19937 rng(73);
  std::uniform_int_distribution<int> n_dist(2, 8);
  std::uniform_int_distribution<int> value(0, 4);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = n_dist(rng);
    std::vector<double> xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
      xs[i] = value(rng);
      ys[i] = value(rng);
    }
    const CorrelationResult r = kendall_tau(xs, ys);
    if (r.degenerate) continue;
    CHECK(r.p_value == brute_exact_p(xs, ys));
  }
}

TEST_CASE("normal-approximation p matches a frozen reference") {
  // Reference values computed with an independent tie-adjusted
  // implementation of the asymptotic test.
  const std::vector<double> xs{5, 1, 6, 2, 1, 6, 5, 5, 7, 3,
                               6, 2, 4, 4, 1, 1, 1, 5, 4, 7};
  const std::vector<double> ys{5.5, 1.5, 7.0, 5.0, 3.5, 6.0, 2.5,
                               2.5, 4.5, 3.5, 3.0, 5.0, 4.0, 5.0,
                               1.5, 1.5, 0.5, 5.5, 5.0, 4.5};
  const CorrelationResult r = kendall_tau(xs, ys);
  CHECK(std::abs(r.tau - 0.43754284483460443) <= 1e-12);
  CHECK(std::abs(r.p_value - 0.012452893314334867) <= 1e-12);

  std::vector<double> inc(50), sq(50);
  for (int i = 0; i < 50; ++i) {
    inc[i] = i;
    sq[i] = static_cast<double>(i) * i;
  }
  const CorrelationResult perfect = kendall_tau(inc, sq);
  CHECK(perfect.tau == doctest::Approx(1.0));
  CHECK(std::abs(perfect.p_value - 1.2213583807296402e-24) <=
        1e-30 + 1e-12 * 1.2213583807296402e-24);
}

TEST_CASE("antisymmetry is exact") {
  std::mt19937 rng(79);
  std::uniform_int_distribution<int> value(0, 9);
  std::vector<double> xs(30), ys(30), neg(30);
  for (int i = 0; i < 30; ++i) {
    xs[i] = value(rng);
    ys[i] = value(rng);
    neg[i] = -ys[i];
  }
  CHECK(kendall_tau(xs, neg).tau == -kendall_tau(xs, ys).tau);
}

TEST_CASE("strictly increasing maps leave tau unchanged") {
  std::mt19937 rng(83);
  std::uniform_real_distribution<double> value(-3, 3);
  std::vector<double> xs(40), ys(40), mapped(40);
  for (int i = 0; i < 40; ++i) {
    xs[i] = value(rng);
    ys[i] = value(rng);
    mapped[i] = std::exp(xs[i]);  // strictly increasing
  }
  CHECK(kendall_tau(mapped, ys).tau == kendall_tau(xs, ys).tau);
}

TEST_CASE("degenerate inputs are flagged, not NaN") {
  const std::vector<double> flat{2, 2, 2, 2};
  const std::vector<double> vary{1, 2, 3, 4};
  const CorrelationResult r1 = kendall_tau(flat, vary);
  CHECK(r1.degenerate);
  CHECK(std::isfinite(r1.tau));
  const CorrelationResult r2 = kendall_tau(vary, flat);
  CHECK(r2.degenerate);
}

TEST_CASE("input validation") {
  const std::vector<double> a{1, 2, 3};
  const std::vector<double> b{1, 2};
  CHECK_THROWS_WITH_AS(kendall_tau(a, b), doctest::Contains("length mismatch"),
                       InputError);
  const std::vector<double> single{1};
  CHECK_THROWS_WITH_AS(kendall_tau(single, single),
                       doctest::Contains("at least 2"), InputError);
}

TEST_CASE("orientation flips negate tau exactly") {
  DownstreamRecord per{"r1", 20000, 6, "PR", 0.12,
                       Orientation::lower_is_better};
  CHECK(orient(per) == -0.12);
  DownstreamRecord acc{"r1", 20000, 6, "KS", 0.95,
                       Orientation::higher_is_better};
  CHECK(orient(acc) == 0.95);

  std::mt19937 rng(89);
  std::uniform_real_distribution<double> value(0, 1);
  std::vector<double> ranks(25), raw(25), as_higher(25), as_lower(25);
  for (int i = 0; i < 25; ++i) {
    ranks[i] = value(rng);
    raw[i] = value(rng);
    DownstreamRecord rec{"r", 0, 0, "t", raw[i], Orientation::higher_is_better};
    as_higher[i] = orient(rec);
    rec.orientation = Orientation::lower_is_better;
    as_lower[i] = orient(rec);
  }
  CHECK(kendall_tau(ranks, as_lower).tau == -kendall_tau(ranks, as_higher).tau);
}

TEST_CASE("grouping names round-trip") {
  for (Grouping g : {Grouping::per_layer, Grouping::per_task,
                     Grouping::per_layer_and_task, Grouping::pooled})
    CHECK(grouping_from_name(grouping_name(g)) == g);
  CHECK_THROWS_AS(grouping_from_name("bogus"), InputError);
}

TEST_CASE("tau by group") {
  std::vector<Observation> obs;
  // layers 0 and 3: rank and performance concordant; layer 5: one point only
  for (int step = 1; step <= 4; ++step) {
    obs.push_back({"r1", static_cast<std::uint64_t>(step), 0, "PR",
                   double(step), double(step) * 2});
    obs.push_back({"r1", static_cast<std::uint64_t>(step), 3, "PR",
                   double(step), 10 - double(step)});
  }
  obs.push_back({"r1", 1, 5, "PR", 1.0, 1.0});

  SUBCASE("per layer") {
    const GroupedCorrelations grouped = tau_by_group(obs, Grouping::per_layer);
    REQUIRE(grouped.groups.size() == 2);
    CHECK(grouped.groups[0].key == "layer=0");
    CHECK(grouped.groups[0].result.tau == doctest::Approx(1.0));
    CHECK(grouped.groups[1].key == "layer=3");
    CHECK(grouped.groups[1].result.tau == doctest::Approx(-1.0));
    REQUIRE(grouped.diagnostics.size() == 1);
    CHECK(grouped.diagnostics[0].find("layer=5") != std::string::npos);
    CHECK(grouped.diagnostics[0].find("insufficient") != std::string::npos);
  }
  SUBCASE("pooled") {
    const GroupedCorrelations grouped = tau_by_group(obs, Grouping::pooled);
    REQUIRE(grouped.groups.size() == 1);
    CHECK(grouped.groups[0].key == "pooled");
    CHECK(grouped.groups[0].result.n_pairs == 9);
  }
  SUBCASE("per layer and task") {
    const GroupedCorrelations grouped =
        tau_by_group(obs, Grouping::per_layer_and_task);
    REQUIRE(grouped.groups.size() == 2);
    CHECK(grouped.groups[0].key == "layer=0,task=PR");
  }
  SUBCASE("degenerate group goes to diagnostics") {
    std::vector<Observation> tied;
    for (int step = 1; step <= 3; ++step)
      tied.push_back({"r1", static_cast<std::uint64_t>(step), 0, "KS", 5.0,
                      double(step)});
    const GroupedCorrelations grouped = tau_by_group(tied, Grouping::per_layer);
    CHECK(grouped.groups.empty());
    REQUIRE(grouped.diagnostics.size() == 1);
    CHECK(grouped.diagnostics[0].find("degenerate") != std::string::npos);
  }
}

TEST_SUITE_END();
