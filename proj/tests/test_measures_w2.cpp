#include "doctest.h"

#include <cmath>

#include "hrelab/laws.hpp"
#include "hrelab/measures_w2.hpp"
#include "hrelab/rng.hpp"
#include "test_helpers.hpp"

using namespace hrelab;

namespace {

// random measure with masses that are integer multiples of 1/denom
EmpiricalMeasure random_measure(StreamRng& rng, int max_points, int denom,
                                std::vector<int>* units_out = nullptr) {
  const int k = 1 + static_cast<int>(rng.next_u64() % max_points);
  std::vector<int> units(k, 1);
  for (int i = 0; i < denom - k; ++i) ++units[rng.next_u64() % k];
  std::vector<double> sup;
  while (static_cast<int>(sup.size()) < k) {
    const double v = std::floor(rng.next_unit() * 41.0) - 20.0;  // lattice, distinct
    bool dup = false;
    for (double x : sup) dup |= (x == v);
    if (!dup) sup.push_back(v);
  }
  std::sort(sup.begin(), sup.end());
  std::vector<double> masses(k);
  for (int i = 0; i < k; ++i) masses[i] = static_cast<double>(units[i]) / denom;
  if (units_out) *units_out = units;
  return EmpiricalMeasure(sup, masses);
}

}  // namespace

TEST_SUITE("measures_w2") {

TEST_CASE("w2 closed cases") {
  const auto d0 = EmpiricalMeasure::dirac(0.0);
  const auto d1 = EmpiricalMeasure::dirac(1.0);
  CHECK(w2(d0, d0) == 0.0);
  CHECK(w2(d0, d1) == 1.0);
  const EmpiricalMeasure a({0.0, 2.0}, {0.5, 0.5});
  const EmpiricalMeasure b({1.0, 3.0}, {0.5, 0.5});
  CHECK(std::abs(w2(a, b) - 1.0) <= 1e-15);  // monotone map 0->1, 2->3
}

TEST_CASE("monotone coupling: marginals and cost") {
  SUBCASE("point to point") {
    const auto c = monotone_coupling(EmpiricalMeasure::dirac(0.0), EmpiricalMeasure::dirac(1.0));
    REQUIRE(c.size() == 1);
    CHECK(c[0].x == 0.0);
    CHECK(c[0].y == 1.0);
    CHECK(c[0].mass == 1.0);
  }
  SUBCASE("identical measures couple diagonally at zero cost") {
    const EmpiricalMeasure m({-1.0, 0.5, 2.0}, {0.25, 0.5, 0.25});
    double cost = 0.0;
    for (const auto& e : monotone_coupling(m, m)) {
      CHECK(e.x == e.y);
      cost += e.mass * (e.x - e.y) * (e.x - e.y);
    }
    CHECK(cost == 0.0);
  }
  SUBCASE("random marginal checks") {
    StreamRng rng(11, 0);
    for (int t = 0; t < 40; ++t) {
      const auto mu = random_measure(rng, 5, 16);
      const auto nu = random_measure(rng, 5, 16);
      const auto c = monotone_coupling(mu, nu);
      double cost = 0.0;
      std::vector<double> ma(mu.size(), 0.0), mb(nu.size(), 0.0);
      for (const auto& e : c) {
        cost += e.mass * (e.x - e.y) * (e.x - e.y);
        for (int i = 0; i < mu.size(); ++i)
          if (mu.support()[i] == e.x) ma[i] += e.mass;
        for (int i = 0; i < nu.size(); ++i)
          if (nu.support()[i] == e.y) mb[i] += e.mass;
      }
      for (int i = 0; i < mu.size(); ++i) CHECK(std::abs(ma[i] - mu.masses()[i]) <= 1e-12);
      for (int i = 0; i < nu.size(); ++i) CHECK(std::abs(mb[i] - nu.masses()[i]) <= 1e-12);
      const double d = w2(mu, nu);
      CHECK(std::abs(cost - d * d) <= 1e-12 * std::max(1.0, d * d));
    }
  }
}

TEST_CASE("w2 equals the assignment oracle on small random measures") {
  StreamRng rng(23, 0);
  const int denom = 16;
  for (int t = 0; t < 60; ++t) {
    std::vector<int> ua, ub;
    const auto mu = random_measure(rng, 5, denom, &ua);
    const auto nu = random_measure(rng, 5, denom, &ub);
    const double oracle =
        testutil::transport_cost_oracle(mu.support(), ua, nu.support(), ub, denom);
    const double d = w2(mu, nu);
    CHECK(std::abs(d * d - oracle) <= 1e-9);
  }
}

TEST_CASE("w2 metric axioms on random triples") {
  StreamRng rng(29, 0);
  for (int t = 0; t < 60; ++t) {
    const auto a = random_measure(rng, 6, 24);
    const auto b = random_measure(rng, 6, 24);
    const auto c = random_measure(rng, 6, 24);
    CHECK(w2(a, b) == w2(b, a));  // the merge walk is symmetric
    CHECK(w2(a, a) == 0.0);
    CHECK(w2(a, c) <= w2(a, b) + w2(b, c) + 1e-9);
  }
}

TEST_CASE("join") {
  SUBCASE("target equal to the source law reproduces f") {
    auto space = DiscreteSpace::uniform(4);
    RandomVariable f(space, {-1, -1, 1, 1});
    const auto nu = EmpiricalMeasure::law_of(f);
    const auto res = join(f, nu, required_join_grid(f, nu));
    CHECK(res.mean_square_error == 0.0);
    CHECK(res.law_discrepancy <= 1e-12);
  }
  SUBCASE("point source to a symmetric two-point target") {
    auto space = DiscreteSpace::uniform(1);
    RandomVariable f(space, {0.0});
    const EmpiricalMeasure nu({-1.0, 1.0}, {0.5, 0.5});
    const auto res = join(f, nu, 2);
    CHECK(std::abs(res.mean_square_error - 1.0) <= 1e-12);
    CHECK(std::abs(res.w2_squared - 1.0) <= 1e-12);
    CHECK(res.law_discrepancy <= 1e-12);
  }
  SUBCASE("fair signs moved to +-2") {
    auto space = DiscreteSpace::uniform(2);
    RandomVariable f(space, {-1.0, 1.0});
    const EmpiricalMeasure nu({-2.0, 2.0}, {0.5, 0.5});
    const auto res = join(f, nu, 1);
    CHECK(std::abs(res.mean_square_error - 1.0) <= 1e-12);
    CHECK(std::abs(res.w2_squared - 1.0) <= 1e-12);
  }
  SUBCASE("grid too small names the required size") {
    auto space = DiscreteSpace::uniform(1);
    RandomVariable f(space, {0.0});
    const EmpiricalMeasure nu({0.0, 1.0}, {1.0 / 3.0, 2.0 / 3.0});
    CHECK_THROWS_WITH(join(f, nu, 2), "grid insufficient: need grid 3");
  }
  SUBCASE("random battery: law exact, cost optimal") {
    StreamRng rng(31, 0);
    for (int t = 0; t < 30; ++t) {
      const int atoms = 2 + static_cast<int>(rng.next_u64() % 5);
      std::vector<double> w(atoms, 1.0 / atoms);
      auto space = DiscreteSpace::make(std::move(w));
      std::vector<double> fv(atoms);
      for (auto& x : fv) x = std::floor(rng.next_unit() * 7.0) - 3.0;
      RandomVariable f(space, std::move(fv));
      const auto nu = random_measure(rng, 4, 12);
      const int grid = required_join_grid(f, nu);
      const auto res = join(f, nu, grid);
      CHECK(res.law_discrepancy <= 1e-12);
      CHECK(res.mean_square_error <= res.w2_squared + 1e-9);
    }
  }
}

TEST_CASE("conditional tables and aggregation") {
  SUBCASE("single block returns the unconditional law") {
    auto space = DiscreteSpace::uniform(4);
    std::vector<RandomVariable> fs{RandomVariable(space, {0, 1, 2, 3})};
    const auto table = conditional_measure_table(Partition::trivial(space), fs);
    const auto agg = aggregate(table, fs);
    CHECK(agg.pass);
    const auto law = EmpiricalMeasure::law_of(fs[0]);
    REQUIRE(agg.mixtures[0].size() == law.size());
    for (int i = 0; i < law.size(); ++i)
      CHECK(std::abs(agg.mixtures[0].masses()[i] - law.masses()[i]) <= 1e-12);
  }
  SUBCASE("two equal blocks with point laws 0 and 2") {
    auto space = DiscreteSpace::uniform(2);
    std::vector<RandomVariable> fs{RandomVariable(space, {0.0, 2.0})};
    const auto table = conditional_measure_table(Partition(space, {{0}, {1}}), fs);
    const auto agg = aggregate(table, fs);
    CHECK(agg.pass);
    CHECK(std::abs(agg.mixtures[0].mean() - 1.0) <= 1e-15);
    CHECK(agg.mixtures[0].size() == 2);
  }
  SUBCASE("random 8-atom space, random partition, moments exact") {
    StreamRng rng(37, 0);
    for (int t = 0; t < 20; ++t) {
      std::vector<double> w(8);
      double s = 0.0;
      for (auto& x : w) {
        x = 0.2 + rng.next_unit();
        s += x;
      }
      for (auto& x : w) x /= s;
      auto space = DiscreteSpace::make(std::move(w));
      std::vector<RandomVariable> fs;
      for (int n = 0; n < 3; ++n) {
        std::vector<double> v(8);
        for (auto& x : v) x = 4.0 * rng.next_unit() - 2.0;
        fs.emplace_back(space, std::move(v));
      }
      std::vector<std::vector<int>> blocks(1 + rng.next_u64() % 3);
      for (int a = 0; a < 8; ++a) blocks[a % blocks.size()].push_back(a);
      const auto table = conditional_measure_table(Partition(space, blocks), fs);
      CHECK(aggregate(table, fs).pass);
    }
  }
}

TEST_CASE("dyadic tail profile") {
  SUBCASE("fair signs have empty profile") {
    const auto law = Law::rademacher();
    const auto prof = dyadic_profile([&](double t) { return law.abs_tail(t); }, 8, 1.0);
    for (double a : prof.a) CHECK(a == 0.0);
    CHECK(prof.partial_sums.back() == 0.0);
    CHECK(prof.sandwich_ok);
  }
  SUBCASE("uniform on [-4,4]") {
    const auto law = Law::uniform_sym(4.0);
    const auto prof =
        dyadic_profile([&](double t) { return law.abs_tail(t); }, 6, law.second_moment());
    CHECK(std::abs(prof.a[0] - 0.75) <= 1e-15);
    CHECK(std::abs(prof.a[1] - 0.5) <= 1e-15);
    CHECK(prof.a[2] == 0.0);
    CHECK(std::abs(prof.partial_sums.back() - 2.75) <= 1e-12);
    CHECK(std::abs(*prof.lower_bound - 1.375) <= 1e-12);
    CHECK(prof.sandwich_ok);  // 1.375 <= 16/3
  }
  SUBCASE("heavy tail diverges geometrically") {
    const auto law = Law::pareto_sym(1.5);
    const auto prof = dyadic_profile([&](double t) { return law.abs_tail(t); }, 20);
    // terms 4^i * 2^(-1.5 i) = 2^(i/2)
    for (int i = 0; i <= 20; ++i)
      CHECK(std::abs(prof.terms[i] - std::pow(2.0, 0.5 * i)) <= 1e-9 * prof.terms[i]);
    CHECK(prof.partial_sums[20] > 2.0 * prof.partial_sums[18]);
  }
}

TEST_CASE("truncation levels") {
  SUBCASE("bounded law saturates at the bound") {
    const auto law = Law::rademacher();
    const auto K = truncation_levels([&](double t) { return law.abs_tail(t); },
                                     [&](double t) { return law.abs_tail_moment(t); }, 10);
    for (double k : K) CHECK(k == 1.0);
  }
  SUBCASE("standard normal via quadrature oracle") {
    const auto law = Law::gaussian(0.0, 1.0);
    // independent route: Simpson quadrature of the density on the same grid
    auto q_tail = [](double K) {
      return 2.0 * testutil::simpson([](double x) { return hrelab::normal_pdf(x); }, K, K + 12.0,
                                     4000);
    };
    auto q_moment = [](double K) {
      return 2.0 * testutil::simpson([](double x) { return x * hrelab::normal_pdf(x); }, K,
                                     K + 12.0, 4000);
    };
    double expected1 = 0.0;
    for (int j = -64; j <= 64; ++j) {
      const double K = std::pow(2.0, j / 8.0);
      if (q_tail(K) <= 0.5 && q_moment(K) <= 0.5) {
        expected1 = K;
        break;
      }
    }
    const auto K = truncation_levels([&](double t) { return law.abs_tail(t); },
                                     [&](double t) { return law.abs_tail_moment(t); }, 6);
    CHECK(K[0] == expected1);
    // the partial-moment constraint binds: 2*phi(K) <= 1/2 forces K close to 1
    CHECK(K[0] >= 0.9);
    for (int n = 1; n < 6; ++n) CHECK(K[n] >= K[n - 1]);
  }
  SUBCASE("heavy tail: the partial-moment constraint dominates, K_n ~ 9*4^n") {
    const auto law = Law::pareto_sym(1.5);
    const auto K = truncation_levels([&](double t) { return law.abs_tail(t); },
                                     [&](double t) { return law.abs_tail_moment(t); }, 8);
    for (int n = 1; n <= 8; ++n) {
      const double requirement = 9.0 * std::pow(4.0, n);  // 3 K^-1/2 <= 2^-n
      CHECK(K[n - 1] >= requirement * (1.0 - 1e-12));
      CHECK(K[n - 1] <= requirement * std::pow(2.0, 0.125) * (1.0 + 1e-12));
      CHECK(K[n - 1] >= std::pow(2.0, 2.0 * n / 3.0));  // tail requirement, weaker
    }
  }
}

TEST_CASE("serialization round trip") {
  const EmpiricalMeasure m({-1.5, 0.0, 2.25}, {0.125, 0.5, 0.375});
  const auto back = EmpiricalMeasure::deserialize(m.serialize());
  REQUIRE(back.size() == m.size());
  for (int i = 0; i < m.size(); ++i) {
    CHECK(back.support()[i] == m.support()[i]);
    CHECK(back.masses()[i] == m.masses()[i]);
  }
}

}  // TEST_SUITE
