#include "doctest.h"

#include <cmath>

#include "hrelab/seq_models.hpp"
#include "test_helpers.hpp"

using namespace hrelab;

TEST_SUITE("laws") {

TEST_CASE("moment functionals match quadrature") {
  StreamRng dummy(0, 0);
  SUBCASE("gaussian partial moments") {
    const auto law = Law::gaussian(0.3, 1.2);
    auto pdf = [&](double x) { return normal_pdf((x - 0.3) / 1.2) / 1.2; };
    for (double t : {0.5, 1.0, 2.5}) {
      const double q_tail =
          testutil::simpson(pdf, t, t + 20.0, 4000) + testutil::simpson(pdf, -t - 20.0, -t, 4000);
      CHECK(std::abs(law.abs_tail(t) - q_tail) <= 1e-9);
      const double q_mom =
          testutil::simpson([&](double x) { return x * pdf(x); }, t, t + 20.0, 4000) -
          testutil::simpson([&](double x) { return x * pdf(x); }, -t - 20.0, -t, 4000);
      CHECK(std::abs(law.abs_tail_moment(t) - q_mom) <= 1e-9);
      const double q_tr =
          testutil::simpson([&](double x) { return x * x * pdf(x); }, -t, t, 4000);
      CHECK(std::abs(law.trunc_second_moment(t) - q_tr) <= 1e-9);
    }
  }
  SUBCASE("laplace partial moments") {
    const auto law = Law::laplace(0.7);
    auto pdf = [](double x) { return std::exp(-std::abs(x) / 0.7) / 1.4; };
    for (double t : {0.3, 1.0, 3.0}) {
      const double q_mom =
          2.0 * testutil::simpson([&](double x) { return x * pdf(x); }, t, t + 60.0, 20000);
      CHECK(std::abs(law.abs_tail_moment(t) - q_mom) <= 1e-8);
    }
    CHECK(std::abs(law.second_moment() - 2.0 * 0.7 * 0.7) <= 1e-15);
  }
  SUBCASE("heavy-tail partial moments") {
    const auto law = Law::pareto_sym(1.5);
    auto density = [](double x) { return 0.75 * std::pow(x, -2.5); };  // one side, x >= 1
    for (double t : {1.0, 4.0, 16.0}) {
      // quadrature in log coordinates: x = t e^s
      const double q_mom = 2.0 * testutil::simpson(
                                     [&](double s) {
                                       const double x = t * std::exp(s);
                                       return x * density(x) * x;
                                     },
                                     0.0, 80.0, 20000);
      CHECK(std::abs(law.abs_tail_moment(t) - q_mom) <= 1e-6 * law.abs_tail_moment(t));
      CHECK(law.abs_tail(t) == std::pow(t, -1.5));
    }
    CHECK(law.second_moment() == kInf);
    CHECK(law.mean() == 0.0);
    // truncated second moment 3(sqrt(K)-1)
    CHECK(std::abs(law.trunc_second_moment(9.0) - 6.0) <= 1e-12);
  }
  SUBCASE("sampling hits exact tails") {
    const auto law = Law::pareto_sym(1.5);
    StreamRng rng(5, 1);
    std::int64_t hits = 0;
    const std::int64_t n = 200000;
    for (std::int64_t i = 0; i < n; ++i)
      if (std::abs(law.sample(rng)) > 4.0) ++hits;
    const double p = law.abs_tail(4.0);
    CHECK(std::abs(hits / static_cast<double>(n) - p) <= 4.0 * std::sqrt(p / n));
  }
}

}  // TEST_SUITE

TEST_SUITE("seq_models") {

TEST_CASE("sample_paths basics") {
  SUBCASE("point mass at zero gives zero paths") {
    const auto m = SequenceModel::iid(Law::point(0.0));
    const auto ens = sample_paths(m, 16, 8, 1);
    for (std::int64_t r = 0; r < 8; ++r)
      for (int n = 1; n <= 16; ++n) CHECK(ens.partial_sum(r, n) == 0.0);
  }
  SUBCASE("fair signs stay inside the light cone") {
    const auto m = SequenceModel::iid(Law::rademacher());
    const auto ens = sample_paths(m, 64, 200, 2);
    for (std::int64_t r = 0; r < 200; ++r)
      for (int n = 1; n <= 64; ++n) {
        CHECK(std::abs(ens.partial_sum(r, n)) <= n);
        CHECK(ens.max_abs(r, n) == 1.0);
      }
  }
  SUBCASE("byte-identical across worker counts") {
    const auto m = SequenceModel::definetti({Law::gaussian(-1, 1), Law::gaussian(1, 1)},
                                            {0.5, 0.5});
    const auto e1 = sample_paths(m, 32, 500, 99, 1);
    const auto e2 = sample_paths(m, 32, 500, 99, 2);
    const auto e8 = sample_paths(m, 32, 500, 99, 8);
    CHECK(e1.partial_sums == e2.partial_sums);
    CHECK(e1.partial_sums == e8.partial_sums);
    CHECK(e1.running_max == e8.running_max);
  }
  SUBCASE("mixture components pin the running average") {
    const auto m = SequenceModel::definetti({Law::gaussian(-1, 1), Law::gaussian(1, 1)},
                                            {0.5, 0.5});
    const int n = 10000;
    const std::int64_t reps = 1000;
    const auto ens = sample_paths(m, n, reps, 4);
    std::int64_t plus = 0;
    std::int64_t off_target = 0;
    for (std::int64_t r = 0; r < reps; ++r) {
      const double avg = ens.partial_sum(r, n) / n;
      if (avg > 0) ++plus;
      if (std::abs(std::abs(avg) - 1.0) > 0.05) ++off_target;
    }
    // each component is hit half the time; the average concentrates at +-1
    CHECK(std::abs(plus / static_cast<double>(reps) - 0.5) <= 3.0 * 0.5 / std::sqrt(reps));
    CHECK(off_target <= reps / 100);
  }
}

TEST_CASE("disjoint spikes fire at most once") {
  const auto m = SequenceModel::spikes({3.0, -5.0, 7.0, 11.0}, {0.1, 0.2, 0.25, 0.05});
  const auto ens = sample_paths(m, 8, 4000, 13);
  std::vector<std::int64_t> fired(4, 0);
  for (std::int64_t r = 0; r < 4000; ++r) {
    int nonzero = 0;
    for (int n = 1; n <= 8; ++n)
      if (ens.increment(r, n) != 0.0) {
        ++nonzero;
        if (n <= 4) ++fired[n - 1];
      }
    CHECK(nonzero <= 1);
  }
  const std::vector<double> probs{0.1, 0.2, 0.25, 0.05};
  for (int i = 0; i < 4; ++i) {
    const double p_hat = fired[i] / 4000.0;
    CHECK(std::abs(p_hat - probs[i]) <= 3.0 * std::sqrt(probs[i] * (1 - probs[i]) / 4000.0));
  }
}

TEST_CASE("definetti moments") {
  SUBCASE("single standard component") {
    const auto m = SequenceModel::definetti({Law::gaussian(0, 1)}, {1.0});
    const auto ms = definetti_moments(m);
    CHECK(ms.f_infty[0] == 0.0);
    CHECK(ms.eta[0] == 1.0);
    CHECK(ms.expected_eta == 1.0);
  }
  SUBCASE("two shifted components") {
    const auto m = SequenceModel::definetti({Law::gaussian(-1, 1), Law::gaussian(1, 1)},
                                            {0.5, 0.5});
    const auto ms = definetti_moments(m);
    CHECK(ms.f_infty[0] == -1.0);
    CHECK(ms.f_infty[1] == 1.0);
    CHECK(ms.eta[0] == 2.0);
    CHECK(ms.eta[1] == 2.0);
    CHECK(ms.expected_eta == 2.0);
    for (std::size_t i = 0; i < ms.eta.size(); ++i)
      CHECK(ms.eta[i] >= ms.f_infty[i] * ms.f_infty[i]);
  }
  SUBCASE("infinite second moment propagates") {
    const auto m =
        SequenceModel::definetti({Law::gaussian(0, 1), Law::pareto_sym(1.5)}, {0.5, 0.5});
    const auto ms = definetti_moments(m);
    CHECK(ms.eta[1] == kInf);
    CHECK(ms.expected_eta == kInf);
  }
}

TEST_CASE("to_discrete") {
  SUBCASE("three fair signs make the 8-atom cube") {
    const auto m = SequenceModel::iid(Law::rademacher());
    const auto real = to_discrete(m, 3, 100);
    CHECK(real.space->atom_count() == 8);
    for (int a = 0; a < 8; ++a) CHECK(real.space->weight(a) == 0.125);
    MartingalePath path;
    path.space = real.space;
    std::vector<RandomVariable> sofar;
    for (const auto& v : real.vars) {
      sofar.push_back(v);
      path.increments.push_back(v);
      path.filtration.push_back(generated_partition(real.space, sofar));
    }
    CHECK(verify_md(path, 1.0).pass);
  }
  SUBCASE("four spikes need five atoms") {
    const auto m = SequenceModel::spikes({1, 2, 3, 4}, {0.1, 0.1, 0.1, 0.1});
    const auto real = to_discrete(m, 4, 100);
    CHECK(real.space->atom_count() == 5);
    REQUIRE(real.label.has_value());
    for (int a = 0; a < 5; ++a) {
      int nonzero = 0;
      for (const auto& v : real.vars)
        if (v(a) != 0.0) ++nonzero;
      CHECK(nonzero <= 1);
    }
  }
  SUBCASE("mixture of two-point laws: 8 atoms for two variables") {
    const auto comp1 = Law::categorical({-1, 1}, {0.5, 0.5});
    const auto comp2 = Law::categorical({-2, 2}, {0.5, 0.5});
    const auto m = SequenceModel::definetti({comp1, comp2}, {0.5, 0.5});
    const auto real = to_discrete(m, 2, 100);
    CHECK(real.space->atom_count() == 8);
    REQUIRE(real.label.has_value());
  }
  SUBCASE("budget errors name the requirement") {
    const auto m = SequenceModel::iid(Law::rademacher());
    CHECK_THROWS(to_discrete(m, 20, 1000));
  }
  SUBCASE("kernel realization is an exact martingale difference") {
    KernelSpec ks;
    ks.values = {{1.0, -1.0}, {1.5, -0.5}};
    ks.probs = {{0.5, 0.5}, {0.25, 0.75}};
    ks.next_state = {{1, 0}, {0, 1}};
    const auto m = SequenceModel::kernel(ks);
    const auto real = to_discrete(m, 6, 4096);
    MartingalePath path;
    path.space = real.space;
    std::vector<RandomVariable> sofar;
    for (const auto& v : real.vars) {
      sofar.push_back(v);
      path.increments.push_back(v);
      path.filtration.push_back(generated_partition(real.space, sofar));
    }
    const auto rep = verify_md(path, 1.0);
    CHECK(rep.pass);
    CHECK(rep.max_cond_mean <= 1e-13);
  }
}

TEST_CASE("exchangeability smoke test for mixtures") {
  const auto m = SequenceModel::definetti(
      {Law::categorical({-1, 1}, {0.5, 0.5}), Law::categorical({-3, 3}, {0.25, 0.75})},
      {0.5, 0.5});
  const int dim = 4;
  const std::int64_t reps = 20000;
  const auto ens = sample_paths(m, dim, reps, 77);
  // permuting the first m coordinates must leave the m-dimensional empirical
  // marginals invariant; compare coordinate means and a pair product
  const int perm[dim] = {2, 0, 3, 1};
  double mean_id[dim] = {0, 0, 0, 0}, mean_pm[dim] = {0, 0, 0, 0};
  double prod_id = 0.0, prod_pm = 0.0;
  for (std::int64_t r = 0; r < reps; ++r) {
    double f[dim];
    for (int n = 1; n <= dim; ++n) f[n - 1] = ens.increment(r, n);
    for (int i = 0; i < dim; ++i) {
      mean_id[i] += f[i];
      mean_pm[i] += f[perm[i]];
    }
    prod_id += f[0] * f[1];
    prod_pm += f[perm[0]] * f[perm[1]];
  }
  // second moment of an increment is bounded by 9; se of the mean by 3/sqrt(R)
  const double se = 3.0 / std::sqrt(static_cast<double>(reps));
  for (int i = 0; i < dim; ++i)
    CHECK(std::abs(mean_id[i] - mean_pm[i]) / reps <= 3.0 * se);
  CHECK(std::abs(prod_id - prod_pm) / reps <= 3.0 * 9.0 / std::sqrt(static_cast<double>(reps)));
}

TEST_CASE("configuration schema") {
  SUBCASE("iid gaussian") {
    const auto m = model_from_json_text(R"({"kind":"iid","law":{"name":"gaussian","mean":0,"sd":1}})");
    CHECK(m.kind == SequenceModel::Kind::iid);
    CHECK(m.law.name() == "gaussian");
  }
  SUBCASE("mixture") {
    const auto m = model_from_json_text(
        R"({"kind":"definetti","components":[
             {"law":{"name":"gaussian","mean":-1,"sd":1},"weight":0.5},
             {"law":{"name":"gaussian","mean":1,"sd":1},"weight":0.5}]})");
    CHECK(m.kind == SequenceModel::Kind::definetti);
    CHECK(m.components.size() == 2);
  }
  SUBCASE("spikes and perturbed") {
    const auto m = model_from_json_text(
        R"({"kind":"perturbed","base":{"kind":"spikes","heights":[2,4],"probs":[0.125,0.0625]},
            "rms":{"kind":"geometric","initial":0.5,"ratio":0.5}})");
    CHECK(m.kind == SequenceModel::Kind::perturbed);
    CHECK(m.base->kind == SequenceModel::Kind::spikes);
  }
  SUBCASE("errors name the field") {
    CHECK_THROWS_WITH(model_from_json_text(R"({"law":{"name":"gaussian","mean":0,"sd":1}})"),
                      "config: model missing 'kind'");
    CHECK_THROWS_WITH(model_from_json_text(R"({"kind":"iid","law":{"name":"cauchy"}})"),
                      "config: unknown law 'cauchy'");
    CHECK_THROWS(model_from_json_text(R"({"kind":"iid","law":{"name":"gaussian","mean":0}})"));
  }
}

}  // TEST_SUITE
