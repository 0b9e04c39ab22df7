#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ctrw/criteria.hpp"
#include "support.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using namespace ctrw;

namespace {

// a_i = 2^i capped below overflow: Phi_i decays geometrically, no power law declared.
ScaleRule doubling() {
  return ScaleRule::function([](StateIndex i) { return std::min(std::ldexp(1.0, int(std::min<StateIndex>(i, 1000))), 1e300); },
                             "2^i");
}

SeriesPolicy numeric_only() {
  SeriesPolicy p;
  p.use_closed_forms = false;
  return p;
}

}  // namespace

TEST_CASE("speed measure", "[criteria]") {
  const auto c = ChainSpec::homogeneous(0.7);
  CHECK_THAT(speed_measure(c, test::markov_const(1.0), 0), WithinRel(0.5, 1e-15));
  CHECK_THAT(speed_measure(c, test::markov_const(4.0), 1), WithinRel(2.0 / 3.0, 1e-14));
  // nu_i = Phi_i / (q_i delta_{i-1}) = Phi (7/3)^i / 0.7 ... checked against the product directly
  const double nu5 = speed_measure(c, test::markov_const(4.0), 5);
  CHECK_THAT(nu5, WithinRel(0.2 / (0.3 * std::pow(3.0 / 7.0, 4)), 1e-13));

  const auto sym = ChainSpec::homogeneous(0.5);
  const auto det = WaitingSpec::symmetric(DistModel::deterministic(0.4));
  const double big_phi = -std::expm1(-0.4);
  for (StateIndex i : {1, 2, 10, 1000}) CHECK_THAT(speed_measure(sym, det, i), WithinRel(2.0 * big_phi, 1e-13));
}

TEST_CASE("explosion series examples", "[criteria]") {
  const auto c = ChainSpec::homogeneous(0.7);
  const auto quad = explosion_series(c, test::markov(2.0));
  CHECK(quad.status == SeriesStatus::Holds);
  CHECK(quad.method == SeriesMethod::ClosedForm);
  // inner sums are 7/4 exactly, so terms are 7/4 Phi_0 and Phi_i / (p - q) for i >= 1
  double direct = 0.0;
  for (std::size_t i = quad.terms_used; i-- > 1;) direct += 1.0 / (1.0 + std::pow(i + 1.0, 2.0));
  CHECK_THAT(quad.partial_sum, WithinRel(1.75 * 0.5 + direct / 0.4, 1e-12));

  CHECK(explosion_series(c, test::markov(1.0)).status == SeriesStatus::Fails);
  CHECK(explosion_series(ChainSpec::homogeneous(0.5), test::markov(3.0)).status == SeriesStatus::Fails);
  CHECK(explosion_series(ChainSpec::homogeneous(0.5), test::markov(3.0)).method == SeriesMethod::ScaleDivergence);
}

TEST_CASE("implosion series examples", "[criteria]") {
  CHECK(implosion_series(ChainSpec::homogeneous(0.3), test::markov(2.0)).status == SeriesStatus::Holds);
  CHECK(implosion_series(ChainSpec::homogeneous(0.5), test::markov(3.0)).status == SeriesStatus::Holds);
  CHECK(implosion_series(ChainSpec::homogeneous(0.5), test::markov(1.0)).status == SeriesStatus::Fails);
  CHECK(implosion_series(ChainSpec::homogeneous(0.7), test::markov(4.0)).status == SeriesStatus::Fails);
}

TEST_CASE("classification examples", "[criteria]") {
  const auto e = classify(ChainSpec::homogeneous(0.7), test::stable(0.5, 3.0));
  CHECK(e.explosion_verdict == ExplosionVerdict::Explodes);
  CHECK(e.implosion_verdict == ImplosionVerdict::NonImploding);

  const auto i = classify(ChainSpec::homogeneous(0.3), test::stable(0.5, 3.0));
  CHECK(i.explosion_verdict == ExplosionVerdict::NonExplosive);
  CHECK(i.implosion_verdict == ImplosionVerdict::Implodes);

  for (const auto& w : {test::markov(0.5), test::markov(5.0), test::stable(0.3, 10.0)}) {
    CHECK(classify(ChainSpec::homogeneous(0.5), w).explosion_verdict == ExplosionVerdict::NonExplosive);
  }
}

TEST_CASE("closed-form Markov verdicts", "[criteria]") {
  const auto m1 = closed_form_markov(ChainSpec::homogeneous(0.6), ScaleRule::power_law(1.1));
  REQUIRE(m1);
  CHECK(m1->explosion == ExplosionVerdict::Explodes);
  const auto m2 = closed_form_markov(ChainSpec::homogeneous(0.5), ScaleRule::power_law(2.0));
  REQUIRE(m2);
  CHECK(m2->implosion == ImplosionVerdict::NonImploding);
  const auto m3 = closed_form_markov(ChainSpec::homogeneous(0.5), ScaleRule::power_law(2.5));
  REQUIRE(m3);
  CHECK(m3->implosion == ImplosionVerdict::Implodes);

  CHECK_FALSE(closed_form_markov(ChainSpec::table({0.6, 0.7}), ScaleRule::power_law(2.0)));
  CHECK_FALSE(closed_form_markov(ChainSpec::homogeneous(0.6), doubling()));
}

TEST_CASE("classifier agrees with the Markov closed forms", "[criteria]") {
  std::size_t numeric_decisions = 0;
  for (double p : {0.3, 0.5, 0.7}) {
    for (double beta : {0.5, 1.5, 2.5, 3.0}) {
      const auto chain = ChainSpec::homogeneous(p);
      const auto oracle = closed_form_markov(chain, ScaleRule::power_law(beta));
      REQUIRE(oracle);
      INFO("p=" << p << " beta=" << beta);
      const auto c = classify(chain, test::markov(beta));
      CHECK(c.explosion_verdict == oracle->explosion);
      CHECK(c.implosion_verdict == oracle->implosion);

      const auto n = classify(chain, test::markov(beta), numeric_only());
      if (n.explosion_verdict != ExplosionVerdict::Undetermined) {
        ++numeric_decisions;
        CHECK(n.explosion_verdict == oracle->explosion);
      }
      if (n.implosion_verdict != ImplosionVerdict::Undetermined) {
        ++numeric_decisions;
        CHECK(n.implosion_verdict == oracle->implosion);
      }
    }
  }
  CHECK(numeric_decisions >= 12);
}

TEST_CASE("numeric path on geometric decay", "[criteria]") {
  const auto w = WaitingSpec::symmetric(DistModel::exponential(doubling()));
  const auto up = classify(ChainSpec::homogeneous(0.7), w);
  CHECK(up.explosion_verdict == ExplosionVerdict::Explodes);
  CHECK(up.explosion.method == SeriesMethod::RatioPolicy);
  CHECK(up.implosion_verdict == ImplosionVerdict::NonImploding);

  const auto down = classify(ChainSpec::homogeneous(0.3), w);
  CHECK(down.explosion_verdict == ExplosionVerdict::NonExplosive);
  CHECK(down.implosion_verdict == ImplosionVerdict::Implodes);
  CHECK(down.implosion_series.method == SeriesMethod::RatioPolicy);

  const auto sym = classify(ChainSpec::homogeneous(0.5), w);
  CHECK(sym.implosion_verdict == ImplosionVerdict::Implodes);
}

TEST_CASE("non-vanishing Phi fails early", "[criteria]") {
  const auto w = WaitingSpec::symmetric(DistModel::exponential(ScaleRule::function([](StateIndex) { return 5.0; })));
  const auto c = classify(ChainSpec::homogeneous(0.7), w);
  CHECK(c.explosion_verdict == ExplosionVerdict::NonExplosive);
  CHECK(c.explosion.method == SeriesMethod::NecessaryCondition);
  CHECK(c.implosion_series.method == SeriesMethod::NecessaryCondition);
}

TEST_CASE("undeclared oscillating rule stays undetermined", "[criteria]") {
  const auto chain =
      ChainSpec::custom([](StateIndex i) { return Transition{0.5 + 0.001 * std::sin(double(i)), 0.5 - 0.001 * std::sin(double(i))}; });
  SeriesPolicy policy;
  policy.max_terms = 1 << 16;
  const auto c = classify(chain, WaitingSpec::symmetric(DistModel::exponential(doubling())), policy);
  CHECK(c.explosion_verdict == ExplosionVerdict::Undetermined);
  CHECK(c.explosion.terms_used > 0);
  CHECK_FALSE(c.determinate());
}

TEST_CASE("regularly varying waits keep boundary cases open", "[criteria]") {
  DistModel::RegVarSpec s;
  s.alpha = 0.5;
  s.survival = [](double x) { return std::pow(1.0 + x, -0.5); };
  s.inverse_survival = [](double u) { return std::pow(u, -2.0) - 1.0; };
  const auto at = [&](double beta) { return WaitingSpec::symmetric(DistModel::regvar(s, ScaleRule::power_law(beta))); };
  CHECK(classify(ChainSpec::homogeneous(0.7), at(3.0)).explosion_verdict == ExplosionVerdict::Explodes);
  CHECK(classify(ChainSpec::homogeneous(0.7), at(2.0)).explosion_verdict == ExplosionVerdict::Undetermined);
  CHECK(classify(ChainSpec::homogeneous(0.7), at(1.0)).explosion_verdict == ExplosionVerdict::NonExplosive);
  CHECK(classify(ChainSpec::homogeneous(0.3), at(3.0)).implosion_verdict == ImplosionVerdict::Implodes);
}

TEST_CASE("reordered truncations equal the original double sums", "[criteria]") {
  struct Case {
    ChainSpec chain;
    WaitingSpec waiting;
  };
  const std::vector<Case> cases{
      {ChainSpec::homogeneous(0.7), test::markov(2.0)},
      {ChainSpec::homogeneous(0.3), test::stable(0.5, 3.0)},
      {ChainSpec::homogeneous(0.5), test::markov(1.0)},
      {ChainSpec::table({0.9, 0.2, 0.6, 0.45}), test::stable(0.7, 1.5)},
      {ChainSpec::custom([](StateIndex i) { return Transition{0.5 + 0.3 * std::sin(double(i)), 0.5 - 0.3 * std::sin(double(i))}; }),
       WaitingSpec{DistModel::exponential(ScaleRule::power_law(1.0)),
                   DistModel::scaled(BaseLaw::gamma(2.0, 0.5), ScaleRule::power_law(2.0)), 0.7}},
  };
  for (std::size_t k = 0; k < cases.size(); ++k) {
    for (std::size_t n : {1, 10, 100, 1000}) {
      INFO("case " << k << " n=" << n);
      const auto e = explosion_truncated_sums(cases[k].chain, cases[k].waiting, n);
      CHECK_THAT(e.log_reordered, WithinAbs(e.log_original, 1e-10));
      const auto m = implosion_truncated_sums(cases[k].chain, cases[k].waiting, n);
      CHECK_THAT(m.log_reordered, WithinAbs(m.log_original, 1e-10));
    }
  }
}

TEST_CASE("verdicts do not depend on the Laplace point", "[criteria]") {
  for (double p : {0.3, 0.5, 0.7}) {
    for (double beta : {0.5, 1.5, 2.5, 3.0}) {
      for (const auto& w : {test::markov(beta), test::stable(0.5, beta), test::stable(0.3, beta)}) {
        const auto base = classify(ChainSpec::homogeneous(p), w, {}, 1.0);
        for (double lambda : {0.5, 2.0}) {
          const auto other = classify(ChainSpec::homogeneous(p), w, {}, lambda);
          CHECK(other.explosion_verdict == base.explosion_verdict);
          CHECK(other.implosion_verdict == base.implosion_verdict);
        }
      }
    }
  }
}
