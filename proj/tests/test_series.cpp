#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ctrw/series.hpp"

using Catch::Matchers::WithinRel;
using namespace ctrw;

namespace {

template <class F>
std::vector<double> log_terms(std::size_t n, F term) {
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = term(static_cast<double>(k));
  return out;
}

}  // namespace

TEST_CASE("declared tail laws", "[series]") {
  CHECK(decide_tail(TailLaw::geometric(0.5)) == SeriesStatus::Holds);
  CHECK(decide_tail(TailLaw::geometric(1.5)) == SeriesStatus::Fails);
  CHECK(decide_tail(TailLaw::power(1.0001)) == SeriesStatus::Holds);
  CHECK(decide_tail(TailLaw::power(0.9999)) == SeriesStatus::Fails);
  CHECK(decide_tail(TailLaw::power(1.0)) == SeriesStatus::Fails);
  CHECK(decide_tail(TailLaw::power(1.0, false)) == SeriesStatus::Undetermined);
  CHECK(decide_tail(TailLaw::power(2.0, false)) == SeriesStatus::Holds);
  // geometric ratio 1 with no decay is the constant series
  CHECK(decide_tail(TailLaw::geometric(1.0)) == SeriesStatus::Fails);
}

TEST_CASE("geometric terms converge by the ratio window", "[series]") {
  const SeriesPolicy policy;
  const auto terms = log_terms(5000, [](double k) { return k * std::log(0.9); });
  const SeriesVerdict v = scan_series(terms, policy);
  CHECK(v.status == SeriesStatus::Holds);
  CHECK(v.method == SeriesMethod::RatioPolicy);
  REQUIRE(v.tail_bound.has_value());
  CHECK(*v.tail_bound <= 1e-12 * v.partial_sum);
  CHECK_THAT(v.partial_sum, WithinRel(10.0, 1e-11));
  CHECK(v.terms_used < terms.size());
}

TEST_CASE("slow ratios near one are not trusted", "[series]") {
  const SeriesPolicy policy;
  // ratio 0.9995 stays above 1 - epsilon
  const auto terms = log_terms(1 << 14, [](double k) { return k * std::log(0.9995); });
  const SeriesVerdict v = scan_series(terms, policy);
  CHECK(v.status == SeriesStatus::Undetermined);
  CHECK(v.method == SeriesMethod::Truncated);
  CHECK(v.terms_used == terms.size());
}

TEST_CASE("power-law terms are left undetermined", "[series]") {
  const SeriesPolicy policy;
  for (double s : {1.0, 1.5, 3.0}) {
    const auto terms = log_terms(1 << 16, [s](double k) { return -s * std::log(k + 1.0); });
    INFO("s=" << s);
    CHECK(scan_series(terms, policy).status == SeriesStatus::Undetermined);
  }
}

TEST_CASE("divergence by cap and by lower bound", "[series]") {
  SeriesPolicy policy;
  const auto growing = log_terms(10000, [](double k) { return 0.05 * k; });
  const SeriesVerdict g = scan_series(growing, policy);
  CHECK(g.status == SeriesStatus::Fails);
  CHECK(g.method == SeriesMethod::Cap);

  const auto flat = log_terms(1 << 12, [](double k) { return std::log(2.0 + std::sin(k) * 1e-6); });
  const SeriesVerdict f = scan_series(flat, policy);
  CHECK(f.status == SeriesStatus::Fails);
  CHECK(f.method == SeriesMethod::LowerBound);
  CHECK(f.terms_used == 4 * policy.window);

  policy.cap = 10.0;
  CHECK(scan_series(flat, policy).method == SeriesMethod::Cap);
}

TEST_CASE("zero terms", "[series]") {
  std::vector<double> terms(600, kNegInf);
  terms[0] = 0.0;
  const SeriesVerdict v = scan_series(terms, SeriesPolicy{});
  CHECK(v.status == SeriesStatus::Holds);
  CHECK(v.partial_sum == 1.0);
}

TEST_CASE("negation swaps the decisive outcomes", "[series]") {
  SeriesVerdict v;
  v.status = SeriesStatus::Holds;
  CHECK(negate(v).status == SeriesStatus::Fails);
  v.status = SeriesStatus::Fails;
  CHECK(negate(v).status == SeriesStatus::Holds);
  v.status = SeriesStatus::Undetermined;
  CHECK(negate(v).status == SeriesStatus::Undetermined);
}

TEST_CASE("closed-form verdicts carry diagnostics", "[series]") {
  const auto terms = log_terms(100, [](double k) { return -2.0 * std::log(k + 1.0); });
  const SeriesVerdict v = closed_form_verdict(SeriesStatus::Holds, terms, "p-series");
  CHECK(v.method == SeriesMethod::ClosedForm);
  CHECK(v.terms_used == 100);
  CHECK(v.note == "p-series");
  double direct = 0.0;
  for (int k = 100; k >= 1; --k) direct += 1.0 / (double(k) * k);
  CHECK_THAT(v.partial_sum, WithinRel(direct, 1e-13));
}
