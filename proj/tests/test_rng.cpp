#include <catch_amalgamated.hpp>

#include <set>

#include "ctrw/rng.hpp"

using ctrw::Philox4x32;
using ctrw::RandomStream;

TEST_CASE("Philox4x32-10 known-answer vectors", "[rng]") {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::bijection(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::bijection(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::bijection(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and distinct per key", "[rng]") {
  RandomStream a(42, 7, 3), b(42, 7, 3);
  for (int i = 0; i < 1000; ++i) REQUIRE(a() == b());

  std::set<std::uint64_t> firsts;
  for (std::uint64_t seed : {0ull, 1ull}) {
    for (std::uint64_t rep : {0ull, 1ull, 1ull << 40}) {
      for (std::uint32_t role : {0u, 1u, 17u}) firsts.insert(RandomStream(seed, rep, role)());
    }
  }
  CHECK(firsts.size() == 18);
}

TEST_CASE("uniform variates stay in range with the right moments", "[rng]") {
  RandomStream rng(9, 0, 0);
  const int n = 200000;
  double sum = 0.0, sum_exp = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform_open();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sum_exp += rng.exponential();
  }
  // sd of the mean: sqrt(1/12/n) and sqrt(1/n)
  CHECK(std::abs(sum / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(sum_exp / n - 1.0) < 4.0 * std::sqrt(1.0 / n));
  CHECK(rng.blocks_used() > 0);
}
