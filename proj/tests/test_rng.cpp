#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "rshom/rng.hpp"

using namespace rshom;

TEST_CASE("block function matches the independent reference implementation") {
  // frozen outputs of a reference implementation of the same 10-round
  // counter-based network, written separately in another language
  PhiloxStream zero(0, 0);
  CHECK(zero.next_u32() == 0x6627e8d5u);
  CHECK(zero.next_u32() == 0xe169c58du);
  CHECK(zero.next_u32() == 0xbc57ac4cu);
  CHECK(zero.next_u32() == 0x9b00dbd8u);

  PhiloxStream s(0x123456789ABCDEF0ull, 7);
  CHECK(s.next_u32() == 0xe2aedaf7u);
  CHECK(s.next_u32() == 0x2b74fe69u);
  CHECK(s.next_u32() == 0x9b175b0cu);
  CHECK(s.next_u32() == 0xade5d4dbu);
  // second block advances the position counter
  CHECK(s.next_u32() == 0x1fdc6a16u);
  CHECK(s.next_u32() == 0x328be767u);
  CHECK(s.next_u32() == 0xbff8c872u);
  CHECK(s.next_u32() == 0x9cbcc4fdu);
}

TEST_CASE("uniforms and gaussians match the reference stream") {
  PhiloxStream s(42, 3);
  CHECK(s.uniform() == doctest::Approx(0.4456259349920573).epsilon(1e-15));
  CHECK(s.uniform() == doctest::Approx(0.5981500017743171).epsilon(1e-15));
  CHECK(s.uniform() == doctest::Approx(0.11550436064650021).epsilon(1e-15));
  CHECK(s.uniform() == doctest::Approx(0.24869197017114147).epsilon(1e-15));
  CHECK(s.gaussian() == doctest::Approx(-0.34148233204045986).epsilon(1e-12));
  CHECK(s.gaussian() == doctest::Approx(-0.31872197499313754).epsilon(1e-12));
}

TEST_CASE("same key pair yields an identical stream") {
  PhiloxStream a(99, 5), b(99, 5);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u32() == b.next_u32());
}

TEST_CASE("distinct stream ids and masters give distinct outputs") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t id = 0; id < 64; ++id) {
    PhiloxStream s(2024, id);
    CHECK(seen.insert(s.next_u64()).second);
  }
  for (std::uint64_t m = 0; m < 64; ++m) {
    PhiloxStream s(m, 0);
    CHECK(seen.insert(s.next_u64()).second);
  }
}

TEST_CASE("uniform stays inside the open unit interval") {
  PhiloxStream s(7, 7);
  for (int i = 0; i < 100000; ++i) {
    double u = s.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("gaussian moments are sane") {
  PhiloxStream s(123, 0);
  const int n = 200000;
  double m1 = 0.0, m2 = 0.0, m4 = 0.0;
  for (int i = 0; i < n; ++i) {
    double g = s.gaussian();
    m1 += g;
    m2 += g * g;
    m4 += g * g * g * g;
  }
  m1 /= n;
  m2 /= n;
  m4 /= n;
  CHECK(std::abs(m1) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(m2 == doctest::Approx(1.0).epsilon(0.02));
  CHECK(m4 == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("seed plan streams are reproducible") {
  SeedPlan plan{777};
  PhiloxStream a = plan.stream(12);
  PhiloxStream b = plan.stream(12);
  CHECK(a.next_u64() == b.next_u64());
  PhiloxStream c = plan.stream(13);
  PhiloxStream d = plan.stream(12);
  CHECK(c.next_u64() != d.next_u64());
}
