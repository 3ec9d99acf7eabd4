#include "hybridfilt/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using hybridfilt::Philox4x32;
using hybridfilt::RandomStream;
using hybridfilt::StreamId;

TEST_CASE("philox known answers") {
  CHECK(Philox4x32::generate({0, 0, 0, 0}, {0, 0}) ==
        Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                             {0xffffffffu, 0xffffffffu}) ==
        Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                             {0xa4093822u, 0x299f31d0u}) ==
        Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and distinct") {
  RandomStream a(42, StreamId::kNoise), b(42, StreamId::kNoise), c(42, StreamId::kClocks);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    seen.insert(x);
    seen.insert(c.next_u64());
  }
  CHECK(seen.size() == 200);
  RandomStream p0 = RandomStream(7, StreamId::kClocks).split(0);
  RandomStream p1 = RandomStream(7, StreamId::kClocks).split(1);
  CHECK(p0.next_u64() != p1.next_u64());
}

TEST_CASE("distribution moments") {
  RandomStream r(1, StreamId::kNoise);
  const int n = 200000;
  double su = 0, se = 0, sn = 0, sn2 = 0;
  int out_of_range = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    out_of_range += !(u >= 0.0 && u < 1.0);
    su += u;
    se += r.exponential();
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(out_of_range == 0);
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(se / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.01));
}
