#include "doctest.h"

#include "velgas/rng.hpp"

#include <cmath>

using namespace velgas;

TEST_CASE("philox known answers") {
  using A = std::array<std::uint32_t, 4>;
  using K = std::array<std::uint32_t, 2>;
  CHECK(Philox4x32::apply(A{0, 0, 0, 0}, K{0, 0}) == A{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::apply(A{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
        A{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::apply(A{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
        A{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and distinct") {
  RandomStream a(7, 3);
  RandomStream b(7, 3);
  RandomStream c(7, 4);
  RandomStream e(8, 3);
  int same_c = 0;
  int same_e = 0;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    CHECK(x == b());
    same_c += (x == c());
    same_e += (x == e());
  }
  CHECK(same_c == 0);
  CHECK(same_e == 0);
}

TEST_CASE("uniform and exponential moments") {
  RandomStream r(1, 1);
  const int n = 200000;
  double s = 0;
  double s2 = 0;
  double ex = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    s += u;
    s2 += u * u;
    ex += r.exponential(4.0);
  }
  CHECK(std::abs(s / n - 0.5) < 5 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(s2 / n - 1.0 / 3) < 0.005);
  CHECK(std::abs(ex / n - 0.25) < 5 * 0.25 / std::sqrt(n));
}

TEST_CASE("stream ids separate purposes") {
  CHECK(stream_id(StreamPurpose::Dynamics, 64, 0) != stream_id(StreamPurpose::InitialState, 64, 0));
  CHECK(stream_id(StreamPurpose::Dynamics, 64, 1) != stream_id(StreamPurpose::Dynamics, 64, 0));
  CHECK(stream_id(StreamPurpose::Dynamics, 128, 0) != stream_id(StreamPurpose::Dynamics, 64, 0));
}
