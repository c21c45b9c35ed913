#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ldrank/rng.hpp"

using namespace ldrank;

// Known-answer vectors for Philox4x32-10 from the reference implementation's
// test suite.
TEST_CASE("philox4x32: known-answer vectors", "[rng]") {
  {
    const auto r = philox4x32(0, 0, 0);
    CHECK(r[0] == 0x6627e8d5u);
    CHECK(r[1] == 0xe169c58du);
    CHECK(r[2] == 0xbc57ac4cu);
    CHECK(r[3] == 0x9b00dbd8u);
  }
  {
    const auto r = philox4x32(0xffffffffffffffffull, 0xffffffffffffffffull,
                              0xffffffffffffffffull);
    CHECK(r[0] == 0x408f276du);
    CHECK(r[1] == 0x41c83b0eu);
    CHECK(r[2] == 0xa20bc7c6u);
    CHECK(r[3] == 0x6d5451fdu);
  }
  {
    // counter = {243f6a88, 85a308d3, 13198a2e, 03707344}, key = {a4093822, 299f31d0}
    const auto r = philox4x32(0x299f31d0a4093822ull, 0x0370734413198a2eull,
                              0x85a308d3243f6a88ull);
    CHECK(r[0] == 0xd16cfe09u);
    CHECK(r[1] == 0x94fdccebu);
    CHECK(r[2] == 0x5001e420u);
    CHECK(r[3] == 0x24126ea1u);
  }
}

TEST_CASE("standard_normal_icdf: known quantiles and erfc round-trip", "[rng]") {
  CHECK(standard_normal_icdf(0.5) == 0.0);
  CHECK(standard_normal_icdf(0.975) == Catch::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(standard_normal_icdf(0.025) == Catch::Approx(-1.959963984540054).epsilon(1e-12));

  const auto normal_cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  for (double p : {1e-12, 1e-6, 0.001, 0.01, 0.2, 0.4, 0.5, 0.6, 0.9, 0.99, 0.999999}) {
    const double x = standard_normal_icdf(p);
    CHECK(normal_cdf(x) == Catch::Approx(p).epsilon(1e-10).margin(1e-14));
  }
}

TEST_CASE("NormalStream: deterministic, addressable, and consistent across access paths",
          "[rng]") {
  const NormalStream a(42, 7);
  const NormalStream b(42, 7);
  double buf[9];
  a.fill(3, buf, 9);
  for (int i = 0; i < 9; ++i) {
    CHECK(buf[i] == b.at(3, i));
    CHECK(std::isfinite(buf[i]));
  }

  // Different streams and steps decorrelate.
  const NormalStream c(42, 8);
  double other[9];
  c.fill(3, other, 9);
  int same = 0;
  for (int i = 0; i < 9; ++i) same += buf[i] == other[i];
  CHECK(same == 0);
}

TEST_CASE("NormalStream: sample moments match a standard normal", "[rng]") {
  const NormalStream s(1234, 0);
  const int n = 200000;
  std::vector<double> buf(n);
  s.fill(0, buf.data(), n);
  double mean = 0.0;
  for (double v : buf) mean += v;
  mean /= n;
  double var = 0.0, kurt = 0.0;
  for (double v : buf) {
    var += (v - mean) * (v - mean);
    kurt += std::pow(v - mean, 4.0);
  }
  var /= n - 1;
  kurt = kurt / n / (var * var);
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(var == Catch::Approx(1.0).margin(0.02));
  CHECK(kurt == Catch::Approx(3.0).margin(0.1));
}

TEST_CASE("fill_rademacher: only ±1, roughly balanced", "[rng]") {
  const NormalStream s(77, 3);
  const int n = 40000;
  std::vector<double> buf(n);
  s.fill_rademacher(0, buf.data(), n);
  long sum = 0;
  for (double v : buf) {
    REQUIRE((v == 1.0 || v == -1.0));
    sum += static_cast<long>(v);
  }
  CHECK(std::abs(sum) < 4 * std::sqrt(static_cast<double>(n)));
}
