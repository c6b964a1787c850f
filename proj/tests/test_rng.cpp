#include <doctest.h>

#include <set>

#include "qsdnoise/rng.hpp"

using qsdnoise::RngStream;

TEST_CASE("same identity gives the same sequence") {
  auto a = RngStream(42, 7).engine();
  auto b = RngStream(42, 7).engine();
  for (int i = 0; i < 1000; ++i) REQUIRE(a() == b());
}

TEST_CASE("distinct indices and paths give distinct streams") {
  std::set<std::uint64_t> firsts;
  const RngStream root(42);
  for (std::uint64_t i = 0; i < 256; ++i) firsts.insert(root.substream(i).engine()());
  firsts.insert(RngStream(43).engine()());
  firsts.insert(root.engine()());
  CHECK(firsts.size() == 258);

  // (i, j) nested differs from a path that merely shares a prefix.
  CHECK(root.substream({1, 0}).engine()() != root.substream(1).engine()());
  CHECK(root.substream({1, 0}) == root.substream(1).substream(0));
}

TEST_CASE("substreams look independent") {
  // Correlation of uniform draws from neighbouring streams.
  const RngStream root(99);
  auto e0 = root.substream(0).engine();
  auto e1 = root.substream(1).engine();
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const int n = 100000;
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    const double x = u(e0), y = u(e1);
    sxy += x * y;
    sxx += x * x;
    syy += y * y;
  }
  const double corr = sxy / std::sqrt(sxx * syy);
  CHECK(std::abs(corr) < 4.0 / std::sqrt(double(n)));
}
