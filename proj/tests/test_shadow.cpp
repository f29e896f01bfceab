#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "pga/shadow.hpp"

using namespace pga;

TEST_CASE("the zero pair always interns to label 0") {
  GradientTable t;
  CHECK(t.intern({0.0, 0.0}, {}, "e:0") == kZeroLabel);
  CHECK(t.allocated() == 0);
  CHECK(t.lookup(kZeroLabel) == DerivPair{0.0, 0.0});
}

TEST_CASE("a pair equal to an input's pair reuses that label") {
  GradientTable t;
  Label l = t.intern({2.0, -2.0}, {}, "e:0");
  REQUIRE(l != kZeroLabel);
  uint32_t before = t.allocated();
  Label inputs[] = {l};
  CHECK(t.intern({2.0, -2.0}, inputs, "e:1") == l);
  CHECK(t.allocated() == before);
}

TEST_CASE("reuse applies only against the operation's inputs") {
  GradientTable t;
  Label first = t.intern({8.0, -8.0}, {}, "e:0");
  CHECK(first == 1);
  // Same pair again, but not among the inputs: a fresh label.
  Label second = t.intern({8.0, -8.0}, {}, "e:1");
  CHECK(second == 2);
}

TEST_CASE("lookup after intern returns the pair") {
  GradientTable t;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-100.0, 100.0);
  for (int i = 0; i < 200; ++i) {
    DerivPair d{dist(rng), dist(rng)};
    Label l = t.intern(d, {}, "e:0");
    CHECK(t.lookup(l) == d);
  }
}

TEST_CASE("allocated ids are dense from 1") {
  GradientTable t;
  for (int i = 1; i <= 50; ++i)
    CHECK(t.intern({double(i), -double(i)}, {}, "e:0") == Label(i));
  CHECK(t.allocated() == 50);
}

TEST_CASE("label exhaustion raises a structured error with the site") {
  GradientTable t;
  for (uint32_t i = 1; i <= 65535; ++i)
    t.intern({double(i), 0.5}, {}, "loop:3");
  CHECK(t.allocated() == 65535);
  try {
    t.intern({1e9, 1e9}, {}, "loop:3");
    FAIL("expected LabelExhausted");
  } catch (const LabelExhausted& e) {
    CHECK(e.site == "loop:3");
  }
}

TEST_CASE("store covers every byte of the range") {
  GradientTable t;
  ShadowMemory s(32, 4);
  Label l5 = t.intern({5.0, 5.0}, {}, "e:0");
  s.store(8, 4, l5);
  for (size_t a = 8; a < 12; ++a) CHECK(s.byte(a) == l5);
  CHECK(s.byte(7) == kZeroLabel);
  CHECK(s.byte(12) == kZeroLabel);

  s.store(8, 4, kZeroLabel);  // storing label 0 clears
  for (size_t a = 8; a < 12; ++a) CHECK(s.byte(a) == kZeroLabel);
}

TEST_CASE("clear zeroes a labeled range") {
  GradientTable t;
  ShadowMemory s(16, 0);
  s.store(0, 16, t.intern({1.0, -1.0}, {}, "e:0"));
  s.clear(0, 16);
  for (size_t a = 0; a < 16; ++a) CHECK(s.byte(a) == kZeroLabel);
}

TEST_CASE("uniform loads return the shared label") {
  GradientTable t;
  ShadowMemory s(16, 0);
  Label l7 = t.intern({7.0, 0.0}, {}, "e:0");
  s.store(0, 4, l7);
  CHECK(s.load(t, 0, 4) == l7);
  CHECK(s.load(t, 8, 4) == kZeroLabel);  // all label 0
}

TEST_CASE("mixed loads pick the largest-magnitude pair, lowest offset on ties") {
  GradientTable t;
  ShadowMemory s(16, 0);
  Label l1 = t.intern({1.0, -1.0}, {}, "e:0");
  Label l2 = t.intern({4.0, -4.0}, {}, "e:1");
  s.store(0, 1, l1);
  s.store(1, 1, l2);
  CHECK(s.load(t, 0, 4) == l2);

  // Equal magnitudes: earliest byte wins.
  Label l3 = t.intern({4.0, 0.0}, {}, "e:2");
  s.store(4, 1, l3);
  s.store(5, 1, l2);
  CHECK(s.load(t, 4, 2) == l3);
}

TEST_CASE("copy makes destination labels equal source labels byte for byte") {
  GradientTable t;
  ShadowMemory s(32, 0);
  std::vector<Label> src;
  for (int i = 0; i < 6; ++i) src.push_back(t.intern({double(i + 1), 0.0}, {}, "e:0"));
  for (size_t i = 0; i < src.size(); ++i) s.store(i, 1, src[i]);
  s.copy(10, 0, 6);
  for (size_t i = 0; i < src.size(); ++i) CHECK(s.byte(10 + i) == src[i]);

  // Overlapping forward copy behaves like memmove.
  s.copy(1, 0, 6);
  for (size_t i = 0; i < src.size(); ++i) CHECK(s.byte(1 + i) == src[i]);
}

TEST_CASE("register labels are independent of memory labels") {
  GradientTable t;
  ShadowMemory s(8, 4);
  Label l = t.intern({3.0, -3.0}, {}, "e:0");
  s.set_reg(2, l);
  CHECK(s.reg(2) == l);
  CHECK(s.reg(0) == kZeroLabel);
  CHECK(s.byte(2) == kZeroLabel);
}

TEST_CASE("out-of-range shadow access throws") {
  GradientTable t;
  ShadowMemory s(8, 0);
  CHECK_THROWS_AS(s.store(6, 4, 1), std::out_of_range);
  CHECK_THROWS_AS(s.load(t, 7, 2), std::out_of_range);
}
