// Scalar/SIMD kernel equivalence. The backends are designed to be
// bit-identical (same fma forms, same lane structure), so these comparisons
// are exact, not tolerance-based.

#include "bxfuse/kernels.hpp"

#include <cstring>
#include <doctest.h>
#include <random>
#include <vector>

#include "support/test_util.hpp"

using namespace bxfuse;
using kernels::Backend;

namespace {

struct RowCase {
  Volume3D volume;
  kernels::RowMap map;
  int n;
};

/// Rows that stay interior, cross the boundary, and leave entirely.
std::vector<RowCase> make_cases(std::mt19937& rng) {
  std::vector<RowCase> cases;
  std::uniform_real_distribution<double> ub(-4.0, 20.0);
  std::uniform_real_distribution<double> us(-0.4, 1.3);
  for (int i = 0; i < 40; ++i) {
    RowCase c{test::random_volume({17, 13, 11}, rng),
              {{ub(rng), ub(rng), ub(rng)}, {us(rng), 0.03 * us(rng), 0.02 * us(rng)}},
              37};
    cases.push_back(std::move(c));
  }
  // Exact upper-edge landing: index nx-1 must clamp, not fall outside.
  RowCase edge{test::random_volume({16, 8, 8}, rng), {{0.0, 1.0, 1.0}, {1.0, 0, 0}}, 16};
  cases.push_back(std::move(edge));
  // Fully outside row.
  RowCase outside{test::random_volume({8, 8, 8}, rng), {{-100, 0, 0}, {0.1, 0, 0}}, 24};
  cases.push_back(std::move(outside));
  return cases;
}

kernels::MovingView view_of(const Volume3D& v) {
  return {v.data.data(), v.dims[0], v.dims[1], v.dims[2]};
}

bool sink_equal(const kernels::MomentSink& a, const kernels::MomentSink& b) {
  return std::memcmp(&a, &b, sizeof a) == 0;
}

}  // namespace

TEST_CASE("finalize combines lanes") {
  kernels::MomentSink s;
  for (int l = 0; l < 8; ++l) {
    s.n[l] = 1;
    s.sf[l] = l;
    s.sdd[l] = 2.0 * l;
  }
  const kernels::Moments m = kernels::finalize(s);
  CHECK(m.n == 8.0);
  CHECK(m.sf == 28.0);
  CHECK(m.sdd == 56.0);
}

TEST_CASE("scalar kernels match the element reference on trivial rows") {
  std::mt19937 rng(3);
  Volume3D v = test::random_volume({8, 8, 8}, rng);
  const auto& k = kernels::table(Backend::scalar);

  // Identity map row: must reproduce stored values exactly.
  kernels::RowMap map{{0.0, 2.0, 3.0}, {1.0, 0.0, 0.0}};
  std::vector<float> out(8);
  std::vector<std::uint8_t> valid(8);
  k.resample_row(view_of(v), map, 8, -1.0f, out.data(), valid.data());
  for (int i = 0; i < 8; ++i) {
    CHECK(valid[i] == 1);
    CHECK(out[i] == v.at(i, 2, 3));
  }
}

TEST_CASE("avx2 kernels are bit-identical to the scalar reference" *
          doctest::skip(!kernels::backend_supported(Backend::avx2))) {
  std::mt19937 rng(5);
  const auto cases = make_cases(rng);
  const auto& ks = kernels::table(Backend::scalar);
  const auto& kv = kernels::table(Backend::avx2);

  for (const RowCase& c : cases) {
    const auto mv = view_of(c.volume);

    std::vector<float> out_s(c.n), out_v(c.n);
    std::vector<std::uint8_t> valid_s(c.n), valid_v(c.n);
    ks.resample_row(mv, c.map, c.n, 0.5f, out_s.data(), valid_s.data());
    kv.resample_row(mv, c.map, c.n, 0.5f, out_v.data(), valid_v.data());
    CHECK(std::memcmp(out_s.data(), out_v.data(), c.n * sizeof(float)) == 0);
    CHECK(std::memcmp(valid_s.data(), valid_v.data(), c.n) == 0);

    std::vector<float> fixed_row(c.n);
    std::uniform_real_distribution<float> u(-20.0f, 120.0f);
    for (auto& f : fixed_row) f = u(rng);
    kernels::MomentSink sink_s, sink_v;
    ks.moments_resample_row(fixed_row.data(), mv, c.map, c.n, sink_s);
    kv.moments_resample_row(fixed_row.data(), mv, c.map, c.n, sink_v);
    CHECK(sink_equal(sink_s, sink_v));
  }
}

TEST_CASE("avx2 masked moments and minmax match scalar" *
          doctest::skip(!kernels::backend_supported(Backend::avx2))) {
  std::mt19937 rng(9);
  const auto& ks = kernels::table(Backend::scalar);
  const auto& kv = kernels::table(Backend::avx2);
  std::uniform_real_distribution<float> u(-50.0f, 200.0f);
  std::bernoulli_distribution coin(0.7);

  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 70);
    std::vector<float> a(n), b(n);
    std::vector<std::uint8_t> mask(n);
    for (int i = 0; i < n; ++i) {
      a[i] = u(rng);
      b[i] = u(rng);
      mask[i] = coin(rng) ? 1 : 0;
    }
    const std::uint8_t* m = (trial % 3 == 0) ? nullptr : mask.data();

    kernels::MomentSink sink_s, sink_v;
    ks.moments_masked_row(a.data(), b.data(), m, n, sink_s);
    kv.moments_masked_row(a.data(), b.data(), m, n, sink_v);
    CHECK(sink_equal(sink_s, sink_v));

    float lo_s = 1e30f, hi_s = -1e30f, lo_v = 1e30f, hi_v = -1e30f;
    ks.minmax_masked_row(a.data(), m, n, lo_s, hi_s);
    kv.minmax_masked_row(a.data(), m, n, lo_v, hi_v);
    CHECK(lo_s == lo_v);
    CHECK(hi_s == hi_v);
  }
}

TEST_CASE("moments accumulate across chained rows identically" *
          doctest::skip(!kernels::backend_supported(Backend::avx2))) {
  // Slice-style usage: many rows into one sink.
  std::mt19937 rng(15);
  Volume3D v = test::random_volume({32, 16, 8}, rng);
  std::vector<float> fixed(32);
  std::uniform_real_distribution<float> u(0.0f, 255.0f);
  for (auto& f : fixed) f = u(rng);

  kernels::MomentSink sink_s, sink_v;
  for (int iz = 0; iz < 8; ++iz) {
    for (int iy = 0; iy < 16; ++iy) {
      kernels::RowMap map{{0.25, iy - 0.5, iz + 0.25}, {0.9, 0.01, -0.005}};
      kernels::table(Backend::scalar)
          .moments_resample_row(fixed.data(), view_of(v), map, 32, sink_s);
      kernels::table(Backend::avx2)
          .moments_resample_row(fixed.data(), view_of(v), map, 32, sink_v);
    }
  }
  CHECK(sink_equal(sink_s, sink_v));
  const kernels::Moments m = kernels::finalize(sink_s);
  CHECK(m.n > 0);
}
