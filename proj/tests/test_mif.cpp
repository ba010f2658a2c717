#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include <plumekit/mif.hpp>

#include "test_util.hpp"

using namespace plumekit;
using std::numbers::pi;

namespace {

// Independent kernel oracle: direct triangle self-convolution.
std::vector<double> oracle_kernel_1d(int half) {
  int size = 2 * half + 1;
  std::vector<double> tri(size, 0.0), out(size, 0.0);
  for (int j = -half; j <= half; ++j)
    tri[j + half] = std::max(0.0, 1.0 - std::abs(j) / (half / 2.0));
  for (int t = -half; t <= half; ++t)
    for (int j = -half; j <= half; ++j) {
      int u = t - j;
      if (u < -half || u > half) continue;
      out[t + half] += tri[j + half] * tri[u + half];
    }
  double s = 0.0;
  for (double v : out) s += v;
  for (double& v : out) v /= s;
  return out;
}

long long reflect_oracle(long long i, long long n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

std::vector<double> make_sine(int n, double cycles, double phase = 0.0) {
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i)
    x[i] = std::sin(2.0 * pi * cycles * i / n + phase);
  return x;
}

}  // namespace

TEST_CASE("kernel 1d frozen values") {
  SECTION("half length 1 is the identity stencil") {
    Kernel1d k = build_kernel_1d(1);
    REQUIRE(k.weights.size() == 3);
    CHECK(k.weights[0] == 0.0);
    CHECK(k.weights[1] == 1.0);
    CHECK(k.weights[2] == 0.0);
  }
  SECTION("half length 4") {
    Kernel1d k = build_kernel_1d(4);
    std::vector<double> expected = {0.0, 0.0, 0.0625, 0.25, 0.375, 0.25, 0.0625, 0.0, 0.0};
    REQUIRE(k.weights.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i)
      CHECK_THAT(k.weights[i], Catch::Matchers::WithinAbs(expected[i], 1e-15));
  }
}

TEST_CASE("kernel 1d properties") {
  for (int half : {1, 2, 3, 5, 8, 16, 33, 128}) {
    Kernel1d k = build_kernel_1d(half);
    REQUIRE(k.weights.size() == static_cast<std::size_t>(2 * half + 1));
    double sum = 0.0;
    for (double w : k.weights) {
      CHECK(w >= 0.0);
      sum += w;
    }
    CHECK_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-14));
    for (int t = 1; t <= half; ++t)
      CHECK_THAT(k.at(t), Catch::Matchers::WithinAbs(k.at(-t), 1e-15));
    CHECK(k.at(half) == 0.0);
    CHECK(k.at(-half) == 0.0);

    std::vector<double> oracle = oracle_kernel_1d(half);
    for (int t = -half; t <= half; ++t)
      CHECK_THAT(k.at(t), Catch::Matchers::WithinAbs(oracle[t + half], 1e-14));
  }
}

TEST_CASE("kernel 1d frequency response has exact zeros at multiples of 2/half") {
  // Even half lengths sample the triangle at integer multiples of its slope
  // changes, so the response vanishes exactly at periods half, half/2, ...
  for (int half : {8, 16, 64, 128}) {
    Kernel1d k = build_kernel_1d(half);
    int m_half = half / 2;
    for (int mult = 1; 2 * mult <= m_half; ++mult) {
      double f = static_cast<double>(mult) / m_half;
      double response = 0.0;
      for (int t = -half; t <= half; ++t)
        response += k.at(t) * std::cos(2.0 * pi * f * t);
      CHECK_THAT(response, Catch::Matchers::WithinAbs(0.0, 1e-12));
    }
  }
}

TEST_CASE("kernel 2d mask and normalization") {
  SECTION("axis boundary weights vanish") {
    Kernel2d k = build_kernel_2d(2, 4);
    CHECK(k.at(2, 0) == 0.0);
    CHECK(k.at(-2, 0) == 0.0);
    CHECK(k.at(0, 4) == 0.0);
    CHECK(k.at(0, -4) == 0.0);
    double sum = 0.0;
    for (double w : k.weights) sum += w;
    CHECK_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-14));
  }
  SECTION("ellipse mask removes corners the product keeps") {
    Kernel2d k = build_kernel_2d(16, 16);
    Kernel1d k1 = build_kernel_1d(16);
    REQUIRE(k1.at(12) > 0.0);
    CHECK(k.at(12, 12) == 0.0);  // 12^2 + 12^2 > 16^2
    CHECK(k.at(11, 11) > 0.0);   // 11^2 + 11^2 < 16^2
  }
  SECTION("spans bracket the ellipse symmetrically") {
    Kernel2d k = build_kernel_2d(5, 9);
    for (std::size_t i = 0; i < k.span_lo.size(); ++i) {
      CHECK(k.span_lo[i] == -k.span_hi[i]);
      CHECK(k.span_hi[i] >= 0);
    }
    CHECK(k.span_hi[5] == 9);  // middle row spans the full half length
  }
}

TEST_CASE("count extrema") {
  auto count = [](std::vector<double> v) { return count_extrema_1d(v); };
  CHECK(count({0, 1, 0}) == 1);
  CHECK(count({1, 0, 1}) == 1);
  CHECK(count({0, 1, 1, 0}) == 1);  // plateau counts once
  CHECK(count({0, 1, 2, 3}) == 0);  // monotone
  CHECK(count({3, 1, 2}) == 1);     // endpoints never count
  CHECK(count({0, 1, 0, 1, 0}) == 3);
  CHECK(count({2, 2, 2, 2}) == 0);
  CHECK(count({0, 2, 2, 1, 1, 3}) == 2);  // plateau max then plateau min

  std::vector<double> sine = make_sine(300, 3.0);
  CHECK(count_extrema_1d(sine) == 6);

  SECTION("strided access matches contiguous") {
    DetectionMap map(5, 4);
    std::vector<double> col = {1, -1, 2, -2, 3};
    for (int r = 0; r < 5; ++r) map.at(r, 2) = col[r];
    CHECK(count_extrema_1d(map.scores.data() + 2, 5, 4) == count_extrema_1d(col));
  }
}

TEST_CASE("support length 1d") {
  SECTION("two extrema on 100 samples clamps to n-1") {
    std::vector<double> x = make_sine(100, 1.0);
    CHECK(count_extrema_1d(x) == 2);
    CHECK(compute_support_1d(x) == 99);
  }
  SECTION("twenty extrema on 1000 samples") {
    std::vector<double> x = make_sine(1000, 10.0);
    CHECK(count_extrema_1d(x) == 20);
    CHECK(compute_support_1d(x) == 200);
  }
  SECTION("six extrema on 300 samples") {
    std::vector<double> x = make_sine(300, 3.0);
    CHECK(compute_support_1d(x) == 200);
  }
  SECTION("too few extrema") {
    std::vector<double> ramp(50);
    for (int i = 0; i < 50; ++i) ramp[i] = 0.1 * i;
    REQUIRE_PLUME_ERROR(compute_support_1d(ramp), ErrorCode::too_few_extrema);
  }
}

TEST_CASE("support 2d") {
  SECTION("separable oscillation gives matched half lengths") {
    DetectionMap img(64, 64);
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 64; ++c)
        img.at(r, c) = std::sin(2.0 * pi * 8.0 * r / 64) * std::sin(2.0 * pi * 8.0 * c / 64);
    auto [hr, hc] = compute_support_2d(img, SupportShape::ellipsoidal);
    CHECK(hr == 16);
    CHECK(hc == 16);
  }
  SECTION("direction without qualifying lines falls back to 1") {
    DetectionMap img(32, 64);
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 64; ++c)
        img.at(r, c) = std::sin(2.0 * pi * 8.0 * c / 64) + 1e-3 * r;
    auto [hr, hc] = compute_support_2d(img, SupportShape::ellipsoidal);
    CHECK(hc == 16);  // rows see the oscillation
    CHECK(hr == 1);   // columns are monotone
  }
  SECTION("spherical takes the rounded geometric mean") {
    DetectionMap img(64, 64);
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 64; ++c)
        img.at(r, c) = std::sin(pi * r / 2.0) * std::sin(pi * c / 4.0);
    auto [er, ec] = compute_support_2d(img, SupportShape::ellipsoidal);
    CHECK(er == 8);
    CHECK(ec == 16);
    auto [sr, sc] = compute_support_2d(img, SupportShape::spherical);
    CHECK(sr == 11);  // round(sqrt(8 * 16))
    CHECK(sc == 11);
  }
  SECTION("transposing the image swaps the result exactly") {
    testutil::Rng rng(3);
    DetectionMap img(20, 30);
    for (double& x : img.scores) x = rng.normal();
    DetectionMap t(30, 20);
    for (int r = 0; r < 20; ++r)
      for (int c = 0; c < 30; ++c) t.at(c, r) = img.at(r, c);
    auto [hr, hc] = compute_support_2d(img, SupportShape::ellipsoidal);
    auto [tr, tc] = compute_support_2d(t, SupportShape::ellipsoidal);
    CHECK(hr == tc);
    CHECK(hc == tr);
  }
  SECTION("flat image has no extrema anywhere") {
    DetectionMap img(8, 8);
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) img.at(r, c) = r + c;
    REQUIRE_PLUME_ERROR(compute_support_2d(img, SupportShape::ellipsoidal),
                        ErrorCode::no_extrema_anywhere);
  }
}

TEST_CASE("convolution 1d") {
  Kernel1d k = build_kernel_1d(5);
  SECTION("constants pass through") {
    std::vector<double> x(40, 3.25);
    std::vector<double> y = convolve_reflect_1d(x, k);
    for (double v : y) CHECK_THAT(v, Catch::Matchers::WithinAbs(3.25, 1e-14));
  }
  SECTION("linear trend passes through in the interior") {
    int n = 60;
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = 0.5 * i - 4.0;
    std::vector<double> y = convolve_reflect_1d(x, k);
    for (int i = k.half_len; i < n - k.half_len; ++i)
      CHECK_THAT(y[i], Catch::Matchers::WithinAbs(x[i], 1e-12));
  }
  SECTION("matches a brute-force reflected oracle") {
    testutil::Rng rng(5);
    std::vector<double> x(20);
    for (double& v : x) v = rng.normal();
    std::vector<double> y = convolve_reflect_1d(x, k);
    for (int i = 0; i < 20; ++i) {
      double acc = 0.0;
      for (int t = -5; t <= 5; ++t)
        acc += k.at(t) * x[reflect_oracle(i + t, 20)];
      CHECK_THAT(y[i], Catch::Matchers::WithinAbs(acc, 1e-14));
    }
  }
  SECTION("reflection is exact for cosine modes") {
    // cos(pi k i / (n-1)) extends through whole-sample reflection into itself,
    // so convolution must scale it by a constant everywhere, edges included.
    int n = 100, mode = 4;
    Kernel1d k10 = build_kernel_1d(10);
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = std::cos(pi * mode * i / (n - 1.0));
    double lambda = 0.0;
    for (int t = -10; t <= 10; ++t)
      lambda += k10.at(t) * std::cos(pi * mode * t / (n - 1.0));
    std::vector<double> y = convolve_reflect_1d(x, k10);
    for (int i = 0; i < n; ++i)
      CHECK_THAT(y[i], Catch::Matchers::WithinAbs(lambda * x[i], 1e-12));
  }
}

TEST_CASE("convolution 2d matches dense oracle") {
  testutil::Rng rng(9);
  DetectionMap img(12, 14);
  for (double& x : img.scores) x = rng.normal();
  Kernel2d k = build_kernel_2d(3, 4);
  DetectionMap out = convolve_reflect_2d(img, k);
  for (int r = 0; r < 12; ++r)
    for (int c = 0; c < 14; ++c) {
      double acc = 0.0;
      for (int tr = -3; tr <= 3; ++tr)
        for (int tc = -4; tc <= 4; ++tc)
          acc += k.at(tr, tc) *
                 img.at(static_cast<int>(reflect_oracle(r + tr, 12)),
                        static_cast<int>(reflect_oracle(c + tc, 14)));
      CHECK_THAT(out.at(r, c), Catch::Matchers::WithinAbs(acc, 1e-13));
    }
}

TEST_CASE("convolution 2d keeps constants") {
  DetectionMap img(9, 9);
  for (double& x : img.scores) x = -1.5;
  DetectionMap out = convolve_reflect_2d(img, build_kernel_2d(4, 4));
  for (double v : out.scores) CHECK_THAT(v, Catch::Matchers::WithinAbs(-1.5, 1e-13));
}

TEST_CASE("sifting leaves a resonant mode in one iteration") {
  int n = 257, mode = 16;
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = std::cos(pi * mode * i / (n - 1.0));
  REQUIRE(count_extrema_1d(x) == 15);
  int half = compute_support_1d(x);
  REQUIRE(half == 69);
  Sift1dResult res = sift_1d(x, build_kernel_1d(half));
  CHECK(res.iterations == 1);
  CHECK(testutil::rel_l2(res.component, x) < 1e-3);
}

TEST_CASE("sifting matches the literal convolution loop") {
  // The production sift runs in the cosine domain; the reference below runs
  // the defining iteration s <- s - (s * w) with explicit convolutions.
  SiftParams params;
  SECTION("1d") {
    testutil::Rng rng(97);
    for (int n : {7, 48, 83}) {
      std::vector<double> x(static_cast<std::size_t>(n));
      for (double& v : x) v = rng.normal();
      for (int half : {3, 7, n - 1}) {
        Kernel1d kernel = build_kernel_1d(half);
        std::vector<double> ref = x;
        int ref_iters = 0;
        while (ref_iters < params.max_inner_iters) {
          double norm2 = 0.0;
          for (double v : ref) norm2 += v * v;
          std::vector<double> avg = convolve_reflect_1d(ref, kernel);
          double step2 = 0.0;
          for (std::size_t i = 0; i < ref.size(); ++i) {
            step2 += avg[i] * avg[i];
            ref[i] -= avg[i];
          }
          ++ref_iters;
          if (std::sqrt(step2 / norm2) < params.sd_threshold) break;
        }
        Sift1dResult res = sift_1d(x, kernel, params);
        CHECK(res.iterations == ref_iters);
        double linf = testutil::linf(x);
        for (std::size_t i = 0; i < ref.size(); ++i)
          CHECK_THAT(res.component[i], Catch::Matchers::WithinAbs(ref[i], 1e-9 * linf));
      }
    }
  }
  SECTION("2d") {
    testutil::Rng rng(98);
    DetectionMap img(17, 23);
    for (double& v : img.scores) v = rng.normal();
    for (auto [hr, hc] : {std::pair{2, 3}, {5, 4}, {8, 11}}) {
      Kernel2d kernel = build_kernel_2d(hr, hc);
      DetectionMap ref = img;
      int ref_iters = 0;
      while (ref_iters < params.max_inner_iters) {
        double norm2 = 0.0;
        for (double v : ref.scores) norm2 += v * v;
        DetectionMap avg = convolve_reflect_2d(ref, kernel);
        double step2 = 0.0;
        for (std::size_t i = 0; i < ref.scores.size(); ++i) {
          step2 += avg.scores[i] * avg.scores[i];
          ref.scores[i] -= avg.scores[i];
        }
        ++ref_iters;
        if (std::sqrt(step2 / norm2) < params.sd_threshold) break;
      }
      Sift2dResult res = sift_2d(img, kernel, params);
      CHECK(res.iterations == ref_iters);
      double linf = testutil::linf(img.scores);
      for (std::size_t i = 0; i < ref.scores.size(); ++i)
        CHECK_THAT(res.component.scores[i],
                   Catch::Matchers::WithinAbs(ref.scores[i], 1e-9 * linf));
    }
  }
}

TEST_CASE("decompose 1d reconstruction") {
  testutil::Rng rng(21);
  for (int n : {8, 33, 64, 257}) {
    std::vector<double> x(n);
    double scale = std::pow(10.0, rng.uniform(-2.0, 2.0));
    for (int i = 0; i < n; ++i)
      x[i] = scale * (rng.normal() + 3.0 * std::sin(2.0 * pi * 3.0 * i / n) +
                      0.02 * i * rng.uniform());
    ImfStack1d stack = if_decompose_1d(x);
    REQUIRE(stack.imfs.size() == stack.info.size());
    CHECK(stack.imfs.size() <= 16);
    std::vector<double> sum = stack.residual;
    for (const auto& imf : stack.imfs)
      for (int i = 0; i < n; ++i) sum[i] += imf[i];
    double err = 0.0;
    for (int i = 0; i < n; ++i) err = std::max(err, std::abs(sum[i] - x[i]));
    CHECK(err <= 1e-9 * testutil::linf(x));
  }
}

TEST_CASE("decompose 1d separates sine from trend") {
  int n = 512;
  std::vector<double> sine(n), x(n);
  for (int i = 0; i < n; ++i) {
    sine[i] = std::sin(2.0 * pi * 8.0 * i / n);
    x[i] = sine[i] + 0.5 * i / n;
  }
  ImfStack1d stack = if_decompose_1d(x);
  REQUIRE(stack.imfs.size() >= 1);
  CHECK(stack.info[0].half_len == 128);

  // Reflection artifacts reach about one filter support inward from each
  // boundary, so the interior excludes one support length per side.
  int margin = stack.info[0].half_len;
  double num = 0.0, den = 0.0;
  for (int i = margin; i < n - margin; ++i) {
    double dv = stack.imfs[0][i] - sine[i];
    num += dv * dv;
    den += sine[i] * sine[i];
  }
  CHECK(std::sqrt(num / den) < 0.05);

  // Everything that is not the oscillation should track the trend.
  std::vector<double> rest(n);
  for (int i = 0; i < n; ++i) rest[i] = x[i] - stack.imfs[0][i];
  double cov = 0.0, var_rest = 0.0, var_trend = 0.0;
  double mean_rest = 0.0, mean_trend = 0.0;
  for (int i = margin; i < n - margin; ++i) {
    mean_rest += rest[i];
    mean_trend += 0.5 * i / n;
  }
  int count = n - 2 * margin;
  mean_rest /= count;
  mean_trend /= count;
  for (int i = margin; i < n - margin; ++i) {
    double a = rest[i] - mean_rest;
    double b = 0.5 * i / n - mean_trend;
    cov += a * b;
    var_rest += a * a;
    var_trend += b * b;
  }
  CHECK(cov / std::sqrt(var_rest * var_trend) > 0.9);
}

TEST_CASE("decompose 1d edge cases") {
  SECTION("monotone input yields no imfs") {
    std::vector<double> x = {0, 1, 2, 4, 8};
    ImfStack1d stack = if_decompose_1d(x);
    CHECK(stack.imfs.empty());
    CHECK(stack.residual == x);
  }
  SECTION("short input yields no imfs") {
    std::vector<double> x = {1.0, -1.0};
    ImfStack1d stack = if_decompose_1d(x);
    CHECK(stack.imfs.empty());
  }
  SECTION("non-finite input rejected") {
    std::vector<double> x = {0.0, std::nan(""), 1.0};
    REQUIRE_PLUME_ERROR(if_decompose_1d(x), ErrorCode::non_finite_value);
  }
  SECTION("negation is exact by linearity") {
    testutil::Rng rng(4);
    std::vector<double> x(64);
    for (double& v : x) v = rng.normal();
    std::vector<double> nx(64);
    for (int i = 0; i < 64; ++i) nx[i] = -x[i];
    ImfStack1d a = if_decompose_1d(x);
    ImfStack1d b = if_decompose_1d(nx);
    REQUIRE(a.imfs.size() == b.imfs.size());
    for (std::size_t k = 0; k < a.imfs.size(); ++k)
      for (int i = 0; i < 64; ++i) CHECK(b.imfs[k][i] == -a.imfs[k][i]);
  }
  SECTION("max_imfs caps the stack") {
    testutil::Rng rng(6);
    std::vector<double> x(128);
    for (double& v : x) v = rng.normal();
    SiftParams p;
    p.max_imfs = 1;
    ImfStack1d stack = if_decompose_1d(x, p);
    CHECK(stack.imfs.size() == 1);
  }
}

TEST_CASE("decompose 2d reconstruction and termination") {
  testutil::Rng rng(31);
  for (auto [h, v] : {std::pair{24, 17}, std::pair{32, 32}}) {
    DetectionMap img(h, v);
    for (double& x : img.scores) x = rng.normal();
    ImfStack2d stack = mif_decompose_2d(img);
    std::vector<double> sum = stack.residual.scores;
    for (const auto& imf : stack.imfs)
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += imf.scores[i];
    double err = 0.0;
    for (std::size_t i = 0; i < sum.size(); ++i)
      err = std::max(err, std::abs(sum[i] - img.scores[i]));
    CHECK(err <= 1e-9 * testutil::linf(img.scores));

    if (stack.imfs.size() < 16) {
      long row_total = 0, col_total = 0;
      for (int r = 0; r < h; ++r)
        row_total += count_extrema_1d(stack.residual.scores.data() +
                                          static_cast<std::size_t>(r) * v,
                                      v);
      for (int c = 0; c < v; ++c)
        col_total += count_extrema_1d(stack.residual.scores.data() + c, h, v);
      CHECK(static_cast<double>(row_total) / h < 2.0);
      CHECK(static_cast<double>(col_total) / v < 2.0);
    }
  }
}

TEST_CASE("decompose 2d separates oscillation from ramp") {
  int n = 64;
  DetectionMap osc(n, n), img(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      osc.at(r, c) = std::sin(2.0 * pi * 8.0 * r / n) * std::sin(2.0 * pi * 8.0 * c / n);
      img.at(r, c) = osc.at(r, c) + 0.5 * (r + c) / (2.0 * n);
    }
  ImfStack2d stack = mif_decompose_2d(img);
  REQUIRE(stack.imfs.size() >= 1);
  CHECK(stack.info[0].half_rows == 16);
  CHECK(stack.info[0].half_cols == 16);

  int margin = std::max(stack.info[0].half_rows, stack.info[0].half_cols);
  double num = 0.0, den = 0.0, rnum = 0.0, rden = 0.0;
  for (int r = margin; r < n - margin; ++r)
    for (int c = margin; c < n - margin; ++c) {
      double dv = stack.imfs[0].at(r, c) - osc.at(r, c);
      num += dv * dv;
      den += osc.at(r, c) * osc.at(r, c);
      double ramp = 0.5 * (r + c) / (2.0 * n);
      double rest = img.at(r, c) - stack.imfs[0].at(r, c);
      rnum += (rest - ramp) * (rest - ramp);
      rden += ramp * ramp;
    }
  CHECK(std::sqrt(num / den) < 0.1);
  CHECK(std::sqrt(rnum / rden) < 0.1);
}

TEST_CASE("decompose 2d edge cases") {
  SECTION("ramps have no imfs") {
    DetectionMap img(16, 16);
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 16; ++c) img.at(r, c) = 2.0 * r - c;
    ImfStack2d stack = mif_decompose_2d(img);
    CHECK(stack.imfs.empty());
    CHECK(stack.residual.scores == img.scores);
  }
  SECTION("degenerate sizes return the input as residual") {
    DetectionMap img(2, 40);
    for (double& x : img.scores) x = 1.0;
    ImfStack2d stack = mif_decompose_2d(img);
    CHECK(stack.imfs.empty());
    CHECK(stack.residual.scores == img.scores);
  }
  SECTION("thread count does not change results") {
    testutil::Rng rng(8);
    DetectionMap img(33, 29);
    for (double& x : img.scores) x = rng.normal();
    ImfStack2d a = mif_decompose_2d(img, {}, 1);
    ImfStack2d b = mif_decompose_2d(img, {}, 4);
    REQUIRE(a.imfs.size() == b.imfs.size());
    for (std::size_t k = 0; k < a.imfs.size(); ++k)
      CHECK(a.imfs[k].scores == b.imfs[k].scores);
    CHECK(a.residual.scores == b.residual.scores);
  }
  SECTION("transpose covariance") {
    testutil::Rng rng(13);
    DetectionMap img(24, 18);
    for (double& x : img.scores) x = rng.normal();
    DetectionMap t(18, 24);
    for (int r = 0; r < 24; ++r)
      for (int c = 0; c < 18; ++c) t.at(c, r) = img.at(r, c);
    ImfStack2d a = mif_decompose_2d(img);
    ImfStack2d b = mif_decompose_2d(t);
    REQUIRE(a.imfs.size() == b.imfs.size());
    for (std::size_t k = 0; k < a.imfs.size(); ++k)
      for (int r = 0; r < 24; ++r)
        for (int c = 0; c < 18; ++c)
          CHECK_THAT(b.imfs[k].at(c, r),
                     Catch::Matchers::WithinAbs(a.imfs[k].at(r, c), 1e-12));
  }
}
