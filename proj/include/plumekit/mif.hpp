#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "threads.hpp"
#include "types.hpp"

namespace plumekit {

enum class SupportShape { ellipsoidal, spherical };

struct SiftParams {
  double sd_threshold = 1e-3;
  int max_inner_iters = 200;
  int max_imfs = 16;
  SupportShape support_shape = SupportShape::ellipsoidal;
};

// ---------------------------------------------------------------------------
// Filter kernels
//
// The 1-D weight sequence is the discrete self-convolution of a triangle of
// half-width half_len/2, sampled at integer offsets in [-half_len, half_len]
// and normalized to unit sum. The result is a C1 piecewise-cubic bump whose
// frequency response has exact zeros at multiples of 2/half_len cycles per
// sample, which is what lets sifting leave oscillations of matching period
// untouched.

struct Kernel1d {
  int half_len = 0;
  std::vector<double> weights;  // size 2*half_len + 1, offset t stored at t + half_len

  double at(int t) const { return weights[static_cast<std::size_t>(t + half_len)]; }
};

inline Kernel1d build_kernel_1d(int half_len) {
  if (half_len < 1)
    fail(ErrorCode::unparseable_value,
         "build_kernel_1d: half length must be >= 1, got " + std::to_string(half_len));
  Kernel1d k;
  k.half_len = half_len;
  int size = 2 * half_len + 1;
  std::vector<double> tri(static_cast<std::size_t>(size), 0.0);
  double a = half_len / 2.0;
  for (int j = -half_len; j <= half_len; ++j)
    tri[static_cast<std::size_t>(j + half_len)] = std::max(0.0, 1.0 - std::abs(j) / a);
  k.weights.assign(static_cast<std::size_t>(size), 0.0);
  for (int t = -half_len; t <= half_len; ++t) {
    double acc = 0.0;
    for (int j = std::max(-half_len, t - half_len); j <= std::min(half_len, t + half_len); ++j)
      acc += tri[static_cast<std::size_t>(j + half_len)] *
             tri[static_cast<std::size_t>(t - j + half_len)];
    k.weights[static_cast<std::size_t>(t + half_len)] = acc;
  }
  double sum = 0.0;
  for (double w : k.weights) sum += w;
  for (double& w : k.weights) w /= sum;
  double resum = 0.0;
  for (double w : k.weights) resum += w;
  k.weights[static_cast<std::size_t>(half_len)] += 1.0 - resum;
  return k;
}

// Separable product of two 1-D kernels masked to the ellipse
// (t_r/half_rows)^2 + (t_c/half_cols)^2 <= 1, then renormalized. The mask
// test is done in exact integer arithmetic. span_lo/span_hi give the
// inclusive column-offset range of the ellipse on each kernel row.
struct Kernel2d {
  int half_rows = 0;
  int half_cols = 0;
  std::vector<double> weights;  // (2*half_rows+1) x (2*half_cols+1), row-major
  std::vector<int> span_lo, span_hi;

  double at(int tr, int tc) const {
    return weights[static_cast<std::size_t>(tr + half_rows) * (2 * half_cols + 1) +
                   (tc + half_cols)];
  }
};

inline Kernel2d build_kernel_2d(int half_rows, int half_cols) {
  Kernel1d kr = build_kernel_1d(half_rows);
  Kernel1d kc = build_kernel_1d(half_cols);
  Kernel2d k;
  k.half_rows = half_rows;
  k.half_cols = half_cols;
  int w = 2 * half_cols + 1;
  k.weights.assign(static_cast<std::size_t>(2 * half_rows + 1) * w, 0.0);
  k.span_lo.assign(static_cast<std::size_t>(2 * half_rows + 1), 0);
  k.span_hi.assign(static_cast<std::size_t>(2 * half_rows + 1), 0);
  long long rr = static_cast<long long>(half_rows) * half_rows;
  long long cc = static_cast<long long>(half_cols) * half_cols;
  double sum = 0.0;
  for (int tr = -half_rows; tr <= half_rows; ++tr) {
    int lo = half_cols + 1, hi = -half_cols - 1;
    for (int tc = -half_cols; tc <= half_cols; ++tc) {
      long long lhs = static_cast<long long>(tr) * tr * cc +
                      static_cast<long long>(tc) * tc * rr;
      if (lhs > rr * cc) continue;
      lo = std::min(lo, tc);
      hi = std::max(hi, tc);
      double v = kr.at(tr) * kc.at(tc);
      k.weights[static_cast<std::size_t>(tr + half_rows) * w + (tc + half_cols)] = v;
      sum += v;
    }
    k.span_lo[static_cast<std::size_t>(tr + half_rows)] = lo;
    k.span_hi[static_cast<std::size_t>(tr + half_rows)] = hi;
  }
  for (double& v : k.weights) v /= sum;
  double resum = 0.0;
  for (double v : k.weights) resum += v;
  k.weights[static_cast<std::size_t>(half_rows) * w + half_cols] += 1.0 - resum;
  return k;
}

// ---------------------------------------------------------------------------
// Extrema counting and support lengths

// Counts strict interior extrema; a plateau counts once and endpoints never
// count. Works on strided data so matrix columns scan without copying.
inline int count_extrema_1d(const double* x, std::size_t n, std::size_t stride = 1) {
  if (n < 3) return 0;
  int count = 0;
  int last = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double d = x[(i + 1) * stride] - x[i * stride];
    int s = (d > 0.0) - (d < 0.0);
    if (s == 0) continue;
    if (last != 0 && s != last) ++count;
    last = s;
  }
  return count;
}

inline int count_extrema_1d(const std::vector<double>& x) {
  return count_extrema_1d(x.data(), x.size());
}

// Kernel half-length for one sifting round: 4n/K rounded, where K is the
// extremum count, clamped to [3, n-1]. With K extrema the dominant period is
// about 2n/K samples, and a triangle of half-width 2n/K has its first exact
// frequency-response zero right there, so the dominant oscillation survives
// the moving average unchanged.
inline int compute_support_1d(const double* x, std::size_t n, std::size_t stride = 1) {
  int k = count_extrema_1d(x, n, stride);
  if (k < 2)
    fail(ErrorCode::too_few_extrema,
         "compute_support_1d: needs at least 2 extrema, found " + std::to_string(k));
  long long half = std::llround(4.0 * static_cast<double>(n) / k);
  half = std::clamp<long long>(half, 3, static_cast<long long>(n) - 1);
  return static_cast<int>(half);
}

inline int compute_support_1d(const std::vector<double>& x) {
  return compute_support_1d(x.data(), x.size());
}

// Per-direction half-lengths from line scans. Rows determine the column
// half-length and vice versa; lines with fewer than 2 extrema are left out
// of their mean, and a direction with no qualifying lines at all gets the
// minimal half-length 1. Each result is clamped to [1, dim/2].
inline std::pair<int, int> compute_support_2d(const DetectionMap& img,
                                              SupportShape shape) {
  int h = img.height, v = img.width;
  double sum_c = 0.0, sum_r = 0.0;
  int n_c = 0, n_r = 0;
  for (int r = 0; r < h; ++r) {
    int k = count_extrema_1d(img.scores.data() + static_cast<std::size_t>(r) * v,
                             static_cast<std::size_t>(v));
    if (k >= 2) {
      sum_c += 4.0 * v / k;
      ++n_c;
    }
  }
  for (int c = 0; c < v; ++c) {
    int k = count_extrema_1d(img.scores.data() + c, static_cast<std::size_t>(h),
                             static_cast<std::size_t>(v));
    if (k >= 2) {
      sum_r += 4.0 * h / k;
      ++n_r;
    }
  }
  if (n_c == 0 && n_r == 0)
    fail(ErrorCode::no_extrema_anywhere,
         "compute_support_2d: no line in either direction has 2 extrema");
  auto clamp_dim = [](double value, int dim) {
    return static_cast<int>(
        std::clamp<long long>(std::llround(value), 1, std::max(1, dim / 2)));
  };
  int half_rows = n_r > 0 ? clamp_dim(sum_r / n_r, h) : 1;
  int half_cols = n_c > 0 ? clamp_dim(sum_c / n_c, v) : 1;
  if (shape == SupportShape::spherical) {
    double g = std::sqrt(static_cast<double>(half_rows) * half_cols);
    half_rows = clamp_dim(g, h);
    half_cols = clamp_dim(g, v);
  }
  return {half_rows, half_cols};
}

// ---------------------------------------------------------------------------
// Convolution with whole-sample symmetric extension

namespace detail {

// Reflects index i into [0, n) without repeating the edge sample:
// -1 -> 1, -2 -> 2, n -> n-2.
inline std::size_t reflect_index(long long i, long long n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return static_cast<std::size_t>(i);
}

}  // namespace detail

inline std::vector<double> convolve_reflect_1d(const std::vector<double>& x,
                                               const Kernel1d& kernel) {
  long long n = static_cast<long long>(x.size());
  int h = kernel.half_len;
  std::vector<double> ext(x.size() + 2 * static_cast<std::size_t>(h));
  for (long long j = 0; j < static_cast<long long>(ext.size()); ++j)
    ext[static_cast<std::size_t>(j)] = x[detail::reflect_index(j - h, n)];
  std::vector<double> out(x.size());
  int taps = 2 * h + 1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double acc = 0.0;
    const double* e = ext.data() + i;
    for (int t = 0; t < taps; ++t) acc += kernel.weights[static_cast<std::size_t>(t)] * e[t];
    out[i] = acc;
  }
  return out;
}

namespace detail {

// Fills pad (h+2hr) x (v+2hc) with the reflected extension of img.
inline void fill_reflected(const DetectionMap& img, int half_rows, int half_cols,
                           std::vector<double>& pad, int threads) {
  int h = img.height, v = img.width;
  int pw = v + 2 * half_cols;
  int ph = h + 2 * half_rows;
  pad.resize(static_cast<std::size_t>(ph) * pw);
  parallel_chunks(static_cast<std::size_t>(ph), threads, [&](std::size_t rb, std::size_t re) {
    for (std::size_t pr = rb; pr < re; ++pr) {
      std::size_t sr = reflect_index(static_cast<long long>(pr) - half_rows, h);
      const double* src = img.scores.data() + sr * static_cast<std::size_t>(v);
      double* dst = pad.data() + pr * static_cast<std::size_t>(pw);
      for (int pc = 0; pc < pw; ++pc)
        dst[pc] = src[reflect_index(static_cast<long long>(pc) - half_cols, v)];
    }
  });
}

}  // namespace detail

inline DetectionMap convolve_reflect_2d(const DetectionMap& img, const Kernel2d& kernel,
                                        int threads = 0) {
  int h = img.height, v = img.width;
  int hr = kernel.half_rows, hc = kernel.half_cols;
  std::vector<double> pad;
  detail::fill_reflected(img, hr, hc, pad, threads);
  int pw = v + 2 * hc;
  int kw = 2 * hc + 1;
  DetectionMap out(h, v);
  parallel_chunks(static_cast<std::size_t>(h), threads, [&](std::size_t rb, std::size_t re) {
    for (std::size_t r = rb; r < re; ++r) {
      double* dst = out.scores.data() + r * static_cast<std::size_t>(v);
      for (int c = 0; c < v; ++c) {
        double acc = 0.0;
        for (int kr = -hr; kr <= hr; ++kr) {
          std::size_t krow = static_cast<std::size_t>(kr + hr);
          const double* w = kernel.weights.data() + krow * static_cast<std::size_t>(kw) + hc;
          const double* row = pad.data() +
                              (r + static_cast<std::size_t>(kr + hr)) * pw +
                              static_cast<std::size_t>(c + hc);
          for (int kc = kernel.span_lo[krow]; kc <= kernel.span_hi[krow]; ++kc)
            acc += w[kc] * row[kc];
        }
        dst[c] = acc;
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Sifting
//
// The inner loop applies one fixed linear operator over and over:
// s <- s - (s * w). Under whole-sample reflection that operator is
// diagonalized exactly by the cosine modes cos(pi k i / N) with N = n - 1,
// so instead of convolving per iteration the sift runs in coefficient space:
// mode k just shrinks by (1 - lambda_k) per step, where lambda_k is the
// kernel's response. Two transforms per extracted component replace hundreds
// of convolutions. The cosine basis is not orthogonal under the plain sample
// inner product, so the l2 norms feeding the stop test use the closed-form
// Gram: ||x||^2 = (N/2)(sum c_k^2 + c_0^2 + c_N^2) + E^2 + O^2 with E, O the
// sums of even- and odd-indexed coefficients.

struct Sift1dResult {
  std::vector<double> component;
  int iterations = 0;
};

struct Sift2dResult {
  DetectionMap component;
  int iterations = 0;
};

namespace detail {

// cos(pi * m / N) for m in [0, 2N); cos(pi k i / N) = table[(k * i) mod 2N].
struct CosTable {
  long long period = 0;
  std::vector<double> values;

  explicit CosTable(int N) : period(2LL * N), values(static_cast<std::size_t>(2 * N)) {
    for (int m = 0; m < 2 * N; ++m)
      values[static_cast<std::size_t>(m)] =
          std::cos(std::numbers::pi * m / static_cast<double>(N));
  }
  double at(long long k, long long i) const {
    return values[static_cast<std::size_t>((k * i) % period)];
  }
};

// Coefficients c with x[i] = sum_k c_k cos(pi k i / N), k = 0..N.
inline void dct1_forward(const double* x, double* c, int N, const CosTable& tab) {
  for (int k = 0; k <= N; ++k) {
    double acc = 0.5 * x[0];
    for (int i = 1; i < N; ++i) acc += x[i] * tab.at(k, i);
    acc += (k % 2 == 0 ? 0.5 : -0.5) * x[N];
    c[k] = 2.0 / N * acc * ((k == 0 || k == N) ? 0.5 : 1.0);
  }
}

inline void dct1_synth(const double* c, double* x, int N, const CosTable& tab) {
  for (int i = 0; i <= N; ++i) {
    double acc = 0.0;
    for (int k = 0; k <= N; ++k) acc += c[k] * tab.at(k, i);
    x[i] = acc;
  }
}

inline double gram_norm2_1d(const std::vector<double>& c, int N) {
  double sum = 0.0, even = 0.0, odd = 0.0;
  for (int k = 0; k <= N; ++k) {
    double v = c[static_cast<std::size_t>(k)];
    sum += v * v;
    (k % 2 == 0 ? even : odd) += v;
  }
  double ends = c[0] * c[0] + c[static_cast<std::size_t>(N)] * c[static_cast<std::size_t>(N)];
  return 0.5 * N * (sum + ends) + even * even + odd * odd;
}

// Response of the kernel on mode k of the reflected extension. Valid for any
// tap offset, the periodic-even extension is baked into the cosine.
inline std::vector<double> kernel_spectrum_1d(const Kernel1d& kernel, int N,
                                              const CosTable& tab) {
  std::vector<double> lambda(static_cast<std::size_t>(N) + 1);
  for (int k = 0; k <= N; ++k) {
    double acc = kernel.at(0);
    for (int t = 1; t <= kernel.half_len; ++t) acc += 2.0 * kernel.at(t) * tab.at(k, t);
    lambda[static_cast<std::size_t>(k)] = acc;
  }
  return lambda;
}

inline Sift1dResult sift_1d_direct(const std::vector<double>& x, const Kernel1d& kernel,
                                   const SiftParams& params) {
  Sift1dResult res;
  res.component = x;
  while (res.iterations < params.max_inner_iters) {
    double norm2 = 0.0;
    for (double v : res.component) norm2 += v * v;
    if (norm2 == 0.0) break;
    std::vector<double> avg = convolve_reflect_1d(res.component, kernel);
    double step2 = 0.0;
    for (std::size_t i = 0; i < avg.size(); ++i) {
      step2 += avg[i] * avg[i];
      res.component[i] -= avg[i];
    }
    ++res.iterations;
    if (std::sqrt(step2 / norm2) < params.sd_threshold) break;
  }
  return res;
}

inline Sift2dResult sift_2d_direct(const DetectionMap& img, const Kernel2d& kernel,
                                   const SiftParams& params, int threads) {
  Sift2dResult res;
  res.component = img;
  while (res.iterations < params.max_inner_iters) {
    double norm2 = 0.0;
    for (double s : res.component.scores) norm2 += s * s;
    if (norm2 == 0.0) break;
    DetectionMap avg = convolve_reflect_2d(res.component, kernel, threads);
    double step2 = 0.0;
    for (std::size_t i = 0; i < avg.scores.size(); ++i) {
      step2 += avg.scores[i] * avg.scores[i];
      res.component.scores[i] -= avg.scores[i];
    }
    ++res.iterations;
    if (std::sqrt(step2 / norm2) < params.sd_threshold) break;
  }
  return res;
}

}  // namespace detail

// Iterates s <- s - (s * w) until the relative l2 step size drops below
// sd_threshold or the iteration cap is reached.
inline Sift1dResult sift_1d(const std::vector<double>& x, const Kernel1d& kernel,
                            const SiftParams& params = {}) {
  if (x.size() < 3) return detail::sift_1d_direct(x, kernel, params);
  int N = static_cast<int>(x.size()) - 1;
  detail::CosTable tab(N);
  std::vector<double> c(x.size());
  detail::dct1_forward(x.data(), c.data(), N, tab);
  std::vector<double> lambda = detail::kernel_spectrum_1d(kernel, N, tab);

  Sift1dResult res;
  std::vector<double> avg(x.size());
  while (res.iterations < params.max_inner_iters) {
    double norm2 = detail::gram_norm2_1d(c, N);
    if (norm2 == 0.0) break;
    for (std::size_t k = 0; k < c.size(); ++k) avg[k] = lambda[k] * c[k];
    double step2 = detail::gram_norm2_1d(avg, N);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] -= avg[k];
    ++res.iterations;
    if (std::sqrt(step2 / norm2) < params.sd_threshold) break;
  }
  if (res.iterations == 0) {
    res.component = x;
  } else {
    res.component.resize(x.size());
    detail::dct1_synth(c.data(), res.component.data(), N, tab);
  }
  return res;
}

namespace detail {

// 2-D separable transform: rows first, then columns, in place.
inline void dct1_forward_2d(std::vector<double>& data, int h, int v,
                            const CosTable& row_tab, const CosTable& col_tab) {
  int Nr = h - 1, Nc = v - 1;
  std::vector<double> line(static_cast<std::size_t>(std::max(h, v)));
  for (int r = 0; r < h; ++r) {
    double* row = data.data() + static_cast<std::size_t>(r) * v;
    dct1_forward(row, line.data(), Nc, col_tab);
    std::copy_n(line.data(), v, row);
  }
  std::vector<double> col(static_cast<std::size_t>(h));
  for (int cidx = 0; cidx < v; ++cidx) {
    for (int r = 0; r < h; ++r) col[static_cast<std::size_t>(r)] =
        data[static_cast<std::size_t>(r) * v + cidx];
    dct1_forward(col.data(), line.data(), Nr, row_tab);
    for (int r = 0; r < h; ++r)
      data[static_cast<std::size_t>(r) * v + cidx] = line[static_cast<std::size_t>(r)];
  }
}

inline void dct1_synth_2d(std::vector<double>& data, int h, int v,
                          const CosTable& row_tab, const CosTable& col_tab) {
  int Nr = h - 1, Nc = v - 1;
  std::vector<double> line(static_cast<std::size_t>(std::max(h, v)));
  std::vector<double> col(static_cast<std::size_t>(h));
  for (int cidx = 0; cidx < v; ++cidx) {
    for (int r = 0; r < h; ++r) col[static_cast<std::size_t>(r)] =
        data[static_cast<std::size_t>(r) * v + cidx];
    dct1_synth(col.data(), line.data(), Nr, row_tab);
    for (int r = 0; r < h; ++r)
      data[static_cast<std::size_t>(r) * v + cidx] = line[static_cast<std::size_t>(r)];
  }
  for (int r = 0; r < h; ++r) {
    double* row = data.data() + static_cast<std::size_t>(r) * v;
    dct1_synth(row, line.data(), Nc, col_tab);
    std::copy_n(line.data(), v, row);
  }
}

// ||x||^2 from 2-D coefficients: the Gram factorizes per axis into
// (N/2)(I + endpoint) plus rank-2 parity terms, expanded here term by term.
inline double gram_norm2_2d(const std::vector<double>& c, int h, int v) {
  int Nr = h - 1, Nc = v - 1;
  auto dr = [Nr](int k) { return k == 0 || k == Nr ? 1.0 : 0.0; };
  auto dc = [Nc](int l) { return l == 0 || l == Nc ? 1.0 : 0.0; };
  double a = 0.0;
  double parity[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  double row_acc = 0.0;
  double col_acc = 0.0;
  std::vector<double> col_even(static_cast<std::size_t>(v), 0.0);
  std::vector<double> col_odd(static_cast<std::size_t>(v), 0.0);
  for (int k = 0; k < h; ++k) {
    const double* row = c.data() + static_cast<std::size_t>(k) * v;
    double se = 0.0, so = 0.0, sq = 0.0;
    for (int l = 0; l < v; ++l) {
      double val = row[l];
      sq += (1.0 + dc(l)) * val * val;
      (l % 2 == 0 ? se : so) += val;
      (k % 2 == 0 ? col_even : col_odd)[static_cast<std::size_t>(l)] += val;
      parity[k % 2][l % 2] += val;
    }
    a += (1.0 + dr(k)) * sq;
    row_acc += (1.0 + dr(k)) * (se * se + so * so);
  }
  double b = 0.5 * Nr * row_acc;
  for (int l = 0; l < v; ++l) {
    double e = col_even[static_cast<std::size_t>(l)];
    double o = col_odd[static_cast<std::size_t>(l)];
    col_acc += (1.0 + dc(l)) * (e * e + o * o);
  }
  double cterm = 0.5 * Nc * col_acc;
  double d = parity[0][0] * parity[0][0] + parity[0][1] * parity[0][1] +
             parity[1][0] * parity[1][0] + parity[1][1] * parity[1][1];
  return 0.25 * Nr * Nc * a + b + cterm + d;
}

// lambda[k][l] = sum_{s,t} w(s,t) cos(pi k s / Nr) cos(pi l t / Nc),
// contracted one axis at a time; w is even in each axis separately.
inline std::vector<double> kernel_spectrum_2d(const Kernel2d& kernel, int h, int v,
                                              const CosTable& row_tab,
                                              const CosTable& col_tab) {
  int hr = kernel.half_rows, hc = kernel.half_cols;
  std::vector<double> partial(static_cast<std::size_t>(hr + 1) * v);
  for (int s = 0; s <= hr; ++s)
    for (int l = 0; l < v; ++l) {
      double acc = kernel.at(s, 0);
      for (int t = 1; t <= hc; ++t) acc += 2.0 * kernel.at(s, t) * col_tab.at(l, t);
      partial[static_cast<std::size_t>(s) * v + l] = acc;
    }
  std::vector<double> lambda(static_cast<std::size_t>(h) * v);
  for (int k = 0; k < h; ++k)
    for (int l = 0; l < v; ++l) {
      double acc = partial[static_cast<std::size_t>(l)];
      for (int s = 1; s <= hr; ++s)
        acc += 2.0 * partial[static_cast<std::size_t>(s) * v + l] * row_tab.at(k, s);
      lambda[static_cast<std::size_t>(k) * v + l] = acc;
    }
  return lambda;
}

}  // namespace detail

inline Sift2dResult sift_2d(const DetectionMap& img, const Kernel2d& kernel,
                            const SiftParams& params = {}, int threads = 0) {
  int h = img.height, v = img.width;
  if (h < 3 || v < 3) return detail::sift_2d_direct(img, kernel, params, threads);
  detail::CosTable row_tab(h - 1);
  detail::CosTable col_tab(v - 1);
  std::vector<double> c = img.scores;
  detail::dct1_forward_2d(c, h, v, row_tab, col_tab);
  std::vector<double> lambda = detail::kernel_spectrum_2d(kernel, h, v, row_tab, col_tab);

  Sift2dResult res;
  std::vector<double> avg(c.size());
  while (res.iterations < params.max_inner_iters) {
    double norm2 = detail::gram_norm2_2d(c, h, v);
    if (norm2 == 0.0) break;
    for (std::size_t i = 0; i < c.size(); ++i) avg[i] = lambda[i] * c[i];
    double step2 = detail::gram_norm2_2d(avg, h, v);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] -= avg[i];
    ++res.iterations;
    if (std::sqrt(step2 / norm2) < params.sd_threshold) break;
  }
  if (res.iterations == 0) {
    res.component = img;
  } else {
    res.component = DetectionMap(h, v);
    detail::dct1_synth_2d(c, h, v, row_tab, col_tab);
    res.component.scores = std::move(c);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Decomposition drivers

struct Imf1dInfo {
  int half_len = 0;
  int iterations = 0;
};

struct ImfStack1d {
  std::vector<std::vector<double>> imfs;
  std::vector<double> residual;
  std::vector<Imf1dInfo> info;
};

inline ImfStack1d if_decompose_1d(const std::vector<double>& x,
                                  const SiftParams& params = {}) {
  for (double v : x)
    if (!std::isfinite(v))
      fail(ErrorCode::non_finite_value, "if_decompose_1d: non-finite input sample");
  ImfStack1d stack;
  stack.residual = x;
  if (x.size() < 3) return stack;
  for (int round = 0; round < params.max_imfs; ++round) {
    if (count_extrema_1d(stack.residual) < 2) break;
    int half = compute_support_1d(stack.residual);
    Kernel1d kernel = build_kernel_1d(half);
    Sift1dResult sifted = sift_1d(stack.residual, kernel, params);
    bool all_zero = true;
    for (double v : sifted.component)
      if (v != 0.0) {
        all_zero = false;
        break;
      }
    if (all_zero) break;  // degenerate kernel, no progress possible
    for (std::size_t i = 0; i < stack.residual.size(); ++i)
      stack.residual[i] -= sifted.component[i];
    stack.info.push_back({half, sifted.iterations});
    stack.imfs.push_back(std::move(sifted.component));
  }
  return stack;
}

struct Imf2dInfo {
  int half_rows = 0;
  int half_cols = 0;
  int iterations = 0;
};

struct ImfStack2d {
  std::vector<DetectionMap> imfs;
  DetectionMap residual;
  std::vector<Imf2dInfo> info;
};

// Outer loop keeps extracting while either direction still averages at least
// 2 extrema per line.
inline ImfStack2d mif_decompose_2d(const DetectionMap& img, const SiftParams& params = {},
                                   int threads = 0) {
  validate(img, "mif_decompose_2d");
  ImfStack2d stack;
  stack.residual = img;
  if (img.height < 3 || img.width < 3) return stack;
  int h = img.height, v = img.width;
  for (int round = 0; round < params.max_imfs; ++round) {
    long total_row = 0, total_col = 0;
    for (int r = 0; r < h; ++r)
      total_row += count_extrema_1d(
          stack.residual.scores.data() + static_cast<std::size_t>(r) * v,
          static_cast<std::size_t>(v));
    for (int c = 0; c < v; ++c)
      total_col += count_extrema_1d(stack.residual.scores.data() + c,
                                    static_cast<std::size_t>(h),
                                    static_cast<std::size_t>(v));
    double avg_row = static_cast<double>(total_row) / h;
    double avg_col = static_cast<double>(total_col) / v;
    if (avg_row < 2.0 && avg_col < 2.0) break;
    auto [hr, hc] = compute_support_2d(stack.residual, params.support_shape);
    Kernel2d kernel = build_kernel_2d(hr, hc);
    Sift2dResult sifted = sift_2d(stack.residual, kernel, params, threads);
    bool all_zero = true;
    for (double s : sifted.component.scores)
      if (s != 0.0) {
        all_zero = false;
        break;
      }
    if (all_zero) break;
    for (std::size_t i = 0; i < stack.residual.scores.size(); ++i)
      stack.residual.scores[i] -= sifted.component.scores[i];
    stack.info.push_back({hr, hc, sifted.iterations});
    stack.imfs.push_back(std::move(sifted.component));
  }
  return stack;
}

}  // namespace plumekit
