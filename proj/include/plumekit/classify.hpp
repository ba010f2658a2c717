#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "threads.hpp"
#include "types.hpp"

namespace plumekit {

enum class Method { cos, mf, ace };

inline Method method_from_name(const std::string& name) {
  if (name == "cos") return Method::cos;
  if (name == "mf") return Method::mf;
  if (name == "ace") return Method::ace;
  fail(ErrorCode::unparseable_value, "unknown method '" + name + "'");
}

// Background first and second moments plus a Cholesky factorization of the
// regularized covariance. epsilon keeps the factorization defined when the
// sample covariance is rank-deficient: a relative diagonal loading of
// 1e-8 * trace/d, floored at 1e-12 * (1 + |mean|_inf) so an all-zero or
// constant background still factorizes.
struct BackgroundStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  double epsilon = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt;

  int bands() const { return static_cast<int>(mean.size()); }
};

inline BackgroundStats make_background_stats(Eigen::VectorXd mean,
                                             Eigen::MatrixXd covariance) {
  const std::string context = "make_background_stats";
  if (covariance.rows() != covariance.cols() || covariance.rows() != mean.size())
    fail(ErrorCode::dimension_mismatch, context + ": covariance shape does not match mean");
  BackgroundStats stats;
  stats.mean = std::move(mean);
  stats.covariance = 0.5 * (covariance + covariance.transpose());
  int d = stats.bands();
  double mean_inf = stats.mean.size() ? stats.mean.cwiseAbs().maxCoeff() : 0.0;
  stats.epsilon = std::max(1e-8 * stats.covariance.trace() / d, 1e-12 * (1.0 + mean_inf));
  Eigen::MatrixXd loaded = stats.covariance;
  loaded.diagonal().array() += stats.epsilon;
  stats.llt.compute(loaded);
  if (stats.llt.info() != Eigen::Success)
    fail(ErrorCode::singular_covariance,
         context + ": covariance is not positive definite even after loading");
  return stats;
}

// Two-pass moment estimate over the selected pixels: explicit mean, then
// outer-product sum with divisor n-1 (zero covariance when n < 2). With a
// mask only background-labeled pixels are used.
inline BackgroundStats estimate_background(const Hypercube& cube,
                                           const GroundTruthMask* mask = nullptr) {
  const std::string context = "estimate_background";
  validate(cube, context);
  if (mask) require_same_shape(cube, *mask, context);
  int d = cube.bands;
  std::size_t npix = cube.pixels();
  std::vector<std::size_t> selected;
  selected.reserve(npix);
  for (std::size_t p = 0; p < npix; ++p)
    if (!mask || mask->labels[p] == static_cast<std::uint8_t>(Label::background))
      selected.push_back(p);
  if (selected.empty())
    fail(ErrorCode::empty_selection, context + ": no pixels selected");

  auto spectrum = [&](std::size_t p) {
    return Eigen::Map<const Eigen::VectorXd, 0, Eigen::InnerStride<>>(
        cube.data.data() + p, d, Eigen::InnerStride<>(static_cast<long>(npix)));
  };

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (std::size_t p : selected) mean += spectrum(p);
  mean /= static_cast<double>(selected.size());

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  if (selected.size() > 1) {
    Eigen::VectorXd diff(d);
    for (std::size_t p : selected) {
      diff = spectrum(p) - mean;
      cov.noalias() += diff * diff.transpose();
    }
    cov /= static_cast<double>(selected.size() - 1);
  }
  return make_background_stats(std::move(mean), std::move(cov));
}

// ---------------------------------------------------------------------------
// Scalar scores

inline double cos_score(const Eigen::VectorXd& s, const Eigen::VectorXd& sc) {
  if (s.size() != sc.size())
    fail(ErrorCode::dimension_mismatch, "cos_score: band counts differ");
  double ss = s.squaredNorm();
  double cc = sc.squaredNorm();
  if (ss == 0.0 || cc == 0.0)
    fail(ErrorCode::zero_vector, "cos_score: zero vector");
  double dot = s.dot(sc);
  return std::clamp(dot * dot / (ss * cc), 0.0, 1.0);
}

inline double mf_score(const Eigen::VectorXd& s, const Eigen::VectorXd& sc,
                       const BackgroundStats& stats) {
  if (s.size() != sc.size() || s.size() != stats.mean.size())
    fail(ErrorCode::dimension_mismatch, "mf_score: band counts differ");
  if (sc.squaredNorm() == 0.0) fail(ErrorCode::zero_vector, "mf_score: zero signature");
  Eigen::VectorXd a = stats.llt.solve(sc);
  double denom = sc.dot(a);
  if (!(denom > 0.0))
    fail(ErrorCode::zero_denominator, "mf_score: non-positive signature energy");
  double t = (s - stats.mean).dot(a);
  return t * t / denom;
}

inline double ace_score(const Eigen::VectorXd& s, const Eigen::VectorXd& sc,
                        const BackgroundStats& stats) {
  if (s.size() != sc.size() || s.size() != stats.mean.size())
    fail(ErrorCode::dimension_mismatch, "ace_score: band counts differ");
  if (sc.squaredNorm() == 0.0) fail(ErrorCode::zero_vector, "ace_score: zero signature");
  Eigen::VectorXd a = stats.llt.solve(sc);
  double denom_sig = sc.dot(a);
  if (!(denom_sig > 0.0))
    fail(ErrorCode::zero_denominator, "ace_score: non-positive signature energy");
  Eigen::VectorXd x = s - stats.mean;
  double q = x.dot(stats.llt.solve(x));
  if (!(q > 0.0))
    fail(ErrorCode::degenerate_pixel, "ace_score: pixel equals background mean");
  double t = x.dot(a);
  return std::clamp(t * t / (denom_sig * q), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Whitening

// Inverse symmetric square root of the loaded covariance, from an
// eigendecomposition with eigenvalues floored at epsilon.
inline Eigen::MatrixXd whitening_transform(const BackgroundStats& stats) {
  Eigen::MatrixXd loaded = stats.covariance;
  loaded.diagonal().array() += stats.epsilon;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(loaded);
  if (eig.info() != Eigen::Success)
    fail(ErrorCode::singular_covariance, "whitening_transform: eigendecomposition failed");
  Eigen::VectorXd inv_sqrt =
      eig.eigenvalues().cwiseMax(stats.epsilon).cwiseSqrt().cwiseInverse();
  return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
}

// Signatures are whitened without centering; cube pixels are centered on the
// background mean first.
inline Signature whiten(const Signature& sig, const BackgroundStats& stats) {
  if (sig.bands() != stats.bands())
    fail(ErrorCode::dimension_mismatch, "whiten: band counts differ");
  Eigen::Map<const Eigen::VectorXd> s(sig.values.data(), sig.bands());
  Eigen::VectorXd w = whitening_transform(stats) * s;
  return Signature(std::vector<double>(w.data(), w.data() + w.size()));
}

inline Hypercube whiten(const Hypercube& cube, const BackgroundStats& stats,
                        int threads = 0) {
  const std::string context = "whiten";
  validate(cube, context);
  if (cube.bands != stats.bands())
    fail(ErrorCode::dimension_mismatch, context + ": band counts differ");
  Eigen::MatrixXd transform = whitening_transform(stats);
  Hypercube out(cube.height, cube.width, cube.bands);
  std::size_t npix = cube.pixels();
  int d = cube.bands;
  parallel_chunks(npix, threads, [&](std::size_t pb, std::size_t pe) {
    Eigen::VectorXd s(d), w(d);
    for (std::size_t p = pb; p < pe; ++p) {
      for (int b = 0; b < d; ++b) s[b] = cube.data[b * npix + p];
      w.noalias() = transform * (s - stats.mean);
      for (int b = 0; b < d; ++b) out.data[b * npix + p] = w[b];
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Whole-cube classification

struct ClassifyResult {
  DetectionMap map;
  long degenerate_pixels = 0;
};

// Flips a map around its own value range: x -> (min + max) - x. Used when a
// classifier scores plumes low (absorption against a warm background).
inline void reverse_scores(DetectionMap& map) {
  if (map.scores.empty()) return;
  double lo = map.scores[0], hi = map.scores[0];
  for (double x : map.scores) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  double pivot = lo + hi;
  for (double& x : map.scores) x = pivot - x;
}

// Scores every pixel against the target signature. Degenerate pixels (zero
// vector for cos, pixel equal to the background mean for ace) map to score 0
// and are counted rather than aborting the run.
inline ClassifyResult classify(const Hypercube& cube, const Signature& sc, Method method,
                               const BackgroundStats* stats = nullptr,
                               bool reverse = false, int threads = 0) {
  const std::string context = "classify";
  validate(cube, context);
  require_same_bands(cube, sc, context);
  if ((method == Method::mf || method == Method::ace) && !stats)
    throw std::invalid_argument(context + ": mf and ace require background stats");
  if (stats && stats->bands() != cube.bands)
    fail(ErrorCode::dimension_mismatch, context + ": stats band count differs from cube");

  int d = cube.bands;
  std::size_t npix = cube.pixels();
  Eigen::Map<const Eigen::VectorXd> target(sc.values.data(), d);
  if (target.squaredNorm() == 0.0)
    fail(ErrorCode::zero_vector, context + ": zero target signature");

  // Signature-side quantities are shared by every pixel.
  Eigen::VectorXd a;
  double denom_sig = 0.0;
  if (method == Method::mf || method == Method::ace) {
    a = stats->llt.solve(target);
    denom_sig = target.dot(a);
    if (!(denom_sig > 0.0))
      fail(ErrorCode::zero_denominator, context + ": non-positive signature energy");
  }
  double target_norm2 = target.squaredNorm();

  ClassifyResult result;
  result.map = DetectionMap(cube.height, cube.width);
  std::atomic<long> degenerate{0};

  parallel_chunks(npix, threads, [&](std::size_t pb, std::size_t pe) {
    Eigen::VectorXd s(d), x(d);
    long local_degenerate = 0;
    for (std::size_t p = pb; p < pe; ++p) {
      for (int b = 0; b < d; ++b) s[b] = cube.data[b * npix + p];
      double score = 0.0;
      switch (method) {
        case Method::cos: {
          double ss = s.squaredNorm();
          if (ss == 0.0) {
            ++local_degenerate;
          } else {
            double dot = s.dot(target);
            score = std::clamp(dot * dot / (ss * target_norm2), 0.0, 1.0);
          }
          break;
        }
        case Method::mf: {
          double t = (s - stats->mean).dot(a);
          score = t * t / denom_sig;
          break;
        }
        case Method::ace: {
          x = s - stats->mean;
          double q = x.dot(stats->llt.solve(x));
          if (!(q > 0.0)) {
            ++local_degenerate;
          } else {
            double t = x.dot(a);
            score = std::clamp(t * t / (denom_sig * q), 0.0, 1.0);
          }
          break;
        }
      }
      result.map.scores[p] = score;
    }
    degenerate.fetch_add(local_degenerate, std::memory_order_relaxed);
  });

  result.degenerate_pixels = degenerate.load();
  if (reverse) reverse_scores(result.map);
  return result;
}

}  // namespace plumekit
