#pragma once

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "classify.hpp"
#include "io.hpp"
#include "mif.hpp"
#include "roc.hpp"
#include "threads.hpp"
#include "types.hpp"

namespace plumekit {

// ---------------------------------------------------------------------------
// PreP: global mean removal followed by per-pixel spectral detrending. Each
// centered spectrum is decomposed along the band axis and replaced by the sum
// of its IMFs, which drops the smooth per-pixel trend. Spectra with fewer
// than 2 extrema produce no IMFs and come out all zero.

struct PrepResult {
  Hypercube cube;
  std::vector<long> imf_histogram;  // index = number of IMFs for a pixel
};

inline PrepResult prep(const Hypercube& cube, const SiftParams& params = {},
                       int threads = 0) {
  validate(cube, "prep");
  int d = cube.bands;
  std::size_t npix = cube.pixels();

  std::vector<double> global_mean(static_cast<std::size_t>(d), 0.0);
  for (int b = 0; b < d; ++b) {
    const double* plane = cube.data.data() + static_cast<std::size_t>(b) * npix;
    double acc = 0.0;
    for (std::size_t p = 0; p < npix; ++p) acc += plane[p];
    global_mean[static_cast<std::size_t>(b)] = acc / static_cast<double>(npix);
  }

  PrepResult result;
  result.cube = Hypercube(cube.height, cube.width, d);
  std::vector<int> counts(npix, 0);
  parallel_chunks(npix, threads, [&](std::size_t pb, std::size_t pe) {
    std::vector<double> spectrum(static_cast<std::size_t>(d));
    for (std::size_t p = pb; p < pe; ++p) {
      for (int b = 0; b < d; ++b)
        spectrum[static_cast<std::size_t>(b)] =
            cube.data[b * npix + p] - global_mean[static_cast<std::size_t>(b)];
      ImfStack1d stack = if_decompose_1d(spectrum, params);
      counts[p] = static_cast<int>(stack.imfs.size());
      for (int b = 0; b < d; ++b) {
        double acc = 0.0;
        for (const auto& imf : stack.imfs) acc += imf[static_cast<std::size_t>(b)];
        result.cube.data[b * npix + p] = acc;
      }
    }
  });

  int max_count = 0;
  for (int c : counts) max_count = std::max(max_count, c);
  result.imf_histogram.assign(static_cast<std::size_t>(max_count) + 1, 0);
  for (int c : counts) ++result.imf_histogram[static_cast<std::size_t>(c)];
  return result;
}

// ---------------------------------------------------------------------------
// PostP: subtracts the first 2-D IMF from a detection map, suppressing
// pixel-scale speckle while keeping the plume-scale structure.

struct PostpResult {
  DetectionMap map;
  int imfs_removed = 0;
  Imf2dInfo info;
};

inline PostpResult postp(const DetectionMap& map, const SiftParams& params = {},
                         int threads = 0) {
  SiftParams one = params;
  one.max_imfs = 1;
  ImfStack2d stack = mif_decompose_2d(map, one, threads);
  PostpResult result;
  result.map = std::move(stack.residual);
  result.imfs_removed = static_cast<int>(stack.imfs.size());
  if (!stack.info.empty()) result.info = stack.info.front();
  return result;
}

// ---------------------------------------------------------------------------
// Diagnostic: how far row-by-row / column-by-column 1-D detrending lands from
// the true 2-D result. Kept for regression hunting; the orderings do not
// commute and neither matches the 2-D filter.

struct RowcolCheck {
  double row_col_distance = 0.0;  // relative l2 of rows-then-cols vs 2-D
  double col_row_distance = 0.0;  // relative l2 of cols-then-rows vs 2-D
  std::uint64_t hash2d = 0;       // FNV-1a of the 2-D result bytes
};

namespace detail {

inline void detrend_lines_1d(DetectionMap& map, bool along_rows,
                             const SiftParams& params) {
  SiftParams one = params;
  one.max_imfs = 1;
  int n = along_rows ? map.width : map.height;
  int count = along_rows ? map.height : map.width;
  std::vector<double> line(static_cast<std::size_t>(n));
  for (int l = 0; l < count; ++l) {
    for (int i = 0; i < n; ++i)
      line[static_cast<std::size_t>(i)] = along_rows ? map.at(l, i) : map.at(i, l);
    ImfStack1d stack = if_decompose_1d(line, one);
    if (stack.imfs.empty()) continue;
    for (int i = 0; i < n; ++i) {
      double value = line[static_cast<std::size_t>(i)] - stack.imfs[0][static_cast<std::size_t>(i)];
      (along_rows ? map.at(l, i) : map.at(i, l)) = value;
    }
  }
}

inline std::uint64_t fnv1a(const std::vector<double>& values) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (double v : values) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int byte = 0; byte < 8; ++byte) {
      hash ^= (bits >> (8 * byte)) & 0xffULL;
      hash *= 0x100000001b3ULL;
    }
  }
  return hash;
}

}  // namespace detail

inline RowcolCheck rowcol_postp_check(const DetectionMap& map,
                                      const SiftParams& params = {}, int threads = 0) {
  PostpResult two_d = postp(map, params, threads);

  DetectionMap row_col = map;
  detail::detrend_lines_1d(row_col, true, params);
  detail::detrend_lines_1d(row_col, false, params);
  DetectionMap col_row = map;
  detail::detrend_lines_1d(col_row, false, params);
  detail::detrend_lines_1d(col_row, true, params);

  double ref2 = 0.0;
  for (double v : two_d.map.scores) ref2 += v * v;
  auto rel_dist = [&](const DetectionMap& other) {
    double acc = 0.0;
    for (std::size_t i = 0; i < other.scores.size(); ++i) {
      double dv = other.scores[i] - two_d.map.scores[i];
      acc += dv * dv;
    }
    return ref2 > 0.0 ? std::sqrt(acc / ref2) : std::sqrt(acc);
  };

  RowcolCheck check;
  check.row_col_distance = rel_dist(row_col);
  check.col_row_distance = rel_dist(col_row);
  check.hash2d = detail::fnv1a(two_d.map.scores);
  return check;
}

// ---------------------------------------------------------------------------
// End-to-end pipeline

struct PipelineConfig {
  Method method = Method::ace;
  bool use_prep = false;
  bool use_postp = false;
  bool reverse = false;
  SiftParams sift;
  int threads = 0;
  bool roc_log_x = false;
  const GroundTruthMask* stats_mask = nullptr;    // restrict stats to background labels
  const GroundTruthMask* ground_truth = nullptr;  // enables the ROC stage
  std::string out_map_path;                       // DMP1 artifact when nonempty
  std::string out_roc_path;                       // ROC CSV artifact when nonempty
};

struct PipelineReport {
  std::vector<long> prep_imf_histogram;
  int postp_imfs_removed = 0;
  long degenerate_pixels = 0;
  double prep_seconds = 0.0;
  double classify_seconds = 0.0;
  double postp_seconds = 0.0;
  double roc_seconds = 0.0;
};

struct PipelineResult {
  DetectionMap map;
  std::optional<RocCurve> roc;
  PipelineReport report;
};

namespace detail {

template <typename Fn>
inline auto timed_stage(const char* name, double& seconds, Fn&& fn) {
  auto start = std::chrono::steady_clock::now();
  try {
    auto value = fn();
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return value;
  } catch (const PlumeError& e) {
    throw PlumeError(e.code(), std::string("stage ") + name + ": " + e.what());
  }
}

template <typename Fn>
inline void named_stage(const char* name, Fn&& fn) {
  try {
    fn();
  } catch (const PlumeError& e) {
    throw PlumeError(e.code(), std::string("stage ") + name + ": " + e.what());
  }
}

}  // namespace detail

inline PipelineResult run_pipeline(const Hypercube& cube, const Signature& sc,
                                   const PipelineConfig& cfg) {
  PipelineResult result;
  const Hypercube* working = &cube;
  Hypercube prepped;
  if (cfg.use_prep) {
    PrepResult pr = detail::timed_stage("prep", result.report.prep_seconds, [&] {
      return prep(cube, cfg.sift, cfg.threads);
    });
    result.report.prep_imf_histogram = std::move(pr.imf_histogram);
    prepped = std::move(pr.cube);
    working = &prepped;
  }

  ClassifyResult classified =
      detail::timed_stage("classify", result.report.classify_seconds, [&] {
        BackgroundStats stats;
        const BackgroundStats* stats_ptr = nullptr;
        if (cfg.method == Method::mf || cfg.method == Method::ace) {
          stats = estimate_background(*working, cfg.stats_mask);
          stats_ptr = &stats;
        }
        return classify(*working, sc, cfg.method, stats_ptr, cfg.reverse, cfg.threads);
      });
  result.report.degenerate_pixels = classified.degenerate_pixels;
  result.map = std::move(classified.map);

  if (cfg.use_postp) {
    PostpResult pp = detail::timed_stage("postp", result.report.postp_seconds, [&] {
      return postp(result.map, cfg.sift, cfg.threads);
    });
    result.report.postp_imfs_removed = pp.imfs_removed;
    result.map = std::move(pp.map);
  }

  if (cfg.ground_truth) {
    result.roc = detail::timed_stage("roc", result.report.roc_seconds, [&] {
      return compute_roc(result.map, *cfg.ground_truth);
    });
  }

  if (!cfg.out_map_path.empty())
    detail::named_stage("write-map", [&] { write_detection_map(result.map, cfg.out_map_path); });
  if (!cfg.out_roc_path.empty() && result.roc)
    detail::named_stage("write-roc", [&] { roc_to_csv(*result.roc, cfg.out_roc_path, cfg.roc_log_x); });

  return result;
}

}  // namespace plumekit
