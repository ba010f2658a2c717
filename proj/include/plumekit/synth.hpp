#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "io.hpp"
#include "mif.hpp"
#include "types.hpp"

namespace plumekit {

// ---------------------------------------------------------------------------
// Counter-based random numbers
//
// Every voxel draws from splitmix64 keyed on (mixed seed + counter), so the
// generated scene is a pure function of the spec regardless of evaluation
// order, platform, or thread count.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace detail {

// Uniform in (0, 1), never returning an endpoint.
inline double to_unit(std::uint64_t x) {
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

inline double counter_normal(std::uint64_t mixed_seed, std::uint64_t k) {
  double u1 = to_unit(splitmix64(mixed_seed + 2 * k));
  double u2 = to_unit(splitmix64(mixed_seed + 2 * k + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scene specification

struct PlumeGeometry {
  double center_row = 0.0;
  double center_col = 0.0;
  double radius_rows = 0.0;
  double radius_cols = 0.0;
  double edge_width = 0.0;  // cosine taper width in pixels beyond the core ellipse
};

struct BackgroundModel {
  double mean_base = 0.0;
  double mean_slope = 0.0;
  double mean_bump_amp = 0.0;
  double mean_bump_center = 0.0;  // band index
  double mean_bump_width = 0.0;   // in bands; 0 disables the bump
  double spatial_corr = 0.0;      // boxcar half-width in pixels (rounded)
  double spectral_corr = 0.0;     // boxcar half-width in bands (rounded)
  double noise_sigma = 0.0;
};

struct SceneSpec {
  int height = 0;
  int width = 0;
  int bands = 0;
  std::uint64_t seed = 0;
  double alpha = 0.0;  // plume absorption strength
  PlumeGeometry plume;
  BackgroundModel background;
  double boundary_band_width = 0.0;  // extra ring of boundary-labeled pixels
};

// The benchmark scene: 64x64x40, correlated background, centered elliptical
// plume with a soft edge.
inline SceneSpec default_scene_spec() {
  SceneSpec s;
  s.height = 64;
  s.width = 64;
  s.bands = 40;
  s.seed = 1;
  s.alpha = 1.0;
  s.plume.center_row = 31.5;
  s.plume.center_col = 31.5;
  s.plume.radius_rows = 14.0;
  s.plume.radius_cols = 11.0;
  s.plume.edge_width = 4.0;
  s.boundary_band_width = 2.0;
  s.background.mean_base = 10.0;
  s.background.mean_slope = 2.0;
  s.background.mean_bump_amp = 1.5;
  s.background.mean_bump_center = 12.0;
  s.background.mean_bump_width = 6.0;
  s.background.spatial_corr = 1.0;
  s.background.spectral_corr = 2.0;
  s.background.noise_sigma = 0.1;
  return s;
}

// A target spectrum dominated by two narrow absorption features over a small
// baseline, so the implant survives per-pixel trend removal.
inline Signature demo_signature(int bands) {
  if (bands < 1)
    fail(ErrorCode::unparseable_value, "demo_signature: bands must be >= 1");
  std::vector<double> v(static_cast<std::size_t>(bands));
  double dm1 = bands > 1 ? bands - 1.0 : 1.0;
  for (int b = 0; b < bands; ++b) {
    double t = b / dm1;
    auto bump = [&](double center, double width, double amp) {
      double z = (t - center) / width;
      return amp * std::exp(-0.5 * z * z);
    };
    v[static_cast<std::size_t>(b)] =
        0.02 + bump(0.30, 0.045, 0.10) + bump(0.62, 0.035, 0.08);
  }
  return Signature(std::move(v));
}

namespace detail {

// Normalized elliptical radius of a pixel from the plume center.
inline double plume_rho(const PlumeGeometry& g, int r, int c) {
  double dr = (r - g.center_row) / g.radius_rows;
  double dc = (c - g.center_col) / g.radius_cols;
  return std::sqrt(dr * dr + dc * dc);
}

// Membership is 1 inside the core ellipse and tapers to 0 with a raised
// cosine over edge_width pixels (converted to rho units by the mean radius).
inline double plume_membership(const PlumeGeometry& g, double rho) {
  if (rho <= 1.0) return 1.0;
  double rbar = 0.5 * (g.radius_rows + g.radius_cols);
  double dw = g.edge_width > 0.0 ? g.edge_width / rbar : 0.0;
  if (dw > 0.0 && rho < 1.0 + dw)
    return 0.5 * (1.0 + std::cos(std::numbers::pi * (rho - 1.0) / dw));
  return 0.0;
}

// In-place boxcar average along one axis of the cube array, with the same
// whole-sample reflection used by decomposition. n: axis length, stride:
// element step along the axis, count: number of independent lines, and
// line_index maps a line ordinal to the offset of its first element.
template <typename LineOffset>
inline void box_smooth_axis(std::vector<double>& data, long n, long stride, long count,
                            int half, LineOffset line_index) {
  if (half <= 0 || n < 2) return;
  long hw = std::min<long>(half, n - 1);
  std::vector<double> line(static_cast<std::size_t>(n));
  double inv = 1.0 / (2 * hw + 1);
  for (long l = 0; l < count; ++l) {
    double* base = data.data() + line_index(l);
    for (long i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = base[i * stride];
    for (long i = 0; i < n; ++i) {
      double acc = 0.0;
      for (long t = -hw; t <= hw; ++t)
        acc += line[reflect_index(i + t, n)];
      base[i * stride] = acc * inv;
    }
  }
}

}  // namespace detail

// Deterministic scene synthesis: smooth per-band background profile plus
// correlated Gaussian noise, with the target signature subtracted inside the
// plume (absorption). Labels depend on geometry only.
inline std::pair<Hypercube, GroundTruthMask> generate_scene(const SceneSpec& spec,
                                                            const Signature& sc) {
  const std::string context = "generate_scene";
  if (spec.height < 1 || spec.width < 1 || spec.bands < 1)
    fail(ErrorCode::unparseable_value, context + ": all dimensions must be >= 1");
  if (sc.bands() != spec.bands)
    fail(ErrorCode::dimension_mismatch,
         context + ": signature has " + std::to_string(sc.bands()) +
             " bands but spec declares " + std::to_string(spec.bands));
  if (!(spec.plume.radius_rows > 0.0) || !(spec.plume.radius_cols > 0.0))
    fail(ErrorCode::unparseable_value, context + ": plume radii must be positive");
  if (spec.plume.radius_rows >= std::min(spec.height, spec.width) / 2.0 ||
      spec.plume.radius_cols >= std::min(spec.height, spec.width) / 2.0)
    fail(ErrorCode::unparseable_value,
         context + ": plume radii must be < min(height, width)/2");
  if (spec.background.noise_sigma < 0.0)
    fail(ErrorCode::unparseable_value, context + ": noise_sigma must be >= 0");
  if (spec.plume.edge_width < 0.0 || spec.boundary_band_width < 0.0)
    fail(ErrorCode::unparseable_value, context + ": widths must be >= 0");
  if (spec.background.spatial_corr < 0.0 || spec.background.spectral_corr < 0.0)
    fail(ErrorCode::unparseable_value, context + ": correlation lengths must be >= 0");

  int h = spec.height, v = spec.width, d = spec.bands;
  std::size_t npix = static_cast<std::size_t>(h) * v;
  Hypercube cube(h, v, d);

  const BackgroundModel& bg = spec.background;
  std::vector<double> profile(static_cast<std::size_t>(d));
  double dm1 = d > 1 ? d - 1.0 : 1.0;
  for (int b = 0; b < d; ++b) {
    double value = bg.mean_base + bg.mean_slope * (b / dm1);
    if (bg.mean_bump_width > 0.0) {
      double z = (b - bg.mean_bump_center) / bg.mean_bump_width;
      value += bg.mean_bump_amp * std::exp(-0.5 * z * z);
    }
    profile[static_cast<std::size_t>(b)] = value;
  }

  if (bg.noise_sigma > 0.0) {
    std::uint64_t mixed = splitmix64(spec.seed);
    for (std::size_t i = 0; i < cube.data.size(); ++i)
      cube.data[i] = detail::counter_normal(mixed, i);
    int wr = static_cast<int>(std::lround(bg.spatial_corr));
    int wb = static_cast<int>(std::lround(bg.spectral_corr));
    // Boxcar along cols, rows, then bands; scale restores unit interior
    // variance so noise_sigma keeps its meaning as a per-voxel std.
    double scale = 1.0;
    if (wr > 0 && v > 1) {
      detail::box_smooth_axis(cube.data, v, 1, static_cast<long>(npix) / v * d,
                              wr, [&](long l) { return l * static_cast<long>(v); });
      scale *= std::sqrt(2.0 * std::min<long>(wr, v - 1) + 1.0);
    }
    if (wr > 0 && h > 1) {
      // Lines along rows: for each band and column.
      detail::box_smooth_axis(
          cube.data, h, v, static_cast<long>(d) * v, wr, [&](long l) {
            long band = l / v, col = l % v;
            return band * static_cast<long>(npix) + col;
          });
      scale *= std::sqrt(2.0 * std::min<long>(wr, h - 1) + 1.0);
    }
    if (wb > 0 && d > 1) {
      detail::box_smooth_axis(
          cube.data, d, static_cast<long>(npix), static_cast<long>(npix), wb,
          [&](long l) { return l; });
      scale *= std::sqrt(2.0 * std::min<long>(wb, d - 1) + 1.0);
    }
    for (double& x : cube.data) x *= bg.noise_sigma * scale;
  }

  GroundTruthMask mask(h, v);
  double rbar = 0.5 * (spec.plume.radius_rows + spec.plume.radius_cols);
  double dw = spec.plume.edge_width > 0.0 ? spec.plume.edge_width / rbar : 0.0;
  double rho_boundary = 1.0 + dw + spec.boundary_band_width / rbar;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < v; ++c) {
      double rho = detail::plume_rho(spec.plume, r, c);
      double m = detail::plume_membership(spec.plume, rho);
      std::size_t p = static_cast<std::size_t>(r) * v + c;
      if (m >= 0.5)
        mask.labels[p] = static_cast<std::uint8_t>(Label::plume);
      else if (rho <= rho_boundary)
        mask.labels[p] = static_cast<std::uint8_t>(Label::boundary);
      for (int b = 0; b < d; ++b) {
        double& voxel = cube.data[b * npix + p];
        voxel += profile[static_cast<std::size_t>(b)];
        if (m > 0.0) voxel -= spec.alpha * m * sc.values[static_cast<std::size_t>(b)];
      }
    }
  }
  return {std::move(cube), std::move(mask)};
}

// ---------------------------------------------------------------------------
// Scene spec files: flat key=value lines, '#' comments, every key required.

namespace detail {

inline const std::vector<std::string>& scene_spec_keys() {
  static const std::vector<std::string> keys = {
      "height",          "width",          "bands",
      "seed",            "alpha",          "plume_center_row",
      "plume_center_col", "plume_radius_rows", "plume_radius_cols",
      "plume_edge_width", "boundary_band_width", "mean_base",
      "mean_slope",      "mean_bump_amp",  "mean_bump_center",
      "mean_bump_width", "spatial_corr",   "spectral_corr",
      "noise_sigma",
  };
  return keys;
}

}  // namespace detail

inline SceneSpec parse_scene_spec(const std::string& text) {
  const std::string context = "parse_scene_spec";
  std::map<std::string, std::string> kv;
  std::size_t pos = 0;
  long line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    ++line_no;
    std::string line = detail::trimmed(std::string_view(text).substr(pos, eol - pos));
    pos = eol + 1;
    if (line.empty() || line.front() == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::unparseable_line,
           context + ": line " + std::to_string(line_no) + " is not key=value");
    std::string key = detail::trimmed(std::string_view(line).substr(0, eq));
    std::string value = detail::trimmed(std::string_view(line).substr(eq + 1));
    bool known = false;
    for (const auto& k : detail::scene_spec_keys())
      if (k == key) {
        known = true;
        break;
      }
    if (!known) fail(ErrorCode::unknown_key, context + ": unknown key '" + key + "'");
    kv[key] = value;
  }
  for (const auto& k : detail::scene_spec_keys())
    if (!kv.count(k)) fail(ErrorCode::missing_key, context + ": missing key '" + k + "'");

  auto as_double = [&](const std::string& key) {
    double v = 0.0;
    if (!detail::parse_double(kv[key], v) || !std::isfinite(v))
      fail(ErrorCode::unparseable_value,
           context + ": cannot parse value for '" + key + "'");
    return v;
  };
  auto as_int = [&](const std::string& key) {
    long long v = 0;
    if (!detail::parse_long(kv[key], v) || v < 1)
      fail(ErrorCode::unparseable_value,
           context + ": '" + key + "' must be a positive integer");
    return static_cast<int>(v);
  };

  SceneSpec s;
  s.height = as_int("height");
  s.width = as_int("width");
  s.bands = as_int("bands");
  {
    const std::string& text_seed = kv["seed"];
    std::uint64_t seed = 0;
    auto r = std::from_chars(text_seed.data(), text_seed.data() + text_seed.size(), seed);
    if (r.ec != std::errc{} || r.ptr != text_seed.data() + text_seed.size())
      fail(ErrorCode::unparseable_value, context + ": cannot parse value for 'seed'");
    s.seed = seed;
  }
  s.alpha = as_double("alpha");
  s.plume.center_row = as_double("plume_center_row");
  s.plume.center_col = as_double("plume_center_col");
  s.plume.radius_rows = as_double("plume_radius_rows");
  s.plume.radius_cols = as_double("plume_radius_cols");
  s.plume.edge_width = as_double("plume_edge_width");
  s.boundary_band_width = as_double("boundary_band_width");
  s.background.mean_base = as_double("mean_base");
  s.background.mean_slope = as_double("mean_slope");
  s.background.mean_bump_amp = as_double("mean_bump_amp");
  s.background.mean_bump_center = as_double("mean_bump_center");
  s.background.mean_bump_width = as_double("mean_bump_width");
  s.background.spatial_corr = as_double("spatial_corr");
  s.background.spectral_corr = as_double("spectral_corr");
  s.background.noise_sigma = as_double("noise_sigma");
  return s;
}

inline SceneSpec read_scene_spec(const std::string& path) {
  return parse_scene_spec(detail::read_all_bytes(path, "read_scene_spec"));
}

inline std::string format_scene_spec(const SceneSpec& s) {
  auto num = [](double v) {
    char buf[40];
    auto r = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
    return std::string(buf, r.ptr);
  };
  std::string text;
  text += "height = " + std::to_string(s.height) + "\n";
  text += "width = " + std::to_string(s.width) + "\n";
  text += "bands = " + std::to_string(s.bands) + "\n";
  text += "seed = " + std::to_string(s.seed) + "\n";
  text += "alpha = " + num(s.alpha) + "\n";
  text += "plume_center_row = " + num(s.plume.center_row) + "\n";
  text += "plume_center_col = " + num(s.plume.center_col) + "\n";
  text += "plume_radius_rows = " + num(s.plume.radius_rows) + "\n";
  text += "plume_radius_cols = " + num(s.plume.radius_cols) + "\n";
  text += "plume_edge_width = " + num(s.plume.edge_width) + "\n";
  text += "boundary_band_width = " + num(s.boundary_band_width) + "\n";
  text += "mean_base = " + num(s.background.mean_base) + "\n";
  text += "mean_slope = " + num(s.background.mean_slope) + "\n";
  text += "mean_bump_amp = " + num(s.background.mean_bump_amp) + "\n";
  text += "mean_bump_center = " + num(s.background.mean_bump_center) + "\n";
  text += "mean_bump_width = " + num(s.background.mean_bump_width) + "\n";
  text += "spatial_corr = " + num(s.background.spatial_corr) + "\n";
  text += "spectral_corr = " + num(s.background.spectral_corr) + "\n";
  text += "noise_sigma = " + num(s.background.noise_sigma) + "\n";
  return text;
}

inline void write_scene_spec(const SceneSpec& spec, const std::string& path) {
  detail::write_all_bytes(path, format_scene_spec(spec), "write_scene_spec");
}

}  // namespace plumekit
