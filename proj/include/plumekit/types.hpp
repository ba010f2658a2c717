#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace plumekit {

// Error codes cover every failure mode surfaced by the library. CLI maps
// input/format problems to exit 2 and numeric/runtime problems to exit 3.
enum class ErrorCode {
  malformed_header,
  truncated_data,
  non_finite_value,
  io_failure,
  empty_file,
  unparseable_line,
  illegal_label,
  too_few_extrema,
  no_extrema_anywhere,
  empty_selection,
  zero_vector,
  singular_covariance,
  zero_denominator,
  degenerate_pixel,
  no_positives,
  no_negatives,
  unknown_key,
  missing_key,
  unparseable_value,
  dimension_mismatch,
};

class PlumeError : public std::runtime_error {
 public:
  PlumeError(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw PlumeError(code, msg);
}

// True when the failure is a malformed input rather than a numeric/runtime
// problem. Drives the CLI exit-code contract (2 vs 3).
inline bool is_input_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::malformed_header:
    case ErrorCode::truncated_data:
    case ErrorCode::non_finite_value:
    case ErrorCode::empty_file:
    case ErrorCode::unparseable_line:
    case ErrorCode::illegal_label:
    case ErrorCode::unknown_key:
    case ErrorCode::missing_key:
    case ErrorCode::unparseable_value:
    case ErrorCode::dimension_mismatch:
      return true;
    default:
      return false;
  }
}

// Radiance cube of `bands` spectral planes over an h x v pixel grid.
// Storage is band-sequential: data[(band * height + row) * width + col].
struct Hypercube {
  int height = 0;  // rows (h)
  int width = 0;   // cols (v)
  int bands = 0;   // spectral channels (d)
  std::vector<double> data;

  Hypercube() = default;
  Hypercube(int h, int v, int d)
      : height(h), width(v), bands(d),
        data(static_cast<std::size_t>(h) * v * d, 0.0) {}

  double& at(int band, int row, int col) {
    return data[(static_cast<std::size_t>(band) * height + row) * width + col];
  }
  double at(int band, int row, int col) const {
    return data[(static_cast<std::size_t>(band) * height + row) * width + col];
  }

  std::size_t pixels() const {
    return static_cast<std::size_t>(height) * width;
  }
  std::size_t size() const { return pixels() * bands; }
};

// Per-band spectrum of one pixel or of a target chemical.
struct Signature {
  std::vector<double> values;

  Signature() = default;
  explicit Signature(std::vector<double> v) : values(std::move(v)) {}

  int bands() const { return static_cast<int>(values.size()); }
};

// h x v score plane, row-major. Also serves as the generic 2-D real grid
// fed to the 2-D decomposition.
struct DetectionMap {
  int height = 0;
  int width = 0;
  std::vector<double> scores;

  DetectionMap() = default;
  DetectionMap(int h, int v)
      : height(h), width(v), scores(static_cast<std::size_t>(h) * v, 0.0) {}

  double& at(int row, int col) {
    return scores[static_cast<std::size_t>(row) * width + col];
  }
  double at(int row, int col) const {
    return scores[static_cast<std::size_t>(row) * width + col];
  }

  std::size_t size() const { return static_cast<std::size_t>(height) * width; }
};

enum class Label : std::uint8_t {
  background = 0,
  plume = 1,
  boundary = 2,
};

// Three-class ground truth; boundary pixels are excluded from ROC counts.
struct GroundTruthMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> labels;

  GroundTruthMask() = default;
  GroundTruthMask(int h, int v)
      : height(h), width(v), labels(static_cast<std::size_t>(h) * v, 0) {}

  std::uint8_t& at(int row, int col) {
    return labels[static_cast<std::size_t>(row) * width + col];
  }
  std::uint8_t at(int row, int col) const {
    return labels[static_cast<std::size_t>(row) * width + col];
  }

  std::size_t size() const { return static_cast<std::size_t>(height) * width; }
};

inline void validate(const Hypercube& cube, const std::string& context) {
  if (cube.height < 1 || cube.width < 1 || cube.bands < 1)
    fail(ErrorCode::malformed_header, context + ": all dimensions must be >= 1");
  if (cube.data.size() != cube.size())
    fail(ErrorCode::truncated_data, context + ": payload size does not match dimensions");
  for (double x : cube.data)
    if (!std::isfinite(x))
      fail(ErrorCode::non_finite_value, context + ": non-finite value in cube");
}

inline void validate(const DetectionMap& map, const std::string& context) {
  if (map.height < 1 || map.width < 1)
    fail(ErrorCode::malformed_header, context + ": dimensions must be >= 1");
  if (map.scores.size() != map.size())
    fail(ErrorCode::truncated_data, context + ": payload size does not match dimensions");
  for (double x : map.scores)
    if (!std::isfinite(x))
      fail(ErrorCode::non_finite_value, context + ": non-finite score");
}

inline void validate(const GroundTruthMask& mask, const std::string& context) {
  if (mask.height < 1 || mask.width < 1)
    fail(ErrorCode::malformed_header, context + ": dimensions must be >= 1");
  if (mask.labels.size() != mask.size())
    fail(ErrorCode::truncated_data, context + ": payload size does not match dimensions");
  for (std::uint8_t l : mask.labels)
    if (l > 2)
      fail(ErrorCode::illegal_label,
           context + ": illegal label " + std::to_string(int(l)));
}

// Pairing checks: dimension mismatches are rejected here, never broadcast.
inline void require_same_shape(const DetectionMap& map, const GroundTruthMask& mask,
                               const std::string& context) {
  if (map.height != mask.height || map.width != mask.width)
    fail(ErrorCode::dimension_mismatch,
         context + ": map is " + std::to_string(map.height) + "x" +
             std::to_string(map.width) + " but mask is " +
             std::to_string(mask.height) + "x" + std::to_string(mask.width));
}

inline void require_same_shape(const Hypercube& cube, const GroundTruthMask& mask,
                               const std::string& context) {
  if (cube.height != mask.height || cube.width != mask.width)
    fail(ErrorCode::dimension_mismatch,
         context + ": cube is " + std::to_string(cube.height) + "x" +
             std::to_string(cube.width) + " but mask is " +
             std::to_string(mask.height) + "x" + std::to_string(mask.width));
}

inline void require_same_bands(const Hypercube& cube, const Signature& sig,
                               const std::string& context) {
  if (cube.bands != sig.bands())
    fail(ErrorCode::dimension_mismatch,
         context + ": cube has " + std::to_string(cube.bands) +
             " bands but signature has " + std::to_string(sig.bands()));
}

}  // namespace plumekit
