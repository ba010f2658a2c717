#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <plumekit/plumekit.hpp>

namespace testutil {

// Deterministic counter-based generator so fixtures never depend on call
// order history beyond the draw counter.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : mixed_(plumekit::splitmix64(seed)) {}

  double uniform() {
    std::uint64_t x = plumekit::splitmix64(mixed_ + counter_++);
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  long long integer(long long lo, long long hi) {  // inclusive bounds
    return lo + static_cast<long long>(uniform() * static_cast<double>(hi - lo + 1));
  }
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t mixed_;
  std::uint64_t counter_ = 0;
};

class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> serial{0};
    auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    dir_ = std::filesystem::temp_directory_path() /
           ("plumekit_test_" + std::to_string(stamp) + "_" +
            std::to_string(serial.fetch_add(1)));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

 private:
  std::filesystem::path dir_;
};

inline void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

inline double rel_l2(const std::vector<double>& got, const std::vector<double>& want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    double dv = got[i] - want[i];
    num += dv * dv;
    den += want[i] * want[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

inline double linf(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace testutil

#define REQUIRE_PLUME_ERROR(expr, expected_code)            \
  do {                                                      \
    bool caught_plume_error = false;                        \
    try {                                                   \
      (void)(expr);                                         \
    } catch (const plumekit::PlumeError& e) {               \
      caught_plume_error = true;                            \
      CHECK(e.code() == (expected_code));                   \
    }                                                       \
    REQUIRE(caught_plume_error);                            \
  } while (0)
