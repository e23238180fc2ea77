#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "lensless/core.hpp"
#include "lensless/optics.hpp"

namespace testutil {

using lensless::Complex;
using lensless::ComplexField;
using lensless::RealImage;

inline RealImage random_image(std::uint64_t seed, std::size_t h, std::size_t w, std::size_t c,
                              double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  RealImage img(h, w, c);
  for (auto& v : img.samples()) v = d(rng);
  if (lo < 0.0) img.signed_intermediate = true;
  return img;
}

inline ComplexField random_field(std::uint64_t seed, std::size_t h, std::size_t w) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  ComplexField f(h, w);
  for (auto& v : f.samples()) v = {d(rng), d(rng)};
  return f;
}

// Textbook DFT with 1/sqrt(N) scaling.
inline ComplexField naive_dft(const ComplexField& f, int sign = -1) {
  const std::size_t h = f.height(), w = f.width();
  ComplexField out(h, w, f.pitch_y(), f.pitch_x());
  const double norm = 1.0 / std::sqrt(static_cast<double>(h * w));
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      Complex acc = 0.0;
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
          const double phase = sign * 2.0 * std::numbers::pi *
                               (static_cast<double>(u * r) / h + static_cast<double>(v * c) / w);
          acc += f.at(r, c) * Complex(std::cos(phase), std::sin(phase));
        }
      }
      out.at(u, v) = acc * norm;
    }
  }
  return out;
}

// y(r) = sum_a x(a) k(r - a + c), c = kernel center, evaluated by nested loops.
inline RealImage brute_convolve(const RealImage& x, const RealImage& k) {
  RealImage y(x.height(), x.width(), x.channels());
  const long cy = static_cast<long>(k.height() / 2), cx = static_cast<long>(k.width() / 2);
  for (std::size_t ch = 0; ch < x.channels(); ++ch) {
    for (long r = 0; r < static_cast<long>(x.height()); ++r) {
      for (long c = 0; c < static_cast<long>(x.width()); ++c) {
        double acc = 0.0;
        for (long ar = 0; ar < static_cast<long>(x.height()); ++ar) {
          for (long ac = 0; ac < static_cast<long>(x.width()); ++ac) {
            const long kr = r - ar + cy, kc = c - ac + cx;
            if (kr < 0 || kc < 0 || kr >= static_cast<long>(k.height()) || kc >= static_cast<long>(k.width())) continue;
            acc += x.at(ar, ac, ch) * k.at(kr, kc, ch);
          }
        }
        y.at(r, c, ch) = acc;
      }
    }
  }
  return y;
}

inline double rel_err(const RealImage& a, const RealImage& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a.samples()[i] - b.samples()[i]) * (a.samples()[i] - b.samples()[i]);
    den += b.samples()[i] * b.samples()[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

inline double rel_err(const ComplexField& a, const ComplexField& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a.samples()[i] - b.samples()[i]);
    den += std::norm(b.samples()[i]);
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace testutil

#include <atomic>
#include <filesystem>
#include <unistd.h>

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("lensless_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path data_file(const std::string& name) {
  return std::filesystem::path(LENSLESS_TEST_DATA) / name;
}

}  // namespace testutil
