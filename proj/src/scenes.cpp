#include "lensless/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace lensless::bench {

namespace {

// Uniform and normal draws built directly on mt19937_64 output so the
// scenes are identical across standard library implementations.
struct Rng {
  std::mt19937_64 engine;
  explicit Rng(std::uint64_t seed) : engine(seed) {}
  double uniform() { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
};

void rescale_unit(RealImage& img) {
  auto s = img.samples();
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  const double a = *lo, b = *hi;
  for (auto& v : s) v = b > a ? (v - a) / (b - a) : 0.5;
}

RealImage gradient(Rng& rng, std::size_t h, std::size_t w, std::size_t nc) {
  RealImage img(h, w, nc);
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double dy = std::sin(angle), dx = std::cos(angle);
  std::vector<double> lo(nc), hi(nc);
  for (std::size_t ch = 0; ch < nc; ++ch) {
    lo[ch] = rng.uniform(0.0, 0.4);
    hi[ch] = rng.uniform(0.6, 1.0);
  }
  const double span = std::abs(dy) * static_cast<double>(h) + std::abs(dx) * static_cast<double>(w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double y = static_cast<double>(r) - 0.5 * static_cast<double>(h);
      const double x = static_cast<double>(c) - 0.5 * static_cast<double>(w);
      const double t = std::clamp(0.5 + (dy * y + dx * x) / span, 0.0, 1.0);
      for (std::size_t ch = 0; ch < nc; ++ch) img.at(r, c, ch) = lo[ch] + t * (hi[ch] - lo[ch]);
    }
  }
  return img;
}

RealImage checkerboard(Rng& rng, std::size_t h, std::size_t w, std::size_t nc) {
  RealImage img(h, w, nc);
  const auto cell = static_cast<std::size_t>(rng.uniform(4.0, 16.0));
  std::vector<double> a(nc), b(nc);
  for (std::size_t ch = 0; ch < nc; ++ch) {
    a[ch] = rng.uniform(0.0, 0.3);
    b[ch] = rng.uniform(0.7, 1.0);
  }
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const bool odd = ((r / cell) + (c / cell)) % 2 == 1;
      for (std::size_t ch = 0; ch < nc; ++ch) img.at(r, c, ch) = odd ? b[ch] : a[ch];
    }
  }
  return img;
}

// Natural-image-like texture: amplitude ~ 1/|f|, random phase, shared
// across channels up to a per-channel tint.
RealImage pink_noise(Rng& rng, std::size_t h, std::size_t w, std::size_t nc) {
  ComplexField spec(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double fy = static_cast<double>(r < (h + 1) / 2 ? r : h - r) / static_cast<double>(h);
      const double fx = static_cast<double>(c < (w + 1) / 2 ? c : w - c) / static_cast<double>(w);
      const double f = std::hypot(fy, fx);
      const double amp = f > 0.0 ? 1.0 / f : 0.0;
      spec.at(r, c) = Complex(rng.normal(), rng.normal()) * amp;
    }
  }
  RealImage base = real_part(ifft2(spec));
  rescale_unit(base);
  RealImage img(h, w, nc);
  for (std::size_t ch = 0; ch < nc; ++ch) {
    const double gain = rng.uniform(0.6, 1.0);
    const double offset = rng.uniform(0.0, 1.0 - gain);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) img.at(r, c, ch) = offset + gain * base.at(r, c);
    }
  }
  return img;
}

RealImage shapes(Rng& rng, std::size_t h, std::size_t w, std::size_t nc) {
  RealImage img(h, w, nc);
  for (std::size_t ch = 0; ch < nc; ++ch) {
    const double bg = rng.uniform(0.0, 0.3);
    for (std::size_t i = 0; i < h * w; ++i) img.samples()[i * nc + ch] = bg;
  }
  const int count = 3 + static_cast<int>(rng.uniform(0.0, 4.0));
  const double hd = static_cast<double>(h), wd = static_cast<double>(w);
  for (int s = 0; s < count; ++s) {
    const bool disk = rng.uniform() < 0.5;
    const double cy = rng.uniform(0.1, 0.9) * hd, cx = rng.uniform(0.1, 0.9) * wd;
    const double ry = rng.uniform(0.08, 0.25) * hd, rx = rng.uniform(0.08, 0.25) * wd;
    std::vector<double> color(nc);
    for (auto& v : color) v = rng.uniform(0.3, 1.0);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const double y = (static_cast<double>(r) - cy) / ry;
        const double x = (static_cast<double>(c) - cx) / rx;
        const bool inside = disk ? x * x + y * y <= 1.0 : std::abs(x) <= 1.0 && std::abs(y) <= 1.0;
        if (!inside) continue;
        for (std::size_t ch = 0; ch < nc; ++ch) img.at(r, c, ch) = color[ch];
      }
    }
  }
  return img;
}

}  // namespace

std::string to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::gradient: return "gradient";
    case SceneKind::checkerboard: return "checkerboard";
    case SceneKind::pink_noise: return "pink_noise";
    case SceneKind::shapes: return "shapes";
  }
  return "unknown";
}

RealImage procedural_scene(SceneKind kind, std::uint64_t seed, std::size_t height,
                           std::size_t width, std::size_t channels) {
  if (height == 0 || width == 0 || channels == 0) throw InputError("procedural_scene: empty shape");
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(kind)));
  switch (kind) {
    case SceneKind::gradient: return gradient(rng, height, width, channels);
    case SceneKind::checkerboard: return checkerboard(rng, height, width, channels);
    case SceneKind::pink_noise: return pink_noise(rng, height, width, channels);
    case SceneKind::shapes: return shapes(rng, height, width, channels);
  }
  throw InputError("procedural_scene: unknown kind");
}

RealImage procedural_scene(std::uint64_t seed, std::size_t height, std::size_t width,
                           std::size_t channels) {
  return procedural_scene(static_cast<SceneKind>(seed % 4), seed, height, width, channels);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ull * (cell + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace lensless::bench
