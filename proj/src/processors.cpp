#include <algorithm>
#include <cmath>

#include "lensless/recover.hpp"

namespace lensless::recover {

void ProcessorSpec::validate() const {
  switch (kind) {
    case ProcessorKind::identity: break;
    case ProcessorKind::gaussian_denoise:
      if (!(sigma > 0.0)) throw InputError("gaussian_denoise: sigma must be > 0");
      break;
    case ProcessorKind::median_denoise:
      if (radius == 0) throw InputError("median_denoise: radius must be >= 1");
      break;
    case ProcessorKind::tv_denoise:
      if (!(weight >= 0.0) || iterations == 0) {
        throw InputError("tv_denoise: weight >= 0 and iterations >= 1 required");
      }
      break;
  }
}

namespace {

// Reflect about the edge sample: -1 -> 0, n -> n - 1.
std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  const auto len = static_cast<std::ptrdiff_t>(n);
  if (len == 1) return 0;
  const std::ptrdiff_t period = 2 * len;
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < len ? i : period - 1 - i);
}

}  // namespace

RealImage gaussian_denoise(const RealImage& img, double sigma) {
  if (!(sigma > 0.0)) throw InputError("gaussian_denoise: sigma must be > 0");
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double total = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    taps[i + radius] = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    total += taps[i + radius];
  }
  for (auto& t : taps) t /= total;

  const std::size_t h = img.height(), w = img.width(), nc = img.channels();
  RealImage tmp(h, w, nc), out(h, w, nc);
  tmp.signed_intermediate = out.signed_intermediate = img.signed_intermediate;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t ch = 0; ch < nc; ++ch) {
        double acc = 0.0;
        for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
          acc += taps[i + radius] * img.at(r, reflect(static_cast<std::ptrdiff_t>(c) + i, w), ch);
        }
        tmp.at(r, c, ch) = acc;
      }
    }
  }
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t ch = 0; ch < nc; ++ch) {
        double acc = 0.0;
        for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
          acc += taps[i + radius] * tmp.at(reflect(static_cast<std::ptrdiff_t>(r) + i, h), c, ch);
        }
        out.at(r, c, ch) = acc;
      }
    }
  }
  return out;
}

RealImage median_denoise(const RealImage& img, std::size_t radius) {
  if (radius == 0) throw InputError("median_denoise: radius must be >= 1");
  const std::size_t h = img.height(), w = img.width(), nc = img.channels();
  const auto rad = static_cast<std::ptrdiff_t>(radius);
  RealImage out(h, w, nc);
  out.signed_intermediate = img.signed_intermediate;
  std::vector<double> window;
  window.reserve((2 * radius + 1) * (2 * radius + 1));
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t ch = 0; ch < nc; ++ch) {
        window.clear();
        for (std::ptrdiff_t dr = -rad; dr <= rad; ++dr) {
          for (std::ptrdiff_t dc = -rad; dc <= rad; ++dc) {
            window.push_back(img.at(reflect(static_cast<std::ptrdiff_t>(r) + dr, h),
                                    reflect(static_cast<std::ptrdiff_t>(c) + dc, w), ch));
          }
        }
        auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
        std::nth_element(window.begin(), mid, window.end());
        out.at(r, c, ch) = *mid;
      }
    }
  }
  return out;
}

RealImage tv_denoise(const RealImage& img, double weight, std::size_t iterations) {
  RealImage out = prox_tv(img, weight, iterations);
  out.signed_intermediate = img.signed_intermediate;
  if (!img.signed_intermediate) {
    for (auto& v : out.samples()) v = std::max(v, 0.0);
  }
  return out;
}

RealImage apply_processor(const RealImage& img, const ProcessorSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case ProcessorKind::identity: return img;
    case ProcessorKind::gaussian_denoise: return gaussian_denoise(img, spec.sigma);
    case ProcessorKind::median_denoise: return median_denoise(img, spec.radius);
    case ProcessorKind::tv_denoise: return tv_denoise(img, spec.weight, spec.iterations);
  }
  throw InputError("apply_processor: unknown processor");
}

}  // namespace lensless::recover
