#include "lensless/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>

namespace lensless {

namespace {

std::size_t checked_count(std::size_t a, std::size_t b, std::size_t c = 1) {
  constexpr auto kMax = std::numeric_limits<std::size_t>::max();
  if (a != 0 && b > kMax / a) throw InputError("sample count overflows");
  const std::size_t ab = a * b;
  if (ab != 0 && c > kMax / ab) throw InputError("sample count overflows");
  return ab * c;
}

}  // namespace

RealImage::RealImage(std::size_t height, std::size_t width, std::size_t channels,
                     double fill)
    : height_(height),
      width_(width),
      channels_(channels),
      samples_(checked_count(height, width, channels), fill) {}

RealImage::RealImage(std::size_t height, std::size_t width, std::size_t channels,
                     std::vector<double> samples)
    : height_(height), width_(width), channels_(channels), samples_(std::move(samples)) {
  if (samples_.size() != checked_count(height, width, channels)) {
    throw InputError("RealImage: sample count " + std::to_string(samples_.size()) +
                     " does not match " + std::to_string(height) + "x" +
                     std::to_string(width) + "x" + std::to_string(channels));
  }
}

RealImage RealImage::channel(std::size_t ch) const {
  if (ch >= channels_) throw InputError("RealImage: channel index out of range");
  RealImage out(height_, width_, 1);
  out.signed_intermediate = signed_intermediate;
  for (std::size_t i = 0; i < pixel_count(); ++i) out.samples_[i] = samples_[i * channels_ + ch];
  return out;
}

void RealImage::set_channel(std::size_t ch, const RealImage& plane) {
  if (ch >= channels_ || plane.height_ != height_ || plane.width_ != width_ ||
      plane.channels_ != 1) {
    throw InputError("RealImage: set_channel shape mismatch");
  }
  for (std::size_t i = 0; i < pixel_count(); ++i) samples_[i * channels_ + ch] = plane.samples_[i];
}

void RealImage::validate() const {
  for (double v : samples_) {
    if (!std::isfinite(v)) throw InputError("RealImage: non-finite sample");
    if (!signed_intermediate && v < 0.0) throw InputError("RealImage: negative sample");
  }
}

double RealImage::sum() const { return std::accumulate(samples_.begin(), samples_.end(), 0.0); }

double RealImage::max() const {
  if (samples_.empty()) return 0.0;
  return *std::max_element(samples_.begin(), samples_.end());
}

double RealImage::energy() const { return dot(samples_, samples_); }

ComplexField::ComplexField(std::size_t height, std::size_t width, double pitch_y,
                           double pitch_x)
    : height_(height),
      width_(width),
      pitch_y_(pitch_y),
      pitch_x_(pitch_x),
      samples_(checked_count(height, width)) {
  if (!(pitch_y > 0.0) || !(pitch_x > 0.0)) throw InputError("ComplexField: pitch must be > 0");
}

double ComplexField::energy() const {
  double e = 0.0;
  for (const auto& v : samples_) e += std::norm(v);
  return e;
}

void ComplexField::validate() const {
  for (const auto& v : samples_) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw NumericalError("ComplexField: non-finite sample");
    }
  }
}

ComplexField& ComplexField::operator*=(const ComplexField& rhs) {
  if (!same_shape(rhs)) throw InputError("ComplexField: shape mismatch in product");
  for (std::size_t i = 0; i < samples_.size(); ++i) samples_[i] *= rhs.samples_[i];
  return *this;
}

CropSpec CropSpec::centered(std::size_t src_height, std::size_t src_width,
                            std::size_t out_height, std::size_t out_width) {
  if (out_height > src_height || out_width > src_width) {
    throw InputError("CropSpec: window larger than source");
  }
  return {(src_height - out_height) / 2, (src_width - out_width) / 2, out_height, out_width};
}

bool CropSpec::fits(std::size_t src_height, std::size_t src_width) const {
  return out_height >= 1 && out_width >= 1 && row_offset <= src_height &&
         col_offset <= src_width && out_height <= src_height - row_offset &&
         out_width <= src_width - col_offset;
}

namespace {

template <class Grid, class Make>
Grid shift_quadrants(const Grid& in, Make make, bool inverse) {
  const std::size_t h = in.height();
  const std::size_t w = in.width();
  Grid out = make();
  const std::size_t sh = inverse ? h - h / 2 : h / 2;
  const std::size_t sw = inverse ? w - w / 2 : w / 2;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      out.at((r + sh) % h, (c + sw) % w) = in.at(r, c);
    }
  }
  return out;
}

}  // namespace

ComplexField fftshift(const ComplexField& field) {
  return shift_quadrants(
      field, [&] { return ComplexField(field.height(), field.width(), field.pitch_y(), field.pitch_x()); },
      false);
}

ComplexField ifftshift(const ComplexField& field) {
  return shift_quadrants(
      field, [&] { return ComplexField(field.height(), field.width(), field.pitch_y(), field.pitch_x()); },
      true);
}

RealImage ifftshift(const RealImage& plane) {
  if (plane.channels() != 1) throw InputError("ifftshift: expects a single channel");
  RealImage out = shift_quadrants(
      plane, [&] { return RealImage(plane.height(), plane.width(), 1); }, true);
  out.signed_intermediate = plane.signed_intermediate;
  return out;
}

ComplexField to_complex(const RealImage& plane, double pitch_y, double pitch_x) {
  if (plane.channels() != 1) throw InputError("to_complex: expects a single channel");
  ComplexField out(plane.height(), plane.width(), pitch_y, pitch_x);
  auto dst = out.samples();
  auto src = plane.samples();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
  return out;
}

RealImage real_part(const ComplexField& field) {
  RealImage out(field.height(), field.width(), 1);
  out.signed_intermediate = true;
  auto src = field.samples();
  auto dst = out.samples();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i].real();
  return out;
}

RealImage pad_embed(const RealImage& img, std::size_t target_height, std::size_t target_width) {
  if (target_height < img.height() || target_width < img.width()) {
    throw InputError("pad_embed: target smaller than source");
  }
  const auto spec = CropSpec::centered(target_height, target_width, img.height(), img.width());
  return crop_adjoint(img, spec, target_height, target_width);
}

RealImage crop(const RealImage& img, const CropSpec& spec) {
  if (!spec.fits(img.height(), img.width())) throw InputError("crop: window out of bounds");
  RealImage out(spec.out_height, spec.out_width, img.channels());
  out.signed_intermediate = img.signed_intermediate;
  const std::size_t row_len = spec.out_width * img.channels();
  for (std::size_t r = 0; r < spec.out_height; ++r) {
    const double* src =
        img.samples().data() + ((spec.row_offset + r) * img.width() + spec.col_offset) * img.channels();
    std::copy(src, src + row_len, &out.at(r, 0));
  }
  return out;
}

RealImage crop_adjoint(const RealImage& img, const CropSpec& spec, std::size_t src_height,
                       std::size_t src_width) {
  if (!spec.fits(src_height, src_width) || img.height() != spec.out_height ||
      img.width() != spec.out_width) {
    throw InputError("crop_adjoint: window does not match");
  }
  RealImage out(src_height, src_width, img.channels());
  out.signed_intermediate = img.signed_intermediate;
  const std::size_t row_len = spec.out_width * img.channels();
  for (std::size_t r = 0; r < spec.out_height; ++r) {
    const double* src = img.samples().data() + r * row_len;
    std::copy(src, src + row_len, &out.at(spec.row_offset + r, spec.col_offset));
  }
  return out;
}

std::size_t next_fast_len(std::size_t n) {
  if (n <= 1) return 1;
  for (std::size_t m = n;; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2, 3, 5, 7}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("dot: length mismatch");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

std::uint64_t content_hash(const RealImage& img) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  const std::uint64_t dims[3] = {img.height(), img.width(), img.channels()};
  mix(dims, sizeof dims);
  mix(img.samples().data(), img.size() * sizeof(double));
  return h;
}

}  // namespace lensless
