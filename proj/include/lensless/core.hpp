#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lensless/error.hpp"

namespace lensless {

using Complex = std::complex<double>;

/// H x W x C grid of real samples, row-major, channel-last.
///
/// Scenes, measurements and PSFs are nonnegative. Buffers produced in the
/// middle of a reconstruction may go negative; those carry
/// `signed_intermediate = true` and skip the nonnegativity check.
class RealImage {
 public:
  RealImage() = default;
  RealImage(std::size_t height, std::size_t width, std::size_t channels,
            double fill = 0.0);
  RealImage(std::size_t height, std::size_t width, std::size_t channels,
            std::vector<double> samples);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t pixel_count() const { return height_ * width_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  double& at(std::size_t row, std::size_t col, std::size_t ch = 0) {
    return samples_[(row * width_ + col) * channels_ + ch];
  }
  double at(std::size_t row, std::size_t col, std::size_t ch = 0) const {
    return samples_[(row * width_ + col) * channels_ + ch];
  }

  std::span<double> samples() { return samples_; }
  std::span<const double> samples() const { return samples_; }

  bool signed_intermediate = false;

  /// Copy of one channel as a single-channel image.
  RealImage channel(std::size_t ch) const;
  void set_channel(std::size_t ch, const RealImage& plane);

  bool same_shape(const RealImage& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

  /// Throws InputError on non-finite samples, or on negative samples unless
  /// the image is flagged as a signed intermediate.
  void validate() const;

  double sum() const;
  double max() const;
  double energy() const;

  friend bool operator==(const RealImage& a, const RealImage& b) {
    return a.same_shape(b) && a.samples_ == b.samples_;
  }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> samples_;
};

/// H x W complex grid with a physical sample pitch (meters).
class ComplexField {
 public:
  ComplexField() = default;
  ComplexField(std::size_t height, std::size_t width, double pitch_y = 1.0,
               double pitch_x = 1.0);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return samples_.size(); }
  double pitch_y() const { return pitch_y_; }
  double pitch_x() const { return pitch_x_; }

  Complex& at(std::size_t row, std::size_t col) {
    return samples_[row * width_ + col];
  }
  const Complex& at(std::size_t row, std::size_t col) const {
    return samples_[row * width_ + col];
  }

  std::span<Complex> samples() { return samples_; }
  std::span<const Complex> samples() const { return samples_; }

  bool same_shape(const ComplexField& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  double energy() const;
  void validate() const;

  ComplexField& operator*=(const ComplexField& rhs);

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  double pitch_y_ = 1.0;
  double pitch_x_ = 1.0;
  std::vector<Complex> samples_;
};

/// Rectangular window inside a larger image (the sensor-crop operator).
struct CropSpec {
  std::size_t row_offset = 0;
  std::size_t col_offset = 0;
  std::size_t out_height = 0;
  std::size_t out_width = 0;

  /// Window of `out` size centered in a `src` extent.
  static CropSpec centered(std::size_t src_height, std::size_t src_width,
                           std::size_t out_height, std::size_t out_width);

  bool fits(std::size_t src_height, std::size_t src_width) const;

  friend bool operator==(const CropSpec&, const CropSpec&) = default;
};

// FFTs use the unitary convention: 1/sqrt(N) in each direction.
ComplexField fft2(const ComplexField& field);
ComplexField ifft2(const ComplexField& field);

/// Swap quadrants so the zero index moves to the center (and back).
ComplexField fftshift(const ComplexField& field);
ComplexField ifftshift(const ComplexField& field);
RealImage ifftshift(const RealImage& plane);

ComplexField to_complex(const RealImage& plane, double pitch_y = 1.0,
                        double pitch_x = 1.0);
/// Real part of a field as a single-channel, signed image.
RealImage real_part(const ComplexField& field);

/// Zero-pads into a larger canvas with the source centered.
RealImage pad_embed(const RealImage& img, std::size_t target_height,
                    std::size_t target_width);

RealImage crop(const RealImage& img, const CropSpec& spec);
/// Adjoint of crop: zero canvas of the source extent with the window filled.
RealImage crop_adjoint(const RealImage& img, const CropSpec& spec,
                       std::size_t src_height, std::size_t src_width);

/// Smallest n' >= n whose prime factors are all in {2, 3, 5, 7}.
std::size_t next_fast_len(std::size_t n);

double dot(std::span<const double> a, std::span<const double> b);

/// 64-bit FNV-1a hash of the sample bytes plus the shape.
std::uint64_t content_hash(const RealImage& img);

}  // namespace lensless
