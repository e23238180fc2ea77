#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lensless/core.hpp"

namespace lensless::optics {

enum class Channel : std::size_t { red = 0, green = 1, blue = 2 };

inline constexpr std::size_t kColorChannels = 3;

/// Narrowband RGB wavelengths in meters.
inline constexpr std::array<double, 3> kDefaultWavelengths = {640e-9, 550e-9, 460e-9};

/// Point source -> mask -> sensor layout and the simulation grid.
///
/// `sensor_crop` is expressed in simulation samples. Each sensor pixel
/// integrates `oversample` x `oversample` simulation samples, so
/// sim_pitch = sensor pitch / oversample.
struct OpticalGeometry {
  double d1 = 0.30;   // scene to mask
  double d2 = 2e-3;   // mask to sensor
  std::size_t sim_height = 0;
  std::size_t sim_width = 0;
  double sim_pitch = 0.0;
  CropSpec sensor_crop;
  std::size_t oversample = 1;

  void validate() const;
  double extent_y() const { return static_cast<double>(sim_height) * sim_pitch; }
  double extent_x() const { return static_cast<double>(sim_width) * sim_pitch; }
  std::size_t sensor_height() const { return sensor_crop.out_height / oversample; }
  std::size_t sensor_width() const { return sensor_crop.out_width / oversample; }

  /// Simulation grid `padding` times the sensor extent, sampled at
  /// sensor_pitch / oversample, sensor window centered.
  static OpticalGeometry for_sensor(std::size_t sensor_rows, std::size_t sensor_cols,
                                    double sensor_pitch, std::size_t padding = 4,
                                    std::size_t oversample = 2);
};

/// Desk-scale sensor pitch used by the CLI and the benchmarks: 64 pixels
/// span roughly the 9.6 mm the DigiCam mask shadow needs.
inline constexpr double kDefaultSensorPitch = 150e-6;

/// Amplitude weights of an RGB programmable mask plus its physical layout.
///
/// Weights are indexed (channel, row, col). Each pixel holds three
/// column-interleaved sub-pixels (R, G, B); sub-pixel `c` of pixel (i, j) is
/// centered at x = X_j + (c - 1) * pixel_pitch_x / 3, y = Y_i.
struct MaskPattern {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> weights;
  double aperture_width = 0.06e-3;
  double aperture_height = 0.18e-3;
  double pixel_pitch_x = 0.219e-3;
  double pixel_pitch_y = 0.219e-3;
  bool deadspace_enabled = true;

  struct Rect {
    double y0, y1, x0, x1;
  };

  static MaskPattern zeros(std::size_t rows, std::size_t cols);

  double& weight(Channel ch, std::size_t row, std::size_t col) {
    return weights[(static_cast<std::size_t>(ch) * rows + row) * cols + col];
  }
  double weight(Channel ch, std::size_t row, std::size_t col) const {
    return weights[(static_cast<std::size_t>(ch) * rows + row) * cols + col];
  }

  double center_y(std::size_t row) const;
  double center_x(Channel ch, std::size_t col) const;

  /// Transmitting region of one sub-pixel. Without deadspace the aperture
  /// grows to the whole pixel cell, so an all-ones mask is one rectangle.
  Rect aperture(Channel ch, std::size_t row, std::size_t col) const;

  double extent_y() const { return static_cast<double>(rows) * pixel_pitch_y; }
  double extent_x() const { return static_cast<double>(cols) * pixel_pitch_x; }

  void validate() const;
};

enum class PsfVariant { wave_deadspace, wave_no_deadspace, no_wave };
enum class Normalization { unit_sum, raw };

std::string to_string(PsfVariant v);
std::string to_string(Normalization n);
PsfVariant parse_variant(const std::string& s);
Normalization parse_normalization(const std::string& s);

/// Intensity PSF, one channel per wavelength.
struct Psf {
  RealImage image;
  std::vector<double> wavelengths;
  OpticalGeometry geometry;
  Normalization normalization = Normalization::raw;
  PsfVariant variant = PsfVariant::no_wave;

  std::size_t channels() const { return image.channels(); }
  void validate() const;

  /// Wraps an image that did not come out of the simulator (measured, delta).
  static Psf from_image(RealImage image, Normalization norm = Normalization::raw);
};

/// Centered unit impulse, `channels` channels.
Psf delta_psf(std::size_t height, std::size_t width, std::size_t channels);

/// Divides each channel by its sum; all-zero channels stay zero.
void normalize_unit_sum(RealImage& img);

double fresnel_number(double aperture, double distance, double wavelength);

ComplexField rasterize_mask(const MaskPattern& mask, Channel channel,
                            const OpticalGeometry& grid);

ComplexField spherical_illumination(const OpticalGeometry& geometry, double wavelength);

/// Band-limited angular spectrum transfer function, in FFT (unshifted) order.
ComplexField blas_kernel(const OpticalGeometry& grid, double z, double wavelength);
ComplexField blas_kernel(std::size_t height, std::size_t width, double pitch_y, double pitch_x,
                         double z, double wavelength);

/// Free-space propagation of `field` over distance z.
ComplexField propagate(const ComplexField& field, double z, double wavelength);

Psf simulate_psf(const MaskPattern& mask, const OpticalGeometry& geometry,
                 const std::array<double, 3>& wavelengths, PsfVariant variant,
                 Normalization normalization = Normalization::unit_sum);

/// i.i.d. uniform [0, 1) weights. DigiCam uses 18 x 26 pixels x 3 channels.
MaskPattern random_mask(std::uint64_t seed, std::size_t rows = 18, std::size_t cols = 26);

}  // namespace lensless::optics
