#include "lensless/optics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace lensless::optics {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Position of sample `index` on an axis of `n` samples; index n/2 sits at 0.
double axis_position(std::size_t index, std::size_t n, double pitch) {
  return (static_cast<double>(index) - static_cast<double>(n / 2)) * pitch;
}

// Signed FFT frequency of bin `k` on an axis of `n` samples.
double fft_frequency(std::size_t k, std::size_t n, double pitch) {
  const auto ki = static_cast<double>(k);
  const auto ni = static_cast<double>(n);
  const double f = k < (n + 1) / 2 ? ki : ki - ni;
  return f / (ni * pitch);
}

}  // namespace

void OpticalGeometry::validate() const {
  if (!(d1 > 0.0) || !(d2 > 0.0) || !(sim_pitch > 0.0)) {
    throw InputError("OpticalGeometry: d1, d2 and sim_pitch must be > 0");
  }
  if (sim_height == 0 || sim_width == 0) throw InputError("OpticalGeometry: empty grid");
  if (oversample == 0) throw InputError("OpticalGeometry: oversample must be >= 1");
  if (!sensor_crop.fits(sim_height, sim_width)) {
    throw InputError("OpticalGeometry: sensor crop outside the simulation grid");
  }
  if (sensor_crop.out_height % oversample != 0 || sensor_crop.out_width % oversample != 0) {
    throw InputError("OpticalGeometry: sensor crop not a multiple of oversample");
  }
}

OpticalGeometry OpticalGeometry::for_sensor(std::size_t sensor_rows, std::size_t sensor_cols,
                                            double sensor_pitch, std::size_t padding,
                                            std::size_t oversample) {
  if (padding == 0 || oversample == 0) throw InputError("for_sensor: padding/oversample >= 1");
  OpticalGeometry g;
  g.oversample = oversample;
  g.sim_pitch = sensor_pitch / static_cast<double>(oversample);
  g.sim_height = sensor_rows * oversample * padding;
  g.sim_width = sensor_cols * oversample * padding;
  g.sensor_crop = CropSpec::centered(g.sim_height, g.sim_width, sensor_rows * oversample,
                                     sensor_cols * oversample);
  g.validate();
  return g;
}

MaskPattern MaskPattern::zeros(std::size_t rows, std::size_t cols) {
  MaskPattern m;
  m.rows = rows;
  m.cols = cols;
  m.weights.assign(kColorChannels * rows * cols, 0.0);
  return m;
}

double MaskPattern::center_y(std::size_t row) const {
  return (static_cast<double>(row) - 0.5 * static_cast<double>(rows - 1)) * pixel_pitch_y;
}

double MaskPattern::center_x(Channel ch, std::size_t col) const {
  const double pixel = (static_cast<double>(col) - 0.5 * static_cast<double>(cols - 1)) * pixel_pitch_x;
  return pixel + (static_cast<double>(ch) - 1.0) * pixel_pitch_x / 3.0;
}

MaskPattern::Rect MaskPattern::aperture(Channel ch, std::size_t row, std::size_t col) const {
  const double cy = center_y(row);
  if (!deadspace_enabled) {
    const double cx = center_x(Channel::green, col);
    return {cy - 0.5 * pixel_pitch_y, cy + 0.5 * pixel_pitch_y, cx - 0.5 * pixel_pitch_x,
            cx + 0.5 * pixel_pitch_x};
  }
  const double cx = center_x(ch, col);
  return {cy - 0.5 * aperture_height, cy + 0.5 * aperture_height, cx - 0.5 * aperture_width,
          cx + 0.5 * aperture_width};
}

void MaskPattern::validate() const {
  if (rows == 0 || cols == 0) throw InputError("MaskPattern: empty mask");
  if (weights.size() != kColorChannels * rows * cols) {
    throw InputError("MaskPattern: weight count does not match 3 x rows x cols");
  }
  for (double w : weights) {
    if (!(w >= 0.0 && w <= 1.0)) throw InputError("MaskPattern: weight outside [0, 1]");
  }
  if (!(aperture_width > 0.0) || !(aperture_height > 0.0) || !(pixel_pitch_x > 0.0) ||
      !(pixel_pitch_y > 0.0)) {
    throw InputError("MaskPattern: dimensions must be > 0");
  }
  // Sub-pixels of one channel are a full pixel pitch apart; across channels a
  // third of it. Either way an aperture wider than its slot overlaps a neighbour.
  if (aperture_width > pixel_pitch_x / 3.0 || aperture_height > pixel_pitch_y) {
    throw InputError("MaskPattern: sub-pixel apertures overlap");
  }
}

std::string to_string(PsfVariant v) {
  switch (v) {
    case PsfVariant::wave_deadspace: return "wave_deadspace";
    case PsfVariant::wave_no_deadspace: return "wave_no_deadspace";
    case PsfVariant::no_wave: return "no_wave";
  }
  return "unknown";
}

std::string to_string(Normalization n) {
  return n == Normalization::unit_sum ? "unit_sum" : "raw";
}

PsfVariant parse_variant(const std::string& s) {
  if (s == "wave_deadspace") return PsfVariant::wave_deadspace;
  if (s == "wave_no_deadspace") return PsfVariant::wave_no_deadspace;
  if (s == "no_wave") return PsfVariant::no_wave;
  throw InputError("unknown PSF variant '" + s + "'");
}

Normalization parse_normalization(const std::string& s) {
  if (s == "unit_sum") return Normalization::unit_sum;
  if (s == "raw") return Normalization::raw;
  throw InputError("unknown PSF normalization '" + s + "'");
}

void Psf::validate() const {
  image.validate();
  if (image.signed_intermediate) throw InputError("Psf: intensity cannot be signed");
  if (!wavelengths.empty() && wavelengths.size() != image.channels()) {
    throw InputError("Psf: one wavelength per channel expected");
  }
  if (normalization == Normalization::unit_sum) {
    for (std::size_t c = 0; c < image.channels(); ++c) {
      const double s = image.channel(c).sum();
      if (s != 0.0 && std::abs(s - 1.0) > 1e-9) throw InputError("Psf: channel does not sum to 1");
    }
  }
}

Psf Psf::from_image(RealImage image, Normalization norm) {
  Psf psf;
  psf.image = std::move(image);
  psf.normalization = norm;
  if (norm == Normalization::unit_sum) normalize_unit_sum(psf.image);
  psf.validate();
  return psf;
}

Psf delta_psf(std::size_t height, std::size_t width, std::size_t channels) {
  RealImage img(height, width, channels);
  for (std::size_t c = 0; c < channels; ++c) img.at(height / 2, width / 2, c) = 1.0;
  return Psf::from_image(std::move(img), Normalization::unit_sum);
}

void normalize_unit_sum(RealImage& img) {
  const std::size_t nc = img.channels();
  std::vector<double> sums(nc, 0.0);
  auto s = img.samples();
  for (std::size_t i = 0; i < s.size(); ++i) sums[i % nc] += s[i];
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (sums[i % nc] != 0.0) s[i] /= sums[i % nc];
  }
}

double fresnel_number(double aperture, double distance, double wavelength) {
  if (!(aperture > 0.0) || !(distance > 0.0) || !(wavelength > 0.0)) {
    throw InputError("fresnel_number: arguments must be > 0");
  }
  return aperture * aperture / (distance * wavelength);
}

ComplexField rasterize_mask(const MaskPattern& mask, Channel channel,
                            const OpticalGeometry& grid) {
  mask.validate();
  grid.validate();
  if (mask.extent_y() > grid.extent_y() || mask.extent_x() > grid.extent_x()) {
    throw InputError("rasterize_mask: mask larger than the simulation grid");
  }
  ComplexField field(grid.sim_height, grid.sim_width, grid.sim_pitch, grid.sim_pitch);
  const double p = grid.sim_pitch;
  const double half_h = static_cast<double>(grid.sim_height / 2);
  const double half_w = static_cast<double>(grid.sim_width / 2);

  // Each sample owns the cell [pos - p/2, pos + p/2); coverage is the
  // overlap length of that cell with the aperture along each axis.
  auto overlap = [p](double lo, double hi, double pos) {
    return std::max(0.0, std::min(hi, pos + 0.5 * p) - std::max(lo, pos - 0.5 * p)) / p;
  };
  auto index_range = [&](double lo, double hi, double half, std::size_t n) {
    const double first = std::floor(lo / p + half - 0.5);
    const double last = std::ceil(hi / p + half + 0.5);
    const auto a = static_cast<std::ptrdiff_t>(std::max(0.0, first));
    const auto b = static_cast<std::ptrdiff_t>(std::min(static_cast<double>(n) - 1.0, last));
    return std::pair{a, b};
  };

  for (std::size_t r = 0; r < mask.rows; ++r) {
    for (std::size_t c = 0; c < mask.cols; ++c) {
      const double w = mask.weight(channel, r, c);
      if (w == 0.0) continue;
      const auto rect = mask.aperture(channel, r, c);
      const auto [r0, r1] = index_range(rect.y0, rect.y1, half_h, grid.sim_height);
      const auto [c0, c1] = index_range(rect.x0, rect.x1, half_w, grid.sim_width);
      for (auto ri = r0; ri <= r1; ++ri) {
        const double fy = overlap(rect.y0, rect.y1, axis_position(ri, grid.sim_height, p));
        if (fy == 0.0) continue;
        for (auto ci = c0; ci <= c1; ++ci) {
          const double fx = overlap(rect.x0, rect.x1, axis_position(ci, grid.sim_width, p));
          field.at(ri, ci) += w * fy * fx;
        }
      }
    }
  }
  // Adjacent no-deadspace cells share edges; keep round-off inside [0, 1].
  for (auto& v : field.samples()) v = std::min(v.real(), 1.0);
  return field;
}

ComplexField spherical_illumination(const OpticalGeometry& geometry, double wavelength) {
  geometry.validate();
  if (!(wavelength > 0.0)) throw InputError("spherical_illumination: wavelength must be > 0");
  ComplexField field(geometry.sim_height, geometry.sim_width, geometry.sim_pitch,
                     geometry.sim_pitch);
  const double k = kTwoPi / wavelength;
  const double d1_sq = geometry.d1 * geometry.d1;
  for (std::size_t r = 0; r < geometry.sim_height; ++r) {
    const double y = axis_position(r, geometry.sim_height, geometry.sim_pitch);
    for (std::size_t c = 0; c < geometry.sim_width; ++c) {
      const double x = axis_position(c, geometry.sim_width, geometry.sim_pitch);
      field.at(r, c) = std::polar(1.0, k * std::sqrt(x * x + y * y + d1_sq));
    }
  }
  return field;
}

ComplexField blas_kernel(std::size_t height, std::size_t width, double pitch_y, double pitch_x,
                         double z, double wavelength) {
  if (!(z > 0.0) || !(wavelength > 0.0)) throw InputError("blas_kernel: z and wavelength > 0");
  ComplexField h(height, width, pitch_y, pitch_x);
  const double extent_y = static_cast<double>(height) * pitch_y;
  const double extent_x = static_cast<double>(width) * pitch_x;
  const double limit_y = 1.0 / (wavelength * std::sqrt(std::pow(z / extent_y, 2) + 1.0));
  const double limit_x = 1.0 / (wavelength * std::sqrt(std::pow(z / extent_x, 2) + 1.0));
  const double k = kTwoPi / wavelength;
  for (std::size_t r = 0; r < height; ++r) {
    const double v = fft_frequency(r, height, pitch_y);
    if (std::abs(v) > limit_y) continue;
    for (std::size_t c = 0; c < width; ++c) {
      const double u = fft_frequency(c, width, pitch_x);
      if (std::abs(u) > limit_x) continue;
      const double arg = 1.0 - wavelength * wavelength * (u * u + v * v);
      if (arg <= 0.0) continue;
      h.at(r, c) = std::polar(1.0, k * z * std::sqrt(arg));
    }
  }
  return h;
}

ComplexField blas_kernel(const OpticalGeometry& grid, double z, double wavelength) {
  grid.validate();
  return blas_kernel(grid.sim_height, grid.sim_width, grid.sim_pitch, grid.sim_pitch, z,
                     wavelength);
}

ComplexField propagate(const ComplexField& field, double z, double wavelength) {
  auto spectrum = fft2(field);
  spectrum *= blas_kernel(field.height(), field.width(), field.pitch_y(), field.pitch_x(), z,
                          wavelength);
  return ifft2(spectrum);
}

namespace {

// Sums factor x factor blocks (sensor pixels integrate their sub-samples).
RealImage bin(const RealImage& plane, std::size_t factor) {
  if (factor == 1) return plane;
  RealImage out(plane.height() / factor, plane.width() / factor, 1);
  for (std::size_t r = 0; r < plane.height(); ++r) {
    for (std::size_t c = 0; c < plane.width(); ++c) {
      out.at(r / factor, c / factor) += plane.at(r, c);
    }
  }
  return out;
}

}  // namespace

Psf simulate_psf(const MaskPattern& mask, const OpticalGeometry& geometry,
                 const std::array<double, 3>& wavelengths, PsfVariant variant,
                 Normalization normalization) {
  geometry.validate();
  MaskPattern layout = mask;
  layout.deadspace_enabled = variant != PsfVariant::wave_no_deadspace;

  RealImage out(geometry.sensor_height(), geometry.sensor_width(), kColorChannels);
  for (std::size_t ch = 0; ch < kColorChannels; ++ch) {
    const auto color = static_cast<Channel>(ch);
    ComplexField field = rasterize_mask(layout, color, geometry);
    RealImage intensity(geometry.sim_height, geometry.sim_width, 1);
    if (variant == PsfVariant::no_wave) {
      for (std::size_t i = 0; i < field.size(); ++i) {
        intensity.samples()[i] = field.samples()[i].real();
      }
    } else {
      field *= spherical_illumination(geometry, wavelengths[ch]);
      const auto sensor_field = propagate(field, geometry.d2, wavelengths[ch]);
      sensor_field.validate();
      for (std::size_t i = 0; i < sensor_field.size(); ++i) {
        intensity.samples()[i] = std::norm(sensor_field.samples()[i]);
      }
    }
    out.set_channel(ch, bin(crop(intensity, geometry.sensor_crop), geometry.oversample));
  }
  if (normalization == Normalization::unit_sum) normalize_unit_sum(out);

  Psf psf;
  psf.image = std::move(out);
  psf.wavelengths.assign(wavelengths.begin(), wavelengths.end());
  psf.geometry = geometry;
  psf.normalization = normalization;
  psf.variant = variant;
  return psf;
}

MaskPattern random_mask(std::uint64_t seed, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw InputError("random_mask: rows and cols must be >= 1");
  MaskPattern mask = MaskPattern::zeros(rows, cols);
  std::mt19937_64 rng(seed);
  // 53 high bits -> [0, 1); identical on every standard library.
  for (auto& w : mask.weights) w = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return mask;
}

}  // namespace lensless::optics
