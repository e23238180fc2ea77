#include "doctest.h"
#include "helpers.hpp"

#include <numbers>

#include "lensless/optics.hpp"

using namespace lensless;
using namespace lensless::optics;

namespace {

OpticalGeometry square_grid(std::size_t n, double pitch, double d1 = 0.30, double d2 = 2e-3) {
  OpticalGeometry g;
  g.d1 = d1;
  g.d2 = d2;
  g.sim_height = n;
  g.sim_width = n;
  g.sim_pitch = pitch;
  g.sensor_crop = CropSpec{0, 0, n, n};
  g.oversample = 1;
  return g;
}

double field_sum(const ComplexField& f) {
  double s = 0.0;
  for (auto v : f.samples()) s += v.real();
  return s;
}

}  // namespace

TEST_CASE("fresnel_number over the DigiCam wavelength range") {
  CHECK(std::abs(fresnel_number(0.06e-3, 2e-3, 750e-9) - 2.4) < 1e-12);
  CHECK(std::abs(fresnel_number(0.06e-3, 2e-3, 450e-9) - 4.0) < 1e-12);
  CHECK(fresnel_number(1.0, 1.0, 1.0) == 1.0);
  CHECK_THROWS_AS(fresnel_number(0.0, 1.0, 1.0), InputError);
  CHECK_THROWS_AS(fresnel_number(1.0, -1.0, 1.0), InputError);
  CHECK_THROWS_AS(fresnel_number(1.0, 1.0, 0.0), InputError);
}

TEST_CASE("random_mask is deterministic with 1404 weights in [0, 1)") {
  const auto a = random_mask(42);
  const auto b = random_mask(42);
  CHECK(a.weights == b.weights);
  CHECK(a.weights.size() == 1404);
  CHECK(a.weights != random_mask(43).weights);
  for (double w : a.weights) CHECK((w >= 0.0 && w < 1.0));
  CHECK_THROWS_AS(random_mask(1, 0, 5), InputError);
}

TEST_CASE("random_mask weights have mean 1/2") {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::uint64_t seed = 0; n < 100000; ++seed) {
    for (double w : random_mask(seed).weights) {
      sum += w;
      ++n;
    }
  }
  CHECK(std::abs(sum / static_cast<double>(n) - 0.5) < 0.01);
}

TEST_CASE("mask layout: column-interleaved sub-pixels") {
  const auto m = MaskPattern::zeros(18, 26);
  for (std::size_t c = 0; c + 1 < m.cols; ++c) {
    CHECK(m.center_x(Channel::blue, c) < m.center_x(Channel::red, c + 1));
    CHECK(m.center_x(Channel::red, c) < m.center_x(Channel::green, c));
    CHECK(m.center_x(Channel::green, c) < m.center_x(Channel::blue, c));
  }
  for (std::size_t r = 0; r + 1 < m.rows; ++r) CHECK(m.center_y(r) < m.center_y(r + 1));
  const auto a = m.aperture(Channel::red, 3, 4);
  const auto b = m.aperture(Channel::red, 3, 5);
  CHECK(a.x1 < b.x0);
  CHECK(a.x1 - a.x0 == doctest::Approx(0.06e-3));
  CHECK(a.y1 - a.y0 == doctest::Approx(0.18e-3));

  auto bad = m;
  bad.weights[0] = 1.5;
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("rasterize_mask: all-ones mask without deadspace is one solid rectangle") {
  auto m = MaskPattern::zeros(18, 26);
  std::fill(m.weights.begin(), m.weights.end(), 1.0);
  m.deadspace_enabled = false;
  const double pitch = 0.219e-3 / 4.0;
  const auto g = square_grid(512, pitch);
  for (auto ch : {Channel::red, Channel::green, Channel::blue}) {
    const auto f = rasterize_mask(m, ch, g);
    CHECK(field_sum(f) * pitch * pitch == doctest::Approx(m.extent_x() * m.extent_y()).epsilon(1e-9));
    // mask edges fall on sample centers: those samples are half covered
    std::size_t ones = 0, partial = 0;
    for (auto v : f.samples()) {
      CHECK(v.imag() == 0.0);
      CHECK((v.real() >= 0.0 && v.real() <= 1.0));
      if (v.real() > 1.0 - 1e-12) ++ones;
      else if (v.real() > 1e-12) ++partial;
    }
    CHECK(ones == (18 * 4 - 1) * (26 * 4 - 1));
    CHECK(ones + partial == (18 * 4 + 1) * (26 * 4 + 1));
  }
}

TEST_CASE("rasterize_mask: a single open sub-pixel covers 0.06 x 0.18 mm") {
  auto m = MaskPattern::zeros(18, 26);
  m.weight(Channel::green, 7, 11) = 1.0;
  const double pitch = 7.5e-6;
  const auto g = square_grid(1024, pitch);
  const auto f = rasterize_mask(m, Channel::green, g);
  const double area_samples = 0.06e-3 * 0.18e-3 / (pitch * pitch);
  CHECK(std::abs(field_sum(f) - area_samples) < 1e-9 * area_samples);
  CHECK(field_sum(rasterize_mask(m, Channel::red, g)) == 0.0);

  // support is a single rectangle of the expected size
  std::size_t r0 = 1024, r1 = 0, c0 = 1024, c1 = 0;
  for (std::size_t r = 0; r < 1024; ++r) {
    for (std::size_t c = 0; c < 1024; ++c) {
      if (f.at(r, c).real() > 0.0) {
        r0 = std::min(r0, r), r1 = std::max(r1, r);
        c0 = std::min(c0, c), c1 = std::max(c1, c);
      }
    }
  }
  CHECK(std::abs(static_cast<double>(r1 - r0 + 1) - 0.18e-3 / pitch) <= 1.0);
  CHECK(std::abs(static_cast<double>(c1 - c0 + 1) - 0.06e-3 / pitch) <= 1.0);
}

TEST_CASE("rasterize_mask rejects masks larger than the grid") {
  const auto m = random_mask(1);
  CHECK_THROWS_AS(rasterize_mask(m, Channel::red, square_grid(64, 10e-6)), InputError);
}

TEST_CASE("spherical_illumination is a unit-magnitude phase") {
  const double lambda = 550e-9;
  const auto g = square_grid(64, 10e-6);
  const auto f = spherical_illumination(g, lambda);
  for (auto v : f.samples()) CHECK(std::abs(std::abs(v) - 1.0) < 1e-12);

  const double k = 2.0 * std::numbers::pi / lambda;
  const double expected = std::remainder(k * g.d1, 2.0 * std::numbers::pi);
  CHECK(std::abs(std::remainder(std::arg(f.at(32, 32)) - expected, 2.0 * std::numbers::pi)) < 1e-6);
}

TEST_CASE("spherical_illumination follows the paraxial expansion and flattens as 1/d1") {
  const double lambda = 550e-9;
  const double k = 2.0 * std::numbers::pi / lambda;
  auto spread = [&](double d1) {
    const auto g = square_grid(100, 10e-6, d1);  // 1 mm grid
    const auto f = spherical_illumination(g, lambda);
    const auto center = f.at(50, 50);
    double worst = 0.0;
    for (std::size_t r = 0; r < 100; r += 9) {
      for (std::size_t c = 0; c < 100; c += 9) {
        const double y = (static_cast<double>(r) - 50.0) * 10e-6, x = (static_cast<double>(c) - 50.0) * 10e-6;
        const double paraxial = k * (x * x + y * y) / (2.0 * d1);
        const double phase = std::arg(f.at(r, c) * std::conj(center));
        CHECK(std::abs(phase - paraxial) < 1e-6 * std::max(1.0, paraxial) + 1e-6);
        worst = std::max(worst, std::abs(phase));
      }
    }
    return worst;
  };
  const double s30 = spread(30.0), s300 = spread(300.0);
  CHECK(s30 < std::numbers::pi);
  CHECK(s30 / s300 == doctest::Approx(10.0).epsilon(1e-4));
}

TEST_CASE("blas_kernel: DC value and {0, 1} magnitudes") {
  const double z = 2e-3, lambda = 550e-9;
  const auto h = blas_kernel(64, 64, 0.2e-6, 0.2e-6, z, lambda);
  const double k = 2.0 * std::numbers::pi / lambda;
  CHECK(std::abs(h.at(0, 0) - std::polar(1.0, k * z)) < 1e-9);
  std::size_t zeros = 0;
  for (auto v : h.samples()) {
    const double m = std::abs(v);
    CHECK((m == 0.0 || std::abs(m - 1.0) < 1e-13));
    zeros += m == 0.0 ? 1 : 0;
  }
  CHECK(zeros > 0);  // 0.2 um sampling reaches the evanescent region
}

TEST_CASE("blas_kernel passband matches the closed-form limit") {
  // 5 mm extent along y sampled finely enough that the limit binds.
  const double z = 2e-3, lambda = 550e-9, S = 5e-3;
  const std::size_t ny = 32768, nx = 4;
  const auto h = blas_kernel(ny, nx, S / ny, S / nx, z, lambda);
  const double u_limit = 1.0 / (lambda * std::sqrt((z / S) * (z / S) + 1.0));
  const double expected_rows = 2.0 * std::floor(u_limit * S) + 1.0;
  std::size_t nonzero = 0;
  for (auto v : h.samples()) nonzero += std::abs(v) > 0.0 ? 1 : 0;
  CHECK(u_limit < 1.0 / lambda);
  CHECK(std::abs(static_cast<double>(nonzero) / nx - expected_rows) <= 1.0);
}

TEST_CASE("propagate conserves in-band energy and never adds energy") {
  const double lambda = 550e-9, pitch = 0.2e-6;
  for (std::uint64_t s = 0; s < 10; ++s) {
    // arbitrary field: part of the spectrum is evanescent
    const auto f = testutil::random_field(s, 64, 64);
    ComplexField g(64, 64, pitch, pitch);
    std::copy(f.samples().begin(), f.samples().end(), g.samples().begin());
    CHECK(propagate(g, 5e-6, lambda).energy() <= g.energy() * (1.0 + 1e-12));
    CHECK(propagate(g, 5e-6, lambda).energy() < 0.9 * g.energy());

    // band-limited: keep |u| < 0.4 / lambda only
    auto spec = fft2(g);
    for (std::size_t r = 0; r < 64; ++r) {
      for (std::size_t c = 0; c < 64; ++c) {
        const double v = (r < 32 ? double(r) : double(r) - 64.0) / (64 * pitch);
        const double u = (c < 32 ? double(c) : double(c) - 64.0) / (64 * pitch);
        if (std::hypot(u, v) >= 0.4 / lambda) spec.at(r, c) = 0.0;
      }
    }
    const auto band = ifft2(spec);
    CHECK(std::abs(propagate(band, 5e-6, lambda).energy() - band.energy()) / band.energy() < 1e-9);
  }
}

TEST_CASE("propagate over a vanishing distance is the identity") {
  ComplexField g(32, 32, 10e-6, 10e-6);
  const auto f = testutil::random_field(3, 32, 32);
  std::copy(f.samples().begin(), f.samples().end(), g.samples().begin());
  CHECK(testutil::rel_err(propagate(g, 1e-12, 550e-9), g) < 1e-4);
}

TEST_CASE("propagate widens a Gaussian beam as w0 sqrt(1 + (z/zR)^2)") {
  const double lambda = 550e-9, pitch = 2e-6, w0 = 20e-6, z = 2e-3;
  const std::size_t n = 256;
  ComplexField g(n, n, pitch, pitch);
  auto pos = [&](std::size_t i) { return (static_cast<double>(i) - n / 2.0) * pitch; };
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const double rr = pos(r) * pos(r) + pos(c) * pos(c);
      g.at(r, c) = std::exp(-rr / (w0 * w0));
    }
  const auto out = propagate(g, z, lambda);
  double total = 0.0, m2 = 0.0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const double I = std::norm(out.at(r, c));
      total += I;
      m2 += I * pos(c) * pos(c);
    }
  const double width = 2.0 * std::sqrt(m2 / total);  // I ~ exp(-2 x^2 / w^2) -> <x^2> = w^2 / 4
  const double zR = std::numbers::pi * w0 * w0 / lambda;
  const double expected = w0 * std::sqrt(1.0 + (z / zR) * (z / zR));
  CHECK(std::abs(width - expected) / expected < 0.02);
}

TEST_CASE("simulate_psf basics") {
  const auto g = OpticalGeometry::for_sensor(32, 32, 200e-6);
  const auto zero = simulate_psf(MaskPattern::zeros(18, 26), g, kDefaultWavelengths, PsfVariant::wave_deadspace);
  CHECK(zero.image.sum() == 0.0);

  for (auto variant : {PsfVariant::wave_deadspace, PsfVariant::wave_no_deadspace, PsfVariant::no_wave}) {
    const auto psf = simulate_psf(random_mask(5), g, kDefaultWavelengths, variant);
    CHECK(psf.image.height() == 32);
    CHECK(psf.image.channels() == 3);
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(psf.image.channel(c).sum() - 1.0) < 1e-9);
    for (double v : psf.image.samples()) CHECK(v >= 0.0);
    CHECK(psf.wavelengths.size() == 3);
  }
}

TEST_CASE("simulate_psf no_wave pinhole equals the rasterized aperture") {
  auto m = MaskPattern::zeros(18, 26);
  m.weight(Channel::blue, 9, 13) = 1.0;
  const auto g = OpticalGeometry::for_sensor(32, 32, 200e-6, 4, 1);
  const auto psf = simulate_psf(m, g, kDefaultWavelengths, PsfVariant::no_wave, Normalization::raw);
  const auto f = rasterize_mask(m, Channel::blue, g);
  for (std::size_t r = 0; r < 32; ++r)
    for (std::size_t c = 0; c < 32; ++c) {
      CHECK(psf.image.at(r, c, 2) == f.at(r + g.sensor_crop.row_offset, c + g.sensor_crop.col_offset).real());
    }
  CHECK(psf.image.channel(0).sum() == 0.0);
  CHECK(psf.image.channel(2).sum() > 0.0);
}

TEST_CASE("delta_psf and Psf validation") {
  const auto d = delta_psf(5, 6, 3);
  CHECK(d.image.at(2, 3, 1) == 1.0);
  CHECK(d.image.sum() == 3.0);
  RealImage bad(2, 2, 1, 0.5);
  Psf p;
  p.image = bad;
  p.normalization = Normalization::unit_sum;
  CHECK_THROWS_AS(p.validate(), InputError);
  CHECK_NOTHROW(Psf::from_image(bad, Normalization::unit_sum));
}
