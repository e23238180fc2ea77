#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lensless/core.hpp"
#include "lensless/optics.hpp"

namespace lensless::forward {

/// Linear shift-invariant imaging operator for one PSF and one scene size.
///
/// Models y(r) = sum_a x(a) psf(r - a + c) with c the PSF center
/// (height/2, width/2), i.e. linear convolution cropped back to the scene
/// extent. Evaluated with zero-padded FFTs so nothing wraps around.
class LsiOperator {
 public:
  LsiOperator(const optics::Psf& psf, std::size_t scene_height, std::size_t scene_width);

  RealImage apply(const RealImage& x) const;
  RealImage adjoint(const RealImage& y) const;

  std::size_t scene_height() const { return height_; }
  std::size_t scene_width() const { return width_; }
  std::size_t channels() const { return spectra_.size(); }
  std::size_t padded_height() const { return padded_h_; }
  std::size_t padded_width() const { return padded_w_; }

  /// Eigenvalues of the padded circular convolution, FFT order, per channel.
  const ComplexField& spectrum(std::size_t ch) const { return spectra_[ch]; }

  /// Measurement plane embedded top-left in the padded grid and back.
  ComplexField embed(const RealImage& plane) const;
  RealImage extract(const ComplexField& padded) const;

 private:
  RealImage filter(const RealImage& img, bool conjugate) const;

  std::size_t height_;
  std::size_t width_;
  std::size_t padded_h_;
  std::size_t padded_w_;
  std::vector<ComplexField> spectra_;
};

struct ConvolveAudit {
  /// Samples below -1e-9 * peak before clipping; nonzero means the inputs
  /// were not a nonnegative scene/PSF pair.
  std::size_t clipped_beyond_tolerance = 0;
};

/// Simulated lensless measurement of a nonnegative scene. Round-off
/// negatives are clipped to zero.
RealImage convolve_lsi(const RealImage& scene, const optics::Psf& psf,
                       ConvolveAudit* audit = nullptr);

/// Explicit system y = C (H + delta) x + n for brute-force checks.
struct DenseSystem {
  Eigen::MatrixXd H;
  std::optional<Eigen::MatrixXd> delta;
  std::optional<Eigen::MatrixXd> crop;

  Eigen::MatrixXd estimate() const { return delta ? Eigen::MatrixXd(H + *delta) : H; }
  void validate() const;
};

inline constexpr std::size_t kDenseSceneLimit = 16;

/// Materializes the doubly-block-Toeplitz matrix of `psf` for a scene of the
/// given size; vectorization is row-major channel-last like RealImage.
DenseSystem lsi_to_dense(const optics::Psf& psf, std::size_t scene_height,
                         std::size_t scene_width);

/// Selection matrix realizing `spec` on an image of the given extent.
Eigen::MatrixXd selection_matrix(const CropSpec& spec, std::size_t src_height,
                                 std::size_t src_width, std::size_t channels = 1);

Eigen::VectorXd dense_forward(const DenseSystem& sys, const Eigen::VectorXd& x,
                              const std::optional<Eigen::VectorXd>& noise = std::nullopt);

Eigen::VectorXd to_vector(const RealImage& img);
RealImage from_vector(const Eigen::VectorXd& v, std::size_t height, std::size_t width,
                      std::size_t channels);

enum class NoiseKind { shot_poisson, gaussian };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::shot_poisson;
  /// +infinity disables noise.
  double snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;

  bool disabled() const { return snr_db == std::numeric_limits<double>::infinity(); }
};

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& s);

/// Poisson noise scaled so that 10 log10(|y|^2 / E|n|^2) = snr_db.
RealImage add_shot_noise(const RealImage& meas, const NoiseSpec& spec);

/// i.i.d. Gaussian noise with variance |arr|^2 / (N 10^(snr_db/10)).
RealImage add_gaussian_noise(const RealImage& arr, const NoiseSpec& spec);

RealImage add_noise(const RealImage& img, const NoiseSpec& spec);

}  // namespace lensless::forward
