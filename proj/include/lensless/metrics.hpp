#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lensless/core.hpp"
#include "lensless/optics.hpp"

namespace lensless::metrics {

/// 10 log10(peak^2 / MSE); +infinity when the images are identical.
double psnr(const RealImage& a, const RealImage& b, double peak);

/// Mean SSIM over all 11x11 Gaussian (sigma 1.5) windows that fit inside
/// the image, averaged over channels. C1 = (0.01 peak)^2, C2 = (0.03 peak)^2.
double ssim(const RealImage& a, const RealImage& b, double peak = 1.0);

/// |A est - meas|^2 / N with A the LSI forward model of `psf`.
double data_fidelity(const RealImage& meas, const RealImage& est, const optics::Psf& psf);

/// 10 log10(|clean|^2 / |noisy - clean|^2); +infinity when equal.
double empirical_snr(const RealImage& clean, const RealImage& noisy);

struct RoiSpec {
  std::size_t row_offset = 0;
  std::size_t col_offset = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t target_height = 0;
  std::size_t target_width = 0;

  /// Whole image, no resize.
  static RoiSpec full(std::size_t height, std::size_t width);
  void validate(std::size_t src_height, std::size_t src_width) const;
  friend bool operator==(const RoiSpec&, const RoiSpec&) = default;
};

/// Bilinear resize with pixel-center alignment (half-pixel offsets), edges
/// clamped.
RealImage resize_bilinear(const RealImage& img, std::size_t height, std::size_t width);

/// Crop to the ROI window, then resize to the target dims.
RealImage roi_extract(const RealImage& recon, const RoiSpec& spec);

struct MetricsRow {
  std::string id;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double data_fidelity = 0.0;
  std::string method;
  std::string stratum;
  std::optional<double> inference_ms;
  /// Empty on success; otherwise the failure message (row excluded from means).
  std::string error;
};

struct Aggregate {
  std::string method;
  std::string stratum;
  std::size_t count = 0;
  std::size_t failures = 0;
  double mean_psnr_db = 0.0;
  double mean_ssim = 0.0;
  double mean_data_fidelity = 0.0;
  double std_psnr_db = 0.0;
  std::optional<double> mean_inference_ms;
};

/// Per-image rows plus means per (method, stratum).
struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::vector<Aggregate> aggregates;
  /// Free-form run description (peak convention, configs, seeds).
  std::map<std::string, std::string> fingerprint;

  /// Sorts rows by (method, stratum, id) and recomputes the aggregates.
  void finalize();

  /// Fixed column order: id, psnr_db, ssim, lpips, data_fidelity, then
  /// method, stratum, inference_ms, error.
  std::string to_csv() const;
  std::string to_json() const;
};

}  // namespace lensless::metrics
