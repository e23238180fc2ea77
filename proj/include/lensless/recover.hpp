#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lensless/core.hpp"
#include "lensless/forward.hpp"
#include "lensless/optics.hpp"

namespace lensless::recover {

/// Elementwise (|v| - beta)_+ sign(v).
std::vector<double> soft_threshold(std::span<const double> v, double beta);
double soft_threshold(double v, double beta);

/// Anisotropic forward differences with replicate (Neumann) boundary: the
/// difference across the last row/column is zero.
struct Gradient {
  RealImage dy;
  RealImage dx;
};

struct TvOps {
  static Gradient apply(const RealImage& x);
  static RealImage adjoint(const Gradient& g);
};

/// prox of weight * ||D x||_1 by projected gradient on the dual.
RealImage prox_tv(const RealImage& v, double weight, std::size_t max_iterations = 200,
                  double tolerance = 1e-10);

// -- Wiener ------------------------------------------------------------------

struct WienerParams {
  /// Scalar K, or a per-frequency grid (padded size, FFT order, 1 channel).
  std::variant<double, RealImage> reg = 1e-4;
  void validate() const;
};

RealImage wiener_filter(const RealImage& meas, const optics::Psf& psf,
                        const WienerParams& params);

// -- direct inversion --------------------------------------------------------

inline constexpr double kMaxConditionNumber = 1e12;

Eigen::VectorXd direct_inverse(const forward::DenseSystem& sys, const Eigen::VectorXd& y);

// -- proximal gradient -------------------------------------------------------

struct IstaParams {
  /// Step size; unset means 1 / L from the power-iteration estimate.
  std::optional<double> alpha;
  double beta = 1e-4;
  std::size_t iterations = 300;
  bool accelerated = true;
  void validate() const;
};

struct SolveReport {
  double lipschitz = 0.0;
  double alpha = 0.0;
  /// Objective after each iteration; entry 0 is the value at x = 0.
  std::vector<double> objective;
  std::vector<std::string> warnings;
};

/// Largest eigenvalue of A^T A by power iteration from the all-ones vector.
double lipschitz_estimate(const forward::LsiOperator& op, std::size_t iterations = 20);

/// 0.5 |A x - y|^2 + beta |D x|_1
double tv_objective(const forward::LsiOperator& op, const RealImage& x, const RealImage& y,
                    double beta);

RealImage fista_tv(const RealImage& meas, const optics::Psf& psf, const IstaParams& params,
                   SolveReport* report = nullptr);

// -- ADMM --------------------------------------------------------------------

struct AdmmStage {
  double mu1;
  double mu2;
  double mu3;
  double tau;
};

struct AdmmParams {
  double mu1 = 1e-6;
  double mu2 = 1e-5;
  double mu3 = 4e-5;
  double tau = 1e-4;
  std::size_t iterations = 100;
  /// Internal problem scaling: each PSF channel is rescaled to this DC gain
  /// and each measurement channel to this peak before iterating; 0 leaves
  /// the input as is. The penalties above are tuned for these values.
  double psf_gain = 30.0;
  double data_peak = 100.0;
  /// Optional per-iteration (mu1, mu2, mu3, tau); when set it must hold
  /// exactly `iterations` entries and overrides the scalars above.
  std::vector<AdmmStage> schedule;

  AdmmStage stage(std::size_t k) const {
    return schedule.empty() ? AdmmStage{mu1, mu2, mu3, tau} : schedule[k];
  }
  void validate() const;
};

/// ADMM with splits for the sensor crop, TV sparsity and nonnegativity. The
/// estimate lives on a zero-padded canvas; the returned image is its sensor
/// window, clipped at zero.
RealImage admm_tv(const RealImage& meas, const optics::Psf& psf, const AdmmParams& params);

// -- classical processors ----------------------------------------------------

enum class ProcessorKind { identity, gaussian_denoise, median_denoise, tv_denoise };

struct ProcessorSpec {
  ProcessorKind kind = ProcessorKind::identity;
  double sigma = 1.0;           // gaussian_denoise
  std::size_t radius = 1;       // median_denoise
  double weight = 0.05;         // tv_denoise
  std::size_t iterations = 100; // tv_denoise

  void validate() const;
};

RealImage gaussian_denoise(const RealImage& img, double sigma);
RealImage median_denoise(const RealImage& img, std::size_t radius);
RealImage tv_denoise(const RealImage& img, double weight, std::size_t iterations);
RealImage apply_processor(const RealImage& img, const ProcessorSpec& spec);

// -- pipeline ----------------------------------------------------------------

enum class InversionKind { wiener, fista_tv, admm_tv };

struct InversionSpec {
  InversionKind kind = InversionKind::admm_tv;
  WienerParams wiener;
  IstaParams ista;
  AdmmParams admm;
};

struct PipelineConfig {
  ProcessorSpec pre;
  InversionSpec inversion;
  ProcessorSpec post;
  /// PSF file the pipeline is meant to run with, if the config names one.
  std::optional<std::string> psf_path;

  void validate() const;
  /// Short human-readable label, e.g. "gaussian_denoise+admm_tv+identity".
  std::string label() const;
};

/// Parses a TOML document; unknown keys are errors.
PipelineConfig parse_pipeline_config(const std::string& toml_text);
PipelineConfig load_pipeline_config(const std::string& path);
std::string to_toml(const PipelineConfig& cfg);

std::string to_string(ProcessorKind kind);
std::string to_string(InversionKind kind);

struct StageRecord {
  std::string stage;
  std::string kind;
  std::uint64_t output_hash;
};

struct PipelineRecord {
  std::uint64_t input_hash = 0;
  std::vector<StageRecord> stages;
};

RealImage invert(const RealImage& meas, const optics::Psf& psf, const InversionSpec& spec);

/// pre -> inversion -> post.
RealImage run_pipeline(const RealImage& meas, const optics::Psf& psf, const PipelineConfig& cfg,
                       PipelineRecord* record = nullptr);

}  // namespace lensless::recover
