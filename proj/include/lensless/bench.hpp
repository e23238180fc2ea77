#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lensless/core.hpp"
#include "lensless/forward.hpp"
#include "lensless/metrics.hpp"
#include "lensless/optics.hpp"
#include "lensless/recover.hpp"
#include "lensless/scenes.hpp"

namespace lensless::bench {

namespace fs = std::filesystem;

inline constexpr const char* kManifestName = "manifest.json";

enum class Resample { nearest, bilinear };
std::string to_string(Resample r);
Resample parse_resample(const std::string& s);

struct ManifestEntry {
  std::string id;
  fs::path lensless;  // relative to the manifest root
  fs::path lensed;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Paired lensless / ground-truth images plus the PSF that produced them.
struct DatasetManifest {
  fs::path root;
  std::vector<ManifestEntry> entries;
  fs::path psf;
  /// Scoring window in reconstruction pixels; absent means full frame
  /// resized to the ground-truth dims.
  std::optional<metrics::RoiSpec> roi;
  std::string pixel_format;  // e.g. "npy-f32", "png-u8"
  /// Integer factor applied to measurements, ground truth and PSF on load.
  std::size_t downsample = 1;
  Resample downsample_kernel = Resample::bilinear;
  bool normalize_psf = true;

  /// Every referenced file exists; ids unique and nonempty.
  void validate() const;
  /// Paths are written relative to `root`.
  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text, const fs::path& root);
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct ImportOptions {
  std::size_t downsample = 1;
  Resample kernel = Resample::bilinear;
  bool normalize_psf = true;
  /// Decode every file up front and report all failures at once.
  bool verify = true;
};

/// Recognizes, in order: manifest.json; lensless/ + lensed/;
/// diffuser_images/ + ground_truth_lensed/. The PSF is psf.npy or psf.png,
/// an optional roi.json holds the scoring window.
DatasetManifest import_dataset(const fs::path& root, const ImportOptions& options = {});

RealImage downsample_image(const RealImage& img, std::size_t factor, Resample kernel);

RealImage load_measurement(const DatasetManifest& m, const ManifestEntry& e);
RealImage load_ground_truth(const DatasetManifest& m, const ManifestEntry& e);
optics::Psf load_psf(const DatasetManifest& m);

struct NamedImage {
  std::string id;
  RealImage image;
};

/// `count` procedural scenes with ids scene_0000, scene_0001, ...
std::vector<NamedImage> procedural_scenes(std::uint64_t seed, std::size_t count, std::size_t height,
                                          std::size_t width, std::size_t channels = 3);
std::vector<NamedImage> ground_truth_scenes(const DatasetManifest& m);

/// Scene i is measured as add_noise(convolve_lsi(scene, psf)) with noise seed
/// derive_seed(noise.seed, i). Writes lensless/, lensed/, psf.npy (+ sidecar),
/// noise.json and manifest.json under `out`.
DatasetManifest simulate_dataset(const std::vector<NamedImage>& scenes, const optics::Psf& psf,
                                 const forward::NoiseSpec& noise, const fs::path& out);

/// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware).
/// Results must be written to per-index slots; the first exception is
/// rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

enum class PeakMode { ground_truth_max, unit };

struct RunOptions {
  std::size_t threads = 1;
  bool record_timing = true;
  PeakMode peak = PeakMode::ground_truth_max;
};

/// One cell: measurement, PSF to reconstruct with, ground truth.
struct BenchCase {
  std::string id;
  std::string stratum;
  RealImage measurement;
  optics::Psf psf;
  RealImage ground_truth;
};

/// Reconstruct, ROI-extract, score every (method, case). Numerical failures
/// become error rows.
metrics::MetricsReport score_cases(const std::vector<BenchCase>& cases,
                                   const std::vector<recover::PipelineConfig>& methods,
                                   const std::optional<metrics::RoiSpec>& roi, const RunOptions& options);

metrics::MetricsReport run_benchmark(const DatasetManifest& data,
                                     const std::vector<recover::PipelineConfig>& methods,
                                     const RunOptions& options = {});

struct SweepConfig {
  std::vector<NamedImage> scenes;
  recover::PipelineConfig pipeline;
  /// Measurement PSF for the SNR and PSF sweeps.
  std::optional<optics::Psf> psf;
  /// SNR levels in dB; +infinity is the clean level.
  std::vector<double> levels;
  std::vector<std::uint64_t> seeds;
  std::uint64_t master_seed = 0;
  /// Measurement noise for the PSF and mask sweeps.
  forward::NoiseSpec noise;
  /// Mask sweep optics.
  double sensor_pitch = optics::kDefaultSensorPitch;
  optics::PsfVariant variant = optics::PsfVariant::wave_deadspace;
  RunOptions run{1, false, PeakMode::ground_truth_max};

  void validate() const;
};

inline const std::vector<double> kSnrLevels = {0.0, 5.0, 10.0, 15.0, 20.0};
/// First entry is the clean level.
inline const std::vector<double> kPsfSnrLevels = {std::numeric_limits<double>::infinity(), 0.0, -10.0, -20.0};

std::string level_label(double db);

/// Scenes re-noised with shot noise at every level; stratum "snr=<L>".
metrics::MetricsReport snr_robustness_sweep(const SweepConfig& cfg);

/// Reconstruct with a PSF corrupted by Gaussian noise (clipped at 0 and
/// renormalized); stratum "psf_snr=<L>".
metrics::MetricsReport psf_corruption_sweep(const SweepConfig& cfg);

/// Per seed: random mask -> PSF -> measurements -> reconstruction; stratum
/// "mask=<seed>".
metrics::MetricsReport multimask_sweep(const SweepConfig& cfg);

}  // namespace lensless::bench
