// Command-line front end: PSF simulation, datasets, recovery, benchmarks.

#include <cstdio>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lensless/bench.hpp"
#include "lensless/error.hpp"
#include "lensless/io.hpp"
#include "lensless/mismatch.hpp"
#include "lensless/recover.hpp"

namespace fs = std::filesystem;
using namespace lensless;

namespace {

constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "csv";
  std::size_t threads = 0;
};

void add_common(CLI::App* cmd, Common& c, bool with_format) {
  cmd->add_option("--config", c.config, "Pipeline config (TOML)");
  cmd->add_option("--seed", c.seed, "Master seed");
  cmd->add_option("--out", c.out, "Output directory");
  if (with_format) {
    cmd->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
  }
}

recover::PipelineConfig pipeline_or_default(const std::string& path) {
  return path.empty() ? recover::PipelineConfig{} : recover::load_pipeline_config(path);
}

fs::path out_dir(const std::string& out) {
  const fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
  fs::create_directories(dir);
  return dir;
}

void emit_report(const metrics::MetricsReport& report, const Common& c) {
  const std::string text = c.format == "json" ? report.to_json() : report.to_csv();
  if (c.out.empty()) {
    std::cout << text;
    return;
  }
  const fs::path path = out_dir(c.out) / ("report." + c.format);
  io::write_text(path, text);
  std::cerr << "wrote " << path.string() << "\n";
}

optics::Psf mask_psf(std::uint64_t seed, std::size_t rows, std::size_t cols, double pitch,
                     const std::string& variant) {
  const auto geometry = optics::OpticalGeometry::for_sensor(rows, cols, pitch);
  return optics::simulate_psf(optics::random_mask(seed), geometry, optics::kDefaultWavelengths,
                              optics::parse_variant(variant));
}

std::vector<double> parse_levels(const std::vector<std::string>& raw) {
  std::vector<double> out;
  for (const auto& s : raw) {
    if (s == "clean" || s == "inf") {
      out.push_back(std::numeric_limits<double>::infinity());
    } else {
      try {
        out.push_back(std::stod(s));
      } catch (const std::exception&) {
        throw InputError("invalid level '" + s + "'");
      }
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lensless imaging: simulation, recovery and benchmarking"};
  app.require_subcommand(1);

  // psf simulate
  auto* psf_cmd = app.add_subcommand("psf", "PSF tools")->require_subcommand(1);
  auto* psf_sim = psf_cmd->add_subcommand("simulate", "Simulate a mask PSF");
  Common psf_opts;
  std::string psf_mask;
  std::size_t psf_rows = 64, psf_cols = 64;
  double psf_pitch = optics::kDefaultSensorPitch, psf_d1 = 0.30, psf_d2 = 2e-3;
  std::string psf_variant = "wave_deadspace", psf_norm = "unit_sum";
  add_common(psf_sim, psf_opts, false);
  psf_sim->add_option("--mask", psf_mask, "Mask JSON (default: random mask from --seed)");
  psf_sim->add_option("--rows", psf_rows, "Sensor rows");
  psf_sim->add_option("--cols", psf_cols, "Sensor columns");
  psf_sim->add_option("--pitch", psf_pitch, "Sensor pixel pitch [m]");
  psf_sim->add_option("--d1", psf_d1, "Scene-to-mask distance [m]");
  psf_sim->add_option("--d2", psf_d2, "Mask-to-sensor distance [m]");
  psf_sim->add_option("--variant", psf_variant, "wave_deadspace|wave_no_deadspace|no_wave");
  psf_sim->add_option("--normalization", psf_norm, "unit_sum|raw");

  // mask random
  auto* mask_cmd = app.add_subcommand("mask", "Mask tools")->require_subcommand(1);
  auto* mask_rand = mask_cmd->add_subcommand("random", "Random RGB mask pattern");
  Common mask_opts;
  std::size_t mask_rows = 18, mask_cols = 26;
  add_common(mask_rand, mask_opts, false);
  mask_rand->add_option("--rows", mask_rows, "Mask rows");
  mask_rand->add_option("--cols", mask_cols, "Mask columns");

  // dataset import / simulate
  auto* ds_cmd = app.add_subcommand("dataset", "Dataset tools")->require_subcommand(1);
  auto* ds_import = ds_cmd->add_subcommand("import", "Validate a dataset and write its manifest");
  Common imp_opts;
  std::string imp_root, imp_kernel = "bilinear";
  std::size_t imp_down = 1;
  bool imp_raw_psf = false;
  add_common(ds_import, imp_opts, false);
  ds_import->add_option("root", imp_root, "Dataset root")->required();
  ds_import->add_option("--downsample", imp_down, "Integer downsampling factor");
  ds_import->add_option("--kernel", imp_kernel, "nearest|bilinear");
  ds_import->add_flag("--raw-psf", imp_raw_psf, "Do not normalize the PSF to unit sum");

  auto* ds_sim = ds_cmd->add_subcommand("simulate", "Simulate measurements from ground truth");
  Common sim_opts;
  std::string sim_psf, sim_scenes, sim_noise = "shot_poisson", sim_variant = "wave_deadspace";
  std::size_t sim_count = 20, sim_size = 64;
  double sim_snr = std::numeric_limits<double>::infinity();
  add_common(ds_sim, sim_opts, false);
  ds_sim->add_option("--psf", sim_psf, "PSF file (default: random mask PSF from --seed)");
  ds_sim->add_option("--scenes", sim_scenes, "Dataset root with ground truth (default: procedural)");
  ds_sim->add_option("--count", sim_count, "Procedural scene count");
  ds_sim->add_option("--size", sim_size, "Procedural scene size");
  ds_sim->add_option("--snr", sim_snr, "Measurement SNR [dB] (default: noiseless)");
  ds_sim->add_option("--noise", sim_noise, "shot_poisson|gaussian");
  ds_sim->add_option("--variant", sim_variant, "PSF variant for the default PSF");

  // recover
  auto* rec_cmd = app.add_subcommand("recover", "Reconstruct one measurement");
  Common rec_opts;
  std::string rec_meas, rec_psf;
  add_common(rec_cmd, rec_opts, false);
  rec_cmd->add_option("measurement", rec_meas, "Measurement (NPY or PNG)")->required();
  rec_cmd->add_option("--psf", rec_psf, "PSF file (default: config psf entry)");

  // bench run
  auto* bench_cmd = app.add_subcommand("bench", "Benchmarks")->require_subcommand(1);
  auto* bench_run = bench_cmd->add_subcommand("run", "Score pipelines on a dataset");
  Common bench_opts;
  std::string bench_root;
  std::vector<std::string> bench_configs;
  bool bench_no_timing = false;
  add_common(bench_run, bench_opts, true);
  bench_run->add_option("root", bench_root, "Dataset root")->required();
  bench_run->add_option("--method", bench_configs, "Additional pipeline configs (TOML)");
  bench_run->add_flag("--no-timing", bench_no_timing, "Omit inference time (byte-stable reports)");

  // sweep snr|psf|mask
  auto* sweep_cmd = app.add_subcommand("sweep", "Robustness and generalization sweeps")->require_subcommand(1);
  Common sweep_opts;
  std::string sweep_psf, sweep_dataset, sweep_variant = "wave_deadspace";
  std::vector<std::string> sweep_levels;
  std::vector<std::uint64_t> sweep_seeds;
  std::size_t sweep_count = 20, sweep_size = 64, sweep_masks = 10;
  std::uint64_t sweep_mask_seed = 0;
  double sweep_snr = std::numeric_limits<double>::infinity();
  std::vector<CLI::App*> sweeps;
  for (const char* name : {"snr", "psf", "mask"}) {
    auto* s = sweep_cmd->add_subcommand(name, std::string(name) + " sweep");
    add_common(s, sweep_opts, true);
    s->add_option("--dataset", sweep_dataset, "Use this dataset's ground truth as scenes");
    s->add_option("--count", sweep_count, "Procedural scene count");
    s->add_option("--size", sweep_size, "Procedural scene size");
    s->add_option("--variant", sweep_variant, "PSF variant for simulated masks");
    if (std::string(name) == "mask") {
      s->add_option("--mask-seeds", sweep_seeds, "Mask seeds (default: 0..N-1)");
      s->add_option("--masks", sweep_masks, "Number of masks when --mask-seeds is absent");
      s->add_option("--snr", sweep_snr, "Measurement shot-noise SNR [dB]");
    } else {
      s->add_option("--psf", sweep_psf, "PSF file (default: random mask PSF)");
      s->add_option("--mask-seed", sweep_mask_seed, "Mask seed for the default PSF");
      s->add_option("--levels", sweep_levels, "Levels in dB ('clean' for no noise)");
      if (std::string(name) == "psf") s->add_option("--snr", sweep_snr, "Measurement shot-noise SNR [dB]");
    }
    sweeps.push_back(s);
  }

  // decompose
  auto* dec_cmd = app.add_subcommand("decompose", "Mismatch decomposition audit (JSON)");
  Common dec_opts;
  std::size_t dec_trials = 100;
  add_common(dec_cmd, dec_opts, false);
  dec_cmd->add_option("--trials", dec_trials, "Random instances per identity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*psf_sim) {
      optics::MaskPattern mask = psf_mask.empty() ? optics::random_mask(psf_opts.seed)
                                                  : io::mask_from_json(io::read_text(psf_mask));
      auto geometry = optics::OpticalGeometry::for_sensor(psf_rows, psf_cols, psf_pitch);
      geometry.d1 = psf_d1;
      geometry.d2 = psf_d2;
      const auto psf = optics::simulate_psf(mask, geometry, optics::kDefaultWavelengths,
                                            optics::parse_variant(psf_variant),
                                            optics::parse_normalization(psf_norm));
      const fs::path path = out_dir(psf_opts.out) / "psf.npy";
      io::write_psf(path, psf);
      std::cerr << "wrote " << path.string() << "\n";
    } else if (*mask_rand) {
      const auto mask = optics::random_mask(mask_opts.seed, mask_rows, mask_cols);
      const std::string text = io::mask_to_json(mask);
      if (mask_opts.out.empty()) {
        std::cout << text;
      } else {
        io::write_text(out_dir(mask_opts.out) / "mask.json", text);
      }
    } else if (*ds_import) {
      bench::ImportOptions options;
      options.downsample = imp_down;
      options.kernel = bench::parse_resample(imp_kernel);
      options.normalize_psf = !imp_raw_psf;
      const auto m = bench::import_dataset(imp_root, options);
      const fs::path dst = (imp_opts.out.empty() ? fs::path(imp_root) : out_dir(imp_opts.out)) / bench::kManifestName;
      io::write_text(dst, m.to_json());
      std::cerr << m.entries.size() << " pairs, manifest " << dst.string() << "\n";
    } else if (*ds_sim) {
      const auto psf = sim_psf.empty() ? mask_psf(sim_opts.seed, sim_size, sim_size, optics::kDefaultSensorPitch, sim_variant)
                                       : io::read_psf(sim_psf);
      const auto scenes = sim_scenes.empty()
                              ? bench::procedural_scenes(sim_opts.seed, sim_count, sim_size, sim_size, psf.channels())
                              : bench::ground_truth_scenes(bench::import_dataset(sim_scenes));
      const forward::NoiseSpec noise{forward::parse_noise_kind(sim_noise), sim_snr, sim_opts.seed};
      const auto m = bench::simulate_dataset(scenes, psf, noise, out_dir(sim_opts.out));
      std::cerr << m.entries.size() << " pairs written to " << m.root.string() << "\n";
    } else if (*rec_cmd) {
      const auto cfg = pipeline_or_default(rec_opts.config);
      std::string psf_path = rec_psf;
      if (psf_path.empty() && cfg.psf_path) psf_path = *cfg.psf_path;
      if (psf_path.empty()) throw InputError("recover: no PSF given (--psf or psf in the config)");
      const auto psf = io::read_psf(psf_path);
      const auto meas = io::read_image(rec_meas);
      recover::PipelineRecord record;
      const auto recon = recover::run_pipeline(meas, psf, cfg, &record);
      const fs::path dir = out_dir(rec_opts.out);
      io::write_npy(dir / "recon.npy", recon);
      const double peak = recon.max() > 0.0 ? recon.max() : 1.0;
      io::write_png16(dir / "recon.png", recon, peak);
      nlohmann::ordered_json log;
      log["pipeline"] = cfg.label();
      log["input_hash"] = record.input_hash;
      log["png_peak"] = peak;
      log["stages"] = nlohmann::ordered_json::array();
      for (const auto& st : record.stages) {
        log["stages"].push_back({{"stage", st.stage}, {"kind", st.kind}, {"output_hash", st.output_hash}});
      }
      io::write_text(dir / "recon.json", log.dump(2) + "\n");
      std::cerr << "wrote " << (dir / "recon.npy").string() << "\n";
    } else if (*bench_run) {
      std::vector<recover::PipelineConfig> methods{pipeline_or_default(bench_opts.config)};
      for (const auto& path : bench_configs) methods.push_back(recover::load_pipeline_config(path));
      const auto manifest = bench::import_dataset(bench_root);
      bench::RunOptions run;
      run.threads = bench_opts.threads;
      run.record_timing = !bench_no_timing;
      emit_report(bench::run_benchmark(manifest, methods, run), bench_opts);
    } else if (*sweep_cmd) {
      bench::SweepConfig cfg;
      cfg.pipeline = pipeline_or_default(sweep_opts.config);
      cfg.master_seed = sweep_opts.seed;
      cfg.run.threads = sweep_opts.threads;
      cfg.variant = optics::parse_variant(sweep_variant);
      cfg.scenes = sweep_dataset.empty()
                       ? bench::procedural_scenes(sweep_opts.seed, sweep_count, sweep_size, sweep_size)
                       : bench::ground_truth_scenes(bench::import_dataset(sweep_dataset));
      const auto& shape = cfg.scenes.front().image;
      cfg.levels = parse_levels(sweep_levels);
      cfg.noise = {forward::NoiseKind::shot_poisson, sweep_snr, sweep_opts.seed};
      metrics::MetricsReport report;
      if (*sweeps[2]) {
        cfg.seeds = sweep_seeds;
        if (cfg.seeds.empty()) {
          for (std::uint64_t s = 0; s < sweep_masks; ++s) cfg.seeds.push_back(s);
        }
        report = bench::multimask_sweep(cfg);
      } else {
        cfg.psf = sweep_psf.empty() ? mask_psf(sweep_mask_seed, shape.height(), shape.width(),
                                               optics::kDefaultSensorPitch, sweep_variant)
                                    : io::read_psf(sweep_psf);
        report = *sweeps[0] ? bench::snr_robustness_sweep(cfg) : bench::psf_corruption_sweep(cfg);
      }
      emit_report(report, sweep_opts);
    } else if (*dec_cmd) {
      const std::string text = mismatch::to_json(mismatch::run_audit(dec_opts.seed, dec_trials));
      if (dec_opts.out.empty()) {
        std::cout << text;
      } else {
        io::write_text(out_dir(dec_opts.out) / "decompose.json", text);
      }
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
