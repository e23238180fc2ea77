#include "lensless/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"
#include "lensless/error.hpp"
#include "lensless/io.hpp"

namespace lensless::bench {

using nlohmann::ordered_json;

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".npy" || ext == ".png";
}

// id -> file, sorted by id.
std::map<std::string, fs::path> list_images(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
    const std::string id = entry.path().stem().string();
    if (!out.emplace(id, entry.path()).second) {
      throw InputError("duplicate id '" + id + "' in " + dir.string());
    }
  }
  return out;
}

metrics::RoiSpec roi_from_json(const nlohmann::json& j) {
  metrics::RoiSpec r;
  r.row_offset = j.at("row_offset").get<std::size_t>();
  r.col_offset = j.at("col_offset").get<std::size_t>();
  r.height = j.at("height").get<std::size_t>();
  r.width = j.at("width").get<std::size_t>();
  r.target_height = j.at("target_height").get<std::size_t>();
  r.target_width = j.at("target_width").get<std::size_t>();
  return r;
}

ordered_json roi_to_json(const metrics::RoiSpec& r) {
  return {{"row_offset", r.row_offset}, {"col_offset", r.col_offset}, {"height", r.height},
          {"width", r.width},           {"target_height", r.target_height}, {"target_width", r.target_width}};
}

std::optional<fs::path> find_psf(const fs::path& root) {
  for (const char* name : {"psf.npy", "psf.png"}) {
    if (fs::exists(root / name)) return fs::path(name);
  }
  return std::nullopt;
}

std::vector<std::string> method_names(const std::vector<recover::PipelineConfig>& methods) {
  std::vector<std::string> names;
  std::map<std::string, int> seen;
  for (const auto& m : methods) {
    std::string name = m.label();
    const int k = seen[name]++;
    if (k > 0) name += "#" + std::to_string(k);
    names.push_back(name);
  }
  return names;
}

using CaseSource = std::function<BenchCase(std::size_t)>;

metrics::MetricsReport score(std::size_t case_count, const CaseSource& source,
                             const std::vector<recover::PipelineConfig>& methods,
                             const std::optional<metrics::RoiSpec>& roi, const RunOptions& options) {
  if (case_count == 0) throw InputError("benchmark: no images to score");
  if (methods.empty()) throw InputError("benchmark: no methods");
  for (const auto& m : methods) m.validate();
  const auto names = method_names(methods);

  metrics::MetricsReport report;
  report.rows.resize(case_count * methods.size());
  parallel_for(case_count, options.threads, [&](std::size_t i) {
    const BenchCase c = source(i);
    for (std::size_t k = 0; k < methods.size(); ++k) {
      metrics::MetricsRow& row = report.rows[i * methods.size() + k];
      row.id = c.id;
      row.method = names[k];
      row.stratum = c.stratum;
      try {
        const auto t0 = std::chrono::steady_clock::now();
        const RealImage recon = recover::run_pipeline(c.measurement, c.psf, methods[k]);
        const auto t1 = std::chrono::steady_clock::now();
        if (options.record_timing) row.inference_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

        metrics::RoiSpec spec = roi.value_or(metrics::RoiSpec::full(recon.height(), recon.width()));
        if (!roi) {
          spec.target_height = c.ground_truth.height();
          spec.target_width = c.ground_truth.width();
        }
        const RealImage scored = metrics::roi_extract(recon, spec);
        if (scored.channels() != c.ground_truth.channels()) {
          throw InputError("benchmark: channel mismatch for " + c.id);
        }
        double peak = 1.0;
        if (options.peak == PeakMode::ground_truth_max) {
          const double m = c.ground_truth.max();
          if (m > 0.0) peak = m;
        }
        row.psnr_db = metrics::psnr(scored, c.ground_truth, peak);
        row.ssim = metrics::ssim(scored, c.ground_truth, peak);
        row.data_fidelity = metrics::data_fidelity(c.measurement, recon, c.psf);
      } catch (const NumericalError& e) {
        row.error = e.what();
      }
    }
  });

  report.fingerprint["peak"] = options.peak == PeakMode::ground_truth_max ? "ground_truth_max" : "1";
  for (std::size_t k = 0; k < methods.size(); ++k) {
    report.fingerprint["method." + names[k]] = recover::to_toml(methods[k]);
  }
  if (roi) {
    report.fingerprint["roi"] = roi_to_json(*roi).dump();
  }
  report.finalize();
  return report;
}

optics::Psf corrupt_psf(const optics::Psf& psf, double snr_db, std::uint64_t seed) {
  if (std::isinf(snr_db)) return psf;
  optics::Psf out = psf;
  out.image = forward::add_gaussian_noise(psf.image, {forward::NoiseKind::gaussian, snr_db, seed});
  for (auto& v : out.image.samples()) v = std::max(v, 0.0);
  out.image.signed_intermediate = false;
  if (psf.normalization == optics::Normalization::unit_sum) optics::normalize_unit_sum(out.image);
  out.validate();
  return out;
}

std::size_t scene_dims_check(const std::vector<NamedImage>& scenes) {
  if (scenes.empty()) throw InputError("sweep: no scenes");
  return scenes.size();
}

}  // namespace

std::string to_string(Resample r) { return r == Resample::nearest ? "nearest" : "bilinear"; }

Resample parse_resample(const std::string& s) {
  if (s == "nearest") return Resample::nearest;
  if (s == "bilinear") return Resample::bilinear;
  throw InputError("unknown resample kernel '" + s + "' (nearest|bilinear)");
}

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (e.id.empty()) throw InputError("manifest: empty id");
    if (!ids.insert(e.id).second) throw InputError("manifest: duplicate id '" + e.id + "'");
    if (!fs::exists(root / e.lensless)) throw InputError("manifest: missing lensless file for id '" + e.id + "'");
    if (!fs::exists(root / e.lensed)) throw InputError("manifest: missing lensed file for id '" + e.id + "'");
  }
  if (psf.empty() || !fs::exists(root / psf)) throw InputError("manifest: missing PSF under " + root.string());
  if (downsample == 0) throw InputError("manifest: downsample must be >= 1");
}

std::string DatasetManifest::to_json() const {
  ordered_json doc;
  doc["psf"] = psf.generic_string();
  doc["roi"] = roi ? roi_to_json(*roi) : ordered_json(nullptr);
  doc["pixel_format"] = pixel_format;
  doc["downsample"] = downsample;
  doc["downsample_kernel"] = to_string(downsample_kernel);
  doc["normalize_psf"] = normalize_psf;
  doc["entries"] = ordered_json::array();
  for (const auto& e : entries) {
    doc["entries"].push_back(
        {{"id", e.id}, {"lensless", e.lensless.generic_string()}, {"lensed", e.lensed.generic_string()}});
  }
  return doc.dump(2) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text, const fs::path& root) {
  try {
    const auto doc = nlohmann::json::parse(text);
    DatasetManifest m;
    m.root = root;
    m.psf = doc.at("psf").get<std::string>();
    if (doc.contains("roi") && !doc.at("roi").is_null()) m.roi = roi_from_json(doc.at("roi"));
    m.pixel_format = doc.value("pixel_format", std::string{});
    m.downsample = doc.value("downsample", std::size_t{1});
    m.downsample_kernel = parse_resample(doc.value("downsample_kernel", std::string{"bilinear"}));
    m.normalize_psf = doc.value("normalize_psf", true);
    for (const auto& e : doc.at("entries")) {
      m.entries.push_back({e.at("id").get<std::string>(), e.at("lensless").get<std::string>(),
                           e.at("lensed").get<std::string>()});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("manifest: ") + e.what());
  }
}

DatasetManifest import_dataset(const fs::path& root, const ImportOptions& options) {
  if (!fs::is_directory(root)) throw InputError("dataset root is not a directory: " + root.string());
  DatasetManifest m;
  if (fs::exists(root / kManifestName)) {
    m = DatasetManifest::from_json(io::read_text(root / kManifestName), root);
  } else {
    fs::path lensless_dir, lensed_dir;
    if (fs::is_directory(root / "lensless") && fs::is_directory(root / "lensed")) {
      lensless_dir = "lensless";
      lensed_dir = "lensed";
    } else if (fs::is_directory(root / "diffuser_images") && fs::is_directory(root / "ground_truth_lensed")) {
      lensless_dir = "diffuser_images";
      lensed_dir = "ground_truth_lensed";
    } else {
      throw InputError("unrecognized dataset layout under " + root.string() +
                       " (expected manifest.json, lensless/+lensed/ or diffuser_images/+ground_truth_lensed/)");
    }
    const auto psf = find_psf(root);
    if (!psf) throw InputError("missing PSF: expected psf.npy or psf.png under " + root.string());
    m.root = root;
    m.psf = *psf;
    const auto lensless = list_images(root / lensless_dir);
    const auto lensed = list_images(root / lensed_dir);
    std::set<std::string> formats;
    for (const auto& [id, path] : lensless) {
      const auto it = lensed.find(id);
      if (it == lensed.end()) throw InputError("missing lensed file for id '" + id + "'");
      m.entries.push_back({id, lensless_dir / path.filename(), lensed_dir / it->second.filename()});
      formats.insert(path.extension().string().substr(1));
    }
    m.pixel_format = formats.size() == 1 ? *formats.begin() : "mixed";
    m.downsample = options.downsample;
    m.downsample_kernel = options.kernel;
    m.normalize_psf = options.normalize_psf;
    if (fs::exists(root / "roi.json")) {
      try {
        m.roi = roi_from_json(nlohmann::json::parse(io::read_text(root / "roi.json")));
      } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("roi.json: ") + e.what());
      }
    }
  }
  m.validate();

  if (options.verify) {
    std::string failures;
    std::size_t failed = 0;
    for (const auto& e : m.entries) {
      for (const auto* p : {&e.lensless, &e.lensed}) {
        try {
          (void)io::read_image(m.root / *p);
        } catch (const Error& err) {
          ++failed;
          failures += "\n  " + e.id + ": " + err.what();
          break;
        }
      }
    }
    try {
      (void)load_psf(m);
    } catch (const Error& err) {
      ++failed;
      failures += std::string("\n  psf: ") + err.what();
    }
    if (failed > 0) throw InputError(std::to_string(failed) + " unreadable file(s):" + failures);
  }
  return m;
}

RealImage downsample_image(const RealImage& img, std::size_t factor, Resample kernel) {
  if (factor == 0) throw InputError("downsample: factor must be >= 1");
  if (factor == 1) return img;
  const std::size_t h = img.height() / factor, w = img.width() / factor;
  if (h == 0 || w == 0) throw InputError("downsample: factor larger than the image");
  if (kernel == Resample::bilinear) return metrics::resize_bilinear(img, h, w);
  RealImage out(h, w, img.channels());
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t ch = 0; ch < img.channels(); ++ch) {
        out.at(r, c, ch) = img.at(r * factor + factor / 2, c * factor + factor / 2, ch);
      }
    }
  }
  return out;
}

RealImage load_measurement(const DatasetManifest& m, const ManifestEntry& e) {
  return downsample_image(io::read_image(m.root / e.lensless), m.downsample, m.downsample_kernel);
}

RealImage load_ground_truth(const DatasetManifest& m, const ManifestEntry& e) {
  return downsample_image(io::read_image(m.root / e.lensed), m.downsample, m.downsample_kernel);
}

optics::Psf load_psf(const DatasetManifest& m) {
  optics::Psf psf = io::read_psf(m.root / m.psf, m.normalize_psf);
  if (m.downsample > 1) {
    psf.image = downsample_image(psf.image, m.downsample, m.downsample_kernel);
    if (psf.normalization == optics::Normalization::unit_sum) optics::normalize_unit_sum(psf.image);
    psf.geometry = {};
  }
  psf.validate();
  return psf;
}

std::vector<NamedImage> procedural_scenes(std::uint64_t seed, std::size_t count, std::size_t height,
                                          std::size_t width, std::size_t channels) {
  std::vector<NamedImage> out;
  for (std::size_t i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "scene_%04zu", i);
    out.push_back({id, procedural_scene(derive_seed(seed, i), height, width, channels)});
  }
  return out;
}

std::vector<NamedImage> ground_truth_scenes(const DatasetManifest& m) {
  std::vector<NamedImage> out;
  for (const auto& e : m.entries) out.push_back({e.id, load_ground_truth(m, e)});
  return out;
}

DatasetManifest simulate_dataset(const std::vector<NamedImage>& scenes, const optics::Psf& psf,
                                 const forward::NoiseSpec& noise, const fs::path& out) {
  if (scenes.empty()) throw InputError("simulate_dataset: no scenes");
  fs::create_directories(out / "lensless");
  fs::create_directories(out / "lensed");
  DatasetManifest m;
  m.root = out;
  m.psf = "psf.npy";
  m.pixel_format = "npy";
  io::write_psf(out / m.psf, psf);
  io::write_text(out / "noise.json", io::noise_to_json(noise));
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& s = scenes[i];
    forward::NoiseSpec spec = noise;
    spec.seed = derive_seed(noise.seed, i);
    const RealImage meas = forward::add_noise(forward::convolve_lsi(s.image, psf), spec);
    ManifestEntry e{s.id, fs::path("lensless") / (s.id + ".npy"), fs::path("lensed") / (s.id + ".npy")};
    io::write_npy(out / e.lensless, meas);
    io::write_npy(out / e.lensed, s.image);
    m.entries.push_back(std::move(e));
  }
  m.validate();
  io::write_text(out / kManifestName, m.to_json());
  return m;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        {
          std::lock_guard lock(failure_mutex);
          if (failure) return;
        }
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

metrics::MetricsReport score_cases(const std::vector<BenchCase>& cases,
                                   const std::vector<recover::PipelineConfig>& methods,
                                   const std::optional<metrics::RoiSpec>& roi, const RunOptions& options) {
  return score(cases.size(), [&](std::size_t i) { return cases[i]; }, methods, roi, options);
}

metrics::MetricsReport run_benchmark(const DatasetManifest& data,
                                     const std::vector<recover::PipelineConfig>& methods,
                                     const RunOptions& options) {
  if (data.entries.empty()) throw InputError("run_benchmark: empty manifest");
  const optics::Psf psf = load_psf(data);
  auto report = score(
      data.entries.size(),
      [&](std::size_t i) {
        const auto& e = data.entries[i];
        return BenchCase{e.id, "all", load_measurement(data, e), psf, load_ground_truth(data, e)};
      },
      methods, data.roi, options);
  report.fingerprint["psf_hash"] = std::to_string(content_hash(psf.image));
  report.fingerprint["images"] = std::to_string(data.entries.size());
  return report;
}

void SweepConfig::validate() const {
  pipeline.validate();
  scene_dims_check(scenes);
}

std::string level_label(double db) {
  if (std::isinf(db)) return "clean";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%gdB", db);
  return buf;
}

metrics::MetricsReport snr_robustness_sweep(const SweepConfig& cfg) {
  cfg.validate();
  if (!cfg.psf) throw InputError("snr sweep: no PSF");
  const auto levels = cfg.levels.empty() ? kSnrLevels : cfg.levels;
  const std::size_t n = cfg.scenes.size();
  std::vector<RealImage> clean(n);
  parallel_for(n, cfg.run.threads, [&](std::size_t i) { clean[i] = forward::convolve_lsi(cfg.scenes[i].image, *cfg.psf); });

  auto report = score(
      n * levels.size(),
      [&](std::size_t cell) {
        const std::size_t li = cell / n, i = cell % n;
        const forward::NoiseSpec spec{forward::NoiseKind::shot_poisson, levels[li],
                                      derive_seed(derive_seed(cfg.master_seed, li), i)};
        return BenchCase{cfg.scenes[i].id, "snr=" + level_label(levels[li]), forward::add_noise(clean[i], spec),
                         *cfg.psf, cfg.scenes[i].image};
      },
      {cfg.pipeline}, std::nullopt, cfg.run);

  // PSNR non-decreasing in input SNR, per image.
  std::vector<double> sorted = levels;
  std::sort(sorted.begin(), sorted.end());
  std::map<std::pair<std::string, std::string>, double> psnr;
  for (const auto& r : report.rows) psnr[{r.id, r.stratum}] = r.psnr_db;
  std::size_t monotone = 0;
  for (const auto& s : cfg.scenes) {
    bool ok = true;
    for (std::size_t k = 1; k < sorted.size(); ++k) {
      ok = ok && psnr[{s.id, "snr=" + level_label(sorted[k])}] >= psnr[{s.id, "snr=" + level_label(sorted[k - 1])}];
    }
    monotone += ok ? 1 : 0;
  }
  report.fingerprint["sweep"] = "snr";
  report.fingerprint["master_seed"] = std::to_string(cfg.master_seed);
  report.fingerprint["psnr_nondecreasing_fraction"] = format_double(static_cast<double>(monotone) / static_cast<double>(n));
  return report;
}

metrics::MetricsReport psf_corruption_sweep(const SweepConfig& cfg) {
  cfg.validate();
  if (!cfg.psf) throw InputError("psf sweep: no PSF");
  const auto levels = cfg.levels.empty() ? kPsfSnrLevels : cfg.levels;
  const std::size_t n = cfg.scenes.size();
  std::vector<RealImage> meas(n);
  parallel_for(n, cfg.run.threads, [&](std::size_t i) {
    forward::NoiseSpec spec = cfg.noise;
    spec.seed = derive_seed(cfg.master_seed, i);
    meas[i] = forward::add_noise(forward::convolve_lsi(cfg.scenes[i].image, *cfg.psf), spec);
  });
  std::vector<optics::Psf> psfs;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    psfs.push_back(corrupt_psf(*cfg.psf, levels[li], derive_seed(cfg.master_seed ^ 0x5053465f434f5252ULL, li)));
  }
  auto report = score(
      n * levels.size(),
      [&](std::size_t cell) {
        const std::size_t li = cell / n, i = cell % n;
        return BenchCase{cfg.scenes[i].id, "psf_snr=" + level_label(levels[li]), meas[i], psfs[li],
                         cfg.scenes[i].image};
      },
      {cfg.pipeline}, std::nullopt, cfg.run);
  report.fingerprint["sweep"] = "psf";
  report.fingerprint["master_seed"] = std::to_string(cfg.master_seed);
  report.fingerprint["psf_corruption"] = "gaussian, clipped at 0, renormalized";
  return report;
}

metrics::MetricsReport multimask_sweep(const SweepConfig& cfg) {
  cfg.validate();
  if (cfg.seeds.empty()) throw InputError("mask sweep: no seeds");
  const std::size_t n = cfg.scenes.size();
  const auto& first = cfg.scenes.front().image;
  for (const auto& s : cfg.scenes) {
    if (!s.image.same_shape(first)) throw InputError("mask sweep: scenes must share one shape");
  }
  const auto geometry = optics::OpticalGeometry::for_sensor(first.height(), first.width(), cfg.sensor_pitch);
  std::vector<optics::Psf> psfs(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.run.threads, [&](std::size_t k) {
    psfs[k] = optics::simulate_psf(optics::random_mask(cfg.seeds[k]), geometry, optics::kDefaultWavelengths,
                                   cfg.variant);
  });

  auto report = score(
      n * cfg.seeds.size(),
      [&](std::size_t cell) {
        const std::size_t k = cell / n, i = cell % n;
        forward::NoiseSpec spec = cfg.noise;
        spec.seed = derive_seed(derive_seed(cfg.master_seed, cfg.seeds[k]), i);
        return BenchCase{cfg.scenes[i].id, "mask=" + std::to_string(cfg.seeds[k]),
                         forward::add_noise(forward::convolve_lsi(cfg.scenes[i].image, psfs[k]), spec), psfs[k],
                         cfg.scenes[i].image};
      },
      {cfg.pipeline}, std::nullopt, cfg.run);

  std::vector<double> means;
  for (const auto& a : report.aggregates) {
    if (a.count > 0) means.push_back(a.mean_psnr_db);
  }
  double mean = 0.0, var = 0.0;
  for (double m : means) mean += m / static_cast<double>(means.size());
  for (double m : means) var += (m - mean) * (m - mean);
  const double std = means.size() > 1 ? std::sqrt(var / static_cast<double>(means.size() - 1)) : 0.0;

  const std::size_t n_train = static_cast<std::size_t>(std::llround(0.85 * static_cast<double>(cfg.seeds.size())));
  std::string train, test;
  for (std::size_t k = 0; k < cfg.seeds.size(); ++k) {
    std::string& dst = k < n_train ? train : test;
    dst += (dst.empty() ? "" : ",") + std::to_string(cfg.seeds[k]);
  }
  report.fingerprint["sweep"] = "mask";
  report.fingerprint["master_seed"] = std::to_string(cfg.master_seed);
  report.fingerprint["split"] = "85/15 train/test over mask seeds in list order";
  report.fingerprint["train_seeds"] = train;
  report.fingerprint["test_seeds"] = test;
  report.fingerprint["cross_seed_psnr_mean"] = format_double(mean);
  report.fingerprint["cross_seed_psnr_std"] = format_double(std);
  report.fingerprint["sensor_pitch"] = format_double(cfg.sensor_pitch);
  report.fingerprint["variant"] = optics::to_string(cfg.variant);
  return report;
}

}  // namespace lensless::bench
