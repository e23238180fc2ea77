#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "lensless/recover.hpp"

#define TOML_EXCEPTIONS 1
#include "toml.hpp"

namespace lensless::recover {

std::string to_string(ProcessorKind kind) {
  switch (kind) {
    case ProcessorKind::identity: return "identity";
    case ProcessorKind::gaussian_denoise: return "gaussian_denoise";
    case ProcessorKind::median_denoise: return "median_denoise";
    case ProcessorKind::tv_denoise: return "tv_denoise";
  }
  return "unknown";
}

std::string to_string(InversionKind kind) {
  switch (kind) {
    case InversionKind::wiener: return "wiener";
    case InversionKind::fista_tv: return "fista_tv";
    case InversionKind::admm_tv: return "admm_tv";
  }
  return "unknown";
}

void PipelineConfig::validate() const {
  pre.validate();
  post.validate();
  switch (inversion.kind) {
    case InversionKind::wiener: inversion.wiener.validate(); break;
    case InversionKind::fista_tv: inversion.ista.validate(); break;
    case InversionKind::admm_tv: inversion.admm.validate(); break;
  }
}

std::string PipelineConfig::label() const {
  return to_string(pre.kind) + "+" + to_string(inversion.kind) + "+" + to_string(post.kind);
}

namespace {

void reject_unknown(const toml::table& table, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& [key, value] : table) {
    if (!allowed.contains(std::string(key.str()))) {
      throw InputError("pipeline config: unknown key '" + std::string(key.str()) + "' in " + where);
    }
  }
}

double get_number(const toml::table& t, const char* key, double fallback, const std::string& where) {
  const auto* node = t.get(key);
  if (node == nullptr) return fallback;
  if (auto v = node->value<double>()) return *v;
  throw InputError("pipeline config: " + where + "." + key + " must be a number");
}

std::size_t get_count(const toml::table& t, const char* key, std::size_t fallback,
                      const std::string& where) {
  const auto* node = t.get(key);
  if (node == nullptr) return fallback;
  if (auto v = node->value<std::int64_t>(); v && *v >= 0) return static_cast<std::size_t>(*v);
  throw InputError("pipeline config: " + where + "." + key + " must be a nonnegative integer");
}

std::string get_kind(const toml::table& t, const std::string& where) {
  if (auto v = t["kind"].value<std::string>()) return *v;
  throw InputError("pipeline config: " + where + ".kind is required");
}

ProcessorSpec parse_processor(const toml::table* t, const std::string& where) {
  ProcessorSpec spec;
  if (t == nullptr) return spec;
  const std::string kind = get_kind(*t, where);
  if (kind == "identity") {
    reject_unknown(*t, {"kind"}, where);
  } else if (kind == "gaussian_denoise") {
    reject_unknown(*t, {"kind", "sigma"}, where);
    spec.kind = ProcessorKind::gaussian_denoise;
    spec.sigma = get_number(*t, "sigma", spec.sigma, where);
  } else if (kind == "median_denoise") {
    reject_unknown(*t, {"kind", "radius"}, where);
    spec.kind = ProcessorKind::median_denoise;
    spec.radius = get_count(*t, "radius", spec.radius, where);
  } else if (kind == "tv_denoise") {
    reject_unknown(*t, {"kind", "weight", "iterations"}, where);
    spec.kind = ProcessorKind::tv_denoise;
    spec.weight = get_number(*t, "weight", spec.weight, where);
    spec.iterations = get_count(*t, "iterations", spec.iterations, where);
  } else {
    throw InputError("pipeline config: unknown processor '" + kind + "' in " + where);
  }
  return spec;
}

InversionSpec parse_inversion(const toml::table* t) {
  InversionSpec spec;
  if (t == nullptr) return spec;
  const std::string where = "inversion";
  const std::string kind = get_kind(*t, where);
  if (kind == "wiener") {
    reject_unknown(*t, {"kind", "reg"}, where);
    spec.kind = InversionKind::wiener;
    spec.wiener.reg = get_number(*t, "reg", std::get<double>(spec.wiener.reg), where);
  } else if (kind == "fista_tv") {
    reject_unknown(*t, {"kind", "alpha", "beta", "iterations", "accelerated"}, where);
    spec.kind = InversionKind::fista_tv;
    if (t->contains("alpha")) spec.ista.alpha = get_number(*t, "alpha", 0.0, where);
    spec.ista.beta = get_number(*t, "beta", spec.ista.beta, where);
    spec.ista.iterations = get_count(*t, "iterations", spec.ista.iterations, where);
    if (const auto* node = t->get("accelerated")) {
      auto v = node->value<bool>();
      if (!v) throw InputError("pipeline config: inversion.accelerated must be a boolean");
      spec.ista.accelerated = *v;
    }
  } else if (kind == "admm_tv") {
    reject_unknown(*t, {"kind", "mu1", "mu2", "mu3", "tau", "iterations", "psf_gain", "data_peak", "schedule"}, where);
    spec.kind = InversionKind::admm_tv;
    auto& a = spec.admm;
    a.mu1 = get_number(*t, "mu1", a.mu1, where);
    a.mu2 = get_number(*t, "mu2", a.mu2, where);
    a.mu3 = get_number(*t, "mu3", a.mu3, where);
    a.tau = get_number(*t, "tau", a.tau, where);
    a.iterations = get_count(*t, "iterations", a.iterations, where);
    a.psf_gain = get_number(*t, "psf_gain", a.psf_gain, where);
    a.data_peak = get_number(*t, "data_peak", a.data_peak, where);
    if (const auto* node = t->get("schedule")) {
      const auto* arr = node->as_array();
      if (arr == nullptr) throw InputError("pipeline config: inversion.schedule must be an array of tables");
      for (const auto& entry : *arr) {
        const auto* st = entry.as_table();
        if (st == nullptr) throw InputError("pipeline config: inversion.schedule entries must be tables");
        const std::string sw = "inversion.schedule";
        reject_unknown(*st, {"mu1", "mu2", "mu3", "tau"}, sw);
        a.schedule.push_back({get_number(*st, "mu1", a.mu1, sw), get_number(*st, "mu2", a.mu2, sw),
                              get_number(*st, "mu3", a.mu3, sw), get_number(*st, "tau", a.tau, sw)});
      }
    }
  } else {
    throw InputError("pipeline config: unknown inversion '" + kind + "'");
  }
  return spec;
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    throw InputError(std::string("pipeline config: ") + std::string(e.description()));
  }
  reject_unknown(root, {"pre", "inversion", "post", "psf"}, "top level");
  PipelineConfig cfg;
  cfg.pre = parse_processor(root["pre"].as_table(), "pre");
  cfg.inversion = parse_inversion(root["inversion"].as_table());
  cfg.post = parse_processor(root["post"].as_table(), "post");
  for (const char* key : {"pre", "inversion", "post"}) {
    if (root.contains(key) && root[key].as_table() == nullptr) {
      throw InputError(std::string("pipeline config: '") + key + "' must be a table");
    }
  }
  if (const auto* node = root.get("psf")) {
    auto v = node->value<std::string>();
    if (!v) throw InputError("pipeline config: psf must be a string path");
    cfg.psf_path = *v;
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read pipeline config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_pipeline_config(ss.str());
}

std::string to_toml(const PipelineConfig& cfg) {
  toml::table root;
  auto processor = [](const ProcessorSpec& p) {
    toml::table t{{"kind", to_string(p.kind)}};
    if (p.kind == ProcessorKind::gaussian_denoise) t.insert("sigma", p.sigma);
    if (p.kind == ProcessorKind::median_denoise) t.insert("radius", static_cast<std::int64_t>(p.radius));
    if (p.kind == ProcessorKind::tv_denoise) {
      t.insert("weight", p.weight);
      t.insert("iterations", static_cast<std::int64_t>(p.iterations));
    }
    return t;
  };
  if (cfg.psf_path) root.insert("psf", *cfg.psf_path);
  root.insert("pre", processor(cfg.pre));
  toml::table inv{{"kind", to_string(cfg.inversion.kind)}};
  switch (cfg.inversion.kind) {
    case InversionKind::wiener:
      if (const auto* k = std::get_if<double>(&cfg.inversion.wiener.reg)) inv.insert("reg", *k);
      break;
    case InversionKind::fista_tv: {
      const auto& p = cfg.inversion.ista;
      if (p.alpha) inv.insert("alpha", *p.alpha);
      inv.insert("beta", p.beta);
      inv.insert("iterations", static_cast<std::int64_t>(p.iterations));
      inv.insert("accelerated", p.accelerated);
      break;
    }
    case InversionKind::admm_tv: {
      const auto& p = cfg.inversion.admm;
      inv.insert("mu1", p.mu1);
      inv.insert("mu2", p.mu2);
      inv.insert("mu3", p.mu3);
      inv.insert("tau", p.tau);
      inv.insert("iterations", static_cast<std::int64_t>(p.iterations));
      inv.insert("psf_gain", p.psf_gain);
      inv.insert("data_peak", p.data_peak);
      if (!p.schedule.empty()) {
        toml::array sched;
        for (const auto& s : p.schedule) {
          sched.push_back(toml::table{{"mu1", s.mu1}, {"mu2", s.mu2}, {"mu3", s.mu3}, {"tau", s.tau}});
        }
        inv.insert("schedule", std::move(sched));
      }
      break;
    }
  }
  root.insert("inversion", std::move(inv));
  root.insert("post", processor(cfg.post));
  std::stringstream ss;
  ss << root << "\n";
  return ss.str();
}

RealImage invert(const RealImage& meas, const optics::Psf& psf, const InversionSpec& spec) {
  switch (spec.kind) {
    case InversionKind::wiener: return wiener_filter(meas, psf, spec.wiener);
    case InversionKind::fista_tv: return fista_tv(meas, psf, spec.ista);
    case InversionKind::admm_tv: return admm_tv(meas, psf, spec.admm);
  }
  throw InputError("invert: unknown inversion");
}

RealImage run_pipeline(const RealImage& meas, const optics::Psf& psf, const PipelineConfig& cfg,
                       PipelineRecord* record) {
  cfg.validate();
  PipelineRecord local;
  PipelineRecord& rec = record ? *record : local;
  rec = {};
  rec.input_hash = content_hash(meas);

  RealImage pre = apply_processor(meas, cfg.pre);
  rec.stages.push_back({"pre", to_string(cfg.pre.kind), content_hash(pre)});
  RealImage inverted = invert(pre, psf, cfg.inversion);
  rec.stages.push_back({"inversion", to_string(cfg.inversion.kind), content_hash(inverted)});
  RealImage post = apply_processor(inverted, cfg.post);
  rec.stages.push_back({"post", to_string(cfg.post.kind), content_hash(post)});
  return post;
}

}  // namespace lensless::recover
