#include "doctest.h"
#include "helpers.hpp"

#include "lensless/forward.hpp"
#include "lensless/metrics.hpp"
#include "lensless/recover.hpp"
#include "lensless/scenes.hpp"

using namespace lensless;
using namespace lensless::recover;

namespace {

optics::Psf random_psf(std::uint64_t seed, std::size_t h, std::size_t w, std::size_t c) {
  return optics::Psf::from_image(testutil::random_image(seed, h, w, c), optics::Normalization::unit_sum);
}

// Piecewise-constant blocks: sparse gradient.
RealImage block_scene(std::size_t n) {
  RealImage img(n, n, 1);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) img.at(r, c) = 0.2 + 0.5 * ((r / 4 + c / 6) % 2) + (r > n / 2 ? 0.2 : 0.0);
  return img;
}

// Mostly a delta with a little spread: well conditioned.
optics::Psf soft_psf(std::size_t channels) {
  RealImage k(5, 5, channels, 0.01);
  for (std::size_t c = 0; c < channels; ++c) {
    k.at(2, 2, c) = 1.0;
    k.at(1, 2, c) = k.at(2, 3, c) = 0.2;
  }
  return optics::Psf::from_image(k, optics::Normalization::unit_sum);
}

}  // namespace

TEST_CASE("soft_threshold") {
  CHECK(soft_threshold(0.3, 0.5) == 0.0);
  CHECK(soft_threshold(1.0, 0.5) == 0.5);
  CHECK(soft_threshold(-2.0, 0.5) == -1.5);
  const std::vector<double> v{-3.0, -0.1, 0.0, 0.7, 9.5};
  CHECK(soft_threshold(v, 0.0) == v);
  CHECK(soft_threshold(v, 1.0) == std::vector<double>{-2.0, 0.0, 0.0, 0.0, 8.5});
  CHECK_THROWS_AS(soft_threshold(v, -1.0), InputError);
}

TEST_CASE("TV gradient operators") {
  const RealImage flat(6, 7, 2, 0.3);
  const auto g = TvOps::apply(flat);
  CHECK(g.dy.energy() == 0.0);
  CHECK(g.dx.energy() == 0.0);

  RealImage ramp(5, 8, 1);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 8; ++c) ramp.at(r, c) = 0.25 * static_cast<double>(c);
  const auto gr = TvOps::apply(ramp);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c + 1 < 8; ++c) CHECK(gr.dx.at(r, c) == doctest::Approx(0.25));
  CHECK(gr.dy.energy() == 0.0);

  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto x = testutil::random_image(s, 9, 11, 2, -1.0, 1.0);
    const Gradient y{testutil::random_image(s + 50, 9, 11, 2, -1.0, 1.0),
                     testutil::random_image(s + 90, 9, 11, 2, -1.0, 1.0)};
    const auto dx = TvOps::apply(x);
    const double lhs = dot(dx.dy.samples(), y.dy.samples()) + dot(dx.dx.samples(), y.dx.samples());
    const double rhs = dot(x.samples(), TvOps::adjoint(y).samples());
    CHECK(std::abs(lhs - rhs) < 1e-12 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("prox_tv lowers the prox objective") {
  const auto v = testutil::random_image(3, 16, 16, 1);
  CHECK(prox_tv(v, 0.0) == v);
  auto objective = [&](const RealImage& x, double w) {
    double fid = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) fid += std::pow(x.samples()[i] - v.samples()[i], 2);
    const auto g = TvOps::apply(x);
    double tv = 0.0;
    for (double e : g.dy.samples()) tv += std::abs(e);
    for (double e : g.dx.samples()) tv += std::abs(e);
    return 0.5 * fid + w * tv;
  };
  const auto p = prox_tv(v, 0.1);
  CHECK(objective(p, 0.1) < objective(v, 0.1));
  CHECK(objective(p, 0.1) <= objective(RealImage(16, 16, 1, 0.5), 0.1));
}

TEST_CASE("wiener_filter: delta PSF with tiny reg returns the measurement") {
  const auto meas = testutil::random_image(4, 10, 10, 3);
  const auto out = wiener_filter(meas, optics::delta_psf(10, 10, 3), {1e-12});
  CHECK(testutil::rel_err(out, meas) < 1e-6);
}

TEST_CASE("wiener_filter: single frequency bin") {
  // P = 2, X = 3, N = 0 -> Y = 6 and X_hat = 2 * 6 / (4 + 1)
  const auto psf = optics::Psf::from_image(RealImage(1, 1, 1, 2.0));
  const auto out = wiener_filter(RealImage(1, 1, 1, 6.0), psf, {1.0});
  CHECK(out.at(0, 0) == doctest::Approx(2.4).epsilon(1e-14));
}

TEST_CASE("wiener_filter is linear in the measurement") {
  const auto psf = random_psf(5, 6, 6, 1);
  const auto y1 = testutil::random_image(6, 12, 12, 1), y2 = testutil::random_image(7, 12, 12, 1);
  RealImage mix(12, 12, 1);
  for (std::size_t i = 0; i < mix.size(); ++i) mix.samples()[i] = 3.0 * y1.samples()[i] + y2.samples()[i];
  const auto a = wiener_filter(y1, psf, {1e-3}), b = wiener_filter(y2, psf, {1e-3});
  RealImage expect(12, 12, 1);
  expect.signed_intermediate = true;
  for (std::size_t i = 0; i < mix.size(); ++i) expect.samples()[i] = 3.0 * a.samples()[i] + b.samples()[i];
  CHECK(testutil::rel_err(wiener_filter(mix, psf, {1e-3}), expect) < 1e-12);
}

TEST_CASE("wiener_filter errors") {
  // [1, 1] on a 2-sample grid has a spectral zero at the Nyquist bin
  const auto psf = optics::Psf::from_image(RealImage(1, 2, 1, 1.0));
  CHECK_THROWS_AS(wiener_filter(RealImage(1, 1, 1, 1.0), psf, {0.0}), NumericalError);
  CHECK_NOTHROW(wiener_filter(RealImage(1, 1, 1, 1.0), psf, {1e-3}));
  CHECK_THROWS_AS(wiener_filter(RealImage(1, 1, 1, 1.0), psf, {-1.0}), InputError);
  CHECK_THROWS_AS(wiener_filter(RealImage(4, 4, 3), optics::delta_psf(4, 4, 1), {1e-3}), InputError);
  CHECK_THROWS_AS(wiener_filter(RealImage(4, 4, 1), optics::delta_psf(4, 4, 1), {RealImage(3, 3, 1)}),
                  InputError);
}

TEST_CASE("direct_inverse") {
  forward::DenseSystem id{Eigen::MatrixXd::Identity(4, 4), std::nullopt, std::nullopt};
  const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(4, 1.0, 2.0);
  CHECK((direct_inverse(id, y) - y).norm() == 0.0);

  for (std::uint64_t s = 0; s < 10; ++s) {
    std::mt19937_64 rng(s);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(8, 8) * 2.0;
    for (Eigen::Index i = 0; i < 64; ++i) H.data()[i] += d(rng);
    Eigen::VectorXd b(8);
    for (auto& e : b) e = d(rng);
    const forward::DenseSystem sys{H, std::nullopt, std::nullopt};
    const auto x = direct_inverse(sys, b);
    CHECK((forward::dense_forward(sys, x) - b).norm() / b.norm() < 1e-10);
  }

  Eigen::MatrixXd sing = Eigen::MatrixXd::Ones(3, 3);
  CHECK_THROWS_AS(direct_inverse({sing, std::nullopt, std::nullopt}, Eigen::VectorXd::Ones(3)), NumericalError);
  Eigen::MatrixXd near = Eigen::MatrixXd::Identity(3, 3);
  near(2, 2) = 1e-14;
  CHECK_THROWS_AS(direct_inverse({near, std::nullopt, std::nullopt}, Eigen::VectorXd::Ones(3)), NumericalError);
}

TEST_CASE("lipschitz_estimate bounds the normal operator") {
  const auto psf = random_psf(8, 5, 5, 1);
  const forward::LsiOperator op(psf, 16, 16);
  const double L = lipschitz_estimate(op);
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto v = testutil::random_image(200 + s, 16, 16, 1, -1.0, 1.0);
    const double lhs = std::sqrt(op.adjoint(op.apply(v)).energy());
    CHECK(lhs <= L * std::sqrt(v.energy()) * (1.0 + 1e-6));
  }
}

TEST_CASE("fista_tv: delta PSF without regularization reproduces the measurement") {
  const auto meas = testutil::random_image(9, 12, 12, 1);
  IstaParams p;
  p.beta = 0.0;
  p.iterations = 50;
  const auto x = fista_tv(meas, optics::delta_psf(12, 12, 1), p);
  CHECK(testutil::rel_err(x, meas) < 1e-6);
}

TEST_CASE("fista_tv recovers a sparse-gradient scene") {
  const auto scene = block_scene(24);
  const auto psf = soft_psf(1);
  const auto meas = forward::convolve_lsi(scene, psf);
  IstaParams p;
  p.beta = 1e-5;
  p.iterations = 300;
  SolveReport rep;
  const auto x = fista_tv(meas, psf, p, &rep);
  CHECK(testutil::rel_err(x, scene) < 0.01);
  CHECK(rep.objective.size() == 301);
  CHECK(rep.objective.back() <= rep.objective.front());
}

TEST_CASE("ISTA objective is non-increasing") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto psf = random_psf(30 + s, 5, 5, 1);
    const auto meas = forward::convolve_lsi(testutil::random_image(40 + s, 16, 16, 1), psf);
    IstaParams p;
    p.beta = 1e-3;
    p.iterations = 60;
    p.accelerated = false;
    SolveReport rep;
    fista_tv(meas, psf, p, &rep);
    for (std::size_t k = 1; k < rep.objective.size(); ++k) {
      CHECK(rep.objective[k] <= rep.objective[k - 1] * (1.0 + 1e-9) + 1e-15);
    }
  }
}

TEST_CASE("FISTA beats ISTA on the same budget") {
  std::size_t wins = 0;
  const std::size_t trials = 10;
  for (std::uint64_t s = 0; s < trials; ++s) {
    const auto psf = random_psf(60 + s, 7, 7, 1);
    const auto meas = forward::convolve_lsi(testutil::random_image(70 + s, 16, 16, 1), psf);
    IstaParams p;
    p.beta = 1e-3;
    p.iterations = 40;
    SolveReport fista, ista;
    fista_tv(meas, psf, p, &fista);
    p.accelerated = false;
    fista_tv(meas, psf, p, &ista);
    wins += fista.objective.back() <= ista.objective.back() ? 1 : 0;
  }
  CHECK(wins * 10 >= trials * 9);
}

TEST_CASE("fista_tv backs off an unstable step") {
  IstaParams p;
  p.alpha = 100.0;
  p.iterations = 5;
  SolveReport rep;
  fista_tv(testutil::random_image(1, 8, 8, 1), random_psf(2, 3, 3, 1), p, &rep);
  CHECK(rep.warnings.size() == 1);
  CHECK(rep.alpha == doctest::Approx(1.0 / rep.lipschitz));
  IstaParams bad;
  bad.beta = -1.0;
  CHECK_THROWS_AS(fista_tv(RealImage(4, 4, 1), optics::delta_psf(4, 4, 1), bad), InputError);
}

TEST_CASE("admm_tv: zero measurement stays zero") {
  const auto out = admm_tv(RealImage(16, 16, 3), random_psf(3, 16, 16, 3), AdmmParams{});
  CHECK(out.sum() == 0.0);
  CHECK(out.height() == 16);
}

TEST_CASE("admm_tv: delta PSF recovers clean scenes above 40 dB") {
  for (std::uint64_t s = 0; s < 2; ++s) {
    const auto scene = bench::procedural_scene(s, 64, 64, 3);
    const auto psf = optics::delta_psf(64, 64, 3);
    const auto out = admm_tv(forward::convolve_lsi(scene, psf), psf, AdmmParams{});
    CHECK(metrics::psnr(out, scene, 1.0) > 40.0);
  }
}

TEST_CASE("admm_tv output is nonnegative and deterministic") {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto meas = testutil::random_image(80 + s, 20, 20, 1);
    AdmmParams p;
    p.iterations = 20;
    const auto a = admm_tv(meas, random_psf(90 + s, 9, 9, 1), p);
    for (double v : a.samples()) CHECK(v >= 0.0);
    CHECK(a == admm_tv(meas, random_psf(90 + s, 9, 9, 1), p));
  }
}

TEST_CASE("admm_tv parameter validation and schedules") {
  AdmmParams p;
  p.iterations = 0;
  CHECK_THROWS_AS(p.validate(), InputError);
  p = {};
  p.tau = 0.0;
  CHECK_THROWS_AS(p.validate(), InputError);
  p = {};
  p.data_peak = -1.0;
  CHECK_THROWS_AS(p.validate(), InputError);
  p = {};
  p.iterations = 3;
  p.schedule = {{1e-6, 1e-5, 4e-5, 1e-4}};
  CHECK_THROWS_AS(p.validate(), InputError);

  // a constant schedule is the same as the scalars
  const auto meas = testutil::random_image(5, 12, 12, 1);
  const auto psf = random_psf(6, 5, 5, 1);
  AdmmParams plain;
  plain.iterations = 10;
  AdmmParams sched = plain;
  sched.schedule.assign(10, {plain.mu1, plain.mu2, plain.mu3, plain.tau});
  CHECK(admm_tv(meas, psf, plain) == admm_tv(meas, psf, sched));
  sched.schedule[5].tau = 1e-2;
  CHECK(!(admm_tv(meas, psf, plain) == admm_tv(meas, psf, sched)));
}

TEST_CASE("processors") {
  const RealImage flat(10, 10, 3, 0.4);
  const auto smooth = gaussian_denoise(flat, 1.5);
  for (double v : smooth.samples()) CHECK(v == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(median_denoise(flat, 2) == flat);

  RealImage spike(9, 9, 1, 0.1);
  spike.at(4, 4) = 5.0;
  CHECK(median_denoise(spike, 1).at(4, 4) == 0.1);
  const auto blurred = gaussian_denoise(spike, 1.0);
  CHECK(blurred.at(4, 4) < 5.0);
  CHECK(blurred.sum() == doctest::Approx(spike.sum()).epsilon(1e-12));

  const auto noisy = testutil::random_image(7, 16, 16, 1);
  auto tv = [](const RealImage& x) {
    const auto g = TvOps::apply(x);
    double s = 0.0;
    for (double e : g.dy.samples()) s += std::abs(e);
    for (double e : g.dx.samples()) s += std::abs(e);
    return s;
  };
  const auto den = tv_denoise(noisy, 0.1, 100);
  CHECK(tv(den) < tv(noisy));
  for (double v : den.samples()) CHECK(v >= 0.0);

  ProcessorSpec bad;
  bad.kind = ProcessorKind::gaussian_denoise;
  bad.sigma = 0.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
  CHECK(apply_processor(noisy, ProcessorSpec{}) == noisy);
}

TEST_CASE("run_pipeline with identity processors equals the bare inversion") {
  const auto scene = bench::procedural_scene(3, 24, 24, 3);
  const auto psf = random_psf(11, 24, 24, 3);
  const auto meas = forward::convolve_lsi(scene, psf);
  PipelineConfig cfg;
  cfg.inversion.admm.iterations = 15;
  PipelineRecord rec;
  const auto out = run_pipeline(meas, psf, cfg, &rec);
  CHECK(out == admm_tv(meas, psf, cfg.inversion.admm));
  CHECK(out == run_pipeline(meas, psf, cfg));
  REQUIRE(rec.stages.size() == 3);
  CHECK(rec.input_hash == content_hash(meas));
  CHECK(rec.stages[0].output_hash == content_hash(meas));
  CHECK(rec.stages[1].output_hash == content_hash(out));
  CHECK(rec.stages[2].kind == "identity");
  CHECK(cfg.label() == "identity+admm_tv+identity");

  cfg.inversion.kind = InversionKind::wiener;
  CHECK(run_pipeline(meas, psf, cfg) == wiener_filter(meas, psf, cfg.inversion.wiener));
}

TEST_CASE("pipeline TOML") {
  const auto cfg = parse_pipeline_config(R"(
psf = "psf.npy"
[pre]
kind = "gaussian_denoise"
sigma = 1.5
[inversion]
kind = "admm_tv"
mu1 = 2e-6
iterations = 2
psf_gain = 0.0
[[inversion.schedule]]
tau = 1e-3
[[inversion.schedule]]
mu2 = 3e-5
[post]
kind = "tv_denoise"
weight = 0.01
)");
  CHECK(cfg.pre.kind == ProcessorKind::gaussian_denoise);
  CHECK(cfg.pre.sigma == 1.5);
  CHECK(cfg.inversion.admm.mu1 == 2e-6);
  CHECK(cfg.inversion.admm.psf_gain == 0.0);
  CHECK(cfg.inversion.admm.data_peak == 100.0);
  REQUIRE(cfg.inversion.admm.schedule.size() == 2);
  CHECK(cfg.inversion.admm.schedule[0].tau == 1e-3);
  CHECK(cfg.inversion.admm.schedule[0].mu1 == 2e-6);
  CHECK(cfg.inversion.admm.schedule[1].mu2 == 3e-5);
  CHECK(cfg.post.kind == ProcessorKind::tv_denoise);
  CHECK(cfg.psf_path == "psf.npy");

  const auto again = parse_pipeline_config(to_toml(cfg));
  CHECK(to_toml(again) == to_toml(cfg));
  CHECK(again.inversion.admm.schedule[1].mu2 == 3e-5);

  const auto defaults = parse_pipeline_config("");
  CHECK(defaults.label() == "identity+admm_tv+identity");

  for (const char* bad : {"foo = 1", "[pre]\nkind = \"identity\"\nsigma = 1.0", "[inversion]\nkind = \"magic\"",
                          "[inversion]\nkind = \"wiener\"\nreg = -1.0", "[post]\nweight = 1.0", "[pre",
                          "[inversion]\nkind = \"admm_tv\"\niterations = 3\n[[inversion.schedule]]\ntau = 1.0"}) {
    CHECK_THROWS_AS(parse_pipeline_config(bad), InputError);
  }
}
