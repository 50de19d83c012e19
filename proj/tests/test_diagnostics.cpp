// Diagnostics: spectra against closed forms and finite differences, forced
// recursion dynamics, Monte Carlo robustness against spectral bounds, and the
// sweep/ablation drivers on miniature tasks.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <variant>
#include <vector>

#include "helpers.hpp"
#include "pgnn/diagnostics.hpp"

namespace diag = pgnn::diag;
namespace net = pgnn::net;
namespace shaping = pgnn::shaping;
namespace tasks = pgnn::tasks;
namespace train = pgnn::train;
using pgnn::ShapeError;
using pgnn::ValidationError;
using pgnn::linalg::Matrix;
using pgnn::linalg::Vector;
using testutil::random_matrix;
using testutil::random_vector;

namespace {

// central-difference Jacobian of an arbitrary vector map
template <class Fn>
Matrix fd_jacobian(Fn&& fn, const Vector& x, double h = 1e-5) {
  const Vector y0 = fn(x);
  Matrix j(y0.size(), x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    Vector xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    const Vector yp = fn(xp);
    const Vector ym = fn(xm);
    for (std::size_t i = 0; i < y0.size(); ++i) j(i, k) = (yp[i] - ym[i]) / (2.0 * h);
  }
  return j;
}

net::StructuredLayer scaling_layer(std::size_t dim, double factor) {
  Vector d(dim);
  for (std::size_t i = 0; i < dim; ++i) d[i] = factor;
  return net::StructuredLayer(Matrix::identity(dim),
                              shaping::ShapingOperator::diagonal_scale(d), std::nullopt,
                              false, false);
}

// deterministic estimate of E||A u||, u standard normal, from A's spectrum
double mean_image_norm(const std::vector<double>& svals, std::size_t draws,
                       std::uint64_t seed) {
  double total = 0.0;
  for (std::size_t d = 0; d < draws; ++d) {
    double sq = 0.0;
    for (std::size_t k = 0; k < svals.size(); ++k) {
      const double g = pgnn::rng::normal_at(seed, d * svals.size() + k);
      sq += svals[k] * svals[k] * g * g;
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(draws);
}

bool logs_identical(const train::TrainLog& a, const train::TrainLog& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& ra = a.records[i];
    const auto& rb = b.records[i];
    if (ra.epoch != rb.epoch || ra.train_loss != rb.train_loss ||
        ra.grad_norm != rb.grad_norm || ra.val_loss != rb.val_loss ||
        ra.residual_norms != rb.residual_norms)
      return false;
  }
  return true;
}

}  // namespace

// ============================================================================
// Jacobian spectra
// ============================================================================

TEST_CASE("jacobian_spectrum: correction-disabled layer equals the effective map's spectrum") {
  const std::size_t dim = 6;
  auto op = shaping::ShapingOperator::dct_band(dim, dim, {0, 1, 2});
  net::StructuredLayer layer(random_matrix(dim, dim, 21), op, std::nullopt, false, false);
  const std::vector<double> expected =
      pgnn::linalg::svd_values(shaping::apply_shaping(op, layer.weight).matrix);

  net::Network model(std::vector<net::Layer>{layer});
  std::vector<Vector> probes = {random_vector(dim, 1), random_vector(dim, 2),
                                random_vector(dim, 3)};
  diag::SpectrumReport report = diag::jacobian_spectrum(model, probes);

  REQUIRE(report.entries.size() == probes.size());
  for (const diag::SpectrumEntry& e : report.entries) {
    REQUIRE(e.singular_values.size() == expected.size());
    for (std::size_t k = 0; k < expected.size(); ++k)
      CHECK(std::abs(e.singular_values[k] - expected[k]) < 1e-10);
  }
  for (std::size_t k = 0; k < expected.size(); ++k)
    CHECK(std::abs(report.mean_spectrum[0][k] - expected[k]) < 1e-10);
}

TEST_CASE("jacobian_spectrum: identity net gives unit spectrum") {
  const std::size_t dim = 5;
  net::StructuredLayer layer(Matrix::identity(dim), shaping::ShapingOperator::identity(),
                             std::nullopt, false, false);
  net::Network model(std::vector<net::Layer>{layer});
  diag::SpectrumReport report =
      diag::jacobian_spectrum(model, {random_vector(dim, 4)});
  for (double s : report.entries[0].singular_values)
    CHECK(std::abs(s - 1.0) < 1e-12);
  CHECK(std::abs(report.entries[0].condition - 1.0) < 1e-12);
}

TEST_CASE("jacobian_spectrum: matches finite differences on a two-layer net") {
  const std::size_t dim = 5;
  auto l0 = testutil::random_structured_layer(
      dim, dim, shaping::ShapingOperator::learned_projection(dim), 31, true, false);
  net::DenseLayer l1(random_matrix(4, dim, 32), random_vector(4, 33),
                     net::Activation::tanh);
  net::Network model(std::vector<net::Layer>{l0, l1});

  const Vector probe = random_vector(dim, 35);
  diag::SpectrumReport report = diag::jacobian_spectrum(model, {probe});

  Vector v = probe;
  for (std::size_t li = 0; li < model.depth(); ++li) {
    const net::Layer& layer = model.layers()[li];
    Matrix fd = fd_jacobian(
        [&](const Vector& x) { return net::layer_forward(layer, x).first; }, v);
    const std::vector<double> fd_svals = pgnn::linalg::svd_values(fd);
    const auto& got = report.entries[li].singular_values;
    REQUIRE(got.size() == fd_svals.size());
    for (std::size_t k = 0; k < got.size(); ++k)
      CHECK(std::abs(got[k] - fd_svals[k]) < 1e-5);
    v = net::layer_forward(layer, v).first;
  }
}

TEST_CASE("jacobian_spectrum: descending nonnegative values, mean across probes") {
  const std::size_t dim = 6;
  auto l0 = testutil::random_structured_layer(
      dim, dim, shaping::ShapingOperator::low_rank(dim, dim, 3), 41, true, false);
  net::Network model(std::vector<net::Layer>{l0});
  std::vector<Vector> probes;
  for (std::uint64_t s = 0; s < 4; ++s) probes.push_back(random_vector(dim, 50 + s));

  diag::SpectrumReport report = diag::jacobian_spectrum(model, probes);
  REQUIRE(report.entries.size() == 4);
  std::vector<double> mean(dim, 0.0);
  for (const auto& e : report.entries) {
    for (std::size_t k = 0; k + 1 < e.singular_values.size(); ++k)
      CHECK(e.singular_values[k] >= e.singular_values[k + 1]);
    CHECK(e.singular_values.back() >= 0.0);
    for (std::size_t k = 0; k < e.singular_values.size(); ++k)
      mean[k] += e.singular_values[k] / 4.0;
  }
  for (std::size_t k = 0; k < dim; ++k)
    CHECK(std::abs(report.mean_spectrum[0][k] - mean[k]) < 1e-14);
}

TEST_CASE("jacobian_spectrum: condition numbers use the numeric-rank floor") {
  SECTION("full-rank diagonal map") {
    Vector d(2);
    d[0] = 4.0;
    d[1] = 2.0;
    net::StructuredLayer layer(Matrix::identity(2),
                               shaping::ShapingOperator::diagonal_scale(d), std::nullopt,
                               false, false);
    net::Network model(std::vector<net::Layer>{layer});
    diag::SpectrumReport report = diag::jacobian_spectrum(model, {random_vector(2, 7)});
    CHECK(std::abs(report.entries[0].singular_values[0] - 4.0) < 1e-12);
    CHECK(std::abs(report.entries[0].condition - 2.0) < 1e-12);
  }
  SECTION("rank-deficient map ignores the null space") {
    net::StructuredLayer layer(random_matrix(4, 4, 8),
                               shaping::ShapingOperator::low_rank(4, 4, 1), std::nullopt,
                               false, false);
    net::Network model(std::vector<net::Layer>{layer});
    diag::SpectrumReport report = diag::jacobian_spectrum(model, {random_vector(4, 9)});
    const auto& sv = report.entries[0].singular_values;
    CHECK(sv[1] <= diag::kRankFloor);
    CHECK(std::abs(report.entries[0].condition - 1.0) < 1e-12);
  }
  SECTION("zero map reports condition zero") {
    net::StructuredLayer layer(Matrix(3, 3), shaping::ShapingOperator::identity(),
                               std::nullopt, false, false);
    net::Network model(std::vector<net::Layer>{layer});
    diag::SpectrumReport report = diag::jacobian_spectrum(model, {random_vector(3, 10)});
    CHECK(report.entries[0].condition == 0.0);
  }
}

TEST_CASE("jacobian_spectrum: validation") {
  net::Network model(std::vector<net::Layer>{scaling_layer(3, 1.0)});
  CHECK_THROWS_AS(diag::jacobian_spectrum(model, {}), ValidationError);
  CHECK_THROWS_AS(diag::jacobian_spectrum(model, {random_vector(4, 1)}), ShapeError);
}

// ============================================================================
// Frequency response
// ============================================================================

TEST_CASE("frequency_response: identity net has unit gain everywhere") {
  const std::size_t dim = 12;
  net::Network model(std::vector<net::Layer>{scaling_layer(dim, 1.0)});
  auto sweep = tasks::gen_freq_sweep(dim, 6, 3);
  diag::FrequencyResponse fr = diag::frequency_response(model, sweep);
  REQUIRE(fr.gains.size() == 6);
  for (double g : fr.gains) CHECK(std::abs(g - 1.0) < 1e-12);
}

TEST_CASE("frequency_response: untrained low-pass net annihilates the top quartile") {
  const std::size_t dim = 16;
  auto op = shaping::ShapingOperator::dct_band(dim, dim, {0, 1, 2, 3});
  net::StructuredLayer layer(random_matrix(dim, dim, 61), op, std::nullopt, false, false);
  net::Network model(std::vector<net::Layer>{layer});

  auto sweep = tasks::gen_freq_sweep(dim, dim - 1, 4);  // modes 1..15
  diag::FrequencyResponse fr = diag::frequency_response(model, sweep);
  for (std::size_t i = 0; i < fr.modes.size(); ++i) {
    if (fr.modes[i] >= 3 * dim / 4) CHECK(fr.gains[i] < 1e-9);
    if (fr.modes[i] < dim / 4) CHECK(fr.gains[i] > 0.0);
  }
}

TEST_CASE("frequency_response: linear net gain recomputable from the effective map") {
  const std::size_t dim = 9;
  auto op = shaping::ShapingOperator::low_rank(dim, dim, 4);
  net::StructuredLayer layer(random_matrix(dim, dim, 71), op, std::nullopt, false, false);
  const Matrix eff = shaping::apply_shaping(op, layer.weight).matrix;
  net::Network model(std::vector<net::Layer>{layer});

  auto sweep = tasks::gen_freq_sweep(dim, 5, 3);
  diag::FrequencyResponse fr = diag::frequency_response(model, sweep);
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    double expect = 0.0;
    for (const Vector& p : sweep[i].probes)
      expect += pgnn::linalg::norm(pgnn::linalg::matvec(eff, p)) / pgnn::linalg::norm(p);
    expect /= static_cast<double>(sweep[i].probes.size());
    CHECK(std::abs(fr.gains[i] - expect) < 1e-10);
  }
}

TEST_CASE("frequency_response: linear gains are input-scale invariant") {
  const std::size_t dim = 8;
  auto op = shaping::ShapingOperator::dct_band(dim, dim, {0, 1, 2, 3, 4});
  net::StructuredLayer layer(random_matrix(dim, dim, 81), op, std::nullopt, false, false);
  net::Network model(std::vector<net::Layer>{layer});

  auto sweep = tasks::gen_freq_sweep(dim, 4, 2);
  auto scaled = sweep;
  for (auto& fp : scaled)
    for (Vector& p : fp.probes)
      for (std::size_t i = 0; i < p.size(); ++i) p[i] *= 3.7;

  diag::FrequencyResponse a = diag::frequency_response(model, sweep);
  diag::FrequencyResponse b = diag::frequency_response(model, scaled);
  for (std::size_t i = 0; i < a.gains.size(); ++i)
    CHECK(std::abs(a.gains[i] - b.gains[i]) <= 1e-12 * std::max(1.0, a.gains[i]));
}

TEST_CASE("frequency_response: dimension-changing model is rejected") {
  net::DenseLayer l(random_matrix(3, 8, 91), random_vector(3, 92), net::Activation::none);
  net::Network model(std::vector<net::Layer>{l});
  auto sweep = tasks::gen_freq_sweep(8, 4, 2);
  CHECK_THROWS_AS(diag::frequency_response(model, sweep), ValidationError);
}

// ============================================================================
// Recursion
// ============================================================================

TEST_CASE("recurse: half-scale map decays geometrically and exactly") {
  const std::size_t dim = 5;
  net::StructuredLayer layer = scaling_layer(dim, 0.5);
  const Vector x0 = random_vector(dim, 101);

  diag::RecursionTrace trace = diag::recurse(layer, x0);
  REQUIRE(trace.converged);
  REQUIRE(trace.deltas.size() >= 10);
  CHECK(std::abs(trace.deltas[0] - 0.5 * pgnn::linalg::norm(x0)) < 1e-15);
  for (std::size_t t = 0; t + 1 < trace.deltas.size(); ++t)
    CHECK(std::abs(trace.deltas[t + 1] / trace.deltas[t] - 0.5) < 1e-12);
  for (std::size_t t = 0; t < trace.deltas.size(); ++t)
    CHECK(trace.energies[t] == trace.deltas[t] * trace.deltas[t]);
  CHECK(trace.iterates.size() == trace.deltas.size() + 1);
  CHECK(trace.iterations == trace.deltas.size());
}

TEST_CASE("recurse: identity map converges after one application") {
  const std::size_t dim = 4;
  net::StructuredLayer layer(Matrix::identity(dim), shaping::ShapingOperator::identity(),
                             std::nullopt, false, false);
  diag::RecursionTrace trace = diag::recurse(layer, random_vector(dim, 111));
  CHECK(trace.converged);
  CHECK(trace.iterations == 1);
  CHECK(trace.deltas == std::vector<double>{0.0});
  CHECK(trace.energies == std::vector<double>{0.0});
}

TEST_CASE("recurse: contraction bound controls the energy descent") {
  const std::size_t dim = 6;
  auto op = shaping::ShapingOperator::identity();
  Matrix w = shaping::spectral_cap(op, random_matrix(dim, dim, 121), 0.9);

  // correction with sigma1(w2) * sigma1(w1) = 0.05
  Matrix w1 = random_matrix(dim, dim, 122);
  Matrix w2 = random_matrix(dim, dim, 123);
  const double s1 = pgnn::linalg::svd_values(w1)[0];
  const double s2 = pgnn::linalg::svd_values(w2)[0];
  for (double& v : w1.data()) v *= 0.5 / s1;
  for (double& v : w2.data()) v *= 0.1 / s2;
  Vector b1 = random_vector(dim, 124);
  Vector b2 = random_vector(dim, 125);
  for (std::size_t i = 0; i < dim; ++i) b2[i] *= 0.2;  // fixed point off the origin
  net::StructuredLayer layer(w, op, net::CorrectionNet(w1, b1, w2, b2), true, false);

  const double bound = net::layer_lipschitz_bound(layer);
  REQUIRE(bound < 1.0);
  REQUIRE(bound <= 0.95 + 1e-9);

  diag::RecursionTrace trace = diag::recurse(layer, random_vector(dim, 126));
  REQUIRE(trace.converged);
  const double b2b = bound * bound;
  for (std::size_t t = 0; t + 1 < trace.energies.size(); ++t)
    CHECK(trace.energies[t + 1] <= b2b * trace.energies[t] * (1.0 + 1e-9));
  CHECK(diag::fitted_decay_rate(trace.deltas) <= 0.95 + 0.01);
}

TEST_CASE("recurse: escaping iterates raise a divergence error carrying the trace") {
  const std::size_t dim = 3;
  net::StructuredLayer layer = scaling_layer(dim, 2.0);
  const Vector x0 = random_vector(dim, 131);
  try {
    diag::recurse(layer, x0);
    FAIL("expected divergence");
  } catch (const diag::RecursionDiverged& e) {
    CHECK(e.step() >= 1);
    REQUIRE_FALSE(e.trace.deltas.empty());
    CHECK(pgnn::linalg::norm(e.trace.iterates.back()) > diag::kRecursionEscape);
    for (std::size_t t = 0; t + 1 < e.trace.deltas.size(); ++t)
      CHECK(e.trace.deltas[t + 1] > e.trace.deltas[t]);
  }
}

TEST_CASE("recurse: whole-net overload and validation") {
  const std::size_t dim = 4;
  net::Network contraction(std::vector<net::Layer>{scaling_layer(dim, 0.5)});
  diag::RecursionTrace trace = diag::recurse(contraction, random_vector(dim, 141));
  CHECK(trace.converged);

  net::StructuredLayer rect(random_matrix(3, 2, 142), shaping::ShapingOperator::identity(),
                            std::nullopt, false, false);
  CHECK_THROWS_AS(diag::recurse(rect, random_vector(2, 143)), ValidationError);
  net::StructuredLayer sq = scaling_layer(dim, 0.5);
  CHECK_THROWS_AS(diag::recurse(sq, random_vector(dim, 144), 0), ValidationError);
  CHECK_THROWS_AS(diag::recurse(sq, random_vector(dim, 145), 10, 0.0), ValidationError);
  CHECK_THROWS_AS(diag::recurse(sq, random_vector(dim + 1, 146)), ShapeError);
}

// ============================================================================
// Perturbation robustness
// ============================================================================

TEST_CASE("perturbation_robustness: zero noise produces exactly zero deviation") {
  const std::size_t dim = 6;
  auto layer = testutil::random_structured_layer(
      dim, dim, shaping::ShapingOperator::identity(), 151, true, false);
  net::Network model(std::vector<net::Layer>{layer});
  tasks::Dataset data = tasks::gen_signal_recovery(3, 20, dim, 0.1);

  diag::RobustnessReport report =
      diag::perturbation_robustness(model, data, {0.0}, 50, 9);
  CHECK(report.mean_dev[0] == 0.0);
  CHECK(report.std_dev[0] == 0.0);
  CHECK(report.slope == 0.0);
}

TEST_CASE("perturbation_robustness: linear deviations match the spectrum") {
  const std::size_t dim = 6;
  auto op = shaping::ShapingOperator::dct_band(dim, dim, {0, 1, 2, 3});
  net::StructuredLayer layer(random_matrix(dim, dim, 161), op, std::nullopt, false, false);
  const Matrix eff = shaping::apply_shaping(op, layer.weight).matrix;
  net::Network model(std::vector<net::Layer>{layer});
  tasks::Dataset data = tasks::gen_signal_recovery(5, 30, dim, 0.1);

  diag::RobustnessReport report = diag::perturbation_robustness(
      model, data, diag::default_sigma_grid(), 200, 77);

  const double oracle =
      mean_image_norm(pgnn::linalg::svd_values(eff), 200000, 9991);
  CHECK(std::abs(report.slope - oracle) < 0.10 * oracle);

  // linearity: each mean deviation individually close to slope * sigma
  for (std::size_t i = 0; i < report.sigmas.size(); ++i) {
    CHECK(report.mean_dev[i] >= 0.0);
    CHECK(std::abs(report.mean_dev[i] - oracle * report.sigmas[i]) <
          0.10 * oracle * report.sigmas[i]);
  }
}

TEST_CASE("perturbation_robustness: normalized slope respects the spectral bound") {
  const std::size_t dim = 6;
  auto op0 = shaping::ShapingOperator::dct_band(dim, dim, {0, 1, 2});
  auto op1 = shaping::ShapingOperator::low_rank(dim, dim, 4);
  net::StructuredLayer l0(random_matrix(dim, dim, 171), op0, std::nullopt, false, false);
  net::StructuredLayer l1(random_matrix(dim, dim, 172), op1, std::nullopt, false, false);
  net::Network model(std::vector<net::Layer>{l0, l1});

  double bound = 1.0;
  bound *= pgnn::linalg::svd_values(shaping::apply_shaping(op0, l0.weight).matrix)[0];
  bound *= pgnn::linalg::svd_values(shaping::apply_shaping(op1, l1.weight).matrix)[0];

  tasks::Dataset data = tasks::gen_signal_recovery(7, 30, dim, 0.1);
  diag::RobustnessReport report = diag::perturbation_robustness(
      model, data, diag::default_sigma_grid(), 200, 42);
  CHECK(report.normalized_slope <= bound * 1.05);
}

TEST_CASE("perturbation_robustness: validation") {
  const std::size_t dim = 4;
  net::Network model(std::vector<net::Layer>{scaling_layer(dim, 1.0)});
  tasks::Dataset data = tasks::gen_signal_recovery(1, 10, dim, 0.1);
  CHECK_THROWS_AS(diag::perturbation_robustness(model, data, {}, 10, 0),
                  ValidationError);
  CHECK_THROWS_AS(diag::perturbation_robustness(model, data, {0.2, 0.1}, 10, 0),
                  ValidationError);
  CHECK_THROWS_AS(diag::perturbation_robustness(model, data, {0.1}, 0, 0),
                  ValidationError);
  tasks::Dataset other = tasks::gen_signal_recovery(1, 10, dim + 1, 0.1);
  CHECK_THROWS_AS(diag::perturbation_robustness(model, other, {0.1}, 10, 0), ShapeError);
}

// ============================================================================
// Depth sweep
// ============================================================================

TEST_CASE("depth_sweep: one record per depth, shallow training beats the untrained net") {
  const std::size_t dim = 8;
  tasks::Dataset data = tasks::gen_signal_recovery(11, 40, dim, 0.1);
  train::TrainConfig cfg;
  cfg.epochs = 25;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-2;
  cfg.seed = 5;

  auto build = [&](std::size_t depth) {
    return net::init_network(diag::stacked_band_arch(dim, depth, dim / 2), 900 + depth);
  };
  const std::vector<std::size_t> depths = {1, 2, 3};
  auto records = diag::depth_sweep(build, depths, data, cfg);

  REQUIRE(records.size() == depths.size());
  for (std::size_t i = 0; i < depths.size(); ++i) {
    CHECK(records[i].depth == depths[i]);
    CHECK_FALSE(records[i].diverged);
    CHECK(std::isfinite(records[i].final_loss));
  }
  net::Network fresh = build(1);
  const double untrained =
      train::eval_loss(fresh, data, data.train_idx, train::LossKind::mse);
  CHECK(records[0].final_loss < untrained);
}

TEST_CASE("depth_sweep: divergence becomes a marker row, not a failure") {
  const std::size_t dim = 6;
  tasks::Dataset data = tasks::gen_signal_recovery(13, 20, dim, 0.1);
  train::TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e12;
  cfg.optimizer = train::SgdConfig{};
  cfg.seed = 3;

  auto build = [&](std::size_t depth) {
    return net::init_network(diag::stacked_band_arch(dim, depth, dim / 2), 70 + depth);
  };
  auto records = diag::depth_sweep(build, {1, 2}, data, cfg);
  REQUIRE(records.size() == 2);
  for (const auto& rec : records) {
    CHECK(rec.diverged);
    CHECK(rec.divergence_epoch >= 1);
  }
}

TEST_CASE("depth_sweep: validation") {
  tasks::Dataset data = tasks::gen_signal_recovery(1, 10, 4, 0.1);
  train::TrainConfig cfg;
  auto build = [&](std::size_t) {
    return net::init_network(diag::stacked_band_arch(4, 1, 2), 1);
  };
  CHECK_THROWS_AS(diag::depth_sweep(build, {}, data, cfg), ValidationError);
  CHECK_THROWS_AS(diag::depth_sweep(build, {0}, data, cfg), ValidationError);
}

// ============================================================================
// Ablations
// ============================================================================

TEST_CASE("canonical_operator: builds every kind at matched dims") {
  const std::size_t dim = 6;
  const Matrix w = random_matrix(dim, dim, 201);
  for (int k = 0; k < 7; ++k) {
    const auto kind = static_cast<shaping::ShapingKind>(k);
    auto op = diag::canonical_operator(kind, dim, dim, 5);
    CHECK(op.kind() == kind);
    CHECK_NOTHROW(shaping::apply_shaping(op, w));
  }
  // graph edges drive the Laplacian variant when present
  std::vector<std::pair<std::size_t, std::size_t>> edges = {{0, 1}, {2, 3}, {4, 5}};
  auto op = diag::canonical_operator(shaping::ShapingKind::laplacian_smooth, dim, dim, 5,
                                     &edges);
  CHECK_NOTHROW(shaping::apply_shaping(op, w));
}

TEST_CASE("ablation_projection_variants: identical variants give identical logs") {
  tasks::Dataset data = tasks::gen_signal_recovery(17, 25, 6, 0.1);
  train::TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-2;

  using shaping::ShapingKind;
  auto outcomes = diag::ablation_projection_variants(
      data, {ShapingKind::identity, ShapingKind::identity}, cfg, {3, 4});
  REQUIRE(outcomes.size() == 2);
  REQUIRE(outcomes[0].logs.size() == 2);
  CHECK(outcomes[0].finals == outcomes[1].finals);
  for (std::size_t s = 0; s < 2; ++s)
    CHECK(logs_identical(outcomes[0].logs[s], outcomes[1].logs[s]));
}

TEST_CASE("ablation_projection_variants: learned projection trains away from identity") {
  tasks::Dataset data = tasks::gen_signal_recovery(19, 30, 6, 0.1);
  train::TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-2;

  auto outcomes = diag::ablation_projection_variants(
      data, {pgnn::shaping::ShapingKind::learned_projection}, cfg, {11});
  REQUIRE(outcomes.size() == 1);
  CHECK(outcomes[0].projection_drift[0] > 0.0);
}

TEST_CASE("ablation_projection_variants: across-seed spread is reported") {
  tasks::Dataset data = tasks::gen_signal_recovery(23, 25, 6, 0.1);
  train::TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-2;

  auto outcomes = diag::ablation_projection_variants(
      data, {pgnn::shaping::ShapingKind::dct_band}, cfg, {1, 2, 3, 4, 5});
  REQUIRE(outcomes[0].finals.size() == 5);
  CHECK(outcomes[0].final_std >= 0.0);
  const double lo = *std::min_element(outcomes[0].finals.begin(), outcomes[0].finals.end());
  const double hi = *std::max_element(outcomes[0].finals.begin(), outcomes[0].finals.end());
  CHECK(outcomes[0].final_mean >= lo);
  CHECK(outcomes[0].final_mean <= hi);
}

TEST_CASE("ablation_residual: off-run logs zero residuals, shared start, worse finish") {
  const std::size_t dim = 8;
  tasks::Dataset data = tasks::gen_multiscale_signal(29, 40, dim);
  auto arch = diag::stacked_band_arch(dim, 1, 3);
  train::TrainConfig cfg;
  cfg.epochs = 150;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-2;
  cfg.seed = 2;

  diag::ResidualAblation pair = diag::ablation_residual(arch, data, cfg, 55);

  for (const auto& rec : pair.without_correction.records)
    for (double r : rec.residual_norms) CHECK(r == 0.0);
  CHECK(pair.with_correction.records.front().train_loss ==
        pair.without_correction.records.front().train_loss);
  CHECK(pair.with_correction.records.front().epoch == 0);
  for (double r : pair.with_correction.records.front().residual_norms)
    CHECK(r == 0.0);
  CHECK(pair.final_with < pair.final_without);
}

// ============================================================================
// Multi-resolution composition
// ============================================================================

TEST_CASE("band_split_net: pass bands are disjoint and cover the spectrum") {
  const std::size_t dim = 7;
  net::TwoBranchNet model = diag::band_split_net(dim, 3);
  auto pass_of = [](const net::Network& branch) {
    const auto& layer = std::get<net::StructuredLayer>(branch.layers()[0]);
    return std::get<shaping::DctBand>(layer.shaping.payload()).pass;
  };
  const auto low = pass_of(model.branch0());
  const auto high = pass_of(model.branch1());

  std::set<std::size_t> all(low.begin(), low.end());
  for (std::size_t m : high) {
    CHECK(all.count(m) == 0);
    all.insert(m);
  }
  CHECK(all.size() == dim);
  CHECK(*all.rbegin() == dim - 1);
}

TEST_CASE("multires_compose: matched parameters, paired logs, finite losses") {
  const std::size_t dim = 8;
  tasks::Dataset data = tasks::gen_multiscale_signal(31, 40, dim);
  train::TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-2;
  cfg.seed = 6;

  diag::MultiresOutcome out = diag::multires_compose(data, cfg, 21);
  CHECK(out.branched_params == out.baseline_params);  // construction is exact
  const double diff = std::abs(static_cast<double>(out.branched_params) -
                               static_cast<double>(out.baseline_params));
  CHECK(diff <= 0.05 * static_cast<double>(out.baseline_params));
  REQUIRE(out.branched.records.size() == out.baseline.records.size());
  CHECK(std::isfinite(out.branched.records.back().train_loss));
  CHECK(std::isfinite(out.baseline.records.back().train_loss));

  tasks::Dataset wrong = tasks::gen_signal_recovery(1, 10, dim, 0.1);
  CHECK_THROWS_AS(diag::multires_compose(wrong, cfg, 1), ValidationError);
}
