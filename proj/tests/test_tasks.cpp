#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "helpers.hpp"
#include "pgnn/linalg.hpp"
#include "pgnn/net.hpp"
#include "pgnn/rng.hpp"
#include "pgnn/tasks.hpp"
#include "pgnn/train.hpp"

using namespace pgnn;
using namespace pgnn::linalg;
using namespace pgnn::tasks;

namespace {

bool datasets_equal(const Dataset& a, const Dataset& b) {
  if (a.inputs.size() != b.inputs.size() || a.labels != b.labels ||
      a.edges != b.edges || a.train_idx != b.train_idx || a.val_idx != b.val_idx)
    return false;
  for (std::size_t i = 0; i < a.inputs.size(); ++i)
    if (!(a.inputs[i] == b.inputs[i])) return false;
  if (a.targets.size() != b.targets.size()) return false;
  for (std::size_t i = 0; i < a.targets.size(); ++i)
    if (!(a.targets[i] == b.targets[i])) return false;
  return true;
}

double dataset_rms(const Dataset& d) {
  double sq = 0.0;
  std::size_t n = 0;
  for (const Vector& v : d.inputs) {
    for (std::size_t i = 0; i < v.size(); ++i) sq += v[i] * v[i];
    n += v.size();
  }
  return std::sqrt(sq / static_cast<double>(n));
}

void check_split(const Dataset& d) {
  std::set<std::size_t> seen;
  for (std::size_t i : d.train_idx) seen.insert(i);
  for (std::size_t i : d.val_idx) {
    CHECK(seen.count(i) == 0);
    seen.insert(i);
  }
  CHECK(seen.size() == d.size());
  CHECK(!d.train_idx.empty());
  CHECK(!d.val_idx.empty());
}

}  // namespace

// ============================================================================
// Signal recovery
// ============================================================================

TEST_CASE("noise-free recovery task has inputs equal to targets", "[tasks]") {
  const Dataset d = gen_signal_recovery(3, 10, 16, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(d.inputs[i] == d.targets[i]);
}

TEST_CASE("recovery targets live in the low cosine modes", "[tasks]") {
  const std::size_t dim = 16;
  const Dataset d = gen_signal_recovery(7, 8, dim, 0.1);
  const Matrix basis = dct_basis(dim);
  for (const Vector& t : d.targets) {
    const Vector coeffs = matvec(basis, t);
    for (std::size_t k = dim / 4; k < dim; ++k) CHECK(std::abs(coeffs[k]) < 1e-12);
  }
}

TEST_CASE("recovery task is reproducible and regenerable from meta", "[tasks]") {
  const Dataset a = gen_signal_recovery(42, 12, 8, 0.3);
  const Dataset b = gen_signal_recovery(42, 12, 8, 0.3);
  const Dataset c = regenerate(a.meta);
  CHECK(datasets_equal(a, b));
  CHECK(datasets_equal(a, c));
  check_split(a);
}

TEST_CASE("recovery task at defaults emits unit-scale data", "[tasks]") {
  const Dataset d = gen_signal_recovery(1, 512, 32, 0.1);
  const double rms = dataset_rms(d);
  CHECK(rms > 0.1);
  CHECK(rms < 10.0);
}

TEST_CASE("recovery task validates arguments", "[tasks]") {
  CHECK_THROWS_AS(gen_signal_recovery(1, 10, 1, 0.1), ValidationError);
  CHECK_THROWS_AS(gen_signal_recovery(1, 4, 8, 0.1), ValidationError);
  CHECK_THROWS_AS(gen_signal_recovery(1, 10, 8, -0.1), ValidationError);
}

// ============================================================================
// Multi-scale signal
// ============================================================================

TEST_CASE("multiscale targets decompose into their branches", "[tasks]") {
  const std::size_t n = 10, dim = 16;
  const Dataset d = gen_multiscale_signal(5, n, dim);
  const MultiscaleBranches b = multiscale_branches(5, n, dim);
  for (std::size_t s = 0; s < n; ++s) {
    CHECK(d.inputs[s] == d.targets[s]);
    const Vector residual = subtract(subtract(d.targets[s], b.low[s]), b.high[s]);
    for (std::size_t j = 0; j < dim; ++j) CHECK(std::abs(residual[j]) < 1e-15);
  }
}

TEST_CASE("multiscale spectra concentrate in two mode clusters", "[tasks]") {
  const std::size_t dim = 32;
  const Dataset d = gen_multiscale_signal(9, 8, dim);
  const Matrix basis = dct_basis(dim);
  const std::size_t k_high = 3 * dim / 4;
  for (const Vector& t : d.targets) {
    const Vector coeffs = matvec(basis, t);
    double total = 0.0, clusters = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double e = coeffs[k] * coeffs[k];
      total += e;
      if (k == 1 || k == 2 || k == k_high || k == k_high + 1) clusters += e;
    }
    CHECK(clusters / total > 0.99);
  }
}

TEST_CASE("multiscale task is reproducible", "[tasks]") {
  const Dataset a = gen_multiscale_signal(11, 10, 8);
  CHECK(datasets_equal(a, gen_multiscale_signal(11, 10, 8)));
  CHECK(datasets_equal(a, regenerate(a.meta)));
  CHECK_THROWS_AS(gen_multiscale_signal(1, 10, 4), ValidationError);
}

// ============================================================================
// Graph classification
// ============================================================================

TEST_CASE("graph task labels, splits, and Laplacian are well formed", "[tasks]") {
  const Dataset d = gen_graph_classification(13, 40, 4, 0.9);
  REQUIRE(d.classification());
  REQUIRE(d.labels.size() == 40);
  std::vector<std::size_t> counts(4, 0);
  for (std::size_t l : d.labels) {
    REQUIRE(l < 4);
    ++counts[l];
  }
  for (std::size_t c : counts) CHECK(c > 0);
  check_split(d);

  const Matrix lap = graph_laplacian(40, d.edges);
  for (std::size_t i = 0; i < 40; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 40; ++j) row += lap(i, j);
    CHECK(std::abs(row) < 1e-12);
  }
}

TEST_CASE("graph task is reproducible and regenerable", "[tasks]") {
  const Dataset a = gen_graph_classification(21, 25, 3, 0.8, 0.2);
  CHECK(datasets_equal(a, gen_graph_classification(21, 25, 3, 0.8, 0.2)));
  CHECK(datasets_equal(a, regenerate(a.meta)));
}

TEST_CASE("degenerate partitions retry deterministically", "[tasks]") {
  // scan for a seed whose first assignment leaves a class empty; the
  // generator's meta records how many sub-seeds it consumed
  bool saw_retry = false;
  for (std::uint64_t seed = 0; seed < 60 && !saw_retry; ++seed) {
    const Dataset d = gen_graph_classification(seed, 10, 4, 0.9, 0.0);
    std::vector<std::size_t> counts(4, 0);
    for (std::size_t l : d.labels) ++counts[l];
    for (std::size_t c : counts) CHECK(c > 0);
    if (fmt::parse_u64(d.meta.param("attempts")) > 1) saw_retry = true;
  }
  CHECK(saw_retry);
}

TEST_CASE("separable graph features train to perfect accuracy", "[tasks]") {
  const Dataset d = gen_graph_classification(17, 20, 2, 1.0, 0.0);
  std::vector<net::LayerBlueprint> arch(1);
  arch[0].type = net::LayerBlueprint::Type::dense;
  arch[0].in_dim = 20;
  arch[0].out_dim = 2;
  arch[0].dense_activation = net::Activation::none;
  net::Network model = net::init_network(arch, 99);

  train::TrainConfig cfg;
  cfg.epochs = 150;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.05;
  cfg.seed = 1;
  cfg.loss = train::LossKind::cross_entropy;
  cfg.log_every = 150;
  train::train(model, d, cfg);
  CHECK(train::eval_accuracy(model, d, d.train_idx) == 1.0);
}

TEST_CASE("graph task validates arguments", "[tasks]") {
  CHECK_THROWS_AS(gen_graph_classification(1, 20, 1, 0.9), ValidationError);
  CHECK_THROWS_AS(gen_graph_classification(1, 4, 2, 0.9), ValidationError);
  CHECK_THROWS_AS(gen_graph_classification(1, 6, 6, 0.9), ValidationError);
  CHECK_THROWS_AS(gen_graph_classification(1, 20, 2, 1.5), ValidationError);
  CHECK_THROWS_AS(gen_graph_classification(1, 20, 2, 0.9, -1.0), ValidationError);
}

// ============================================================================
// Frequency sweep
// ============================================================================

TEST_CASE("frequency sweep probes are unit-norm and strictly ordered", "[tasks]") {
  const auto sweep = gen_freq_sweep(32, 8, 4);
  REQUIRE(sweep.size() == 8);
  for (std::size_t i = 1; i < sweep.size(); ++i)
    CHECK(sweep[i].mode > sweep[i - 1].mode);
  CHECK(sweep.front().mode == 1);
  CHECK(sweep.back().mode == 31);
  for (const auto& fp : sweep)
    for (const Vector& p : fp.probes) CHECK(std::abs(norm(p) - 1.0) < 1e-12);
}

TEST_CASE("the lowest probe is the first nontrivial cosine mode", "[tasks]") {
  const auto sweep = gen_freq_sweep(16, 4, 3);
  const Matrix basis = dct_basis(16);
  Vector row1(16);
  for (std::size_t j = 0; j < 16; ++j) row1[j] = basis(1, j);
  const double coef = dot(row1, sweep.front().probes[0]);
  CHECK(coef * coef > 0.99);
}

TEST_CASE("probe energy stays within the mode pair", "[tasks]") {
  const std::size_t dim = 16;
  const auto sweep = gen_freq_sweep(dim, 5, 4);
  const Matrix basis = dct_basis(dim);
  for (const auto& fp : sweep) {
    const std::size_t partner = fp.mode + 1 < dim ? fp.mode + 1 : fp.mode - 1;
    for (const Vector& p : fp.probes) {
      const Vector coeffs = matvec(basis, p);
      double in_pair = coeffs[fp.mode] * coeffs[fp.mode] + coeffs[partner] * coeffs[partner];
      CHECK(in_pair > 1.0 - 1e-12);
    }
  }
}

TEST_CASE("frequency sweep validates arguments", "[tasks]") {
  CHECK_THROWS_AS(gen_freq_sweep(8, 1), ValidationError);
  CHECK_THROWS_AS(gen_freq_sweep(8, 8), ValidationError);
  CHECK_THROWS_AS(gen_freq_sweep(2, 2), ValidationError);
}

// ============================================================================
// Noise injection
// ============================================================================

TEST_CASE("zero-sigma noise is the identity", "[tasks]") {
  const Vector x = testutil::random_vector(10, 3);
  CHECK(add_gaussian_noise(x, 0.0, 5) == x);
  CHECK_THROWS_AS(add_gaussian_noise(x, -1.0, 5), ValidationError);
}

TEST_CASE("noise is deterministic per seed", "[tasks]") {
  const Vector x = testutil::random_vector(10, 4);
  CHECK(add_gaussian_noise(x, 0.5, 7) == add_gaussian_noise(x, 0.5, 7));
  CHECK(!(add_gaussian_noise(x, 0.5, 7) == add_gaussian_noise(x, 0.5, 8)));
}

TEST_CASE("noise magnitude matches sigma over many draws", "[tasks]") {
  const std::size_t n = 100000;
  const double sigma = 0.7;
  const Vector x(n);  // zeros
  const Vector noisy = add_gaussian_noise(x, sigma, 123);
  double sq = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += noisy[i];
  mean /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) sq += (noisy[i] - mean) * (noisy[i] - mean);
  const double std_emp = std::sqrt(sq / static_cast<double>(n));
  CHECK(std_emp > sigma * 0.98);
  CHECK(std_emp < sigma * 1.02);
}
