#pragma once
// Synthetic dataset generators. Every generator is a pure function of its
// parameters: the meta block stored in each dataset regenerates it
// bit-for-bit.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pgnn/errors.hpp"
#include "pgnn/format.hpp"
#include "pgnn/linalg.hpp"
#include "pgnn/rng.hpp"

namespace pgnn::tasks {

using linalg::Matrix;
using linalg::Vector;

struct DatasetMeta {
  std::string generator;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> params;

  std::string param(const std::string& key) const {
    for (const auto& [k, v] : params)
      if (k == key) return v;
    throw ValidationError("dataset meta: missing parameter '" + key + "'");
  }
};

struct Dataset {
  std::vector<Vector> inputs;
  std::vector<Vector> targets;      // regression targets; empty for classification
  std::vector<std::size_t> labels;  // class indices; empty for regression
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // graph tasks only
  DatasetMeta meta;

  bool classification() const { return !labels.empty(); }
  std::size_t size() const { return inputs.size(); }
  std::size_t in_dim() const { return inputs.front().size(); }
  std::size_t out_dim() const;
  std::size_t n_classes() const;
};

inline std::size_t Dataset::n_classes() const {
  std::size_t c = 0;
  for (std::size_t l : labels) c = std::max(c, l + 1);
  return c;
}

inline std::size_t Dataset::out_dim() const {
  return classification() ? n_classes() : targets.front().size();
}

namespace detail {

// every fifth sample goes to validation
inline void assign_split(Dataset& d) {
  for (std::size_t i = 0; i < d.size(); ++i)
    (i % 5 == 4 ? d.val_idx : d.train_idx).push_back(i);
}

inline void require_samples(std::size_t n_samples) {
  if (n_samples < 5)
    throw ValidationError("generator: need at least 5 samples for a train/val split");
}

}  // namespace detail

// ============================================================================
// Signal recovery: smooth targets, noisy inputs.
// ============================================================================

// Targets are random combinations of the lowest quarter of the cosine modes;
// inputs add Gaussian noise. The model's job is to denoise.
inline Dataset gen_signal_recovery(std::uint64_t seed, std::size_t n_samples,
                                   std::size_t dim, double noise_std) {
  if (dim < 2) throw ValidationError("gen_signal_recovery: dim must be >= 2");
  if (noise_std < 0.0) throw ValidationError("gen_signal_recovery: noise_std < 0");
  detail::require_samples(n_samples);
  const std::size_t n_modes = std::max<std::size_t>(1, dim / 4);
  const Matrix basis = linalg::dct_basis(dim);
  rng::Prng gen(seed);
  Dataset d;
  d.meta = {"signal_recovery",
            seed,
            {{"n_samples", std::to_string(n_samples)},
             {"dim", std::to_string(dim)},
             {"noise_std", fmt::format_double(noise_std)}}};
  for (std::size_t s = 0; s < n_samples; ++s) {
    Vector target(dim);
    for (std::size_t k = 0; k < n_modes; ++k) {
      const double c = gen.next_normal();
      for (std::size_t j = 0; j < dim; ++j) target[j] += c * basis(k, j);
    }
    Vector input = target;
    for (std::size_t j = 0; j < dim; ++j) input[j] += noise_std * gen.next_normal();
    d.inputs.push_back(std::move(input));
    d.targets.push_back(std::move(target));
  }
  detail::assign_split(d);
  return d;
}

// ============================================================================
// Multi-scale signal: one slow and one fast oscillation per sample.
// ============================================================================

namespace detail {

// A unit-norm oscillation at mode k whose "phase" rotates it into the
// adjacent mode, keeping the spectrum confined to the pair (k, k+1).
inline Vector mode_pair_wave(const Matrix& basis, std::size_t k, double phase) {
  const std::size_t dim = basis.cols();
  const std::size_t partner = k + 1 < dim ? k + 1 : k - 1;
  Vector v(dim);
  const double c = std::cos(phase), s = std::sin(phase);
  for (std::size_t j = 0; j < dim; ++j) v[j] = c * basis(k, j) + s * basis(partner, j);
  return v;
}

}  // namespace detail

// The low/high components of each multi-scale sample, regenerable on their
// own so decomposition tests and branch analyses can see them.
struct MultiscaleBranches {
  std::vector<Vector> low;
  std::vector<Vector> high;
};

inline MultiscaleBranches multiscale_branches(std::uint64_t seed, std::size_t n_samples,
                                              std::size_t dim) {
  if (dim < 8) throw ValidationError("gen_multiscale_signal: dim must be >= 8");
  detail::require_samples(n_samples);
  const std::size_t k_low = 1;
  const std::size_t k_high = 3 * dim / 4;
  const Matrix basis = linalg::dct_basis(dim);
  rng::Prng gen(seed);
  MultiscaleBranches b;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const double phi_low = 2.0 * M_PI * gen.next_uniform01();
    const double phi_high = 2.0 * M_PI * gen.next_uniform01();
    b.low.push_back(detail::mode_pair_wave(basis, k_low, phi_low));
    b.high.push_back(detail::mode_pair_wave(basis, k_high, phi_high));
  }
  return b;
}

// Input and target are the same two-scale signal; a band-split model must
// route each scale through the branch able to carry it.
inline Dataset gen_multiscale_signal(std::uint64_t seed, std::size_t n_samples,
                                     std::size_t dim) {
  MultiscaleBranches b = multiscale_branches(seed, n_samples, dim);
  Dataset d;
  d.meta = {"multiscale",
            seed,
            {{"n_samples", std::to_string(n_samples)}, {"dim", std::to_string(dim)}}};
  for (std::size_t s = 0; s < n_samples; ++s) {
    Vector signal = linalg::add(b.low[s], b.high[s]);
    d.inputs.push_back(signal);
    d.targets.push_back(std::move(signal));
  }
  detail::assign_split(d);
  return d;
}

// ============================================================================
// Graph classification: planted partition, node-indexed features.
// ============================================================================

// Features live in R^n_nodes so the emitted Laplacian can directly shape
// hidden layers of matching width. Prototypes are scaled cosine modes.
inline Dataset gen_graph_classification(std::uint64_t seed, std::size_t n_nodes,
                                        std::size_t n_classes, double homophily,
                                        double feature_noise = 0.1) {
  if (n_classes < 2) throw ValidationError("gen_graph_classification: n_classes < 2");
  if (n_nodes < 5)
    throw ValidationError("gen_graph_classification: need n_nodes >= 5 for a split");
  if (homophily < 0.0 || homophily > 1.0)
    throw ValidationError("gen_graph_classification: homophily must be in [0, 1]");
  if (feature_noise < 0.0)
    throw ValidationError("gen_graph_classification: feature_noise < 0");
  if (n_classes + 1 > n_nodes)
    throw ValidationError("gen_graph_classification: too many classes for node count");

  const Matrix basis = linalg::dct_basis(n_nodes);
  const double scale = std::sqrt(static_cast<double>(n_nodes));
  const double base_density = std::min(1.0, 16.0 / static_cast<double>(n_nodes));

  for (std::uint64_t attempt = 0;; ++attempt) {
    rng::Prng gen(seed + attempt);
    std::vector<std::size_t> labels(n_nodes);
    std::vector<std::size_t> counts(n_classes, 0);
    for (std::size_t i = 0; i < n_nodes; ++i) {
      labels[i] = gen.next_index(n_classes);
      ++counts[labels[i]];
    }
    bool empty_class = false;
    for (std::size_t c : counts) empty_class |= (c == 0);
    if (empty_class) continue;  // deterministic retry with the next sub-seed

    Dataset d;
    d.meta = {"graph_classification",
              seed,
              {{"n_nodes", std::to_string(n_nodes)},
               {"n_classes", std::to_string(n_classes)},
               {"homophily", fmt::format_double(homophily)},
               {"feature_noise", fmt::format_double(feature_noise)},
               // diagnostic only: how many sub-seeds the partition needed
               {"attempts", std::to_string(attempt + 1)}}};
    d.labels = labels;
    for (std::size_t i = 0; i < n_nodes; ++i)
      for (std::size_t j = i + 1; j < n_nodes; ++j) {
        const double p = base_density * (labels[i] == labels[j] ? homophily
                                                                : 1.0 - homophily);
        if (gen.next_uniform01() < p) d.edges.emplace_back(i, j);
      }
    for (std::size_t i = 0; i < n_nodes; ++i) {
      Vector f(n_nodes);
      const std::size_t proto = labels[i] + 1;  // skip the constant mode
      for (std::size_t j = 0; j < n_nodes; ++j) f[j] = scale * basis(proto, j);
      for (std::size_t j = 0; j < n_nodes; ++j) f[j] += feature_noise * gen.next_normal();
      d.inputs.push_back(std::move(f));
    }
    detail::assign_split(d);
    return d;
  }
}

// ============================================================================
// Frequency sweep probes
// ============================================================================

struct FreqProbe {
  std::size_t mode;            // cosine-basis mode index (1 .. dim-1)
  std::vector<Vector> probes;  // unit-norm, probes[0] is the pure mode
};

// Unit-norm oscillations at n_freqs modes evenly spaced between 1 and the
// highest representable mode, several phases each. Phase zero is the exact
// basis direction.
inline std::vector<FreqProbe> gen_freq_sweep(std::size_t dim, std::size_t n_freqs,
                                             std::size_t n_phases = 4) {
  if (dim < 3) throw ValidationError("gen_freq_sweep: dim must be >= 3");
  if (n_freqs < 2) throw ValidationError("gen_freq_sweep: n_freqs must be >= 2");
  if (n_freqs > dim - 1)
    throw ValidationError("gen_freq_sweep: at most dim-1 distinct modes exist");
  if (n_phases < 1) throw ValidationError("gen_freq_sweep: n_phases must be >= 1");
  const Matrix basis = linalg::dct_basis(dim);
  std::vector<FreqProbe> out;
  for (std::size_t i = 0; i < n_freqs; ++i) {
    const std::size_t mode = 1 + (i * (dim - 2)) / (n_freqs - 1);
    FreqProbe fp;
    fp.mode = mode;
    for (std::size_t k = 0; k < n_phases; ++k) {
      const double phase = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n_phases);
      fp.probes.push_back(detail::mode_pair_wave(basis, mode, phase));
    }
    out.push_back(std::move(fp));
  }
  return out;
}

// ============================================================================
// Noise injection
// ============================================================================

// Adds sigma-scaled Gaussian noise, deterministic per (seed, coordinate) and
// independent of evaluation order.
inline Vector add_gaussian_noise(const Vector& x, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw ValidationError("add_gaussian_noise: sigma < 0");
  Vector out = x;
  if (sigma == 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] += sigma * rng::normal_at(seed, i);
  return out;
}

// ============================================================================
// Regeneration from meta
// ============================================================================

inline Dataset regenerate(const DatasetMeta& meta) {
  if (meta.generator == "signal_recovery")
    return gen_signal_recovery(meta.seed, fmt::parse_u64(meta.param("n_samples")),
                               fmt::parse_u64(meta.param("dim")),
                               fmt::parse_double(meta.param("noise_std")));
  if (meta.generator == "multiscale")
    return gen_multiscale_signal(meta.seed, fmt::parse_u64(meta.param("n_samples")),
                                 fmt::parse_u64(meta.param("dim")));
  if (meta.generator == "graph_classification")
    return gen_graph_classification(meta.seed, fmt::parse_u64(meta.param("n_nodes")),
                                    fmt::parse_u64(meta.param("n_classes")),
                                    fmt::parse_double(meta.param("homophily")),
                                    fmt::parse_double(meta.param("feature_noise")));
  throw ValidationError("regenerate: unknown generator '" + meta.generator + "'");
}

}  // namespace pgnn::tasks
