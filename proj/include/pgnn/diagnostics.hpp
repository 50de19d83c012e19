#pragma once
// Measurement battery over frozen or freshly trained models: per-layer
// Jacobian spectra, frequency response, recursive fixed-point traces, Monte
// Carlo perturbation robustness, depth sweeps, and the ablation/composition
// studies. Everything here is read-only over its model except the training
// wrappers, which own their nets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pgnn/errors.hpp"
#include "pgnn/linalg.hpp"
#include "pgnn/net.hpp"
#include "pgnn/rng.hpp"
#include "pgnn/shaping.hpp"
#include "pgnn/tasks.hpp"
#include "pgnn/train.hpp"

namespace pgnn::diag {

using linalg::Matrix;
using linalg::Vector;

// ============================================================================
// Jacobian spectra
// ============================================================================

// Singular values below this are treated as numerically zero when forming
// condition numbers, so near-null directions don't produce noise-floor ratios.
constexpr double kRankFloor = 1e-12;

struct SpectrumEntry {
  std::size_t layer = 0;
  std::size_t probe = 0;
  std::vector<double> singular_values;  // descending
  double condition = 0.0;               // sigma1 / sigma_k, k = last above kRankFloor
};

struct SpectrumReport {
  std::vector<SpectrumEntry> entries;              // probe-major, layer-minor
  std::vector<std::vector<double>> mean_spectrum;  // per layer, mean across probes
};

inline double condition_of(const std::vector<double>& svals) {
  double last = 0.0;
  for (double s : svals)
    if (s > kRankFloor) last = s;
  return last > 0.0 ? svals.front() / last : 0.0;
}

// Per-layer Jacobians taken along each probe's forward trajectory.
inline SpectrumReport jacobian_spectrum(const net::Network& model,
                                        const std::vector<Vector>& probes) {
  if (probes.empty()) throw ValidationError("jacobian_spectrum: no probes");
  for (const Vector& p : probes)
    if (p.size() != model.in_dim())
      throw ShapeError("jacobian_spectrum: probe dim " + std::to_string(p.size()) +
                       " != model input dim " + std::to_string(model.in_dim()));

  SpectrumReport report;
  report.mean_spectrum.resize(model.depth());
  for (std::size_t pi = 0; pi < probes.size(); ++pi) {
    Vector v = probes[pi];
    for (std::size_t li = 0; li < model.depth(); ++li) {
      const net::Layer& layer = model.layers()[li];
      std::vector<double> svals = linalg::svd_values(net::layer_jacobian(layer, v));
      SpectrumEntry entry;
      entry.layer = li;
      entry.probe = pi;
      entry.condition = condition_of(svals);
      entry.singular_values = svals;
      report.entries.push_back(std::move(entry));

      auto& mean = report.mean_spectrum[li];
      if (mean.empty()) mean.assign(svals.size(), 0.0);
      for (std::size_t k = 0; k < svals.size(); ++k) mean[k] += svals[k];
      v = net::layer_forward(layer, v).first;
    }
  }
  const double inv = 1.0 / static_cast<double>(probes.size());
  for (auto& mean : report.mean_spectrum)
    for (double& m : mean) m *= inv;
  return report;
}

// ============================================================================
// Frequency response
// ============================================================================

struct FrequencyResponse {
  std::vector<std::size_t> modes;
  std::vector<double> gains;                    // mean over phases
  std::vector<std::vector<double>> per_phase;   // retained per-phase gains
};

template <class ModelT>
FrequencyResponse frequency_response(const ModelT& model,
                                     const std::vector<tasks::FreqProbe>& sweep) {
  if (sweep.empty()) throw ValidationError("frequency_response: empty sweep");
  if (model.in_dim() != model.out_dim())
    throw ValidationError("frequency_response: model must preserve dimension, got " +
                          std::to_string(model.in_dim()) + " -> " +
                          std::to_string(model.out_dim()));
  FrequencyResponse fr;
  for (const tasks::FreqProbe& fp : sweep) {
    if (fp.probes.empty())
      throw ValidationError("frequency_response: probe set for mode " +
                            std::to_string(fp.mode) + " is empty");
    std::vector<double> phase_gains;
    for (const Vector& p : fp.probes) {
      if (p.size() != model.in_dim())
        throw ShapeError("frequency_response: probe dim " + std::to_string(p.size()) +
                         " != model dim " + std::to_string(model.in_dim()));
      const double denom = linalg::norm(p);
      if (denom == 0.0)
        throw ValidationError("frequency_response: zero-norm probe");
      phase_gains.push_back(linalg::norm(model.forward(p)) / denom);
    }
    double mean = 0.0;
    for (double g : phase_gains) mean += g;
    mean /= static_cast<double>(phase_gains.size());
    fr.modes.push_back(fp.mode);
    fr.gains.push_back(mean);
    fr.per_phase.push_back(std::move(phase_gains));
  }
  return fr;
}

// ============================================================================
// Recursive application and fixed-point traces
// ============================================================================

struct RecursionTrace {
  std::vector<Vector> iterates;  // iterates[0] is the start point
  std::vector<double> deltas;    // deltas[t-1] = ||x_t - x_{t-1}||
  std::vector<double> energies;  // squared deltas
  bool converged = false;
  std::size_t iterations = 0;    // applications of the map
};

// Thrown when the iteration escapes; carries what was recorded up to the blowup.
class RecursionDiverged : public DivergenceError {
 public:
  RecursionDiverged(const std::string& msg, std::size_t step, RecursionTrace t)
      : DivergenceError(msg, step), trace(std::move(t)) {}
  RecursionTrace trace;
};

constexpr double kRecursionEscape = 1e12;

namespace detail {

template <class ApplyFn>
RecursionTrace recurse_map(ApplyFn&& apply, const Vector& x0, std::size_t max_iters,
                           double tol) {
  if (max_iters < 1) throw ValidationError("recurse: max_iters must be >= 1");
  if (!(tol > 0.0)) throw ValidationError("recurse: tol must be > 0");
  RecursionTrace trace;
  trace.iterates.push_back(x0);
  Vector x = x0;
  for (std::size_t t = 1; t <= max_iters; ++t) {
    Vector next = apply(x);
    const double delta = linalg::norm(linalg::subtract(next, x));
    trace.iterates.push_back(next);
    trace.deltas.push_back(delta);
    trace.energies.push_back(delta * delta);
    trace.iterations = t;
    const double mag = linalg::norm(next);
    if (!(mag <= kRecursionEscape)) {
      const std::string msg = "recurse: iterate norm " + std::to_string(mag) +
                              " escaped at step " + std::to_string(t);
      throw RecursionDiverged(msg, t, std::move(trace));
    }
    x = std::move(next);
    if (delta < tol) {
      trace.converged = true;
      break;
    }
  }
  return trace;
}

}  // namespace detail

inline RecursionTrace recurse(const net::StructuredLayer& layer, const Vector& x0,
                              std::size_t max_iters = 1000, double tol = 1e-8) {
  if (layer.in_dim() != layer.out_dim())
    throw ValidationError("recurse: layer must be square, got " +
                          std::to_string(layer.out_dim()) + "x" +
                          std::to_string(layer.in_dim()));
  if (x0.size() != layer.in_dim())
    throw ShapeError("recurse: start point dim " + std::to_string(x0.size()) +
                     " != layer dim " + std::to_string(layer.in_dim()));
  return detail::recurse_map(
      [&](const Vector& x) { return net::layer_forward(layer, x).first; }, x0,
      max_iters, tol);
}

// Whole-net recursion is only defined when the net maps a space to itself.
inline RecursionTrace recurse(const net::Network& model, const Vector& x0,
                              std::size_t max_iters = 1000, double tol = 1e-8) {
  if (model.in_dim() != model.out_dim())
    throw ValidationError("recurse: network must preserve dimension, got " +
                          std::to_string(model.in_dim()) + " -> " +
                          std::to_string(model.out_dim()));
  if (x0.size() != model.in_dim())
    throw ShapeError("recurse: start point dim " + std::to_string(x0.size()) +
                     " != network dim " + std::to_string(model.in_dim()));
  return detail::recurse_map([&](const Vector& x) { return model.forward(x); }, x0,
                             max_iters, tol);
}

// Least-squares exponential decay rate fitted to a delta trace (slope of
// log-deltas); values at or below the noise floor are excluded.
inline double fitted_decay_rate(const std::vector<double>& deltas) {
  std::vector<std::pair<double, double>> pts;
  for (std::size_t t = 0; t < deltas.size(); ++t)
    if (deltas[t] > kRankFloor)
      pts.push_back({static_cast<double>(t), std::log(deltas[t])});
  if (pts.size() < 2)
    throw ValidationError("fitted_decay_rate: need at least two usable deltas");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(pts.size());
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw ValidationError("fitted_decay_rate: degenerate time axis");
  return std::exp((n * sxy - sx * sy) / denom);
}

// ============================================================================
// Perturbation robustness
// ============================================================================

struct RobustnessReport {
  std::vector<double> sigmas;
  std::vector<double> mean_dev;  // mean ||f(x+n) - f(x)|| per sigma
  std::vector<double> std_dev;   // population std per sigma
  double slope = 0.0;            // through-origin fit of mean_dev vs sigma
  double normalized_slope = 0.0; // slope / E||u||, comparable to spectral norms
};

inline std::vector<double> default_sigma_grid() { return {0.01, 0.05, 0.1, 0.2, 0.5}; }

// Mean length of a standard normal vector in n dimensions.
inline double chi_mean(std::size_t n) {
  const double hn = static_cast<double>(n);
  return std::sqrt(2.0) * std::exp(std::lgamma((hn + 1.0) / 2.0) - std::lgamma(hn / 2.0));
}

template <class ModelT>
RobustnessReport perturbation_robustness(const ModelT& model, const tasks::Dataset& data,
                                         const std::vector<double>& sigmas,
                                         std::size_t trials, std::uint64_t seed) {
  if (sigmas.empty()) throw ValidationError("perturbation_robustness: empty sigma grid");
  for (std::size_t i = 0; i + 1 < sigmas.size(); ++i)
    if (!(sigmas[i] < sigmas[i + 1]))
      throw ValidationError("perturbation_robustness: sigmas must be strictly increasing");
  if (sigmas.front() < 0.0)
    throw ValidationError("perturbation_robustness: negative sigma");
  if (trials < 1) throw ValidationError("perturbation_robustness: trials must be >= 1");
  if (data.size() == 0) throw ValidationError("perturbation_robustness: empty dataset");
  if (data.in_dim() != model.in_dim())
    throw ShapeError("perturbation_robustness: dataset dim " +
                     std::to_string(data.in_dim()) + " != model input dim " +
                     std::to_string(model.in_dim()));

  std::vector<Vector> base;
  base.reserve(data.size());
  for (const Vector& x : data.inputs) base.push_back(model.forward(x));

  rng::Prng gen(seed);
  RobustnessReport report;
  report.sigmas = sigmas;
  for (double sigma : sigmas) {
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t idx = gen.next_index(data.size());
      Vector x = data.inputs[idx];
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += sigma * gen.next_normal();
      const double dev = linalg::norm(linalg::subtract(model.forward(x), base[idx]));
      sum += dev;
      sumsq += dev * dev;
    }
    const double n = static_cast<double>(trials);
    const double mean = sum / n;
    report.mean_dev.push_back(mean);
    report.std_dev.push_back(std::sqrt(std::max(0.0, sumsq / n - mean * mean)));
  }

  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    num += sigmas[i] * report.mean_dev[i];
    den += sigmas[i] * sigmas[i];
  }
  report.slope = den > 0.0 ? num / den : 0.0;
  report.normalized_slope = report.slope / chi_mean(model.in_dim());
  return report;
}

// ============================================================================
// Depth sweep
// ============================================================================

struct DepthRecord {
  std::size_t depth = 0;
  bool diverged = false;
  std::size_t divergence_epoch = 0;  // meaningful only when diverged
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> final_val_loss;
};

// Trains one freshly built net per depth; divergence becomes a marker row.
template <class BuildFn>
std::vector<DepthRecord> depth_sweep(BuildFn&& build, const std::vector<std::size_t>& depths,
                                     const tasks::Dataset& data,
                                     const train::TrainConfig& cfg) {
  if (depths.empty()) throw ValidationError("depth_sweep: no depths requested");
  std::vector<DepthRecord> records;
  for (std::size_t d : depths) {
    if (d < 1) throw ValidationError("depth_sweep: depth must be >= 1");
    DepthRecord rec;
    rec.depth = d;
    net::Network model = build(d);
    try {
      train::TrainLog log = train::train(model, data, cfg);
      rec.final_loss = log.records.back().train_loss;
      rec.final_val_loss = log.records.back().val_loss;
    } catch (const DivergenceError& e) {
      rec.diverged = true;
      rec.divergence_epoch = e.step();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

// Stack of square band-limited structured layers; the canonical deep subject.
inline std::vector<net::LayerBlueprint> stacked_band_arch(std::size_t dim,
                                                          std::size_t depth,
                                                          std::size_t pass_below,
                                                          double cap = 0.95) {
  if (dim < 2) throw ValidationError("stacked_band_arch: dim must be >= 2");
  if (depth < 1) throw ValidationError("stacked_band_arch: depth must be >= 1");
  if (pass_below < 1 || pass_below > dim)
    throw ValidationError("stacked_band_arch: pass_below must be in [1, dim]");
  std::vector<std::size_t> pass(pass_below);
  std::iota(pass.begin(), pass.end(), std::size_t{0});
  std::vector<net::LayerBlueprint> arch(depth);
  for (net::LayerBlueprint& bp : arch) {
    bp.type = net::LayerBlueprint::Type::structured;
    bp.in_dim = dim;
    bp.out_dim = dim;
    bp.shaping = shaping::ShapingOperator::dct_band(dim, dim, pass);
    bp.correction = true;
    bp.cap = cap;
  }
  return arch;
}

// ============================================================================
// Ablation: shaping-operator variants
// ============================================================================

// A canonical, deterministic operator instance per kind for matched
// comparisons. Graph edges, when supplied, drive the Laplacian; otherwise a
// path graph stands in.
inline shaping::ShapingOperator canonical_operator(
    shaping::ShapingKind kind, std::size_t out_dim, std::size_t in_dim,
    std::uint64_t seed,
    const std::vector<std::pair<std::size_t, std::size_t>>* edges = nullptr) {
  using shaping::ShapingKind;
  using shaping::ShapingOperator;
  switch (kind) {
    case ShapingKind::identity:
      return ShapingOperator::identity();
    case ShapingKind::sparsity_mask: {
      rng::Prng gen(seed ^ 0x4D41534BULL);  // distinct stream from weight init
      Matrix mask(out_dim, in_dim);
      for (std::size_t i = 0; i < out_dim; ++i) {
        bool live = false;
        for (std::size_t j = 0; j < in_dim; ++j) {
          mask(i, j) = gen.next_uniform01() < 0.5 ? 1.0 : 0.0;
          live = live || mask(i, j) == 1.0;
        }
        if (!live) mask(i, i % in_dim) = 1.0;
      }
      return ShapingOperator::sparsity_mask(std::move(mask));
    }
    case ShapingKind::diagonal_scale: {
      Vector d(out_dim);
      const double step = out_dim > 1 ? 1.0 / static_cast<double>(out_dim - 1) : 0.0;
      for (std::size_t i = 0; i < out_dim; ++i) d[i] = 0.5 + step * static_cast<double>(i);
      return ShapingOperator::diagonal_scale(std::move(d));
    }
    case ShapingKind::low_rank:
      return ShapingOperator::low_rank(out_dim, in_dim,
                                       std::max<std::size_t>(1, std::min(out_dim, in_dim) / 2));
    case ShapingKind::dct_band: {
      const std::size_t cutoff =
          std::max<std::size_t>(1, std::min(out_dim, in_dim) / 4);
      std::vector<std::size_t> pass(cutoff);
      std::iota(pass.begin(), pass.end(), std::size_t{0});
      return ShapingOperator::dct_band(out_dim, in_dim, std::move(pass));
    }
    case ShapingKind::laplacian_smooth: {
      std::vector<std::pair<std::size_t, std::size_t>> path;
      const std::vector<std::pair<std::size_t, std::size_t>>* use = edges;
      if (use == nullptr || use->empty()) {
        for (std::size_t i = 0; i + 1 < out_dim; ++i) path.push_back({i, i + 1});
        use = &path;
      }
      return ShapingOperator::laplacian_smooth(linalg::graph_laplacian(out_dim, *use));
    }
    case ShapingKind::learned_projection:
      return ShapingOperator::learned_projection(out_dim);
  }
  throw ValidationError("canonical_operator: unreachable");
}

struct VariantOutcome {
  shaping::ShapingKind kind = shaping::ShapingKind::identity;
  std::vector<train::TrainLog> logs;     // per seed
  std::vector<double> finals;            // per seed: val accuracy or final loss
  double final_mean = 0.0;
  double final_std = 0.0;                // across seeds
  std::vector<double> projection_drift;  // ||P - I||_F per seed; 0 for fixed ops
};

// One square shaped hidden layer plus a plain linear head, retrained per
// (variant, seed) with matched seeds and shared data.
inline std::vector<VariantOutcome> ablation_projection_variants(
    const tasks::Dataset& data, const std::vector<shaping::ShapingKind>& variants,
    const train::TrainConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  if (variants.empty())
    throw ValidationError("ablation_projection_variants: no variants");
  if (seeds.empty()) throw ValidationError("ablation_projection_variants: no seeds");
  const std::size_t dim = data.in_dim();
  const std::size_t out = data.out_dim();

  std::vector<VariantOutcome> outcomes;
  for (shaping::ShapingKind kind : variants) {
    VariantOutcome vo;
    vo.kind = kind;
    for (std::uint64_t seed : seeds) {
      std::vector<net::LayerBlueprint> arch(2);
      arch[0].type = net::LayerBlueprint::Type::structured;
      arch[0].in_dim = dim;
      arch[0].out_dim = dim;
      arch[0].shaping = canonical_operator(kind, dim, dim, seed, &data.edges);
      arch[0].correction = true;
      arch[1].type = net::LayerBlueprint::Type::dense;
      arch[1].in_dim = dim;
      arch[1].out_dim = out;
      arch[1].dense_activation = net::Activation::none;

      net::Network model = net::init_network(arch, seed);
      train::TrainConfig run_cfg = cfg;
      run_cfg.seed = seed;
      train::TrainLog log = train::train(model, data, run_cfg);

      const train::EpochRecord& last = log.records.back();
      double metric;
      if (last.val_accuracy.has_value())
        metric = *last.val_accuracy;
      else if (last.val_loss.has_value())
        metric = *last.val_loss;
      else
        metric = last.train_loss;
      vo.finals.push_back(metric);

      double drift = 0.0;
      if (const auto* s = std::get_if<net::StructuredLayer>(&model.layers()[0]))
        if (const Matrix* p = s->shaping.projection())
          drift = linalg::frobenius_norm(linalg::subtract(*p, Matrix::identity(p->rows())));
      vo.projection_drift.push_back(drift);
      vo.logs.push_back(std::move(log));
    }
    double mean = 0.0;
    for (double f : vo.finals) mean += f;
    mean /= static_cast<double>(vo.finals.size());
    double var = 0.0;
    for (double f : vo.finals) var += (f - mean) * (f - mean);
    vo.final_mean = mean;
    vo.final_std = std::sqrt(var / static_cast<double>(vo.finals.size()));
    outcomes.push_back(std::move(vo));
  }
  return outcomes;
}

// ============================================================================
// Ablation: correction path on/off
// ============================================================================

// Copy of a network with every correction path removed; structured weights
// are shared bitwise, so the pair differs only in the corrective term.
inline net::Network strip_corrections(const net::Network& src) {
  std::vector<net::Layer> layers;
  layers.reserve(src.depth());
  for (const net::Layer& l : src.layers()) {
    if (const auto* s = std::get_if<net::StructuredLayer>(&l))
      layers.emplace_back(net::StructuredLayer(s->weight, s->shaping, std::nullopt,
                                               false, s->outer_activation));
    else
      layers.push_back(l);
  }
  return net::Network(std::move(layers));
}

struct ResidualAblation {
  train::TrainLog with_correction;
  train::TrainLog without_correction;
  double final_with = 0.0;
  double final_without = 0.0;
};

inline ResidualAblation ablation_residual(const std::vector<net::LayerBlueprint>& arch,
                                          const tasks::Dataset& data,
                                          const train::TrainConfig& cfg,
                                          std::uint64_t init_seed) {
  net::Network on = net::init_network(arch, init_seed);
  net::Network off = strip_corrections(on);
  ResidualAblation out;
  out.with_correction = train::train(on, data, cfg);
  out.without_correction = train::train(off, data, cfg);
  out.final_with = out.with_correction.records.back().train_loss;
  out.final_without = out.without_correction.records.back().train_loss;
  return out;
}

// ============================================================================
// Multi-resolution composition
// ============================================================================

// Two parallel square structured layers whose pass-bands split the spectrum:
// branch 0 keeps the lower half of the modes, branch 1 the upper half.
inline net::TwoBranchNet band_split_net(std::size_t dim, std::uint64_t seed,
                                        double cap = 0.95) {
  if (dim < 2) throw ValidationError("band_split_net: dim must be >= 2");
  const std::size_t half = (dim + 1) / 2;
  std::vector<std::size_t> low(half), high(dim - half);
  std::iota(low.begin(), low.end(), std::size_t{0});
  std::iota(high.begin(), high.end(), half);

  auto branch_bp = [&](std::vector<std::size_t> pass) {
    net::LayerBlueprint bp;
    bp.type = net::LayerBlueprint::Type::structured;
    bp.in_dim = dim;
    bp.out_dim = dim;
    bp.shaping = shaping::ShapingOperator::dct_band(dim, dim, std::move(pass));
    bp.correction = true;
    bp.cap = cap;
    return bp;
  };
  return net::TwoBranchNet(net::init_network({branch_bp(low)}, seed),
                           net::init_network({branch_bp(high)}, seed + 1));
}

template <class ModelT>
std::size_t parameter_count(ModelT& model) {
  std::size_t total = 0;
  for (const net::ParamView& v : model.parameter_views()) total += v.size;
  return total;
}

struct MultiresOutcome {
  train::TrainLog branched;
  train::TrainLog baseline;
  std::size_t branched_params = 0;
  std::size_t baseline_params = 0;
};

// Band-split two-branch net against a dense net of matched size on the same
// mixed-frequency data.
inline MultiresOutcome multires_compose(const tasks::Dataset& data,
                                        const train::TrainConfig& cfg,
                                        std::uint64_t init_seed) {
  if (data.meta.generator != "multiscale")
    throw ValidationError("multires_compose: needs a multiscale dataset, got '" +
                          data.meta.generator + "'");
  const std::size_t dim = data.in_dim();
  net::TwoBranchNet branched = band_split_net(dim, init_seed);

  // dense dim -> 3*dim -> dim carries exactly the same parameter count as the
  // two branches (3*dim*dim + 2*dim each)
  std::vector<net::LayerBlueprint> base(2);
  base[0].type = net::LayerBlueprint::Type::dense;
  base[0].in_dim = dim;
  base[0].out_dim = 3 * dim;
  base[0].dense_activation = net::Activation::tanh;
  base[1].type = net::LayerBlueprint::Type::dense;
  base[1].in_dim = 3 * dim;
  base[1].out_dim = dim;
  base[1].dense_activation = net::Activation::none;
  net::Network baseline = net::init_network(base, init_seed);

  MultiresOutcome out;
  out.branched_params = parameter_count(branched);
  out.baseline_params = parameter_count(baseline);
  out.branched = train::train(branched, data, cfg);
  out.baseline = train::train(baseline, data, cfg);
  return out;
}

}  // namespace pgnn::diag
