#pragma once
// Experiment runner: builds datasets and networks from a parsed config,
// dispatches one experiment kind per process, and writes the artifact tree —
// config.echo at the root, per-seed CSV reports in seed<N>/ subdirectories,
// and figure SVGs at the root. Every artifact is a pure function of the
// config, so reruns are byte-identical. Training divergence is recorded as
// data (a divergence.csv marker) rather than failing the run.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pgnn/checkpoint.hpp"
#include "pgnn/config.hpp"
#include "pgnn/csv.hpp"
#include "pgnn/diagnostics.hpp"
#include "pgnn/errors.hpp"
#include "pgnn/format.hpp"
#include "pgnn/io.hpp"
#include "pgnn/net.hpp"
#include "pgnn/rng.hpp"
#include "pgnn/shaping.hpp"
#include "pgnn/svg.hpp"
#include "pgnn/tasks.hpp"
#include "pgnn/train.hpp"

namespace pgnn::exp {

using linalg::Matrix;
using linalg::Vector;

inline constexpr const char* kOutRootEnv = "PGNN_OUT_ROOT";

struct RunOptions {
  bool no_svg = false;  // skip figure rendering, keep CSVs
  bool resume = false;  // train kind: continue from seed<N>/checkpoint.bin if present
};

// ============================================================================
// Builders: config blocks -> runtime objects
// ============================================================================

inline tasks::Dataset build_dataset(const config::TaskSpec& t) {
  if (t.generator == "signal_recovery")
    return tasks::gen_signal_recovery(t.seed, t.n_samples, t.dim, t.noise_std);
  if (t.generator == "multiscale")
    return tasks::gen_multiscale_signal(t.seed, t.n_samples, t.dim);
  if (t.generator == "graph_classification")
    return tasks::gen_graph_classification(t.seed, t.n_nodes, t.n_classes, t.homophily,
                                           t.feature_noise);
  throw ValidationError("unknown task generator: " + t.generator);
}

// Operator instance for one layer spec. The mask draws from a seed-derived
// stream separate from weight init; graph edges, when the dataset has them,
// drive the Laplacian, otherwise a path graph stands in.
inline shaping::ShapingOperator build_operator(
    const config::LayerSpec& l, std::uint64_t seed,
    const std::vector<std::pair<std::size_t, std::size_t>>* edges) {
  using shaping::ShapingKind;
  using shaping::ShapingOperator;
  switch (shaping::kind_from_name(l.shaping)) {
    case ShapingKind::identity:
      return ShapingOperator::identity();
    case ShapingKind::sparsity_mask: {
      rng::Prng gen(seed ^ 0x4D41534BULL);  // same stream family as canonical_operator
      Matrix mask(l.out, l.in);
      for (std::size_t i = 0; i < l.out; ++i) {
        bool live = false;
        for (std::size_t j = 0; j < l.in; ++j) {
          mask(i, j) = gen.next_uniform01() < l.density ? 1.0 : 0.0;
          live = live || mask(i, j) == 1.0;
        }
        if (!live) mask(i, i % l.in) = 1.0;
      }
      return ShapingOperator::sparsity_mask(std::move(mask));
    }
    case ShapingKind::diagonal_scale: {
      Vector d(l.out);
      const double step = l.out > 1 ? 1.0 / static_cast<double>(l.out - 1) : 0.0;
      for (std::size_t i = 0; i < l.out; ++i) d[i] = 0.5 + step * static_cast<double>(i);
      return ShapingOperator::diagonal_scale(std::move(d));
    }
    case ShapingKind::low_rank:
      return ShapingOperator::low_rank(l.out, l.in, l.rank);
    case ShapingKind::dct_band: {
      std::vector<std::size_t> pass(l.cutoff);
      std::iota(pass.begin(), pass.end(), std::size_t{0});
      return ShapingOperator::dct_band(l.out, l.in, std::move(pass));
    }
    case ShapingKind::laplacian_smooth: {
      std::vector<std::pair<std::size_t, std::size_t>> path;
      const auto* use = edges;
      if (use == nullptr || use->empty()) {
        for (std::size_t i = 0; i + 1 < l.out; ++i) path.push_back({i, i + 1});
        use = &path;
      }
      return ShapingOperator::laplacian_smooth(linalg::graph_laplacian(l.out, *use),
                                               l.alpha);
    }
    case ShapingKind::learned_projection:
      return ShapingOperator::learned_projection(l.out);
  }
  throw ValidationError("build_operator: unreachable");
}

inline net::LayerBlueprint build_blueprint(
    const config::LayerSpec& l, std::uint64_t seed,
    const std::vector<std::pair<std::size_t, std::size_t>>* edges) {
  net::LayerBlueprint bp;
  bp.type = l.type == "dense" ? net::LayerBlueprint::Type::dense
                              : net::LayerBlueprint::Type::structured;
  bp.in_dim = l.in;
  bp.out_dim = l.out;
  if (bp.type == net::LayerBlueprint::Type::structured)
    bp.shaping = build_operator(l, seed, edges);
  bp.correction = l.correction;
  bp.hidden_dim = l.hidden;
  bp.outer_activation = l.outer_tanh;
  bp.dense_activation = net::activation_from_name(l.activation);
  bp.cap = l.cap;
  return bp;
}

inline std::vector<net::LayerBlueprint> build_arch(const config::ExperimentConfig& cfg,
                                                   std::uint64_t seed,
                                                   const tasks::Dataset& data) {
  std::vector<net::LayerBlueprint> arch;
  arch.reserve(cfg.layers.size());
  for (const config::LayerSpec& l : cfg.layers)
    arch.push_back(build_blueprint(l, seed, &data.edges));
  return arch;
}

inline net::Network build_network(const config::ExperimentConfig& cfg, std::uint64_t seed,
                                  const tasks::Dataset& data) {
  return net::init_network(build_arch(cfg, seed, data), seed);
}

inline train::TrainConfig build_train_config(const config::ExperimentConfig& cfg,
                                             std::uint64_t seed) {
  train::TrainConfig t;
  t.epochs = cfg.train.epochs;
  t.batch_size = cfg.train.batch_size;
  t.learning_rate = cfg.train.learning_rate;
  if (cfg.train.optimizer == "sgd")
    t.optimizer = train::SgdConfig{cfg.train.momentum};
  else
    t.optimizer = train::AdamConfig{cfg.train.beta1, cfg.train.beta2, cfg.train.eps};
  t.seed = seed;
  t.loss = train::loss_from_name(cfg.train.loss);
  t.log_every = cfg.train.log_every;
  return t;
}

// Two-layer ReLU MLP sized to carry (approximately) target_params parameters:
// the like-for-like conventional baseline for any structured net.
inline net::Network matched_dense_net(std::size_t in_dim, std::size_t out_dim,
                                      std::size_t target_params, std::uint64_t seed) {
  const std::size_t per_hidden = in_dim + out_dim + 1;  // h*(in+1) + out*(h+1)
  std::size_t hidden = 1;
  if (target_params > out_dim)
    hidden = std::max<std::size_t>(
        1, (target_params - out_dim + per_hidden / 2) / per_hidden);
  std::vector<net::LayerBlueprint> arch(2);
  arch[0].type = net::LayerBlueprint::Type::dense;
  arch[0].in_dim = in_dim;
  arch[0].out_dim = hidden;
  arch[0].dense_activation = net::Activation::relu;
  arch[1].type = net::LayerBlueprint::Type::dense;
  arch[1].in_dim = hidden;
  arch[1].out_dim = out_dim;
  arch[1].dense_activation = net::Activation::none;
  return net::init_network(arch, seed);
}

inline std::filesystem::path resolve_out_root(const config::ExperimentConfig& cfg) {
  if (!cfg.out.empty()) return std::filesystem::path(cfg.out);
  if (const char* env = std::getenv(kOutRootEnv); env != nullptr && *env != '\0')
    return std::filesystem::path(env) / cfg.kind;
  return std::filesystem::path("runs") / cfg.kind;
}

// ============================================================================
// Shared run plumbing
// ============================================================================

namespace detail {

inline constexpr std::uint64_t kProbeDomain = 0x50524F4245ULL;  // start-point stream

struct Paths {
  std::filesystem::path root;

  std::filesystem::path seed_dir(std::uint64_t seed) const {
    const std::filesystem::path dir = root / ("seed" + std::to_string(seed));
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output dir: " + dir.string());
    return dir;
  }
};

inline void write_divergence(const std::filesystem::path& dir, std::size_t epoch) {
  io::write_file(dir / "divergence.csv", "diverged_at\n" + std::to_string(epoch) + "\n");
}

inline void maybe_svg(const RunOptions& opts, const std::filesystem::path& path,
                      const std::string& text) {
  if (!opts.no_svg) io::write_file(path, text);
}

inline std::vector<double> epochs_of(const train::TrainLog& log) {
  std::vector<double> x;
  x.reserve(log.records.size());
  for (const auto& r : log.records) x.push_back(static_cast<double>(r.epoch));
  return x;
}

inline std::vector<double> losses_of(const train::TrainLog& log) {
  std::vector<double> y;
  y.reserve(log.records.size());
  for (const auto& r : log.records) y.push_back(r.train_loss);
  return y;
}

inline svg::Series loss_series(const std::string& label, const train::TrainLog& log) {
  return svg::Series{label, epochs_of(log), losses_of(log)};
}

// Gaussian start point for recursive application, one stream per seed.
inline Vector probe_vector(std::size_t dim, std::uint64_t seed) {
  rng::Prng gen(seed ^ kProbeDomain);
  Vector x(dim);
  for (std::size_t i = 0; i < dim; ++i) x[i] = gen.next_normal();
  return x;
}

// First n dataset inputs by validation-first order, cycling when short.
inline std::vector<Vector> dataset_probes(const tasks::Dataset& data, std::size_t n) {
  const std::vector<std::size_t>& idx =
      data.val_idx.empty() ? data.train_idx : data.val_idx;
  if (idx.empty()) throw ValidationError("dataset has no samples to probe");
  std::vector<Vector> probes;
  probes.reserve(n);
  for (std::size_t k = 0; k < n; ++k) probes.push_back(data.inputs[idx[k % idx.size()]]);
  return probes;
}

}  // namespace detail

// ============================================================================
// Kind handlers
// ============================================================================

namespace detail {

inline void run_train(const config::ExperimentConfig& cfg, const RunOptions& opts,
                      const Paths& paths, const tasks::Dataset& data,
                      const std::string& echo) {
  const bool with_baseline = cfg.train.baseline == "dense";
  std::vector<std::pair<std::uint64_t, train::TrainLog>> logs, base_logs;

  for (std::uint64_t seed : cfg.seeds) {
    const std::filesystem::path dir = paths.seed_dir(seed);
    const train::TrainConfig tcfg = build_train_config(cfg, seed);

    net::Network model = build_network(cfg, seed, data);
    train::TrainState st;
    if (opts.resume && std::filesystem::exists(dir / "checkpoint.bin")) {
      const ckpt::Checkpoint c = ckpt::load_checkpoint(dir / "checkpoint.bin");
      if (c.seed != seed)
        throw ValidationError("checkpoint in " + dir.string() + " belongs to seed " +
                              std::to_string(c.seed));
      ckpt::restore(c, model, st);
    }
    try {
      train::TrainLog log = train::train(model, data, tcfg, &st);
      io::write_file(dir / "metrics.csv", csvio::metrics_csv(log));
      io::write_file(dir / "actvar.csv", csvio::actvar_csv(log));
      if (cfg.train.checkpoint)
        ckpt::save_checkpoint(dir / "checkpoint.bin", ckpt::capture(echo, seed, model, st));
      logs.emplace_back(seed, std::move(log));
    } catch (const DivergenceError& e) {
      write_divergence(dir, e.step());
    }

    if (with_baseline) {
      net::Network fresh = build_network(cfg, seed, data);
      net::Network base = matched_dense_net(data.in_dim(), data.out_dim(),
                                            diag::parameter_count(fresh), seed);
      try {
        train::TrainLog log = train::train(base, data, tcfg);
        io::write_file(dir / "metrics_baseline.csv", csvio::metrics_csv(log));
        io::write_file(dir / "actvar_baseline.csv", csvio::actvar_csv(log));
        base_logs.emplace_back(seed, std::move(log));
      } catch (const DivergenceError& e) {
        io::write_file(dir / "divergence_baseline.csv",
                       "diverged_at\n" + std::to_string(e.step()) + "\n");
      }
    }
  }
  if (opts.no_svg || logs.empty()) return;

  std::vector<svg::Series> loss_s, grad_s;
  for (const auto& [seed, log] : logs) {
    loss_s.push_back(loss_series("structured s" + std::to_string(seed), log));
    std::vector<double> g;
    for (const auto& r : log.records) g.push_back(r.grad_norm);
    grad_s.push_back(svg::Series{"structured s" + std::to_string(seed), epochs_of(log), g});
  }
  for (const auto& [seed, log] : base_logs) {
    loss_s.push_back(loss_series("dense s" + std::to_string(seed), log));
    std::vector<double> g;
    for (const auto& r : log.records) g.push_back(r.grad_norm);
    grad_s.push_back(svg::Series{"dense s" + std::to_string(seed), epochs_of(log), g});
  }
  svg::PlotStyle loss_style;
  loss_style.title = "training loss";
  loss_style.x_label = "epoch";
  loss_style.y_label = "loss";
  loss_style.log_y = true;
  io::write_file(paths.root / "loss_curves.svg", svg::line_plot(loss_s, loss_style));

  svg::PlotStyle grad_style;
  grad_style.title = "gradient norm";
  grad_style.x_label = "epoch";
  grad_style.y_label = "||g||";
  grad_style.log_y = true;
  io::write_file(paths.root / "grad_norms.svg", svg::line_plot(grad_s, grad_style));

  // residual norms and activation-variance heatmaps: first surviving seed
  const train::TrainLog& first = logs.front().second;
  const std::size_t n_layers = first.records.front().residual_norms.size();
  std::vector<svg::Series> res_s;
  for (std::size_t l = 0; l < n_layers; ++l) {
    std::vector<double> y;
    for (const auto& r : first.records) y.push_back(r.residual_norms[l]);
    res_s.push_back(svg::Series{"layer " + std::to_string(l), epochs_of(first), y});
  }
  svg::PlotStyle res_style;
  res_style.title = "correction output norm";
  res_style.x_label = "epoch";
  res_style.y_label = "mean ||C(x)||";
  io::write_file(paths.root / "residual_norms.svg", svg::line_plot(res_s, res_style));

  auto write_heatmaps = [&](const train::TrainLog& log, const std::string& stem) {
    const std::size_t layers = log.records.front().activation_variance.size();
    for (std::size_t l = 0; l < layers; ++l) {
      std::vector<std::vector<double>> grid;
      for (const auto& r : log.records) grid.push_back(r.activation_variance[l]);
      svg::PlotStyle style;
      style.title = stem + " activation variance, layer " + std::to_string(l);
      style.x_label = "neuron";
      style.y_label = "recorded epoch";
      io::write_file(paths.root / (stem + "_actvar_layer" + std::to_string(l) + ".svg"),
                     svg::heatmap(grid, style));
    }
  };
  write_heatmaps(first, "structured");
  if (!base_logs.empty()) write_heatmaps(base_logs.front().second, "dense");
}

inline void run_jacobian(const config::ExperimentConfig& cfg, const RunOptions& opts,
                         const Paths& paths, const tasks::Dataset& data) {
  const bool with_baseline = cfg.train.baseline == "dense";
  const std::vector<Vector> probes = dataset_probes(data, cfg.jacobian_probes);
  std::vector<diag::SpectrumReport> reports, base_reports;

  for (std::uint64_t seed : cfg.seeds) {
    const std::filesystem::path dir = paths.seed_dir(seed);
    const train::TrainConfig tcfg = build_train_config(cfg, seed);
    net::Network model = build_network(cfg, seed, data);
    try {
      if (tcfg.epochs > 0) train::train(model, data, tcfg);
      diag::SpectrumReport rep = diag::jacobian_spectrum(model, probes);
      io::write_file(dir / "spectrum.csv", csvio::spectrum_csv(rep));
      reports.push_back(std::move(rep));
    } catch (const DivergenceError& e) {
      write_divergence(dir, e.step());
    }
    if (with_baseline) {
      net::Network fresh = build_network(cfg, seed, data);
      net::Network base = matched_dense_net(data.in_dim(), data.out_dim(),
                                            diag::parameter_count(fresh), seed);
      try {
        if (tcfg.epochs > 0) train::train(base, data, tcfg);
        diag::SpectrumReport rep = diag::jacobian_spectrum(base, probes);
        io::write_file(dir / "spectrum_baseline.csv", csvio::spectrum_csv(rep));
        base_reports.push_back(std::move(rep));
      } catch (const DivergenceError& e) {
        io::write_file(dir / "divergence_baseline.csv",
                       "diverged_at\n" + std::to_string(e.step()) + "\n");
      }
    }
  }
  if (opts.no_svg || reports.empty()) return;

  std::vector<svg::Series> series;
  auto spectrum_series = [&](const diag::SpectrumReport& rep, const std::string& stem) {
    for (std::size_t l = 0; l < rep.mean_spectrum.size(); ++l) {
      std::vector<double> x(rep.mean_spectrum[l].size());
      std::iota(x.begin(), x.end(), 1.0);
      series.push_back(
          svg::Series{stem + " layer " + std::to_string(l), x, rep.mean_spectrum[l]});
    }
  };
  spectrum_series(reports.front(), "structured");
  if (!base_reports.empty()) spectrum_series(base_reports.front(), "dense");
  svg::PlotStyle style;
  style.title = "layer jacobian spectra";
  style.x_label = "singular value index";
  style.y_label = "singular value";
  style.log_y = true;
  io::write_file(paths.root / "jacobian_spectrum.svg", svg::line_plot(series, style));
}

inline void run_freq(const config::ExperimentConfig& cfg, const RunOptions& opts,
                     const Paths& paths, const tasks::Dataset& data) {
  const bool with_baseline = cfg.train.baseline == "dense";
  const std::size_t dim = data.in_dim();
  std::size_t n_freqs = cfg.freq_count == 0 ? dim - 1 : cfg.freq_count;
  n_freqs = std::min(std::max<std::size_t>(2, n_freqs), dim - 1);
  const std::vector<tasks::FreqProbe> sweep =
      tasks::gen_freq_sweep(dim, n_freqs, cfg.freq_phases);

  std::vector<svg::Series> series;
  auto gain_series = [&](const diag::FrequencyResponse& fr, const std::string& label) {
    std::vector<double> x;
    for (std::size_t m : fr.modes) x.push_back(static_cast<double>(m));
    series.push_back(svg::Series{label, x, fr.gains});
  };

  for (std::uint64_t seed : cfg.seeds) {
    const std::filesystem::path dir = paths.seed_dir(seed);
    const train::TrainConfig tcfg = build_train_config(cfg, seed);
    net::Network model = build_network(cfg, seed, data);
    try {
      if (tcfg.epochs > 0) train::train(model, data, tcfg);
      diag::FrequencyResponse fr = diag::frequency_response(model, sweep);
      io::write_file(dir / "freq_response.csv", csvio::freq_csv(fr));
      gain_series(fr, "structured s" + std::to_string(seed));
    } catch (const DivergenceError& e) {
      write_divergence(dir, e.step());
    }
    if (with_baseline) {
      net::Network fresh = build_network(cfg, seed, data);
      net::Network base = matched_dense_net(dim, data.out_dim(),
                                            diag::parameter_count(fresh), seed);
      try {
        if (tcfg.epochs > 0) train::train(base, data, tcfg);
        diag::FrequencyResponse fr = diag::frequency_response(base, sweep);
        io::write_file(dir / "freq_response_baseline.csv", csvio::freq_csv(fr));
        gain_series(fr, "dense s" + std::to_string(seed));
      } catch (const DivergenceError& e) {
        io::write_file(dir / "divergence_baseline.csv",
                       "diverged_at\n" + std::to_string(e.step()) + "\n");
      }
    }
  }
  if (opts.no_svg || series.empty()) return;
  svg::PlotStyle style;
  style.title = "frequency response";
  style.x_label = "mode";
  style.y_label = "gain";
  style.log_y = true;
  io::write_file(paths.root / "frequency_response.svg", svg::line_plot(series, style));
}

inline void run_recurse(const config::ExperimentConfig& cfg, const RunOptions& opts,
                        const Paths& paths, const tasks::Dataset& data) {
  std::vector<svg::Series> delta_s, energy_s;
  for (std::uint64_t seed : cfg.seeds) {
    const std::filesystem::path dir = paths.seed_dir(seed);
    const train::TrainConfig tcfg = build_train_config(cfg, seed);
    net::Network model = build_network(cfg, seed, data);
    if (tcfg.epochs > 0) {
      try {
        train::train(model, data, tcfg);
      } catch (const DivergenceError& e) {
        write_divergence(dir, e.step());
        continue;  // parameters are not meaningful past the blowup
      }
    }
    const auto* layer =
        std::get_if<net::StructuredLayer>(&model.layers()[cfg.recurse_layer]);
    if (layer == nullptr)
      throw ValidationError("recurse: layer " + std::to_string(cfg.recurse_layer) +
                            " is not a structured layer");
    const Vector x0 = probe_vector(layer->in_dim(), seed);
    diag::RecursionTrace trace;
    try {
      trace = diag::recurse(*layer, x0, cfg.recurse_max_iters, cfg.recurse_tol);
    } catch (const diag::RecursionDiverged& e) {
      trace = e.trace;  // partial trace is still data
      write_divergence(dir, e.step());
    }
    io::write_file(dir / "recursion.csv", csvio::recursion_csv(trace));

    if (!trace.deltas.empty()) {
      std::vector<double> t(trace.deltas.size());
      std::iota(t.begin(), t.end(), 1.0);
      delta_s.push_back(
          svg::Series{"seed " + std::to_string(seed), t, trace.deltas});
      energy_s.push_back(
          svg::Series{"seed " + std::to_string(seed), t, trace.energies});
    }
  }
  if (opts.no_svg || delta_s.empty()) return;
  svg::PlotStyle dstyle;
  dstyle.title = "fixed-point convergence";
  dstyle.x_label = "iteration";
  dstyle.y_label = "||x_t - x_{t-1}||";
  dstyle.log_y = true;
  io::write_file(paths.root / "convergence.svg", svg::line_plot(delta_s, dstyle));
  svg::PlotStyle estyle;
  estyle.title = "iteration energy";
  estyle.x_label = "iteration";
  estyle.y_label = "E_t";
  estyle.log_y = true;
  io::write_file(paths.root / "energy.svg", svg::line_plot(energy_s, estyle));
}

inline void run_perturb(const config::ExperimentConfig& cfg, const RunOptions& opts,
                        const Paths& paths, const tasks::Dataset& data) {
  const bool with_baseline = cfg.train.baseline == "dense";
  std::vector<diag::RobustnessReport> reports, base_reports;

  for (std::uint64_t seed : cfg.seeds) {
    const std::filesystem::path dir = paths.seed_dir(seed);
    const train::TrainConfig tcfg = build_train_config(cfg, seed);
    net::Network model = build_network(cfg, seed, data);
    try {
      if (tcfg.epochs > 0) train::train(model, data, tcfg);
      diag::RobustnessReport rep = diag::perturbation_robustness(
          model, data, cfg.perturb_sigmas, cfg.perturb_trials, seed);
      io::write_file(dir / "robustness.csv", csvio::robustness_csv(rep));
      reports.push_back(std::move(rep));
    } catch (const DivergenceError& e) {
      write_divergence(dir, e.step());
    }
    if (with_baseline) {
      net::Network fresh = build_network(cfg, seed, data);
      net::Network base = matched_dense_net(data.in_dim(), data.out_dim(),
                                            diag::parameter_count(fresh), seed);
      try {
        if (tcfg.epochs > 0) train::train(base, data, tcfg);
        diag::RobustnessReport rep = diag::perturbation_robustness(
            base, data, cfg.perturb_sigmas, cfg.perturb_trials, seed);
        io::write_file(dir / "robustness_baseline.csv", csvio::robustness_csv(rep));
        base_reports.push_back(std::move(rep));
      } catch (const DivergenceError& e) {
        io::write_file(dir / "divergence_baseline.csv",
                       "diverged_at\n" + std::to_string(e.step()) + "\n");
      }
    }
  }
  if (reports.empty()) return;

  // across-seed mean and population std of the per-sigma mean deviation
  auto summarize = [&](const std::vector<diag::RobustnessReport>& reps,
                       const std::string& label, std::string& csv,
                       std::vector<svg::Series>& series) {
    const std::vector<double>& sigmas = reps.front().sigmas;
    std::vector<double> mean(sigmas.size(), 0.0), sd(sigmas.size(), 0.0);
    for (std::size_t k = 0; k < sigmas.size(); ++k) {
      for (const auto& r : reps) mean[k] += r.mean_dev[k];
      mean[k] /= static_cast<double>(reps.size());
      for (const auto& r : reps)
        sd[k] += (r.mean_dev[k] - mean[k]) * (r.mean_dev[k] - mean[k]);
      sd[k] = std::sqrt(sd[k] / static_cast<double>(reps.size()));
      csv += label + "," + fmt::format_double(sigmas[k]) + "," +
             fmt::format_double(mean[k]) + "," + fmt::format_double(sd[k]) + "\n";
    }
    series.push_back(svg::Series{label, sigmas, mean});
  };

  std::string summary = "model,sigma,mean_dev,std_across_seeds\n";
  std::vector<svg::Series> series;
  summarize(reports, "structured", summary, series);
  if (!base_reports.empty()) summarize(base_reports, "dense", summary, series);
  io::write_file(paths.root / "robustness_summary.csv", summary);

  if (opts.no_svg) return;
  svg::PlotStyle style;
  style.title = "perturbation robustness";
  style.x_label = "input noise sigma";
  style.y_label = "mean output deviation";
  io::write_file(paths.root / "perturbation.svg", svg::line_plot(series, style));
}

inline void run_depth(const config::ExperimentConfig& cfg, const RunOptions& opts,
                      const Paths& paths, const tasks::Dataset& data) {
  const config::LayerSpec tmpl = cfg.layers.front();
  const std::size_t dim = data.in_dim();
  std::string summary = "seed,depth,diverged,divergence_epoch,final_loss,final_val_loss\n";
  std::vector<svg::Series> series;

  for (std::uint64_t seed : cfg.seeds) {
    const std::filesystem::path dir = paths.seed_dir(seed);
    const train::TrainConfig tcfg = build_train_config(cfg, seed);

    auto build = [&](std::size_t depth) {
      config::LayerSpec square = tmpl;
      square.in = dim;
      square.out = dim;
      if (square.hidden == 0) square.hidden = dim;
      std::vector<net::LayerBlueprint> arch(
          depth, build_blueprint(square, seed, &data.edges));
      if (data.out_dim() != dim) {
        net::LayerBlueprint head;
        head.type = net::LayerBlueprint::Type::dense;
        head.in_dim = dim;
        head.out_dim = data.out_dim();
        head.dense_activation = net::Activation::none;
        arch.push_back(head);
      }
      return net::init_network(arch, seed);
    };

    const std::vector<diag::DepthRecord> records =
        diag::depth_sweep(build, cfg.depths, data, tcfg);
    io::write_file(dir / "depth_sweep.csv", csvio::depth_csv(records));

    std::vector<double> x, y;
    for (const diag::DepthRecord& r : records) {
      summary += std::to_string(seed) + "," + std::to_string(r.depth) + "," +
                 (r.diverged ? "1" : "0") + "," +
                 (r.diverged ? std::to_string(r.divergence_epoch) : "") + "," +
                 (r.diverged ? "" : fmt::format_double(r.final_loss)) + "," +
                 (r.final_val_loss ? fmt::format_double(*r.final_val_loss) : "") + "\n";
      if (!r.diverged) {
        x.push_back(static_cast<double>(r.depth));
        y.push_back(r.final_loss);
      }
    }
    if (!x.empty())
      series.push_back(svg::Series{"seed " + std::to_string(seed), x, y});
  }
  io::write_file(paths.root / "depth_summary.csv", summary);

  if (opts.no_svg || series.empty()) return;
  svg::PlotStyle style;
  style.title = "final loss by depth";
  style.x_label = "depth";
  style.y_label = "final training loss";
  style.log_y = true;
  io::write_file(paths.root / "depth_sweep.svg", svg::line_plot(series, style));
}

inline void run_ablate_projection(const config::ExperimentConfig& cfg,
                                  const RunOptions& opts, const Paths& paths,
                                  const tasks::Dataset& data) {
  std::vector<shaping::ShapingKind> kinds;
  for (const std::string& v : cfg.variants) kinds.push_back(shaping::kind_from_name(v));
  const train::TrainConfig tcfg = build_train_config(cfg, cfg.seeds.front());
  const std::vector<diag::VariantOutcome> outcomes =
      diag::ablation_projection_variants(data, kinds, tcfg, cfg.seeds);

  io::write_file(paths.root / "variants.csv", csvio::variants_csv(outcomes));
  for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
    const std::filesystem::path dir = paths.seed_dir(cfg.seeds[si]);
    for (const diag::VariantOutcome& vo : outcomes)
      io::write_file(dir / ("metrics_" + std::string(shaping::kind_name(vo.kind)) + ".csv"),
                     csvio::metrics_csv(vo.logs[si]));
  }

  if (opts.no_svg) return;
  std::vector<double> x(outcomes.size());
  std::iota(x.begin(), x.end(), 0.0);
  std::vector<svg::Series> series;
  std::vector<double> means;
  for (const auto& vo : outcomes) means.push_back(vo.final_mean);
  series.push_back(svg::Series{"mean across seeds", x, means});
  for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
    std::vector<double> y;
    for (const auto& vo : outcomes) y.push_back(vo.finals[si]);
    series.push_back(svg::Series{"seed " + std::to_string(cfg.seeds[si]), x, y});
  }
  svg::PlotStyle style;
  style.title = "shaping-variant final metric";
  style.x_label = "variant index (see variants.csv)";
  style.y_label = "final metric";
  io::write_file(paths.root / "projection_variants.svg", svg::line_plot(series, style));
}

inline void run_ablate_residual(const config::ExperimentConfig& cfg,
                                const RunOptions& opts, const Paths& paths,
                                const tasks::Dataset& data) {
  std::vector<svg::Series> series;
  for (std::uint64_t seed : cfg.seeds) {
    const std::filesystem::path dir = paths.seed_dir(seed);
    const train::TrainConfig tcfg = build_train_config(cfg, seed);
    try {
      const diag::ResidualAblation ra =
          diag::ablation_residual(build_arch(cfg, seed, data), data, tcfg, seed);
      io::write_file(dir / "metrics_on.csv", csvio::metrics_csv(ra.with_correction));
      io::write_file(dir / "metrics_off.csv", csvio::metrics_csv(ra.without_correction));
      series.push_back(
          loss_series("with s" + std::to_string(seed), ra.with_correction));
      series.push_back(
          loss_series("without s" + std::to_string(seed), ra.without_correction));
    } catch (const DivergenceError& e) {
      write_divergence(dir, e.step());
    }
  }
  if (opts.no_svg || series.empty()) return;
  svg::PlotStyle style;
  style.title = "correction path ablation";
  style.x_label = "epoch";
  style.y_label = "training loss";
  style.log_y = true;
  io::write_file(paths.root / "residual_ablation.svg", svg::line_plot(series, style));
}

inline void run_multires(const config::ExperimentConfig& cfg, const RunOptions& opts,
                         const Paths& paths, const tasks::Dataset& data) {
  std::vector<svg::Series> series;
  for (std::uint64_t seed : cfg.seeds) {
    const std::filesystem::path dir = paths.seed_dir(seed);
    const train::TrainConfig tcfg = build_train_config(cfg, seed);
    try {
      const diag::MultiresOutcome mo = diag::multires_compose(data, tcfg, seed);
      io::write_file(dir / "metrics_branched.csv", csvio::metrics_csv(mo.branched));
      io::write_file(dir / "metrics_dense.csv", csvio::metrics_csv(mo.baseline));
      series.push_back(loss_series("branched s" + std::to_string(seed), mo.branched));
      series.push_back(loss_series("dense s" + std::to_string(seed), mo.baseline));
    } catch (const DivergenceError& e) {
      write_divergence(dir, e.step());
    }
  }
  if (opts.no_svg || series.empty()) return;
  svg::PlotStyle style;
  style.title = "band-split vs dense training";
  style.x_label = "epoch";
  style.y_label = "training loss";
  style.log_y = true;
  io::write_file(paths.root / "multires.svg", svg::line_plot(series, style));
}

}  // namespace detail

// ============================================================================
// Entry point
// ============================================================================

// Writes the full artifact tree for one experiment. Throws ConfigError /
// ValidationError on bad inputs and IoError on filesystem trouble; training
// divergence never throws out of here — it is recorded per seed.
inline void run(const config::ExperimentConfig& cfg, const RunOptions& opts = {}) {
  detail::Paths paths{resolve_out_root(cfg)};
  std::error_code ec;
  std::filesystem::create_directories(paths.root, ec);
  if (ec) throw IoError("cannot create output dir: " + paths.root.string());

  const std::string echo = config::canonical_text(cfg);
  io::write_file(paths.root / "config.echo", echo);

  const tasks::Dataset data = build_dataset(cfg.task);

  if (cfg.kind == "train")
    detail::run_train(cfg, opts, paths, data, echo);
  else if (cfg.kind == "jacobian")
    detail::run_jacobian(cfg, opts, paths, data);
  else if (cfg.kind == "freq")
    detail::run_freq(cfg, opts, paths, data);
  else if (cfg.kind == "recurse")
    detail::run_recurse(cfg, opts, paths, data);
  else if (cfg.kind == "perturb")
    detail::run_perturb(cfg, opts, paths, data);
  else if (cfg.kind == "depth")
    detail::run_depth(cfg, opts, paths, data);
  else if (cfg.kind == "ablate-projection")
    detail::run_ablate_projection(cfg, opts, paths, data);
  else if (cfg.kind == "ablate-residual")
    detail::run_ablate_residual(cfg, opts, paths, data);
  else if (cfg.kind == "multires")
    detail::run_multires(cfg, opts, paths, data);
  else
    throw ValidationError("unknown experiment kind: " + cfg.kind);
}

}  // namespace pgnn::exp
