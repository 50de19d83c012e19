#pragma once
// Experiment configuration: a line-oriented `section.key = value` format.
// Parsing fills every default, resolves inherited layer dims, and validates
// names and dimension chains up front; canonical_text() re-emits the complete
// effective config in a fixed key order, and that text re-parses to an
// identical config (the round-trip contract behind config.echo files).

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pgnn/errors.hpp"
#include "pgnn/format.hpp"
#include "pgnn/shaping.hpp"

namespace pgnn::config {

struct LayerSpec {
  std::string type = "structured";  // structured | dense
  std::size_t in = 0;               // 0 = inherit (task dim / previous out)
  std::size_t out = 0;              // 0 = inherit (square, or task out on the last layer)
  std::string shaping = "identity";
  std::size_t rank = 0;    // low_rank; 0 = min(out, in) / 2
  std::size_t cutoff = 0;  // dct_band passes modes < cutoff; 0 = min(out, in) / 4
  double alpha = 1.0;      // laplacian_smooth
  double density = 0.5;    // sparsity_mask keep probability
  bool correction = true;
  std::size_t hidden = 0;  // correction width; 0 = out
  double cap = 0.95;       // spectral target at init; 0 disables
  bool outer_tanh = false;
  std::string activation = "relu";  // dense layers
};

struct TaskSpec {
  std::string generator = "signal_recovery";
  std::uint64_t seed = 0;
  std::size_t n_samples = 512;
  std::size_t dim = 32;
  double noise_std = 0.1;
  std::size_t n_nodes = 128;   // graph_classification
  std::size_t n_classes = 4;   // graph_classification
  double homophily = 0.9;      // graph_classification
  double feature_noise = 0.1;  // graph_classification

  std::size_t input_dim() const {
    return generator == "graph_classification" ? n_nodes : dim;
  }
  std::size_t output_dim() const {
    return generator == "graph_classification" ? n_classes : dim;
  }
};

struct TrainSpec {
  std::size_t epochs = 500;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";  // adam | sgd
  double momentum = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::string loss = "mse";  // mse | cross_entropy
  std::size_t log_every = 1;
  std::string baseline = "none";  // none | dense: also train a matched dense net
  bool checkpoint = false;        // train kind: write checkpoint.bin per seed
};

struct ExperimentConfig {
  std::string kind = "train";
  std::vector<std::uint64_t> seeds = {0};
  std::string out;  // output root; empty = resolve from env / cwd at run time

  TaskSpec task;
  std::vector<LayerSpec> layers = {LayerSpec{}};
  TrainSpec train;

  std::size_t jacobian_probes = 8;
  std::size_t freq_count = 0;  // 0 = dim - 1
  std::size_t freq_phases = 4;
  std::size_t recurse_layer = 0;
  std::size_t recurse_max_iters = 1000;
  double recurse_tol = 1e-8;
  std::vector<double> perturb_sigmas = {0.01, 0.05, 0.1, 0.2, 0.5};
  std::size_t perturb_trials = 100;
  std::vector<std::size_t> depths = {2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<std::string> variants = {"identity", "dct_band", "learned_projection",
                                       "laplacian_smooth"};
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

struct RawEntry {
  std::string value;
  std::size_t line = 0;
  bool used = false;
};

// Typed access over the raw key/value map; every failure names line and key.
class Reader {
 public:
  explicit Reader(const std::string& text) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t nl = text.find('\n', pos);
      const std::string raw =
          text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
      pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
      ++line_no;
      const std::string stripped = trim(raw);
      if (stripped.empty() || stripped[0] == '#') continue;
      const std::size_t eq = stripped.find('=');
      if (eq == std::string::npos)
        throw ConfigError("expected 'section.key = value'", line_no, stripped);
      const std::string key = trim(stripped.substr(0, eq));
      if (key.empty()) throw ConfigError("missing key before '='", line_no, "");
      for (char c : key)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'))
          throw ConfigError("bad character in key", line_no, key);
      if (entries_.count(key))
        throw ConfigError("duplicate key (first at line " +
                              std::to_string(entries_[key].line) + ")",
                          line_no, key);
      entries_[key] = RawEntry{trim(stripped.substr(eq + 1)), line_no, false};
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::size_t line_of(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    it->second.used = true;
    return it->second.value;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    it->second.used = true;
    try {
      return fmt::parse_u64(it->second.value);
    } catch (const ValidationError& e) {
      throw ConfigError(e.what(), it->second.line, key);
    }
  }

  double get_double(const std::string& key, double fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    it->second.used = true;
    try {
      return fmt::parse_double(it->second.value);
    } catch (const ValidationError& e) {
      throw ConfigError(e.what(), it->second.line, key);
    }
  }

  bool get_bool(const std::string& key, bool fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    it->second.used = true;
    if (it->second.value == "true") return true;
    if (it->second.value == "false") return false;
    throw ConfigError("expected true or false, got '" + it->second.value + "'",
                      it->second.line, key);
  }

  template <class T, class ParseFn>
  std::vector<T> get_list(const std::string& key, std::vector<T> fallback,
                          ParseFn&& parse_one) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    it->second.used = true;
    std::vector<T> out;
    std::size_t p = 0;
    const std::string& v = it->second.value;
    while (p < v.size()) {
      while (p < v.size() && (v[p] == ' ' || v[p] == '\t')) ++p;
      std::size_t q = p;
      while (q < v.size() && v[q] != ' ' && v[q] != '\t') ++q;
      if (q > p) {
        try {
          out.push_back(parse_one(v.substr(p, q - p)));
        } catch (const ValidationError& e) {
          throw ConfigError(e.what(), it->second.line, key);
        }
      }
      p = q;
    }
    return out;
  }

  // every key must have been consumed by a getter
  void reject_unknown() const {
    for (const auto& [key, entry] : entries_)
      if (!entry.used) throw ConfigError("unknown key", entry.line, key);
  }

 private:
  std::map<std::string, RawEntry> entries_;
};

inline void require_one_of(const std::string& value,
                           const std::vector<std::string>& allowed,
                           std::size_t line, const std::string& key) {
  for (const auto& a : allowed)
    if (value == a) return;
  std::string msg = "'" + value + "' is not one of {";
  for (std::size_t i = 0; i < allowed.size(); ++i)
    msg += (i ? ", " : "") + allowed[i];
  msg += "}";
  throw ConfigError(msg, line, key);
}

}  // namespace detail

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = {
      "train",  "jacobian",          "freq",            "recurse", "perturb",
      "depth",  "ablate-projection", "ablate-residual", "multires"};
  return kinds;
}

inline ExperimentConfig parse_config(const std::string& text) {
  detail::Reader r(text);
  ExperimentConfig cfg;

  cfg.kind = r.get_string("experiment.kind", cfg.kind);
  detail::require_one_of(cfg.kind, experiment_kinds(), r.line_of("experiment.kind"),
                         "experiment.kind");
  cfg.seeds = r.get_list<std::uint64_t>("experiment.seeds", cfg.seeds,
                                        [](const std::string& s) { return fmt::parse_u64(s); });
  if (cfg.seeds.empty())
    throw ConfigError("seed list must not be empty", r.line_of("experiment.seeds"),
                      "experiment.seeds");
  cfg.out = r.get_string("experiment.out", cfg.out);

  TaskSpec& t = cfg.task;
  t.generator = r.get_string("task.generator", t.generator);
  detail::require_one_of(t.generator,
                         {"signal_recovery", "multiscale", "graph_classification"},
                         r.line_of("task.generator"), "task.generator");
  t.seed = r.get_u64("task.seed", t.seed);
  t.n_samples = r.get_u64("task.n_samples", t.n_samples);
  t.dim = r.get_u64("task.dim", t.dim);
  t.noise_std = r.get_double("task.noise_std", t.noise_std);
  t.n_nodes = r.get_u64("task.n_nodes", t.n_nodes);
  t.n_classes = r.get_u64("task.n_classes", t.n_classes);
  t.homophily = r.get_double("task.homophily", t.homophily);
  t.feature_noise = r.get_double("task.feature_noise", t.feature_noise);

  const std::size_t n_layers = r.get_u64("arch.layers", 1);
  if (n_layers == 0)
    throw ConfigError("need at least one layer", r.line_of("arch.layers"), "arch.layers");
  cfg.layers.assign(n_layers, LayerSpec{});
  for (std::size_t i = 0; i < n_layers; ++i) {
    const std::string base = "arch.layer" + std::to_string(i) + ".";
    LayerSpec& l = cfg.layers[i];
    l.type = r.get_string(base + "type", l.type);
    detail::require_one_of(l.type, {"structured", "dense"}, r.line_of(base + "type"),
                           base + "type");
    l.in = r.get_u64(base + "in", l.in);
    l.out = r.get_u64(base + "out", l.out);
    l.shaping = r.get_string(base + "shaping", l.shaping);
    try {
      shaping::kind_from_name(l.shaping);
    } catch (const ValidationError& e) {
      throw ConfigError(e.what(), r.line_of(base + "shaping"), base + "shaping");
    }
    l.rank = r.get_u64(base + "rank", l.rank);
    l.cutoff = r.get_u64(base + "cutoff", l.cutoff);
    l.alpha = r.get_double(base + "alpha", l.alpha);
    l.density = r.get_double(base + "density", l.density);
    l.correction = r.get_bool(base + "correction", l.correction);
    l.hidden = r.get_u64(base + "hidden", l.hidden);
    l.cap = r.get_double(base + "cap", l.cap);
    l.outer_tanh = r.get_bool(base + "outer_tanh", l.outer_tanh);
    l.activation = r.get_string(base + "activation", l.activation);
    detail::require_one_of(l.activation, {"relu", "tanh", "none"},
                           r.line_of(base + "activation"), base + "activation");
    if (l.density <= 0.0 || l.density > 1.0)
      throw ConfigError("density must be in (0, 1]", r.line_of(base + "density"),
                        base + "density");
    if (l.alpha < 0.0)
      throw ConfigError("alpha must be >= 0", r.line_of(base + "alpha"), base + "alpha");
  }

  // resolve inherited dims front to back, then check the chain
  for (std::size_t i = 0; i < n_layers; ++i) {
    LayerSpec& l = cfg.layers[i];
    const std::string base = "arch.layer" + std::to_string(i) + ".";
    const std::size_t expected_in =
        i == 0 ? t.input_dim() : cfg.layers[i - 1].out;
    if (l.in == 0) l.in = expected_in;
    if (l.in != expected_in)
      throw ConfigError("in dim " + std::to_string(l.in) + " breaks the chain (expected " +
                            std::to_string(expected_in) + ")",
                        r.line_of(base + "in"), base + "in");
    if (l.out == 0) l.out = i + 1 == n_layers ? t.output_dim() : l.in;
    if (i + 1 == n_layers && l.out != t.output_dim())
      throw ConfigError("final out dim " + std::to_string(l.out) +
                            " does not match the task output " +
                            std::to_string(t.output_dim()),
                        r.line_of(base + "out"), base + "out");
    // shaping parameter defaults need the resolved dims
    const std::size_t mn = std::min(l.in, l.out);
    if (l.shaping == "low_rank") {
      if (l.rank == 0) l.rank = std::max<std::size_t>(1, mn / 2);
      if (l.rank > mn)
        throw ConfigError("rank " + std::to_string(l.rank) + " exceeds min dim " +
                              std::to_string(mn),
                          r.line_of(base + "rank"), base + "rank");
    }
    if (l.shaping == "dct_band") {
      if (l.cutoff == 0) l.cutoff = std::max<std::size_t>(1, mn / 4);
      if (l.cutoff > mn)
        throw ConfigError("cutoff " + std::to_string(l.cutoff) + " exceeds min dim " +
                              std::to_string(mn),
                          r.line_of(base + "cutoff"), base + "cutoff");
    }
    if (l.hidden == 0) l.hidden = l.out;
  }

  TrainSpec& tr = cfg.train;
  tr.epochs = r.get_u64("train.epochs", tr.epochs);
  tr.batch_size = r.get_u64("train.batch_size", tr.batch_size);
  if (tr.batch_size == 0)
    throw ConfigError("batch size must be >= 1", r.line_of("train.batch_size"),
                      "train.batch_size");
  tr.learning_rate = r.get_double("train.learning_rate", tr.learning_rate);
  if (tr.learning_rate < 0.0)
    throw ConfigError("learning rate must be >= 0", r.line_of("train.learning_rate"),
                      "train.learning_rate");
  tr.optimizer = r.get_string("train.optimizer", tr.optimizer);
  detail::require_one_of(tr.optimizer, {"adam", "sgd"}, r.line_of("train.optimizer"),
                         "train.optimizer");
  tr.momentum = r.get_double("train.momentum", tr.momentum);
  tr.beta1 = r.get_double("train.beta1", tr.beta1);
  tr.beta2 = r.get_double("train.beta2", tr.beta2);
  tr.eps = r.get_double("train.eps", tr.eps);
  tr.loss = r.get_string("train.loss", tr.loss);
  detail::require_one_of(tr.loss, {"mse", "cross_entropy"}, r.line_of("train.loss"),
                         "train.loss");
  tr.log_every = r.get_u64("train.log_every", tr.log_every);
  if (tr.log_every == 0)
    throw ConfigError("log_every must be >= 1", r.line_of("train.log_every"),
                      "train.log_every");
  tr.baseline = r.get_string("train.baseline", tr.baseline);
  detail::require_one_of(tr.baseline, {"none", "dense"}, r.line_of("train.baseline"),
                         "train.baseline");
  tr.checkpoint = r.get_bool("train.checkpoint", tr.checkpoint);

  cfg.jacobian_probes = r.get_u64("jacobian.probes", cfg.jacobian_probes);
  if (cfg.jacobian_probes == 0)
    throw ConfigError("need at least one probe", r.line_of("jacobian.probes"),
                      "jacobian.probes");
  cfg.freq_count = r.get_u64("freq.n_freqs", cfg.freq_count);
  cfg.freq_phases = r.get_u64("freq.n_phases", cfg.freq_phases);
  cfg.recurse_layer = r.get_u64("recurse.layer", cfg.recurse_layer);
  if (cfg.recurse_layer >= n_layers)
    throw ConfigError("layer index " + std::to_string(cfg.recurse_layer) +
                          " out of range for " + std::to_string(n_layers) + " layers",
                      r.line_of("recurse.layer"), "recurse.layer");
  cfg.recurse_max_iters = r.get_u64("recurse.max_iters", cfg.recurse_max_iters);
  cfg.recurse_tol = r.get_double("recurse.tol", cfg.recurse_tol);
  if (!(cfg.recurse_tol > 0.0))
    throw ConfigError("tol must be > 0", r.line_of("recurse.tol"), "recurse.tol");
  cfg.perturb_sigmas = r.get_list<double>(
      "perturb.sigmas", cfg.perturb_sigmas,
      [](const std::string& s) { return fmt::parse_double(s); });
  if (cfg.perturb_sigmas.empty())
    throw ConfigError("sigma list must not be empty", r.line_of("perturb.sigmas"),
                      "perturb.sigmas");
  cfg.perturb_trials = r.get_u64("perturb.trials", cfg.perturb_trials);
  if (cfg.perturb_trials == 0)
    throw ConfigError("trials must be >= 1", r.line_of("perturb.trials"),
                      "perturb.trials");
  cfg.depths = r.get_list<std::size_t>("depth.depths", cfg.depths, [](const std::string& s) {
    return static_cast<std::size_t>(fmt::parse_u64(s));
  });
  if (cfg.depths.empty())
    throw ConfigError("depth list must not be empty", r.line_of("depth.depths"),
                      "depth.depths");
  cfg.variants = r.get_list<std::string>("ablate.variants", cfg.variants,
                                         [](const std::string& s) { return s; });
  if (cfg.variants.empty())
    throw ConfigError("variant list must not be empty", r.line_of("ablate.variants"),
                      "ablate.variants");
  for (const std::string& v : cfg.variants) {
    try {
      shaping::kind_from_name(v);
    } catch (const ValidationError& e) {
      throw ConfigError(e.what(), r.line_of("ablate.variants"), "ablate.variants");
    }
  }

  r.reject_unknown();
  return cfg;
}

// Complete effective config in a fixed key order; byte-stable, and re-parsing
// it reproduces the same config (and therefore the same canonical text).
inline std::string canonical_text(const ExperimentConfig& cfg) {
  std::string out;
  auto kv = [&out](const std::string& key, const std::string& value) {
    out += key;
    out += value.empty() ? " =" : " = " + value;
    out += "\n";
  };
  auto num = [](std::size_t v) { return std::to_string(v); };
  auto flt = [](double v) { return fmt::format_double(v); };
  auto onoff = [](bool v) { return v ? std::string("true") : std::string("false"); };

  kv("experiment.kind", cfg.kind);
  std::string seeds;
  for (std::uint64_t s : cfg.seeds) seeds += (seeds.empty() ? "" : " ") + std::to_string(s);
  kv("experiment.seeds", seeds);
  kv("experiment.out", cfg.out);

  kv("task.generator", cfg.task.generator);
  kv("task.seed", std::to_string(cfg.task.seed));
  kv("task.n_samples", num(cfg.task.n_samples));
  kv("task.dim", num(cfg.task.dim));
  kv("task.noise_std", flt(cfg.task.noise_std));
  kv("task.n_nodes", num(cfg.task.n_nodes));
  kv("task.n_classes", num(cfg.task.n_classes));
  kv("task.homophily", flt(cfg.task.homophily));
  kv("task.feature_noise", flt(cfg.task.feature_noise));

  kv("arch.layers", num(cfg.layers.size()));
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    const LayerSpec& l = cfg.layers[i];
    const std::string base = "arch.layer" + std::to_string(i) + ".";
    kv(base + "type", l.type);
    kv(base + "in", num(l.in));
    kv(base + "out", num(l.out));
    kv(base + "shaping", l.shaping);
    kv(base + "rank", num(l.rank));
    kv(base + "cutoff", num(l.cutoff));
    kv(base + "alpha", flt(l.alpha));
    kv(base + "density", flt(l.density));
    kv(base + "correction", onoff(l.correction));
    kv(base + "hidden", num(l.hidden));
    kv(base + "cap", flt(l.cap));
    kv(base + "outer_tanh", onoff(l.outer_tanh));
    kv(base + "activation", l.activation);
  }

  kv("train.epochs", num(cfg.train.epochs));
  kv("train.batch_size", num(cfg.train.batch_size));
  kv("train.learning_rate", flt(cfg.train.learning_rate));
  kv("train.optimizer", cfg.train.optimizer);
  kv("train.momentum", flt(cfg.train.momentum));
  kv("train.beta1", flt(cfg.train.beta1));
  kv("train.beta2", flt(cfg.train.beta2));
  kv("train.eps", flt(cfg.train.eps));
  kv("train.loss", cfg.train.loss);
  kv("train.log_every", num(cfg.train.log_every));
  kv("train.baseline", cfg.train.baseline);
  kv("train.checkpoint", onoff(cfg.train.checkpoint));

  kv("jacobian.probes", num(cfg.jacobian_probes));
  kv("freq.n_freqs", num(cfg.freq_count));
  kv("freq.n_phases", num(cfg.freq_phases));
  kv("recurse.layer", num(cfg.recurse_layer));
  kv("recurse.max_iters", num(cfg.recurse_max_iters));
  kv("recurse.tol", flt(cfg.recurse_tol));
  std::string sigmas;
  for (double s : cfg.perturb_sigmas) sigmas += (sigmas.empty() ? "" : " ") + flt(s);
  kv("perturb.sigmas", sigmas);
  kv("perturb.trials", num(cfg.perturb_trials));
  std::string depths;
  for (std::size_t d : cfg.depths) depths += (depths.empty() ? "" : " ") + num(d);
  kv("depth.depths", depths);
  std::string variants;
  for (const std::string& v : cfg.variants) variants += (variants.empty() ? "" : " ") + v;
  kv("ablate.variants", variants);
  return out;
}

}  // namespace pgnn::config
