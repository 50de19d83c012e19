#pragma once
// Model layer: structured layers (shaped linear path + shallow nonlinear
// correction path), a plain dense baseline, composition into networks,
// reverse-mode gradients, exact Jacobians, and seeded initialization.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pgnn/errors.hpp"
#include "pgnn/linalg.hpp"
#include "pgnn/rng.hpp"
#include "pgnn/shaping.hpp"

namespace pgnn::net {

using linalg::Matrix;
using linalg::Vector;
using shaping::ShapingOperator;

// ============================================================================
// Correction path: y = w2 * tanh(w1 * x + b1) + b2
// ============================================================================

struct CorrectionNet {
  Matrix w1;  // hidden x in
  Vector b1;  // hidden
  Matrix w2;  // out x hidden
  Vector b2;  // out

  CorrectionNet(Matrix w1_, Vector b1_, Matrix w2_, Vector b2_)
      : w1(std::move(w1_)), b1(std::move(b1_)), w2(std::move(w2_)), b2(std::move(b2_)) {
    if (b1.size() != w1.rows() || w2.cols() != w1.rows() || b2.size() != w2.rows())
      throw ShapeError("CorrectionNet: parameter shapes do not chain (" +
                       std::to_string(w1.rows()) + "x" + std::to_string(w1.cols()) +
                       " -> " + std::to_string(w2.rows()) + "x" +
                       std::to_string(w2.cols()) + ")");
  }

  std::size_t in_dim() const { return w1.cols(); }
  std::size_t hidden_dim() const { return w1.rows(); }
  std::size_t out_dim() const { return w2.rows(); }
};

struct CorrectionResult {
  Vector y;
  Vector hidden_pre;  // w1*x + b1, needed by the backward pass
};

inline CorrectionResult correction_forward(const CorrectionNet& c, const Vector& x) {
  if (x.size() != c.in_dim())
    throw ShapeError("correction_forward: input dim " + std::to_string(x.size()) +
                     " != " + std::to_string(c.in_dim()));
  Vector pre = linalg::matvec(c.w1, x);
  for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += c.b1[i];
  Vector h(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) h[i] = std::tanh(pre[i]);
  Vector y = linalg::matvec(c.w2, h);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += c.b2[i];
  return {std::move(y), std::move(pre)};
}

// ============================================================================
// Layers
// ============================================================================

enum class Activation { relu, tanh, none };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::none: return "none";
  }
  throw ValidationError("activation_name: unreachable");
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "none") return Activation::none;
  throw ValidationError("unknown activation: " + s);
}

struct StructuredLayer {
  Matrix weight;  // raw trainable W, out x in
  ShapingOperator shaping;
  std::optional<CorrectionNet> correction;
  bool correction_enabled = true;
  bool outer_activation = false;  // optional tanh on the summed output; off by default

  StructuredLayer(Matrix w, ShapingOperator s, std::optional<CorrectionNet> c,
                  bool enabled = true, bool outer = false)
      : weight(std::move(w)),
        shaping(std::move(s)),
        correction(std::move(c)),
        correction_enabled(enabled),
        outer_activation(outer) {
    shaping::apply_shaping(shaping, weight);  // shape-compatibility check
    if (correction_enabled && !correction.has_value())
      throw ValidationError("StructuredLayer: correction enabled but absent");
    if (correction.has_value() &&
        (correction->in_dim() != weight.cols() || correction->out_dim() != weight.rows()))
      throw ShapeError("StructuredLayer: correction dims do not match layer");
  }

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

struct DenseLayer {
  Matrix weight;
  Vector bias;
  Activation activation = Activation::relu;

  DenseLayer(Matrix w, Vector b, Activation a = Activation::relu)
      : weight(std::move(w)), bias(std::move(b)), activation(a) {
    if (bias.size() != weight.rows())
      throw ShapeError("DenseLayer: bias length " + std::to_string(bias.size()) +
                       " != rows " + std::to_string(weight.rows()));
  }

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

using Layer = std::variant<StructuredLayer, DenseLayer>;

inline std::size_t layer_in_dim(const Layer& l) {
  return std::visit([](const auto& v) { return v.in_dim(); }, l);
}
inline std::size_t layer_out_dim(const Layer& l) {
  return std::visit([](const auto& v) { return v.out_dim(); }, l);
}

// ============================================================================
// Caches and gradients
// ============================================================================

struct LayerCache {
  Vector input;
  std::optional<Matrix> eff;         // structured: realized effective map
  Vector pre_output;                 // structured: Ex + c; dense: Wx + b
  std::optional<Vector> hidden_pre;  // correction hidden pre-activations
  std::optional<Vector> correction;  // realized correction output
  Vector output;
  bool consumed = false;
};

struct CorrectionGrads {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
};

struct LayerGrads {
  Matrix weight;
  std::optional<Matrix> projection;  // learned_projection only
  std::optional<CorrectionGrads> correction;
  std::optional<Vector> bias;  // dense only
};

using NetworkGrads = std::vector<LayerGrads>;

namespace detail {

inline double act_forward(Activation a, double z) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
    case Activation::none: return z;
  }
  throw ValidationError("act_forward: unreachable");
}

// derivative expressed via the pre-activation
inline double act_derivative(Activation a, double z) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::none: return 1.0;
  }
  throw ValidationError("act_derivative: unreachable");
}

inline LayerGrads zero_grads_for(const StructuredLayer& l) {
  LayerGrads g{Matrix(l.weight.rows(), l.weight.cols()), std::nullopt, std::nullopt,
               std::nullopt};
  if (const Matrix* p = l.shaping.projection()) g.projection = Matrix(p->rows(), p->cols());
  if (l.correction.has_value()) {
    const CorrectionNet& c = *l.correction;
    g.correction = CorrectionGrads{Matrix(c.w1.rows(), c.w1.cols()), Vector(c.b1.size()),
                                   Matrix(c.w2.rows(), c.w2.cols()), Vector(c.b2.size())};
  }
  return g;
}

inline LayerGrads zero_grads_for(const DenseLayer& l) {
  return LayerGrads{Matrix(l.weight.rows(), l.weight.cols()), std::nullopt, std::nullopt,
                    Vector(l.bias.size())};
}

inline void add_into(Matrix& into, const Matrix& g) {
  for (std::size_t i = 0; i < into.data().size(); ++i) into.data()[i] += g.data()[i];
}
inline void add_into(Vector& into, const Vector& g) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += g[i];
}

inline void add_into(LayerGrads& into, const LayerGrads& g) {
  add_into(into.weight, g.weight);
  if (into.projection.has_value()) add_into(*into.projection, *g.projection);
  if (into.correction.has_value()) {
    add_into(into.correction->w1, g.correction->w1);
    add_into(into.correction->b1, g.correction->b1);
    add_into(into.correction->w2, g.correction->w2);
    add_into(into.correction->b2, g.correction->b2);
  }
  if (into.bias.has_value()) add_into(*into.bias, *g.bias);
}

}  // namespace detail

// ============================================================================
// Layer forward / backward
// ============================================================================

inline std::pair<Vector, LayerCache> layer_forward(const StructuredLayer& l,
                                                   const Vector& x) {
  if (x.size() != l.in_dim())
    throw ShapeError("layer_forward: input dim " + std::to_string(x.size()) + " != " +
                     std::to_string(l.in_dim()));
  shaping::EffectiveMap eff = shaping::apply_shaping(l.shaping, l.weight);
  Vector y = linalg::matvec(eff.matrix, x);
  std::optional<Vector> hidden_pre, correction;
  if (l.correction_enabled) {
    CorrectionResult c = correction_forward(*l.correction, x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += c.y[i];
    hidden_pre = std::move(c.hidden_pre);
    correction = std::move(c.y);
  }
  Vector pre = y;
  if (l.outer_activation)
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i]);
  LayerCache cache{x,
                   std::move(eff.matrix),
                   std::move(pre),
                   std::move(hidden_pre),
                   std::move(correction),
                   y,
                   false};
  return {std::move(y), std::move(cache)};
}

inline std::pair<Vector, LayerCache> layer_forward(const DenseLayer& l, const Vector& x) {
  if (x.size() != l.in_dim())
    throw ShapeError("layer_forward: input dim " + std::to_string(x.size()) + " != " +
                     std::to_string(l.in_dim()));
  Vector pre = linalg::matvec(l.weight, x);
  for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += l.bias[i];
  Vector y(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) y[i] = detail::act_forward(l.activation, pre[i]);
  LayerCache cache{x, std::nullopt, std::move(pre), std::nullopt, std::nullopt, y, false};
  return {std::move(y), std::move(cache)};
}

inline std::pair<Vector, LayerCache> layer_forward(const Layer& l, const Vector& x) {
  return std::visit([&](const auto& v) { return layer_forward(v, x); }, l);
}

struct LayerBackward {
  Vector dx;
  LayerGrads grads;
};

inline LayerBackward layer_backward(const StructuredLayer& l, LayerCache& cache,
                                    const Vector& dy) {
  if (cache.consumed) throw ValidationError("layer_backward: cache already consumed");
  if (!cache.eff.has_value() || cache.input.size() != l.in_dim() ||
      cache.output.size() != l.out_dim() || dy.size() != l.out_dim())
    throw ShapeError("layer_backward: cache/cotangent does not match layer");
  cache.consumed = true;

  // peel the optional outer activation
  Vector dpre = dy;
  if (l.outer_activation) {
    for (std::size_t i = 0; i < dpre.size(); ++i) {
      const double t = cache.output[i];  // tanh(pre_output)
      dpre[i] *= 1.0 - t * t;
    }
  }

  LayerGrads grads = detail::zero_grads_for(l);
  const Matrix& eff = *cache.eff;

  // structured path: d_eff = dpre * x^T, pulled back through the shaping
  const Matrix d_eff = linalg::outer(dpre, cache.input);
  shaping::ShapingVjp sv = shaping::shaping_vjp(l.shaping, l.weight, d_eff);
  grads.weight = std::move(sv.d_w);
  if (grads.projection.has_value()) grads.projection = std::move(*sv.d_p);

  Vector dx = linalg::matvec_transposed(eff, dpre);

  if (l.correction_enabled) {
    const CorrectionNet& c = *l.correction;
    const Vector& pre = *cache.hidden_pre;
    Vector h(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) h[i] = std::tanh(pre[i]);
    Vector dh = linalg::matvec_transposed(c.w2, dpre);
    Vector dhidden(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) dhidden[i] = dh[i] * (1.0 - h[i] * h[i]);
    CorrectionGrads& cg = *grads.correction;
    cg.w2 = linalg::outer(dpre, h);
    cg.b2 = dpre;
    cg.w1 = linalg::outer(dhidden, cache.input);
    cg.b1 = dhidden;
    const Vector dx_corr = linalg::matvec_transposed(c.w1, dhidden);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dx_corr[i];
  }
  return {std::move(dx), std::move(grads)};
}

inline LayerBackward layer_backward(const DenseLayer& l, LayerCache& cache,
                                    const Vector& dy) {
  if (cache.consumed) throw ValidationError("layer_backward: cache already consumed");
  if (cache.input.size() != l.in_dim() || dy.size() != l.out_dim())
    throw ShapeError("layer_backward: cache/cotangent does not match layer");
  cache.consumed = true;
  Vector dpre(dy.size());
  for (std::size_t i = 0; i < dy.size(); ++i)
    dpre[i] = dy[i] * detail::act_derivative(l.activation, cache.pre_output[i]);
  LayerGrads grads = detail::zero_grads_for(l);
  grads.weight = linalg::outer(dpre, cache.input);
  grads.bias = dpre;
  Vector dx = linalg::matvec_transposed(l.weight, dpre);
  return {std::move(dx), std::move(grads)};
}

inline LayerBackward layer_backward(const Layer& l, LayerCache& cache, const Vector& dy) {
  return std::visit([&](const auto& v) { return layer_backward(v, cache, dy); }, l);
}

// Jacobian of one layer at the cached/forwarded input.
inline Matrix layer_jacobian(const StructuredLayer& l, const Vector& x) {
  shaping::EffectiveMap eff = shaping::apply_shaping(l.shaping, l.weight);
  Matrix j = eff.matrix;
  if (l.correction_enabled) {
    const CorrectionNet& c = *l.correction;
    Vector pre = linalg::matvec(c.w1, x);
    for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += c.b1[i];
    // w2 * diag(tanh'(pre)) * w1
    Matrix scaled = c.w1;
    for (std::size_t i = 0; i < scaled.rows(); ++i) {
      const double t = std::tanh(pre[i]);
      const double d = 1.0 - t * t;
      for (std::size_t k = 0; k < scaled.cols(); ++k) scaled(i, k) *= d;
    }
    j = linalg::add(j, linalg::matmul(c.w2, scaled));
  }
  if (l.outer_activation) {
    Vector y = layer_forward(l, x).first;
    for (std::size_t i = 0; i < j.rows(); ++i) {
      const double d = 1.0 - y[i] * y[i];
      for (std::size_t k = 0; k < j.cols(); ++k) j(i, k) *= d;
    }
  }
  return j;
}

inline Matrix layer_jacobian(const DenseLayer& l, const Vector& x) {
  Vector pre = linalg::matvec(l.weight, x);
  for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += l.bias[i];
  Matrix j = l.weight;
  for (std::size_t i = 0; i < j.rows(); ++i) {
    const double d = detail::act_derivative(l.activation, pre[i]);
    for (std::size_t k = 0; k < j.cols(); ++k) j(i, k) *= d;
  }
  return j;
}

inline Matrix layer_jacobian(const Layer& l, const Vector& x) {
  return std::visit([&](const auto& v) { return layer_jacobian(v, x); }, l);
}

// Upper bound on a layer's Lipschitz constant: sigma1 of the structured path
// plus the product bound of the correction path (tanh is 1-Lipschitz).
inline double layer_lipschitz_bound(const StructuredLayer& l) {
  const Matrix eff = shaping::apply_shaping(l.shaping, l.weight).matrix;
  double bound = linalg::svd_values(eff)[0];
  if (l.correction_enabled) {
    const CorrectionNet& c = *l.correction;
    bound += linalg::svd_values(c.w2)[0] * linalg::svd_values(c.w1)[0];
  }
  return bound;  // outer tanh is 1-Lipschitz, so the bound stands either way
}

inline double layer_lipschitz_bound(const DenseLayer& l) {
  return linalg::svd_values(l.weight)[0];  // relu/tanh/none are all 1-Lipschitz
}

inline double layer_lipschitz_bound(const Layer& l) {
  return std::visit([](const auto& v) { return layer_lipschitz_bound(v); }, l);
}

// ============================================================================
// Network
// ============================================================================

struct ParamView {
  std::string name;
  double* data;
  std::size_t size;
};

namespace detail {

inline void collect_views(const std::string& prefix, std::size_t idx, StructuredLayer& l,
                          std::vector<ParamView>& out) {
  const std::string base = prefix + "layer" + std::to_string(idx) + ".";
  out.push_back({base + "W", l.weight.data().data(), l.weight.data().size()});
  if (Matrix* p = l.shaping.projection())
    out.push_back({base + "P", p->data().data(), p->data().size()});
  if (l.correction.has_value()) {
    CorrectionNet& c = *l.correction;
    out.push_back({base + "w1", c.w1.data().data(), c.w1.data().size()});
    out.push_back({base + "b1", c.b1.data().data(), c.b1.size()});
    out.push_back({base + "w2", c.w2.data().data(), c.w2.data().size()});
    out.push_back({base + "b2", c.b2.data().data(), c.b2.size()});
  }
}

inline void collect_views(const std::string& prefix, std::size_t idx, DenseLayer& l,
                          std::vector<ParamView>& out) {
  const std::string base = prefix + "layer" + std::to_string(idx) + ".";
  out.push_back({base + "W", l.weight.data().data(), l.weight.data().size()});
  out.push_back({base + "b", l.bias.data().data(), l.bias.size()});
}

inline void collect_grad_views(const std::string& prefix, std::size_t idx, LayerGrads& g,
                               std::vector<ParamView>& out) {
  const std::string base = prefix + "layer" + std::to_string(idx) + ".";
  out.push_back({base + "W", g.weight.data().data(), g.weight.data().size()});
  if (g.projection.has_value())
    out.push_back({base + "P", g.projection->data().data(), g.projection->data().size()});
  if (g.correction.has_value()) {
    CorrectionGrads& c = *g.correction;
    out.push_back({base + "w1", c.w1.data().data(), c.w1.data().size()});
    out.push_back({base + "b1", c.b1.data().data(), c.b1.size()});
    out.push_back({base + "w2", c.w2.data().data(), c.w2.data().size()});
    out.push_back({base + "b2", c.b2.data().data(), c.b2.size()});
  }
  if (g.bias.has_value())
    out.push_back({base + "b", g.bias->data().data(), g.bias->size()});
}

}  // namespace detail

class Network {
 public:
  using Caches = std::vector<LayerCache>;
  using Grads = NetworkGrads;

  explicit Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ValidationError("Network: needs at least one layer");
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i)
      if (layer_out_dim(layers_[i]) != layer_in_dim(layers_[i + 1]))
        throw ShapeError("Network: layer " + std::to_string(i) + " out dim " +
                         std::to_string(layer_out_dim(layers_[i])) +
                         " != layer " + std::to_string(i + 1) + " in dim " +
                         std::to_string(layer_in_dim(layers_[i + 1])));
  }

  std::size_t in_dim() const { return layer_in_dim(layers_.front()); }
  std::size_t out_dim() const { return layer_out_dim(layers_.back()); }
  std::size_t depth() const { return layers_.size(); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  Vector forward(const Vector& x) const {
    Vector v = x;
    for (const Layer& l : layers_) v = layer_forward(l, v).first;
    return v;
  }

  std::pair<Vector, Caches> forward_cached(const Vector& x) const {
    Caches caches;
    caches.reserve(layers_.size());
    Vector v = x;
    for (const Layer& l : layers_) {
      auto [y, cache] = layer_forward(l, v);
      caches.push_back(std::move(cache));
      v = std::move(y);
    }
    return {std::move(v), std::move(caches)};
  }

  // Accumulates parameter gradients into `acc` and returns the input cotangent.
  Vector backward_accumulate(Caches& caches, const Vector& dy, Grads& acc) const {
    if (caches.size() != layers_.size())
      throw ValidationError("backward: expected " + std::to_string(layers_.size()) +
                            " caches, got " + std::to_string(caches.size()));
    if (acc.size() != layers_.size())
      throw ValidationError("backward: gradient container does not match network");
    Vector d = dy;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      LayerBackward lb = layer_backward(layers_[i], caches[i], d);
      detail::add_into(acc[i], lb.grads);
      d = std::move(lb.dx);
    }
    return d;
  }

  std::pair<Vector, Grads> backward(Caches& caches, const Vector& dy) const {
    Grads g = zero_grads();
    Vector dx = backward_accumulate(caches, dy, g);
    return {std::move(dx), std::move(g)};
  }

  Grads zero_grads() const {
    Grads g;
    g.reserve(layers_.size());
    for (const Layer& l : layers_)
      g.push_back(std::visit([](const auto& v) { return detail::zero_grads_for(v); }, l));
    return g;
  }

  Matrix jacobian(const Vector& x) const {
    Vector v = x;
    Matrix j = layer_jacobian(layers_.front(), v);
    v = layer_forward(layers_.front(), v).first;
    for (std::size_t i = 1; i < layers_.size(); ++i) {
      j = linalg::matmul(layer_jacobian(layers_[i], v), j);
      v = layer_forward(layers_[i], v).first;
    }
    return j;
  }

  double lipschitz_bound() const {
    double b = 1.0;
    for (const Layer& l : layers_) b *= layer_lipschitz_bound(l);
    return b;
  }

  std::vector<ParamView> parameter_views(const std::string& prefix = "") {
    std::vector<ParamView> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      std::visit([&](auto& v) { detail::collect_views(prefix, i, v, out); }, layers_[i]);
    return out;
  }

  std::vector<ParamView> gradient_views(Grads& g, const std::string& prefix = "") const {
    std::vector<ParamView> out;
    for (std::size_t i = 0; i < g.size(); ++i)
      detail::collect_grad_views(prefix, i, g[i], out);
    return out;
  }

 private:
  std::vector<Layer> layers_;
};

// ============================================================================
// Initialization
// ============================================================================

struct LayerBlueprint {
  enum class Type { structured, dense };
  Type type = Type::structured;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::optional<ShapingOperator> shaping;  // required when structured
  bool correction = true;
  std::size_t hidden_dim = 0;  // 0 -> out_dim
  bool outer_activation = false;
  Activation dense_activation = Activation::relu;
  double cap = 0.95;  // spectral-norm target at init; 0 disables capping
};

namespace detail {

inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev,
                              rng::Prng& gen) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = stddev * gen.next_normal();
  return m;
}

}  // namespace detail

// Weights start Gaussian with variance 1/in, structured paths are then
// rescaled so the effective map's top singular value is at most the cap, and
// correction outputs start at exactly zero (w2 = 0).
inline Network init_network(const std::vector<LayerBlueprint>& arch, std::uint64_t seed) {
  if (arch.empty()) throw ValidationError("init_network: empty architecture");
  rng::Prng gen(seed);
  std::vector<Layer> layers;
  layers.reserve(arch.size());
  for (const LayerBlueprint& bp : arch) {
    if (bp.in_dim == 0 || bp.out_dim == 0)
      throw ValidationError("init_network: layer dims must be positive");
    const double stddev = 1.0 / std::sqrt(static_cast<double>(bp.in_dim));
    Matrix w = detail::gaussian_matrix(bp.out_dim, bp.in_dim, stddev, gen);
    if (bp.type == LayerBlueprint::Type::dense) {
      layers.emplace_back(DenseLayer(std::move(w), Vector(bp.out_dim), bp.dense_activation));
      continue;
    }
    if (!bp.shaping.has_value())
      throw ValidationError("init_network: structured layer without shaping operator");
    ShapingOperator op = *bp.shaping;
    if (bp.cap > 0.0) w = shaping::spectral_cap(op, w, bp.cap);
    std::optional<CorrectionNet> corr;
    if (bp.correction) {
      const std::size_t hidden = bp.hidden_dim == 0 ? bp.out_dim : bp.hidden_dim;
      Matrix w1 = detail::gaussian_matrix(hidden, bp.in_dim, stddev, gen);
      corr = CorrectionNet(std::move(w1), Vector(hidden), Matrix(bp.out_dim, hidden),
                           Vector(bp.out_dim));
    }
    layers.emplace_back(StructuredLayer(std::move(w), std::move(op), std::move(corr),
                                        bp.correction, bp.outer_activation));
  }
  return Network(std::move(layers));
}

// ============================================================================
// TwoBranchNet: parallel branches over the same input, outputs summed.
// ============================================================================

class TwoBranchNet {
 public:
  struct Caches {
    Network::Caches c0, c1;
  };
  struct Grads {
    NetworkGrads g0, g1;
  };

  TwoBranchNet(Network b0, Network b1) : b0_(std::move(b0)), b1_(std::move(b1)) {
    if (b0_.in_dim() != b1_.in_dim() || b0_.out_dim() != b1_.out_dim())
      throw ShapeError("TwoBranchNet: branch dims disagree");
  }

  std::size_t in_dim() const { return b0_.in_dim(); }
  std::size_t out_dim() const { return b0_.out_dim(); }
  const Network& branch0() const { return b0_; }
  const Network& branch1() const { return b1_; }
  Network& branch0() { return b0_; }
  Network& branch1() { return b1_; }

  Vector forward(const Vector& x) const {
    return linalg::add(b0_.forward(x), b1_.forward(x));
  }

  std::pair<Vector, Caches> forward_cached(const Vector& x) const {
    auto [y0, c0] = b0_.forward_cached(x);
    auto [y1, c1] = b1_.forward_cached(x);
    return {linalg::add(y0, y1), Caches{std::move(c0), std::move(c1)}};
  }

  Vector backward_accumulate(Caches& caches, const Vector& dy, Grads& acc) const {
    Vector dx0 = b0_.backward_accumulate(caches.c0, dy, acc.g0);
    Vector dx1 = b1_.backward_accumulate(caches.c1, dy, acc.g1);
    return linalg::add(dx0, dx1);
  }

  Grads zero_grads() const { return Grads{b0_.zero_grads(), b1_.zero_grads()}; }

  Matrix jacobian(const Vector& x) const {
    return linalg::add(b0_.jacobian(x), b1_.jacobian(x));
  }

  std::vector<ParamView> parameter_views() {
    std::vector<ParamView> out = b0_.parameter_views("branch0.");
    std::vector<ParamView> v1 = b1_.parameter_views("branch1.");
    out.insert(out.end(), v1.begin(), v1.end());
    return out;
  }

  std::vector<ParamView> gradient_views(Grads& g) const {
    std::vector<ParamView> out = b0_.gradient_views(g.g0, "branch0.");
    std::vector<ParamView> v1 = b1_.gradient_views(g.g1, "branch1.");
    out.insert(out.end(), v1.begin(), v1.end());
    return out;
  }

 private:
  Network b0_, b1_;
};

}  // namespace pgnn::net
