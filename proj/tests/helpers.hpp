#pragma once
// Shared test utilities: random builders and the finite-difference gradient
// harness used as the independent oracle for every analytic gradient.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pgnn/linalg.hpp"
#include "pgnn/net.hpp"
#include "pgnn/rng.hpp"
#include "pgnn/shaping.hpp"

namespace testutil {

using pgnn::linalg::Matrix;
using pgnn::linalg::Vector;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  pgnn::rng::Prng gen(seed);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = gen.next_normal();
  return m;
}

inline Vector random_vector(std::size_t dim, std::uint64_t seed) {
  pgnn::rng::Prng gen(seed);
  Vector v(dim);
  for (std::size_t i = 0; i < dim; ++i) v[i] = gen.next_normal();
  return v;
}

// One operator of every shaping kind, sized out x in.
inline std::vector<pgnn::shaping::ShapingOperator> shaping_variants(std::size_t out,
                                                                    std::size_t in,
                                                                    std::uint64_t seed) {
  using pgnn::shaping::ShapingOperator;
  pgnn::rng::Prng gen(seed);
  Matrix mask(out, in);
  for (std::size_t i = 0; i < out; ++i) {
    for (std::size_t j = 0; j < in; ++j)
      mask(i, j) = gen.next_uniform01() < 0.5 ? 1.0 : 0.0;
    mask(i, gen.next_index(in)) = 1.0;
  }
  Vector d(out);
  for (std::size_t i = 0; i < out; ++i) d[i] = 0.5 + gen.next_uniform01();
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i + 1 < out; ++i) edges.emplace_back(i, i + 1);
  std::vector<std::size_t> pass;
  for (std::size_t k = 0; k < std::max<std::size_t>(1, std::min(out, in) / 2); ++k)
    pass.push_back(k);
  std::vector<ShapingOperator> ops;
  ops.push_back(ShapingOperator::identity());
  ops.push_back(ShapingOperator::sparsity_mask(mask));
  ops.push_back(ShapingOperator::diagonal_scale(d));
  ops.push_back(ShapingOperator::low_rank(out, in, std::max<std::size_t>(1, std::min(out, in) / 2)));
  ops.push_back(ShapingOperator::dct_band(out, in, pass));
  ops.push_back(ShapingOperator::laplacian_smooth(pgnn::linalg::graph_laplacian(out, edges)));
  ops.push_back(ShapingOperator::learned_projection(out));
  return ops;
}

// A single structured layer with random (non-degenerate) parameters: weight
// Gaussian, correction fully random so its gradients are exercised away from
// the zero-init special case.
inline pgnn::net::StructuredLayer random_structured_layer(
    std::size_t out, std::size_t in, pgnn::shaping::ShapingOperator op,
    std::uint64_t seed, bool correction = true, bool outer = false) {
  const std::size_t hidden = out;
  std::optional<pgnn::net::CorrectionNet> corr;
  if (correction)
    corr = pgnn::net::CorrectionNet(
        random_matrix(hidden, in, seed + 1), random_vector(hidden, seed + 2),
        random_matrix(out, hidden, seed + 3), random_vector(out, seed + 4));
  return pgnn::net::StructuredLayer(random_matrix(out, in, seed), std::move(op),
                                    std::move(corr), correction, outer);
}

struct GradCheckStats {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst_param;
};

// Finite-difference oracle: compares every analytic parameter gradient and
// the input cotangent of `model` against central differences of the scalar
// probe L = <g, model(x)>. Returns the worst relative error observed.
template <class ModelT>
GradCheckStats check_model_gradients(ModelT& model, const Vector& x, std::uint64_t seed,
                                     double h = 1e-5) {
  pgnn::rng::Prng gen(seed);
  Vector g(model.out_dim());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = gen.next_normal();

  auto [y, caches] = model.forward_cached(x);
  (void)y;
  auto grads = model.zero_grads();
  const Vector dx = model.backward_accumulate(caches, g, grads);

  GradCheckStats stats;
  auto record = [&](double an, double fd, const std::string& name) {
    const double rel =
        std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
    if (rel > stats.max_rel_error) {
      stats.max_rel_error = rel;
      stats.worst_param = name;
    }
    ++stats.checked;
  };

  auto pviews = model.parameter_views();
  auto gviews = model.gradient_views(grads);
  for (std::size_t vi = 0; vi < pviews.size(); ++vi) {
    for (std::size_t k = 0; k < pviews[vi].size; ++k) {
      const double saved = pviews[vi].data[k];
      pviews[vi].data[k] = saved + h;
      const double fp = pgnn::linalg::dot(g, model.forward(x));
      pviews[vi].data[k] = saved - h;
      const double fm = pgnn::linalg::dot(g, model.forward(x));
      pviews[vi].data[k] = saved;
      record(gviews[vi].data[k], (fp - fm) / (2.0 * h), pviews[vi].name);
    }
  }

  Vector xp = x;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double saved = xp[k];
    xp[k] = saved + h;
    const double fp = pgnn::linalg::dot(g, model.forward(xp));
    xp[k] = saved - h;
    const double fm = pgnn::linalg::dot(g, model.forward(xp));
    xp[k] = saved;
    record(dx[k], (fp - fm) / (2.0 * h), "input");
  }
  return stats;
}

}  // namespace testutil
