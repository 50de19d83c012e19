#pragma once
// Shaping operators: structural constraints applied to a raw weight matrix
// before it acts on activations. Every variant realizes a linear map
// w -> effective(w) plus the matching gradient pull-back, so layers can
// train through the constraint.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pgnn/errors.hpp"
#include "pgnn/linalg.hpp"

namespace pgnn::shaping {

using linalg::Matrix;
using linalg::Vector;

enum class ShapingKind {
  identity,
  sparsity_mask,
  diagonal_scale,
  low_rank,
  dct_band,
  laplacian_smooth,
  learned_projection,
};

inline const char* kind_name(ShapingKind k) {
  switch (k) {
    case ShapingKind::identity: return "identity";
    case ShapingKind::sparsity_mask: return "sparsity_mask";
    case ShapingKind::diagonal_scale: return "diagonal_scale";
    case ShapingKind::low_rank: return "low_rank";
    case ShapingKind::dct_band: return "dct_band";
    case ShapingKind::laplacian_smooth: return "laplacian_smooth";
    case ShapingKind::learned_projection: return "learned_projection";
  }
  throw ValidationError("kind_name: unreachable shaping kind");
}

inline ShapingKind kind_from_name(const std::string& s) {
  if (s == "identity") return ShapingKind::identity;
  if (s == "sparsity_mask") return ShapingKind::sparsity_mask;
  if (s == "diagonal_scale") return ShapingKind::diagonal_scale;
  if (s == "low_rank") return ShapingKind::low_rank;
  if (s == "dct_band") return ShapingKind::dct_band;
  if (s == "laplacian_smooth") return ShapingKind::laplacian_smooth;
  if (s == "learned_projection") return ShapingKind::learned_projection;
  throw ValidationError("unknown shaping kind: " + s);
}

// ============================================================================
// Payloads
// ============================================================================

struct Identity {};

// Elementwise binary mask; every output row keeps at least one live entry.
struct SparsityMask {
  Matrix mask;
};

// Positive per-output scaling.
struct DiagonalScale {
  Vector d;
};

// Fixed orthonormal factors; effective map is confined to rank <= rank.
struct LowRank {
  std::size_t rank;
  Matrix u;  // out x rank
  Matrix v;  // in x rank
};

// Projects both sides onto a set of cosine-basis frequencies. q_out/q_in are
// the cached symmetric band projectors for the output/input dimensions.
struct DctBand {
  std::vector<std::size_t> pass;
  Matrix q_out;
  Matrix q_in;
};

// Smooths output rows through (I + alpha*L)^-1; the inverse is solved once
// at construction.
struct LaplacianSmooth {
  double alpha;
  Matrix lap;
  Matrix smoother;
};

// Trainable output-side projection, initialized to the identity so training
// starts from the unshaped baseline.
struct LearnedProjection {
  Matrix p;
};

namespace detail {

inline Matrix band_projector(std::size_t n, const std::vector<std::size_t>& pass) {
  const Matrix d = linalg::dct_basis(n);
  std::vector<char> keep(n, 0);
  for (std::size_t k : pass) keep[k] = 1;
  Matrix masked = d;
  for (std::size_t i = 0; i < n; ++i)
    if (!keep[i])
      for (std::size_t j = 0; j < n; ++j) masked(i, j) = 0.0;
  return linalg::matmul(linalg::transpose(d), masked);
}

template <class... Ts>
struct Overload : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overload(Ts...) -> Overload<Ts...>;

}  // namespace detail

// ============================================================================
// ShapingOperator
// ============================================================================

class ShapingOperator {
 public:
  using Payload = std::variant<Identity, SparsityMask, DiagonalScale, LowRank,
                               DctBand, LaplacianSmooth, LearnedProjection>;

  static ShapingOperator identity() { return ShapingOperator(Identity{}); }

  static ShapingOperator sparsity_mask(Matrix mask) {
    for (std::size_t i = 0; i < mask.rows(); ++i) {
      bool live = false;
      for (std::size_t j = 0; j < mask.cols(); ++j) {
        const double e = mask(i, j);
        if (e != 0.0 && e != 1.0)
          throw ValidationError("sparsity_mask: entries must be exactly 0 or 1");
        if (e == 1.0) live = true;
      }
      if (!live)
        throw ValidationError("sparsity_mask: row " + std::to_string(i) +
                              " has no live entry");
    }
    return ShapingOperator(SparsityMask{std::move(mask)});
  }

  static ShapingOperator diagonal_scale(Vector d) {
    for (std::size_t i = 0; i < d.size(); ++i)
      if (d[i] <= 0.0)
        throw ValidationError("diagonal_scale: entry " + std::to_string(i) +
                              " is not positive");
    return ShapingOperator(DiagonalScale{std::move(d)});
  }

  // Factors are the leading rows of the orthonormal cosine basis, giving a
  // deterministic smooth template.
  static ShapingOperator low_rank(std::size_t out_dim, std::size_t in_dim,
                                  std::size_t rank) {
    if (rank == 0 || rank > std::min(out_dim, in_dim))
      throw ValidationError("low_rank: rank must be in [1, min(out, in)]");
    const Matrix d_out = linalg::dct_basis(out_dim);
    const Matrix d_in = linalg::dct_basis(in_dim);
    Matrix u(out_dim, rank);
    Matrix v(in_dim, rank);
    for (std::size_t r = 0; r < rank; ++r) {
      for (std::size_t i = 0; i < out_dim; ++i) u(i, r) = d_out(r, i);
      for (std::size_t i = 0; i < in_dim; ++i) v(i, r) = d_in(r, i);
    }
    return ShapingOperator(LowRank{rank, std::move(u), std::move(v)});
  }

  static ShapingOperator dct_band(std::size_t out_dim, std::size_t in_dim,
                                  std::vector<std::size_t> pass) {
    if (pass.empty()) throw ValidationError("dct_band: pass band is empty");
    std::sort(pass.begin(), pass.end());
    if (std::adjacent_find(pass.begin(), pass.end()) != pass.end())
      throw ValidationError("dct_band: duplicate pass-band index");
    if (pass.back() >= std::min(out_dim, in_dim))
      throw ValidationError("dct_band: pass-band index " +
                            std::to_string(pass.back()) +
                            " out of range for dims " + std::to_string(out_dim) +
                            "," + std::to_string(in_dim));
    Matrix q_out = detail::band_projector(out_dim, pass);
    Matrix q_in = detail::band_projector(in_dim, pass);
    return ShapingOperator(DctBand{std::move(pass), std::move(q_out), std::move(q_in)});
  }

  static ShapingOperator laplacian_smooth(Matrix lap, double alpha = 1.0) {
    if (alpha < 0.0) throw ValidationError("laplacian_smooth: alpha must be >= 0");
    if (lap.rows() != lap.cols())
      throw ShapeError("laplacian_smooth: Laplacian must be square, got " +
                       std::to_string(lap.rows()) + "x" + std::to_string(lap.cols()));
    const std::size_t n = lap.rows();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (lap(i, j) != lap(j, i))
          throw ValidationError("laplacian_smooth: Laplacian must be symmetric");
    Matrix system = Matrix::identity(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) system(i, j) += alpha * lap(i, j);
    Matrix smoother = linalg::solve_linear(system, Matrix::identity(n));
    return ShapingOperator(LaplacianSmooth{alpha, std::move(lap), std::move(smoother)});
  }

  static ShapingOperator learned_projection(std::size_t out_dim) {
    return ShapingOperator(LearnedProjection{Matrix::identity(out_dim)});
  }

  ShapingKind kind() const {
    return static_cast<ShapingKind>(payload_.index());
  }

  const Payload& payload() const { return payload_; }

  // Trainable payload access; null for every variant without one.
  Matrix* projection() {
    auto* lp = std::get_if<LearnedProjection>(&payload_);
    return lp ? &lp->p : nullptr;
  }
  const Matrix* projection() const {
    const auto* lp = std::get_if<LearnedProjection>(&payload_);
    return lp ? &lp->p : nullptr;
  }

 private:
  explicit ShapingOperator(Payload p) : payload_(std::move(p)) {}
  Payload payload_;
};

static_assert(static_cast<std::size_t>(ShapingKind::learned_projection) == 6,
              "payload variant order must mirror ShapingKind");

// ============================================================================
// Application and gradient pull-back
// ============================================================================

struct EffectiveMap {
  Matrix matrix;
  const ShapingOperator* op = nullptr;  // provenance
  const Matrix* w = nullptr;
};

namespace detail {

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError("apply_shaping: " + what);
}

}  // namespace detail

inline EffectiveMap apply_shaping(const ShapingOperator& op, const Matrix& w) {
  using linalg::matmul;
  Matrix eff = std::visit(
      detail::Overload{
          [&](const Identity&) { return w; },
          [&](const SparsityMask& m) {
            detail::require_shape(m.mask.rows() == w.rows() && m.mask.cols() == w.cols(),
                                  "mask shape does not match weight");
            return linalg::hadamard(m.mask, w);
          },
          [&](const DiagonalScale& s) {
            detail::require_shape(s.d.size() == w.rows(),
                                  "scale length does not match weight rows");
            Matrix out = w;
            for (std::size_t i = 0; i < w.rows(); ++i)
              for (std::size_t j = 0; j < w.cols(); ++j) out(i, j) *= s.d[i];
            return out;
          },
          [&](const LowRank& lr) {
            detail::require_shape(lr.u.rows() == w.rows() && lr.v.rows() == w.cols(),
                                  "low-rank factors do not match weight shape");
            const Matrix core = matmul(matmul(linalg::transpose(lr.u), w), lr.v);
            return matmul(matmul(lr.u, core), linalg::transpose(lr.v));
          },
          [&](const DctBand& b) {
            detail::require_shape(b.q_out.rows() == w.rows() && b.q_in.rows() == w.cols(),
                                  "band projectors do not match weight shape");
            return matmul(b.q_out, matmul(w, b.q_in));
          },
          [&](const LaplacianSmooth& l) {
            detail::require_shape(l.smoother.rows() == w.rows(),
                                  "smoother dimension does not match weight rows");
            return matmul(l.smoother, w);
          },
          [&](const LearnedProjection& p) {
            detail::require_shape(p.p.rows() == w.rows(),
                                  "projection dimension does not match weight rows");
            return matmul(p.p, w);
          },
      },
      op.payload());
  return EffectiveMap{std::move(eff), &op, &w};
}

struct ShapingVjp {
  Matrix d_w;
  std::optional<Matrix> d_p;  // only for learned_projection
};

// Pull-back of a cotangent on the effective map to cotangents on the raw
// weight (and the learned projection, when present). Every variant is linear
// in w, so the pull-back is the transposed operator applied to d_eff.
inline ShapingVjp shaping_vjp(const ShapingOperator& op, const Matrix& w,
                              const Matrix& d_eff) {
  using linalg::matmul;
  if (d_eff.rows() != w.rows() || d_eff.cols() != w.cols())
    throw ShapeError("shaping_vjp: cotangent shape " + std::to_string(d_eff.rows()) +
                     "x" + std::to_string(d_eff.cols()) + " does not match weight " +
                     std::to_string(w.rows()) + "x" + std::to_string(w.cols()));
  return std::visit(
      detail::Overload{
          [&](const Identity&) { return ShapingVjp{d_eff, std::nullopt}; },
          [&](const SparsityMask& m) {
            return ShapingVjp{linalg::hadamard(m.mask, d_eff), std::nullopt};
          },
          [&](const DiagonalScale& s) {
            Matrix out = d_eff;
            for (std::size_t i = 0; i < out.rows(); ++i)
              for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= s.d[i];
            return ShapingVjp{std::move(out), std::nullopt};
          },
          [&](const LowRank& lr) {
            const Matrix core = matmul(matmul(linalg::transpose(lr.u), d_eff), lr.v);
            return ShapingVjp{matmul(matmul(lr.u, core), linalg::transpose(lr.v)),
                              std::nullopt};
          },
          [&](const DctBand& b) {
            return ShapingVjp{matmul(b.q_out, matmul(d_eff, b.q_in)), std::nullopt};
          },
          [&](const LaplacianSmooth& l) {
            return ShapingVjp{matmul(linalg::transpose(l.smoother), d_eff), std::nullopt};
          },
          [&](const LearnedProjection& p) {
            return ShapingVjp{matmul(linalg::transpose(p.p), d_eff),
                              matmul(d_eff, linalg::transpose(w))};
          },
      },
      op.payload());
}

// Rescales w so the effective map's top singular value does not exceed
// target. Falls back to the exact SVD if power iteration stalls, so the call
// always produces a capped matrix.
inline Matrix spectral_cap(const ShapingOperator& op, const Matrix& w, double target) {
  if (target <= 0.0) throw ValidationError("spectral_cap: target must be > 0");
  const EffectiveMap eff = apply_shaping(op, w);
  double sigma = 0.0;
  try {
    sigma = linalg::spectral_norm_estimate(eff.matrix);
  } catch (const NumericError&) {
    sigma = linalg::svd_values(eff.matrix).front();
  }
  if (sigma <= target) return w;
  return linalg::scale(w, target / sigma);
}

}  // namespace pgnn::shaping
