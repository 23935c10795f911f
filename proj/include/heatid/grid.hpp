#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "heatid/errors.hpp"

namespace heatid {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using SparseMatrix = Eigen::SparseMatrix<Scalar>;

using Index = Eigen::Index;

/// Tensor-product node grid on (0,Lx) or (0,Lx)x(0,Ly) together with the
/// time discretization of (0,T). Nodes are ordered lexicographically with x
/// running fastest. Carries the trapezoidal mass weights and the difference
/// operators that define the discrete L2 and H1 inner products.
template <typename Scalar = double>
class GridSpec {
 public:
  static std::shared_ptr<const GridSpec> build(int dim, std::vector<Scalar> extents,
                                               std::vector<int> nodes, Scalar final_time,
                                               int steps) {
    if (dim != 1 && dim != 2) throw ValidationError("dim: must be 1 or 2");
    if (static_cast<int>(extents.size()) != dim)
      throw ValidationError("extents: expected one value per axis");
    if (static_cast<int>(nodes.size()) != dim)
      throw ValidationError("nodes: expected one value per axis");
    for (int d = 0; d < dim; ++d) {
      if (!(extents[d] > 0) || !std::isfinite(static_cast<double>(extents[d])))
        throw ValidationError("extents: must be positive and finite");
      if (nodes[d] < 3) throw ValidationError("nodes: need at least 3 per axis (no interior node)");
    }
    if (!(final_time > 0) || !std::isfinite(static_cast<double>(final_time)))
      throw ValidationError("T: final time must be positive");
    if (steps < 1) throw ValidationError("M: need at least one time step");
    return std::shared_ptr<const GridSpec>(new GridSpec(dim, std::move(extents), std::move(nodes),
                                                        final_time, steps));
  }

  int dim() const { return dim_; }
  int nodes(int axis) const { return axis < dim_ ? nodes_[axis] : 1; }
  Scalar extent(int axis) const { return extents_[axis]; }
  Scalar spacing(int axis) const { return spacing_[axis]; }
  Scalar final_time() const { return final_time_; }
  int steps() const { return steps_; }
  Scalar dt() const { return final_time_ / static_cast<Scalar>(steps_); }

  Index size() const { return static_cast<Index>(nodes(0)) * nodes(1); }
  Index index(int i, int j = 0) const { return static_cast<Index>(j) * nodes(0) + i; }
  int ix(Index k) const { return static_cast<int>(k % nodes(0)); }
  int iy(Index k) const { return static_cast<int>(k / nodes(0)); }
  Scalar x(Index k) const { return spacing_[0] * ix(k); }
  Scalar y(Index k) const { return dim_ == 2 ? spacing_[1] * iy(k) : Scalar(0); }

  bool is_boundary(Index k) const {
    const int i = ix(k);
    if (i == 0 || i == nodes(0) - 1) return true;
    if (dim_ == 2) {
      const int j = iy(k);
      return j == 0 || j == nodes(1) - 1;
    }
    return false;
  }

  /// Interior node ids in lexicographic order.
  const std::vector<Index>& interior() const { return interior_; }
  /// Position of each node in interior(), or -1 on the boundary.
  const std::vector<Index>& interior_slot() const { return slot_; }

  /// Trapezoidal quadrature weights (tensor product in 2D).
  const Vector<Scalar>& weights() const { return weights_; }
  /// Difference operator along an axis: central in the interior, one-sided at the ends.
  const SparseMatrix<Scalar>& difference(int axis) const { return diff_[axis]; }
  /// Gram matrix of the discrete H1 inner product, W + sum_d D_d^T W D_d.
  const SparseMatrix<Scalar>& h1_gram() const { return gram_; }

  bool same_as(const GridSpec& o) const {
    if (this == &o) return true;
    if (dim_ != o.dim_ || steps_ != o.steps_ || final_time_ != o.final_time_) return false;
    for (int d = 0; d < dim_; ++d)
      if (nodes_[d] != o.nodes_[d] || extents_[d] != o.extents_[d]) return false;
    return true;
  }

 private:
  GridSpec(int dim, std::vector<Scalar> extents, std::vector<int> nodes, Scalar final_time,
           int steps)
      : dim_(dim), final_time_(final_time), steps_(steps) {
    for (int d = 0; d < dim; ++d) {
      extents_[d] = extents[d];
      nodes_[d] = nodes[d];
      spacing_[d] = extents[d] / static_cast<Scalar>(nodes[d] - 1);
    }
    const Index n = size();
    slot_.assign(n, -1);
    weights_.resize(n);
    for (Index k = 0; k < n; ++k) {
      Scalar w = axis_weight(0, ix(k));
      if (dim_ == 2) w *= axis_weight(1, iy(k));
      weights_[k] = w;
      if (!is_boundary(k)) {
        slot_[k] = static_cast<Index>(interior_.size());
        interior_.push_back(k);
      }
    }
    for (int d = 0; d < dim_; ++d) diff_[d] = build_difference(d);
    SparseMatrix<Scalar> w_diag(n, n);
    w_diag.reserve(Eigen::VectorXi::Constant(n, 1));
    for (Index k = 0; k < n; ++k) w_diag.insert(k, k) = weights_[k];
    gram_ = w_diag;
    for (int d = 0; d < dim_; ++d) {
      SparseMatrix<Scalar> term = SparseMatrix<Scalar>(diff_[d].transpose()) * w_diag * diff_[d];
      gram_ += term;
    }
    gram_.makeCompressed();
  }

  Scalar axis_weight(int axis, int i) const {
    return (i == 0 || i == nodes_[axis] - 1) ? spacing_[axis] / 2 : spacing_[axis];
  }

  SparseMatrix<Scalar> build_difference(int axis) const {
    using Triplet = Eigen::Triplet<Scalar>;
    std::vector<Triplet> t;
    const Index n = size();
    const int na = nodes_[axis];
    const Scalar h = spacing_[axis];
    const Index stride = axis == 0 ? 1 : nodes_[0];
    t.reserve(2 * n);
    for (Index k = 0; k < n; ++k) {
      const int i = axis == 0 ? ix(k) : iy(k);
      if (i == 0) {
        t.emplace_back(k, k + stride, 1 / h);
        t.emplace_back(k, k, -1 / h);
      } else if (i == na - 1) {
        t.emplace_back(k, k, 1 / h);
        t.emplace_back(k, k - stride, -1 / h);
      } else {
        t.emplace_back(k, k + stride, 1 / (2 * h));
        t.emplace_back(k, k - stride, -1 / (2 * h));
      }
    }
    SparseMatrix<Scalar> d(n, n);
    d.setFromTriplets(t.begin(), t.end());
    return d;
  }

  int dim_;
  std::array<Scalar, 2> extents_{1, 1};
  std::array<int, 2> nodes_{1, 1};
  std::array<Scalar, 2> spacing_{1, 1};
  Scalar final_time_;
  int steps_;
  std::vector<Index> interior_;
  std::vector<Index> slot_;
  Vector<Scalar> weights_;
  std::array<SparseMatrix<Scalar>, 2> diff_;
  SparseMatrix<Scalar> gram_;
};

template <typename Scalar>
using GridPtr = std::shared_ptr<const GridSpec<Scalar>>;

template <typename Scalar>
GridPtr<Scalar> build_grid(int dim, std::vector<Scalar> extents, std::vector<int> nodes,
                           Scalar final_time, int steps) {
  return GridSpec<Scalar>::build(dim, std::move(extents), std::move(nodes), final_time, steps);
}

/// Same spatial grid with a different time discretization.
template <typename Scalar>
GridPtr<Scalar> with_time(const GridSpec<Scalar>& g, Scalar final_time, int steps) {
  std::vector<Scalar> ext;
  std::vector<int> nod;
  for (int d = 0; d < g.dim(); ++d) {
    ext.push_back(g.extent(d));
    nod.push_back(g.nodes(d));
  }
  return build_grid<Scalar>(g.dim(), ext, nod, final_time, steps);
}

/// Grid-sampled real function. Immutable; every value finite.
template <typename Scalar = double>
class ScalarField {
 public:
  ScalarField(GridPtr<Scalar> grid, Vector<Scalar> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (!grid_) throw ValidationError("field: null grid");
    if (values_.size() != grid_->size())
      throw ValidationError("field: value count " + std::to_string(values_.size()) +
                            " does not match node count " + std::to_string(grid_->size()));
    if (!values_.allFinite()) throw ValidationError("field: non-finite value");
  }

  static ScalarField constant(GridPtr<Scalar> grid, Scalar v) {
    const Index n = grid->size();
    return ScalarField(std::move(grid), Vector<Scalar>::Constant(n, v));
  }
  static ScalarField zeros(GridPtr<Scalar> grid) { return constant(std::move(grid), Scalar(0)); }

  /// Samples fn(x, y) at every node (y = 0 in 1D).
  template <typename Fn>
  static ScalarField sample(GridPtr<Scalar> grid, Fn&& fn) {
    Vector<Scalar> v(grid->size());
    for (Index k = 0; k < v.size(); ++k) v[k] = fn(grid->x(k), grid->y(k));
    return ScalarField(std::move(grid), std::move(v));
  }

  const GridSpec<Scalar>& grid() const { return *grid_; }
  const GridPtr<Scalar>& grid_ptr() const { return grid_; }
  const Vector<Scalar>& values() const { return values_; }
  Scalar operator[](Index k) const { return values_[k]; }
  Index size() const { return values_.size(); }
  Scalar min() const { return values_.minCoeff(); }
  Scalar max() const { return values_.maxCoeff(); }

  ScalarField with_values(Vector<Scalar> v) const { return ScalarField(grid_, std::move(v)); }

  ScalarField with_zero_boundary() const {
    Vector<Scalar> v = values_;
    for (Index k = 0; k < v.size(); ++k)
      if (grid_->is_boundary(k)) v[k] = 0;
    return with_values(std::move(v));
  }

  bool zero_on_boundary() const {
    for (Index k = 0; k < values_.size(); ++k)
      if (grid_->is_boundary(k) && values_[k] != 0) return false;
    return true;
  }

 private:
  GridPtr<Scalar> grid_;
  Vector<Scalar> values_;
};

using Field = ScalarField<double>;

template <typename Scalar>
void require_same_grid(const ScalarField<Scalar>& u, const ScalarField<Scalar>& v) {
  if (!u.grid().same_as(v.grid())) throw ValidationError("grid mismatch between fields");
}

template <typename Scalar>
ScalarField<Scalar> operator+(const ScalarField<Scalar>& u, const ScalarField<Scalar>& v) {
  require_same_grid(u, v);
  return u.with_values(u.values() + v.values());
}

template <typename Scalar>
ScalarField<Scalar> operator-(const ScalarField<Scalar>& u, const ScalarField<Scalar>& v) {
  require_same_grid(u, v);
  return u.with_values(u.values() - v.values());
}

template <typename Scalar>
ScalarField<Scalar> operator*(Scalar s, const ScalarField<Scalar>& u) {
  return u.with_values(s * u.values());
}

template <typename Scalar>
ScalarField<Scalar> hadamard(const ScalarField<Scalar>& u, const ScalarField<Scalar>& v) {
  require_same_grid(u, v);
  return u.with_values(u.values().cwiseProduct(v.values()));
}

template <typename Scalar>
Scalar l2_inner(const ScalarField<Scalar>& u, const ScalarField<Scalar>& v) {
  require_same_grid(u, v);
  return (u.grid().weights().array() * u.values().array() * v.values().array()).sum();
}

template <typename Scalar>
Scalar l2_norm(const ScalarField<Scalar>& u) {
  return std::sqrt(l2_inner(u, u));
}

template <typename Scalar>
Scalar l2_distance(const ScalarField<Scalar>& u, const ScalarField<Scalar>& v) {
  return l2_norm(u - v);
}

template <typename Scalar>
Scalar h1_inner(const ScalarField<Scalar>& u, const ScalarField<Scalar>& v) {
  require_same_grid(u, v);
  const auto& g = u.grid();
  const auto& w = g.weights();
  Scalar s = l2_inner(u, v);
  for (int d = 0; d < g.dim(); ++d) {
    const Vector<Scalar> du = g.difference(d) * u.values();
    const Vector<Scalar> dv = g.difference(d) * v.values();
    s += (w.array() * du.array() * dv.array()).sum();
  }
  return s;
}

template <typename Scalar>
Scalar h1_norm(const ScalarField<Scalar>& u) {
  return std::sqrt(h1_inner(u, u));
}

template <typename Scalar>
Scalar linf_norm(const ScalarField<Scalar>& u) {
  return u.values().cwiseAbs().maxCoeff();
}

/// Time levels 0..M of a grid function; snapshot 0 is the initial state.
template <typename Scalar = double>
class Trajectory {
 public:
  Trajectory(GridPtr<Scalar> grid, std::vector<Vector<Scalar>> snapshots)
      : grid_(std::move(grid)), snapshots_(std::move(snapshots)) {
    if (static_cast<int>(snapshots_.size()) != grid_->steps() + 1)
      throw ValidationError("trajectory: expected M+1 snapshots");
  }

  const GridSpec<Scalar>& grid() const { return *grid_; }
  const GridPtr<Scalar>& grid_ptr() const { return grid_; }
  int levels() const { return static_cast<int>(snapshots_.size()); }
  const Vector<Scalar>& raw(int m) const { return snapshots_[m]; }
  ScalarField<Scalar> at(int m) const { return ScalarField<Scalar>(grid_, snapshots_[m]); }
  ScalarField<Scalar> final_state() const { return at(levels() - 1); }

 private:
  GridPtr<Scalar> grid_;
  std::vector<Vector<Scalar>> snapshots_;
};

}  // namespace heatid
