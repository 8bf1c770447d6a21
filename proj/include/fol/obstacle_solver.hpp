#pragma once

/**
 * @file obstacle_solver.hpp
 * @brief Discrete thin obstacle problem, free boundary extraction, rescalings,
 * blow-up classification and decay monitors.
 *
 * The half box [-1,1]^n x [0,1] carries a tensor grid, uniform in x and graded
 * geometrically toward y = 0. The energy ∫|∇v|²|y|^a is discretized edge by
 * edge. Horizontal edges use the exact integral of y^a over the dual cell.
 * Vertical edges use the harmonic coefficient 1/∫y^{-a}, which is exact for
 * fields with constant flux y^a ∂_y v such as |y|^{2s}. Values at y < 0 follow
 * by even reflection.
 *
 * The complementarity problem is solved by projected block SOR over vertical
 * columns. Each column is a tridiagonal solve with one bound on its bottom node.
 * The relaxation factor is shortened when needed to keep the bottom node
 * feasible, which keeps the energy nonincreasing sweep by sweep.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fol/errors.hpp"
#include "fol/params.hpp"
#include "fol/polynomial.hpp"
#include "fol/quadrature.hpp"
#include "fol/spectrum.hpp"
#include "fol/special_solutions.hpp"
#include "fol/weiss.hpp"

namespace fol {

// ---------------------------------------------------------------------------
// mesh

struct MeshSpec {
  int n = 1;
  int nx = 64;              ///< cells per x direction on [-1, 1]
  int ny = 64;              ///< cells on [0, 1]
  double grading = 0.85;    ///< ratio of consecutive cell heights toward y = 0
  int graded_layers = -1;   ///< graded cells next to y = 0; -1 picks min(20, ny/4)

  void validate() const {
    if (n != 1 && n != 2) throw ParameterError("the solver supports n in {1,2}");
    if (nx < 2 || nx % 2 != 0) throw ParameterError("nx must be even and >= 2");
    if (ny < 4) throw ParameterError("ny must be >= 4");
    if (!(grading > 0.0 && grading < 1.0)) throw ParameterError("grading ratio must lie in (0,1)");
    if (graded_layers > ny) throw ParameterError("more graded layers than cells");
  }

  int layers() const { return graded_layers >= 0 ? graded_layers : std::min(20, ny / 4); }
};

namespace detail {
/// ∫_lo^hi y^p dy for p > -1.
inline double power_integral(double lo, double hi, double p) {
  return (std::pow(hi, p + 1.0) - std::pow(lo, p + 1.0)) / (p + 1.0);
}
}  // namespace detail

struct Mesh {
  Params params;
  MeshSpec spec;
  std::vector<double> x;  ///< nx + 1 nodes per x direction
  std::vector<double> y;  ///< ny + 1 nodes
  std::vector<double> eta;  ///< y^{1-a}: the vertical coordinate in which the fluxes are exact
  double hx = 0.0;
  std::vector<double> row_mass;   ///< ∫ y^a over the dual interval of y_j
  std::vector<double> vert_cond;  ///< 1 / ∫_{y_j}^{y_{j+1}} y^{-a}
  std::size_t ncols = 0;
  std::size_t nrows = 0;

  int n() const { return spec.n; }
  std::size_t size() const { return ncols * nrows; }
  std::size_t node(std::size_t col, std::size_t j) const { return col * nrows + j; }
  int nxp() const { return spec.nx + 1; }

  void column_index(std::size_t col, int* idx) const {
    const auto m = static_cast<std::size_t>(nxp());
    for (int k = 0; k < n(); ++k) {
      idx[k] = static_cast<int>(col % m);
      col /= m;
    }
  }
  std::size_t column_of(const int* idx) const {
    std::size_t col = 0;
    for (int k = n() - 1; k >= 0; --k) col = col * static_cast<std::size_t>(nxp()) + static_cast<std::size_t>(idx[k]);
    return col;
  }
  bool is_boundary_column(std::size_t col) const {
    int idx[2];
    column_index(col, idx);
    for (int k = 0; k < n(); ++k)
      if (idx[k] == 0 || idx[k] == spec.nx) return true;
    return false;
  }
  std::vector<double> column_x(std::size_t col) const {
    int idx[2];
    column_index(col, idx);
    std::vector<double> out(static_cast<std::size_t>(n()));
    for (int k = 0; k < n(); ++k) out[static_cast<std::size_t>(k)] = x[static_cast<std::size_t>(idx[k])];
    return out;
  }
  /// Smallest cell height (next to y = 0).
  double min_spacing() const { return y[1] - y[0]; }
  /// Resolution scale used for radii cut-offs: the x spacing.
  double h() const { return hx; }
  /// Cells lying entirely in y < sqrt(min_spacing).
  int cells_below_sqrt_hmin() const {
    const double lim = std::sqrt(min_spacing());
    int c = 0;
    for (std::size_t j = 0; j + 1 < y.size(); ++j)
      if (y[j + 1] <= lim) ++c;
    return c;
  }
};

inline std::shared_ptr<const Mesh> build_mesh(const Params& p, const MeshSpec& spec) {
  p.validate();
  spec.validate();
  if (spec.n != p.n) throw ParameterError("mesh dimension differs from params.n");
  auto m = std::make_shared<Mesh>();
  m->params = p;
  m->spec = spec;
  m->hx = 2.0 / spec.nx;
  m->x.resize(static_cast<std::size_t>(spec.nx + 1));
  for (int i = 0; i <= spec.nx; ++i) m->x[static_cast<std::size_t>(i)] = -1.0 + m->hx * i;
  m->x[static_cast<std::size_t>(spec.nx / 2)] = 0.0;
  const int L = spec.layers();
  const double q = spec.grading;
  double graded = 0.0;
  for (int k = 1; k <= L; ++k) graded += std::pow(q, k);
  const double hu = 1.0 / (graded + (spec.ny - L));
  m->y.assign(static_cast<std::size_t>(spec.ny + 1), 0.0);
  for (int k = 0; k < spec.ny; ++k) {
    const double hk = k < L ? hu * std::pow(q, L - k) : hu;
    m->y[static_cast<std::size_t>(k + 1)] = m->y[static_cast<std::size_t>(k)] + hk;
  }
  m->y.back() = 1.0;
  m->eta.resize(m->y.size());
  for (std::size_t j = 0; j < m->y.size(); ++j) m->eta[j] = std::pow(m->y[j], 1.0 - p.a);
  const auto ny = static_cast<std::size_t>(spec.ny);
  m->row_mass.resize(ny + 1);
  m->vert_cond.resize(ny);
  for (std::size_t j = 0; j <= ny; ++j) {
    const double lo = j == 0 ? 0.0 : 0.5 * (m->y[j - 1] + m->y[j]);
    const double hi = j == ny ? 1.0 : 0.5 * (m->y[j] + m->y[j + 1]);
    m->row_mass[j] = detail::power_integral(lo, hi, p.a);
    if (!(m->row_mass[j] > 0.0) || !std::isfinite(m->row_mass[j])) throw ConsistencyError("degenerate dual cell");
  }
  for (std::size_t j = 0; j < ny; ++j) {
    m->vert_cond[j] = 1.0 / detail::power_integral(m->y[j], m->y[j + 1], -p.a);
    if (!(m->vert_cond[j] > 0.0) || !std::isfinite(m->vert_cond[j])) throw ConsistencyError("degenerate cell");
  }
  m->ncols = 1;
  for (int k = 0; k < spec.n; ++k) m->ncols *= static_cast<std::size_t>(spec.nx + 1);
  m->nrows = ny + 1;
  return m;
}

// ---------------------------------------------------------------------------
// discrete operator

/// E(v) = Σ_edges w_e (v_i - v_j)², an approximation of ∫_{half box} |∇v|² y^a.
struct DiscreteOperator {
  std::shared_ptr<const Mesh> mesh;
  std::vector<double> wx;  ///< x-edge weight in row j
  std::vector<double> wy;  ///< weight of the edge between rows j and j+1
  double dual_area = 0.0;  ///< hx^n, converts nodal residuals on y = 0 into fluxes

  /// Diagonal of the operator at an interior node of row j.
  double diagonal(std::size_t j) const {
    double d = 2.0 * mesh->n() * wx[j];
    if (j + 1 < mesh->nrows) d += wy[j];
    if (j > 0) d += wy[j - 1];
    return d;
  }

  /**
   * Share of the transverse dual cell inside the box for an edge along x_k
   * (k = -1 for a vertical edge): 1/2 per other x direction in which the column
   * sits on the boundary. Equals 1 for every edge touching an interior column.
   */
  double face_factor(const int* idx, int k) const {
    double f = 1.0;
    for (int l = 0; l < mesh->n(); ++l)
      if (l != k && (idx[l] == 0 || idx[l] == mesh->spec.nx)) f *= 0.5;
    return f;
  }

  /// out = A v at every node, counting only neighbours inside the grid.
  void apply(const std::vector<double>& v, std::vector<double>& out) const {
    const Mesh& m = *mesh;
    out.assign(m.size(), 0.0);
    int idx[2];
    for (std::size_t col = 0; col < m.ncols; ++col) {
      m.column_index(col, idx);
      for (std::size_t j = 0; j < m.nrows; ++j) {
        const std::size_t i = m.node(col, j);
        double s = 0.0;
        for (int k = 0; k < m.n(); ++k)
          for (int dir : {-1, 1}) {
            const int t = idx[k] + dir;
            if (t < 0 || t > m.spec.nx) continue;
            int nb[2] = {idx[0], m.n() > 1 ? idx[1] : 0};
            nb[k] = t;
            s += wx[j] * face_factor(idx, k) * (v[i] - v[m.node(m.column_of(nb), j)]);
          }
        const double cf = face_factor(idx, -1);
        if (j + 1 < m.nrows) s += cf * wy[j] * (v[i] - v[i + 1]);
        if (j > 0) s += cf * wy[j - 1] * (v[i] - v[i - 1]);
        out[i] = s;
      }
    }
  }

  double energy(const std::vector<double>& v) const {
    const Mesh& m = *mesh;
    double e = 0.0;
    int idx[2];
    for (std::size_t col = 0; col < m.ncols; ++col) {
      m.column_index(col, idx);
      for (std::size_t j = 0; j < m.nrows; ++j) {
        const std::size_t i = m.node(col, j);
        for (int k = 0; k < m.n(); ++k) {
          if (idx[k] == m.spec.nx) continue;
          int nb[2] = {idx[0], m.n() > 1 ? idx[1] : 0};
          nb[k] += 1;
          const double d = v[i] - v[m.node(m.column_of(nb), j)];
          e += wx[j] * face_factor(idx, k) * d * d;
        }
        if (j + 1 < m.nrows) {
          const double d = v[i] - v[i + 1];
          e += face_factor(idx, -1) * wy[j] * d * d;
        }
      }
    }
    return e;
  }
};

inline std::shared_ptr<const DiscreteOperator> assemble(const std::shared_ptr<const Mesh>& mesh) {
  auto op = std::make_shared<DiscreteOperator>();
  op->mesh = mesh;
  const int n = mesh->n();
  const double hx = mesh->hx;
  op->wx.resize(mesh->nrows);
  op->wy.resize(mesh->nrows - 1);
  for (std::size_t j = 0; j < mesh->nrows; ++j) op->wx[j] = mesh->row_mass[j] * std::pow(hx, n - 2);
  for (std::size_t j = 0; j + 1 < mesh->nrows; ++j) op->wy[j] = mesh->vert_cond[j] * std::pow(hx, n);
  op->dual_area = std::pow(hx, n);
  return op;
}

// ---------------------------------------------------------------------------
// solutions

struct ObstacleProblem {
  Params params;
  std::function<double(const double*)> datum;     ///< Dirichlet values at X = (x, y)
  std::function<double(const double*)> obstacle;  ///< φ(x), x ∈ R^n
};

struct SolverOptions {
  double tol = 1e-10;     ///< sup-norm of the change between sweeps
  int max_iters = 200000;
  double omega = 0.0;     ///< 0 picks 2/(1 + π/nx)
  bool cascadic = true;   ///< start from the solution on the grid with half the cells
  int coarsest = 16;      ///< no cascade below this many cells in x
  bool record_energy = true;
};

struct KKTReport {
  double min_gap = 0.0;              ///< min (v - φ) on y = 0
  double max_flux = 0.0;             ///< max of the scaled flux on y = 0 (should be ≤ tol)
  double max_complementarity = 0.0;  ///< max (v - φ)·|scaled flux|
  double interior_residual = 0.0;    ///< max |(A v)_i| / A_ii off y = 0
  double offcontact_flux = 0.0;      ///< max |scaled flux| at noncontact nodes
  double tolerance = 0.0;
  bool ok = false;
};

/// Reconstruction used by GridSolution::field.
enum class Interpolation { Linear, Cubic };

namespace detail {

/// Lagrange weights (and derivative weights) of one axis for a point t.
struct AxisStencil {
  int index[4] = {0, 0, 0, 0};
  double w[4] = {0, 0, 0, 0};
  double dw[4] = {0, 0, 0, 0};
};

/**
 * Stencil of `width` nodes (2 or 4) around the cell containing t. With `even`
 * the axis is reflected at its first node (y = 0): missing nodes below become
 * mirror images carrying the values of their reflections.
 */
inline AxisStencil axis_stencil(const std::vector<double>& z, double t, int width, bool even) {
  const int last = static_cast<int>(z.size()) - 1;
  auto it = std::upper_bound(z.begin(), z.end(), t);
  int cell = std::clamp(static_cast<int>(it - z.begin()) - 1, 0, last - 1);
  int first = cell - (width / 2 - 1);
  if (!even) first = std::max(first, 0);
  first = std::min(first, last + 1 - width);
  double pos[4];
  AxisStencil s;
  for (int i = 0; i < width; ++i) {
    const int k = first + i;
    s.index[i] = k < 0 ? -k : k;
    pos[i] = k < 0 ? -z[static_cast<std::size_t>(-k)] : z[static_cast<std::size_t>(k)];
  }
  for (int i = 0; i < width; ++i) {
    double den = 1.0, num = 1.0, dnum = 0.0;
    for (int j = 0; j < width; ++j) {
      if (j == i) continue;
      den *= pos[i] - pos[j];
      double prod = 1.0;
      for (int l = 0; l < width; ++l)
        if (l != i && l != j) prod *= t - pos[l];
      dnum += prod;
      num *= t - pos[j];
    }
    s.w[i] = num / den;
    s.dw[i] = dnum / den;
  }
  return s;
}

}  // namespace detail

struct GridSolution {
  std::shared_ptr<const Mesh> mesh;
  std::shared_ptr<const DiscreteOperator> op;
  std::vector<double> v;    ///< nodal values
  std::vector<double> phi;  ///< obstacle per column
  bool converged = false;
  int iterations = 0;
  double last_change = 0.0;
  double tol = 0.0;
  double contact_tol = 0.0;
  std::vector<double> energy_history;
  std::shared_ptr<const GridSolution> coarse;  ///< solution with half the cells, if computed

  const Params& params() const { return mesh->params; }

  /// lim y^a ∂_y v on y = 0 per column; zero on boundary columns.
  std::vector<double> bottom_flux() const {
    std::vector<double> Av;
    op->apply(v, Av);
    std::vector<double> f(mesh->ncols, 0.0);
    for (std::size_t col = 0; col < mesh->ncols; ++col)
      if (!mesh->is_boundary_column(col)) f[col] = -Av[mesh->node(col, 0)] / op->dual_area;
    return f;
  }

  /// Contact flag per column: v - φ ≤ contact_tol.
  std::vector<char> contact() const {
    std::vector<char> c(mesh->ncols, 0);
    for (std::size_t col = 0; col < mesh->ncols; ++col) c[col] = v[mesh->node(col, 0)] - phi[col] <= contact_tol;
    return c;
  }

  /// Interior sup-norm difference against a function of X.
  double sup_error(const std::function<double(const double*)>& exact) const {
    double e = 0.0;
    std::vector<double> X(static_cast<std::size_t>(mesh->n() + 1));
    for (std::size_t col = 0; col < mesh->ncols; ++col) {
      auto xc = mesh->column_x(col);
      std::copy(xc.begin(), xc.end(), X.begin());
      for (std::size_t j = 0; j < mesh->nrows; ++j) {
        X.back() = mesh->y[j];
        e = std::max(e, std::fabs(v[mesh->node(col, j)] - exact(X.data())));
      }
    }
    return e;
  }

  KKTReport kkt(double factor = 100.0) const {
    std::vector<double> Av;
    op->apply(v, Av);
    KKTReport r;
    r.tolerance = factor * std::max(tol, 1e-300);
    r.min_gap = std::numeric_limits<double>::infinity();
    const Mesh& m = *mesh;
    for (std::size_t col = 0; col < m.ncols; ++col) {
      if (m.is_boundary_column(col)) continue;
      for (std::size_t j = 0; j + 1 < m.nrows; ++j) {
        const double res = Av[m.node(col, j)] / op->diagonal(j);
        if (j > 0) {
          r.interior_residual = std::max(r.interior_residual, std::fabs(res));
          continue;
        }
        // flux scaled to value units: -res
        const double gap = v[m.node(col, 0)] - phi[col];
        r.min_gap = std::min(r.min_gap, gap);
        r.max_flux = std::max(r.max_flux, -res);
        r.max_complementarity = std::max(r.max_complementarity, std::max(gap, 0.0) * std::fabs(res));
        if (gap > contact_tol) r.offcontact_flux = std::max(r.offcontact_flux, std::fabs(res));
      }
    }
    if (!std::isfinite(r.min_gap)) r.min_gap = 0.0;
    double scale = 1.0;
    for (double val : v) scale = std::max(scale, std::fabs(val));
    r.ok = r.min_gap >= -r.tolerance && r.max_flux <= r.tolerance && r.interior_residual <= r.tolerance &&
           r.max_complementarity <= r.tolerance * scale;
    return r;
  }

  /**
   * Piecewise polynomial reconstruction on [-1,1]^n x [-1,1], even in y. The
   * vertical direction is interpolated in η = |y|^{1-a} with one-sided stencils
   * at y = 0, so the |y|^{2s} behaviour over the contact set is captured. The
   * y-derivative at y = 0 itself is reported as 0.
   */
  Field field(Interpolation kind = Interpolation::Cubic) const {
    auto m = mesh;
    auto vals = std::make_shared<const std::vector<double>>(v);
    const int width = kind == Interpolation::Cubic ? 4 : 2;
    Field f;
    f.n = m->n();
    f.eval = [m, vals, width](const double* X, double* grad) {
      const int n = m->n();
      const int dim = n + 1;
      detail::AxisStencil st[3];
      for (int k = 0; k < n; ++k) st[k] = detail::axis_stencil(m->x, std::clamp(X[k], -1.0, 1.0), width, false);
      // vertical direction in η = y^{1-a}, where A + B|y|^{1-a} is reproduced exactly
      const double yy = std::min(std::fabs(X[n]), 1.0);
      const double one_minus_a = 1.0 - m->params.a;
      st[n] = detail::axis_stencil(m->eta, std::pow(yy, one_minus_a), width, false);
      const double deta = yy > 0.0 ? one_minus_a * std::pow(yy, -m->params.a) : 0.0;
      for (double& d : st[n].dw) d *= deta;
      // vertical sums per column, then the tensor product over the x stencils
      double val = 0.0;
      double g[3] = {0.0, 0.0, 0.0};
      const int wy = width;
      const int w2 = n == 2 ? width : 1;
      for (int i2 = 0; i2 < w2; ++i2)
        for (int i1 = 0; i1 < width; ++i1) {
          const int idx[2] = {st[0].index[i1], n == 2 ? st[1].index[i2] : 0};
          const double* col = vals->data() + m->node(m->column_of(idx), 0);
          double c0 = 0.0, c1 = 0.0;
          for (int k = 0; k < wy; ++k) {
            const double vk = col[st[n].index[k]];
            c0 += st[n].w[k] * vk;
            c1 += st[n].dw[k] * vk;
          }
          const double w1 = st[0].w[i1];
          const double t2 = n == 2 ? st[1].w[i2] : 1.0;
          val += w1 * t2 * c0;
          if (grad) {
            g[0] += st[0].dw[i1] * t2 * c0;
            if (n == 2) g[1] += w1 * st[1].dw[i2] * c0;
            g[n] += w1 * t2 * c1;
          }
        }
      if (grad) {
        for (int k = 0; k < dim; ++k) grad[k] = g[k];
        if (X[n] < 0.0) grad[n] = -grad[n];
      }
      return val;
    };
    f.boundary_distance = [n = m->n()](const double* X) {
      double d = 1.0 - std::fabs(X[n]);
      for (int k = 0; k < n; ++k) d = std::min(d, 1.0 - std::fabs(X[k]));
      return d;
    };
    return f;
  }
};

namespace detail {

/// Thomas factorization of a symmetric tridiagonal matrix (diag d, off-diagonal -c).
struct Tridiagonal {
  std::vector<double> diag_inv;  ///< 1 / modified pivots
  std::vector<double> upper;     ///< -c_j (off-diagonal to the next row)

  void factor(const std::vector<double>& d, const std::vector<double>& c) {
    const std::size_t N = d.size();
    diag_inv.resize(N);
    upper.resize(N);
    double prev = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      const double cm = j > 0 ? c[j - 1] : 0.0;
      const double piv = d[j] - (j > 0 ? cm * cm * prev : 0.0);
      if (!(piv > 0.0)) throw ConsistencyError("column system is not positive definite");
      diag_inv[j] = 1.0 / piv;
      prev = diag_inv[j];
      upper[j] = j + 1 < N ? c[j] : 0.0;
    }
  }

  /// Solves in place; rhs becomes the solution.
  void solve(double* r, std::size_t N) const {
    for (std::size_t j = 1; j < N; ++j) r[j] += upper[j - 1] * diag_inv[j - 1] * r[j - 1];
    r[N - 1] *= diag_inv[N - 1];
    for (std::size_t j = N - 1; j-- > 0;) r[j] = (r[j] + upper[j] * r[j + 1]) * diag_inv[j];
  }
};

inline void set_boundary_and_obstacle(const Mesh& m, const ObstacleProblem& prob, std::vector<double>& v,
                                      std::vector<double>& phi) {
  phi.assign(m.ncols, 0.0);
  std::vector<double> X(static_cast<std::size_t>(m.n() + 1));
  for (std::size_t col = 0; col < m.ncols; ++col) {
    auto xc = m.column_x(col);
    phi[col] = prob.obstacle(xc.data());
    std::copy(xc.begin(), xc.end(), X.begin());
    const bool bcol = m.is_boundary_column(col);
    for (std::size_t j = 0; j < m.nrows; ++j) {
      if (!bcol && j + 1 < m.nrows) continue;
      X.back() = m.y[j];
      v[m.node(col, j)] = prob.datum(X.data());
    }
    if (bcol && v[m.node(col, 0)] < phi[col] - 1e-12)
      throw PreconditionError("boundary datum lies below the obstacle on the thin space");
  }
}

inline GridSolution psor_level(const std::shared_ptr<const Mesh>& mesh, const ObstacleProblem& prob,
                               const SolverOptions& opt, const std::shared_ptr<const GridSolution>& coarse) {
  const Mesh& m = *mesh;
  GridSolution sol;
  sol.mesh = mesh;
  sol.op = assemble(mesh);
  sol.tol = opt.tol;
  sol.contact_tol = 10.0 * opt.tol;
  sol.coarse = coarse;
  sol.v.assign(m.size(), 0.0);
  // initial guess: interpolated coarse solution, else zero
  if (coarse) {
    const Field cf = coarse->field(Interpolation::Linear);
    std::vector<double> X(static_cast<std::size_t>(m.n() + 1));
    for (std::size_t col = 0; col < m.ncols; ++col) {
      auto xc = m.column_x(col);
      std::copy(xc.begin(), xc.end(), X.begin());
      for (std::size_t j = 0; j < m.nrows; ++j) {
        X.back() = m.y[j];
        sol.v[m.node(col, j)] = cf(X.data());
      }
    }
  }
  set_boundary_and_obstacle(m, prob, sol.v, sol.phi);
  for (std::size_t col = 0; col < m.ncols; ++col)
    if (!m.is_boundary_column(col)) sol.v[m.node(col, 0)] = std::max(sol.v[m.node(col, 0)], sol.phi[col]);

  const DiscreteOperator& op = *sol.op;
  const std::size_t N = m.nrows - 1;  // unknowns per column: rows 0..ny-1
  std::vector<double> d(N), c(N > 0 ? N - 1 : 0);
  for (std::size_t j = 0; j < N; ++j) d[j] = op.diagonal(j);
  for (std::size_t j = 0; j + 1 < N; ++j) c[j] = op.wy[j];
  Tridiagonal full, reduced;
  full.factor(d, c);
  reduced.factor(std::vector<double>(d.begin() + 1, d.end()), std::vector<double>(c.begin() + 1, c.end()));
  const double omega = opt.omega > 0.0 ? opt.omega : 2.0 / (1.0 + std::numbers::pi / m.spec.nx);
  if (!(omega > 0.0 && omega < 2.0)) throw ParameterError("relaxation factor must lie in (0,2)");

  std::vector<double> rhs(N), vstar(N);
  int idx[2];
  if (opt.record_energy) sol.energy_history.push_back(op.energy(sol.v));
  for (int it = 1; it <= opt.max_iters; ++it) {
    double change = 0.0;
    for (std::size_t col = 0; col < m.ncols; ++col) {
      if (m.is_boundary_column(col)) continue;
      m.column_index(col, idx);
      for (std::size_t j = 0; j < N; ++j) rhs[j] = 0.0;
      for (int k = 0; k < m.n(); ++k)
        for (int dir : {-1, 1}) {
          int nb[2] = {idx[0], m.n() > 1 ? idx[1] : 0};
          nb[k] += dir;
          const std::size_t base = m.node(m.column_of(nb), 0);
          for (std::size_t j = 0; j < N; ++j) rhs[j] += op.wx[j] * sol.v[base + j];
        }
      const std::size_t base = m.node(col, 0);
      rhs[N - 1] += op.wy[N - 1] * sol.v[base + N];
      const double phic = sol.phi[col];
      std::copy(rhs.begin(), rhs.end(), vstar.begin());
      full.solve(vstar.data(), N);
      if (vstar[0] < phic) {
        vstar[0] = phic;
        std::copy(rhs.begin() + 1, rhs.end(), vstar.begin() + 1);
        vstar[1] += op.wy[0] * phic;
        reduced.solve(vstar.data() + 1, N - 1);
      }
      double w = omega;
      const double v0 = sol.v[base];
      const double d0 = vstar[0] - v0;
      if (v0 + w * d0 < phic && d0 < 0.0) w = std::max(1.0, (v0 - phic) / -d0);
      for (std::size_t j = 0; j < N; ++j) {
        const double delta = w * (vstar[j] - sol.v[base + j]);
        sol.v[base + j] += delta;
        change = std::max(change, std::fabs(delta));
      }
      sol.v[base] = std::max(sol.v[base], phic);
    }
    sol.iterations = it;
    sol.last_change = change;
    if (opt.record_energy) sol.energy_history.push_back(op.energy(sol.v));
    if (change <= opt.tol) {
      sol.converged = true;
      break;
    }
  }
  return sol;
}

}  // namespace detail

/**
 * Solves the discrete thin obstacle problem. With cascadic start the grid with
 * half the cells is solved first and kept in GridSolution::coarse, where it
 * serves as the second level of the error estimates.
 */
inline GridSolution solve_psor(const ObstacleProblem& prob, const MeshSpec& spec, const SolverOptions& opt = {}) {
  if (!prob.datum || !prob.obstacle) throw InvalidInput("obstacle problem needs a datum and an obstacle");
  if (!(opt.tol > 0.0)) throw ParameterError("solver tolerance must be positive");
  if (opt.max_iters < 1) throw ParameterError("max_iters must be positive");
  auto mesh = build_mesh(prob.params, spec);
  std::shared_ptr<const GridSolution> coarse;
  if (opt.cascadic && spec.nx / 2 >= opt.coarsest && spec.nx % 4 == 0 && spec.ny % 2 == 0 && spec.ny / 2 >= 4) {
    MeshSpec cs = spec;
    cs.nx /= 2;
    cs.ny /= 2;
    if (cs.graded_layers > 0) cs.graded_layers = std::max(1, cs.graded_layers / 2);
    coarse = std::make_shared<const GridSolution>(solve_psor(prob, cs, opt));
  }
  return detail::psor_level(mesh, prob, opt, coarse);
}

// ---------------------------------------------------------------------------
// free boundary

/// Thin-space nodes in the contact set with a noncontact neighbour (x coordinates).
inline std::vector<std::vector<double>> extract_free_boundary(const GridSolution& sol) {
  const Mesh& m = *sol.mesh;
  const auto contact = sol.contact();
  std::vector<std::vector<double>> out;
  int idx[2];
  for (std::size_t col = 0; col < m.ncols; ++col) {
    if (!contact[col]) continue;
    m.column_index(col, idx);
    bool edge = false;
    for (int k = 0; k < m.n() && !edge; ++k)
      for (int dir : {-1, 1}) {
        int nb[2] = {idx[0], m.n() > 1 ? idx[1] : 0};
        nb[k] += dir;
        if (nb[k] < 0 || nb[k] > m.spec.nx) continue;
        if (!contact[m.column_of(nb)]) edge = true;
      }
    if (edge) out.push_back(m.column_x(col));
  }
  return out;
}

/// Free boundary point closest to x0 (empty when there is none).
inline std::optional<std::vector<double>> nearest_free_boundary_point(const GridSolution& sol,
                                                                      const std::vector<double>& x0) {
  std::optional<std::vector<double>> best;
  double bd = std::numeric_limits<double>::infinity();
  for (const auto& p : extract_free_boundary(sol)) {
    double d = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) d += (p[k] - x0[k]) * (p[k] - x0[k]);
    if (d < bd) bd = d, best = p;
  }
  return best;
}

// ---------------------------------------------------------------------------
// rescalings

enum class RescaleMode { FrequencyNormalized, Homogeneous };

/**
 * v(x0 + rX) divided by sqrt(H(r)/r^{n+a}) (frequency-normalized) or by r^λ
 * (homogeneous). Throws DegeneratePoint when H(r) vanishes in the first mode.
 */
inline Field rescale(const Field& v, const Params& p, const std::vector<double>& x0, double r, RescaleMode mode,
                     double lambda, const WeissRules& rules) {
  auto X0 = detail::base_point(x0, v.n);
  detail::check_radius(v, X0, r);
  double norm = 1.0;
  if (mode == RescaleMode::FrequencyNormalized) {
    const double H = boundary_H(v, x0, r, rules);
    if (!(H > 0.0)) throw DegeneratePoint("H(r) vanishes at the requested radius");
    norm = std::sqrt(H / std::pow(r, p.n + p.a));
  } else {
    norm = std::pow(r, lambda);
  }
  Field f;
  f.n = v.n;
  const int dim = v.n + 1;
  f.eval = [v, X0, r, norm, dim](const double* X, double* g) {
    std::vector<double> Y(static_cast<std::size_t>(dim));
    for (int k = 0; k < dim; ++k) Y[static_cast<std::size_t>(k)] = X0[static_cast<std::size_t>(k)] + r * X[k];
    const double val = v.value_grad(Y.data(), g);
    if (g)
      for (int k = 0; k < dim; ++k) g[k] *= r / norm;
    return val / norm;
  };
  const double dist0 = v.distance_to_boundary(X0.data());
  f.boundary_distance = [dist0, r](const double*) { return dist0 / r; };
  return f;
}

/// L¹(∂B_1, a) distances between rescalings at consecutive radii.
inline std::vector<double> rescaling_distances(const Field& v, const Params& p, const std::vector<double>& x0,
                                               const std::vector<double>& radii, RescaleMode mode, double lambda,
                                               const WeissRules& rules) {
  std::vector<double> out;
  std::vector<Field> fs;
  for (double r : radii) fs.push_back(rescale(v, p, x0, r, mode, lambda, rules));
  for (std::size_t i = 0; i + 1 < fs.size(); ++i)
    out.push_back(rules.sphere.integrate([&](const double* th) { return std::fabs(fs[i](th) - fs[i + 1](th)); }));
  return out;
}

// ---------------------------------------------------------------------------
// classification and monitors

enum class BlowupType { Regular, Singular, Other, Inconclusive };

inline const char* blowup_type_name(BlowupType t) {
  switch (t) {
    case BlowupType::Regular: return "regular";
    case BlowupType::Singular: return "singular";
    case BlowupType::Other: return "other";
    case BlowupType::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct ClassifyOptions {
  double r_max = 0.5;
  double radius_factor = 8.0;  ///< smallest radius = factor · h
  double ratio = 0.9;
  double class_tol = 0.2;      ///< |λ̂ - candidate| allowed for a classification
  double H0_min = 1e-10;
  int max_m = 4;
  FrequencyParams fp{};        ///< lambda is overwritten by the candidate
  double rank_tol = 0.1;       ///< relative singular value cut-off for d_{2m}
  int quadrature_order = 20;
  int radial_levels = 12;  ///< dyadic levels of the inner ball rule
  int radial_points = 6;   ///< Gauss points per radial panel and per shell
  Interpolation interpolation = Interpolation::Cubic;

  WeissRules rules(const Params& p) const {
    return make_weiss_rules(p, quadrature_order, true, radial_levels, radial_points);
  }
};

struct BlowupResult {
  std::vector<double> x0;
  BlowupType type = BlowupType::Inconclusive;
  double lambda_hat = 0.0;         ///< from Φ(0+) = n + a + 2λ
  double lambda_hat_coarse = std::numeric_limits<double>::quiet_NaN();  ///< same on the grid with half the cells; NaN without one
  double N0 = 0.0;                 ///< extrapolated Almgren frequency
  double Phi0 = 0.0;
  double frequency_consistency = 0.0;  ///< |Φ(0+) - (n + a + 2 N(0+))|
  int m = 0;
  double C = 0.0;
  std::vector<double> e;
  double fit_residual = 0.0;  ///< relative L² misfit of the fitted blow-up
  Polynomial<double> p2m;
  int d2m = -1;
  double H0 = 0.0;
  bool confident = false;
  std::vector<double> radii;
  std::vector<double> N_values, Phi_values;

  nlohmann::json to_json() const {
    nlohmann::json j{{"x0", x0},
                     {"type", blowup_type_name(type)},
                     {"lambda_hat", lambda_hat},
                     {"lambda_hat_coarse", lambda_hat_coarse},
                     {"N0", N0},
                     {"Phi0", Phi0},
                     {"frequency_consistency", frequency_consistency},
                     {"H0", H0},
                     {"confident", confident},
                     {"fit_residual", fit_residual}};
    if (type == BlowupType::Regular) {
      j["C"] = C;
      j["e"] = e;
    }
    if (type == BlowupType::Singular) {
      j["m"] = m;
      j["d2m"] = d2m;
      j["p2m"] = polynomial_to_json(p2m);
    }
    return j;
  }
};

namespace detail {

inline std::vector<double> monitor_radii(const GridSolution& sol, const std::vector<double>& x0,
                                         const ClassifyOptions& opt) {
  const double h = sol.mesh->h();
  double rmax = opt.r_max;
  for (double xk : x0) rmax = std::min(rmax, 1.0 - std::fabs(xk));
  rmax = std::min(rmax, 1.0) * (1.0 - 1e-9);
  const double rmin = opt.radius_factor * h;
  if (!(rmin < rmax)) throw ParameterError("grid too coarse for the monitored radii");
  return geometric_radii(rmax, rmin, opt.ratio, 200);
}

inline double extrapolated(const std::vector<double>& radii, const std::vector<double>& vals) {
  std::vector<double> r, v;
  for (std::size_t i = 0; i < radii.size(); ++i)
    if (std::isfinite(vals[i])) r.push_back(radii[i]), v.push_back(vals[i]);
  if (r.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  return extrapolate_to_zero(r, v);
}

/// out_i = max of v_j over |j - i| <= w.
inline std::vector<double> window_max(const std::vector<double>& v, std::size_t w) {
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i >= w ? i - w : 0; j < std::min(v.size(), i + w + 1); ++j) out[i] = std::max(out[i], v[j]);
  return out;
}

inline double eval_scaled(const Field& f, const std::vector<double>& X0, double r, const double* th, int dim) {
  std::vector<double> Y(static_cast<std::size_t>(dim));
  for (int k = 0; k < dim; ++k) Y[static_cast<std::size_t>(k)] = X0[static_cast<std::size_t>(k)] + r * th[k];
  return f(Y.data());
}

}  // namespace detail

/// Frequency profile of a solution at x0 over radii in [factor·h, r_max].
inline FrequencyProfile solution_profile(const GridSolution& sol, const std::vector<double>& x0, double lambda,
                                         const ClassifyOptions& opt, const WeissRules& rules) {
  FrequencyParams fp = opt.fp;
  fp.lambda = lambda;
  return build_frequency_profile(sol.field(opt.interpolation), x0, detail::monitor_radii(sol, x0, opt), fp, rules);
}

/**
 * Classifies x0 from Φ(0+) and fits the blow-up. Regular: (C, e) by least
 * squares against h_e^s on the unit sphere. Singular(m): projection on the
 * degree-2m modes of `basis`, then d_{2m} = n - rank ∇_x p_{2m}(·, 0).
 */
inline BlowupResult classify_point(const GridSolution& sol, const std::vector<double>& x0, const EigenBasis& basis,
                                   const ClassifyOptions& opt = {}) {
  const Params& p = sol.params();
  const int n = p.n;
  const int dim = n + 1;
  if (static_cast<int>(x0.size()) != n) throw InvalidInput("base point dimension mismatch");
  const WeissRules rules = opt.rules(p);
  BlowupResult out;
  out.x0 = x0;
  const FrequencyProfile prof = solution_profile(sol, x0, 1.0 + p.s, opt, rules);
  out.radii = prof.radii;
  out.N_values = prof.N_values;
  out.Phi_values = prof.Phi_values;
  out.Phi0 = detail::extrapolated(prof.radii, prof.Phi_values);
  out.N0 = detail::extrapolated(prof.radii, prof.N_values);
  out.lambda_hat = (out.Phi0 - n - p.a) / 2.0;
  out.frequency_consistency = std::fabs(out.Phi0 - (n + p.a + 2.0 * out.N0));
  if (sol.coarse) {
    try {
      const FrequencyProfile pc = build_frequency_profile(sol.coarse->field(opt.interpolation), x0, prof.radii, prof.fp, rules);
      out.lambda_hat_coarse = (detail::extrapolated(pc.radii, pc.Phi_values) - n - p.a) / 2.0;
    } catch (const Error&) {
      out.lambda_hat_coarse = std::numeric_limits<double>::quiet_NaN();
    }
  }
  if (!std::isfinite(out.lambda_hat)) return out;

  // nearest admissible homogeneity
  double best = 1.0 + p.s;
  int best_m = 0;
  for (int m = 1; m <= opt.max_m; ++m)
    if (std::fabs(out.lambda_hat - 2.0 * m) < std::fabs(out.lambda_hat - best)) best = 2.0 * m, best_m = m;
  const double lam = best;
  {
    // nondegeneracy constant: smallest H(r)/r^{n+a+2λ} over the monitored radii
    double H0 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < prof.radii.size(); ++i)
      H0 = std::min(H0, prof.H_values[i] / std::pow(prof.radii[i], n + p.a + 2.0 * lam));
    out.H0 = H0;
  }
  out.confident = out.H0 > opt.H0_min;
  if (std::fabs(out.lambda_hat - lam) > opt.class_tol) {
    out.type = out.confident ? BlowupType::Other : BlowupType::Inconclusive;
    return out;
  }
  if (!out.confident) {
    out.type = BlowupType::Inconclusive;
    return out;
  }
  auto X0 = detail::base_point(x0, n);
  const Field f = sol.field(opt.interpolation);
  const double r_fit = std::min(prof.radii.front(), std::max(2.0 * prof.radii.back(), 0.25));
  const SphereQuadrature& q = rules.sphere;
  if (best_m == 0) {
    out.type = BlowupType::Regular;
    std::vector<double> samples(q.size());
    double vv = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      samples[i] = detail::eval_scaled(f, X0, r_fit, q.node(i), dim) / std::pow(r_fit, 1.0 + p.s);
      vv += q.weights[i] * samples[i] * samples[i];
    }
    auto fit = [&](const std::vector<double>& e, double& C) {
      RegularProfile prof_e(e, p.s);
      double vh = 0.0, hh = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i) {
        const double hv = eval_h_e_s(prof_e, q.node(i));
        vh += q.weights[i] * samples[i] * hv;
        hh += q.weights[i] * hv * hv;
      }
      C = vh / hh;
      return vv - vh * vh / hh;  // squared residual
    };
    double bestres = std::numeric_limits<double>::infinity();
    if (n == 1) {
      for (double sgn : {1.0, -1.0}) {
        double C = 0.0;
        const double res = fit({sgn}, C);
        if (res < bestres) bestres = res, out.C = C, out.e = {sgn};
      }
    } else {
      auto res_at = [&](double ang, double& C) { return fit({std::cos(ang), std::sin(ang)}, C); };
      double ba = 0.0;
      for (int k = 0; k < 360; ++k) {
        double C = 0.0;
        const double ang = 2.0 * std::numbers::pi * k / 360.0;
        const double res = res_at(ang, C);
        if (res < bestres) bestres = res, ba = ang;
      }
      // golden-section refinement on the bracketing degree
      double lo = ba - std::numbers::pi / 180.0, hi = ba + std::numbers::pi / 180.0;
      const double g = (std::sqrt(5.0) - 1.0) / 2.0;
      double C = 0.0;
      for (int it = 0; it < 60; ++it) {
        const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
        if (res_at(m1, C) < res_at(m2, C))
          hi = m2;
        else
          lo = m1;
      }
      ba = 0.5 * (lo + hi);
      bestres = res_at(ba, C);
      out.C = C;
      out.e = {std::cos(ba), std::sin(ba)};
    }
    out.fit_residual = vv > 0.0 ? std::sqrt(std::max(bestres, 0.0) / vv) : 0.0;
    return out;
  }
  // singular
  out.type = BlowupType::Singular;
  out.m = best_m;
  if (basis.max_degree < 2 * best_m) throw ParameterError("basis degree below 2m in classification");
  const double scale = std::pow(r_fit, 2.0 * best_m);
  std::vector<double> samples(q.size());
  double vv = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    samples[i] = detail::eval_scaled(f, X0, r_fit, q.node(i), dim) / scale;
    vv += q.weights[i] * samples[i] * samples[i];
  }
  out.p2m = Polynomial<double>(dim);
  double captured = 0.0;
  for (std::size_t k : basis.indices_of_degree(2 * best_m)) {
    double ck = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) ck += q.weights[i] * samples[i] * basis.modes[k](q.node(i));
    captured += ck * ck;
    Polynomial<double> term = basis.modes[k].poly;
    term *= ck;
    out.p2m += term;
  }
  out.fit_residual = vv > 0.0 ? std::sqrt(std::max(vv - captured, 0.0) / vv) : 0.0;
  // d_{2m}: rank of the coefficient matrix of ∇_x p(x, 0)
  const auto monos = monomials_of_degree(n, 2 * best_m - 1);
  Eigen::MatrixXd G(n, static_cast<Eigen::Index>(monos.size()));
  for (int i = 0; i < n; ++i) {
    const Polynomial<double> d = out.p2m.derivative(i);
    for (std::size_t c = 0; c < monos.size(); ++c) {
      Exponents ex = monos[c];
      ex.push_back(0);
      G(i, static_cast<Eigen::Index>(c)) = d.coefficient(ex);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G);
  const auto sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > opt.rank_tol * sv(0) && sv(i) > 0.0) ++rank;
  out.d2m = n - rank;
  return out;
}

struct DecayReport {
  double lambda = 0.0;
  std::vector<double> radii;
  std::vector<double> W, W_coarse, W_err;
  std::vector<double> H_scaled, H_scaled_err;
  std::vector<double> Phi, Phi_err;
  std::vector<double> Wmod, Wmod_err;
  double fitted_exponent = std::numeric_limits<double>::quiet_NaN();
  double fitted_constant = std::numeric_limits<double>::quiet_NaN();
  std::size_t fit_samples = 0;
  MonotonicityReport H_monotone, Phi_monotone, Wmod_monotone;
  double Phi_C = 0.0, Wmod_C = 0.0;
  bool Phi_feasible = true;
  std::vector<double> cauchy;  ///< L¹ distances between successive homogeneous rescalings

  nlohmann::json to_json() const {
    return {{"lambda", lambda},
            {"radii", radii},
            {"W", W},
            {"W_err", W_err},
            {"fitted_exponent", fitted_exponent},
            {"fitted_constant", fitted_constant},
            {"fit_samples", fit_samples},
            {"H_monotone", H_monotone.ok},
            {"Phi_monotone", Phi_monotone.ok},
            {"Wmod_monotone", Wmod_monotone.ok},
            {"Phi_C", Phi_C},
            {"Wmod_C", Wmod_C},
            {"cauchy", cauchy}};
  }
};

/**
 * Weiss energy samples with a power-law fit W ≈ C r^α, the nondegeneracy ratio
 * H(r)/r^{n+a+2λ}, Φ and 𝒲 + C r^{k+γ-λ}. The error estimate of every monitor is
 * the largest difference against the grid with half the cells over the two
 * neighbouring radii on each side. Interpolation errors on the sphere oscillate
 * with the radius, so a pointwise difference can vanish by accident. The
 * monotonicity checks allow 10 times the estimate.
 */
inline DecayReport decay_monitors(const GridSolution& sol, const std::vector<double>& x0, double lambda,
                                  const ClassifyOptions& opt = {}) {
  const Params& p = sol.params();
  const WeissRules rules = opt.rules(p);
  DecayReport rep;
  rep.lambda = lambda;
  FrequencyProfile prof = solution_profile(sol, x0, lambda, opt, rules);
  rep.radii = prof.radii;
  rep.W = prof.W_values;
  rep.H_scaled = prof.H_scaled();
  const std::size_t m = prof.radii.size();
  std::vector<double> zero(m, 0.0);
  rep.W_err = zero;
  rep.H_scaled_err = zero;
  rep.Phi_err = zero;
  rep.Wmod_err = zero;
  if (sol.coarse) {
    const FrequencyProfile pc = build_frequency_profile(sol.coarse->field(opt.interpolation), x0, prof.radii, prof.fp, rules);
    rep.W_coarse = pc.W_values;
    const auto hc = pc.H_scaled();
    for (std::size_t i = 0; i < m; ++i) {
      rep.W_err[i] = std::fabs(prof.W_values[i] - pc.W_values[i]);
      rep.H_scaled_err[i] = std::fabs(rep.H_scaled[i] - hc[i]);
      rep.Phi_err[i] = std::fabs(prof.logM_slope[i] - pc.logM_slope[i]);
      rep.Wmod_err[i] = std::fabs(prof.Wmod_values[i] - pc.Wmod_values[i]);
    }
    for (auto* err : {&rep.W_err, &rep.H_scaled_err, &rep.Phi_err, &rep.Wmod_err}) *err = detail::window_max(*err, 2);
  }
  rep.H_monotone = check_nondecreasing(prof.radii, rep.H_scaled, rep.H_scaled_err);
  const CalibratedConstant cphi = calibrate_phi_constant(prof, rep.Phi_err);
  rep.Phi_C = cphi.C;
  rep.Phi_feasible = cphi.feasible;
  prof.fp.C = cphi.C;
  prof.refresh_phi();
  rep.Phi = prof.Phi_values;
  rep.Phi_monotone = check_nondecreasing(prof.radii, rep.Phi, rep.Phi_err);
  if (prof.fp.k + prof.fp.gamma > lambda) {
    const CalibratedConstant cw = calibrate_weiss_constant(prof, rep.Wmod_err);
    rep.Wmod_C = cw.C;
    prof.fp.Cw = cw.C;
  }
  rep.Wmod = prof.Wmod_monitor();
  rep.Wmod_monotone = check_nondecreasing(prof.radii, rep.Wmod, rep.Wmod_err);
  // power-law fit on samples that stand out of the error estimate
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!(rep.W[i] > 0.0) || rep.W[i] <= rep.W_err[i]) continue;
    const double lx = std::log(prof.radii[i]), ly = std::log(rep.W[i]);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
    ++cnt;
  }
  rep.fit_samples = cnt;
  if (cnt >= 3) {
    const double den = cnt * sxx - sx * sx;
    rep.fitted_exponent = (cnt * sxy - sx * sy) / den;
    rep.fitted_constant = std::exp((sy - rep.fitted_exponent * sx) / cnt);
  }
  std::vector<double> cr;
  for (std::size_t i = 0; i < m; i += 4) cr.push_back(prof.radii[i]);
  if (cr.size() >= 2)
    rep.cauchy = rescaling_distances(sol.field(opt.interpolation), p, x0, cr, RescaleMode::Homogeneous, lambda, rules);
  return rep;
}

// ---------------------------------------------------------------------------
// persistence

namespace detail {
constexpr char kCheckpointMagic[8] = {'F', 'O', 'L', 'S', 'O', 'L', '0', '1'};

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw IoError("truncated checkpoint");
  return v;
}
}  // namespace detail

/// Binary checkpoint: magic, params, mesh spec, diagnostics, node values, obstacle values (host byte order).
inline void write_checkpoint(const GridSolution& sol, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.write(detail::kCheckpointMagic, 8);
  const Params& p = sol.params();
  const MeshSpec& s = sol.mesh->spec;
  detail::put<std::int32_t>(os, p.n);
  detail::put<double>(os, p.a);
  detail::put<double>(os, p.s);
  detail::put<std::int32_t>(os, s.nx);
  detail::put<std::int32_t>(os, s.ny);
  detail::put<double>(os, s.grading);
  detail::put<std::int32_t>(os, s.layers());
  detail::put<std::uint8_t>(os, sol.converged ? 1 : 0);
  detail::put<std::int32_t>(os, sol.iterations);
  detail::put<double>(os, sol.tol);
  detail::put<double>(os, sol.last_change);
  detail::put<std::uint64_t>(os, sol.v.size());
  os.write(reinterpret_cast<const char*>(sol.v.data()), static_cast<std::streamsize>(sol.v.size() * sizeof(double)));
  detail::put<std::uint64_t>(os, sol.phi.size());
  os.write(reinterpret_cast<const char*>(sol.phi.data()),
           static_cast<std::streamsize>(sol.phi.size() * sizeof(double)));
  if (!os) throw IoError("write failed for " + path);
}

inline GridSolution read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0) throw IoError(path + " is not a solver checkpoint");
  Params p;
  p.n = detail::get<std::int32_t>(is);
  p.a = detail::get<double>(is);
  p.s = detail::get<double>(is);
  MeshSpec s;
  s.n = p.n;
  s.nx = detail::get<std::int32_t>(is);
  s.ny = detail::get<std::int32_t>(is);
  s.grading = detail::get<double>(is);
  s.graded_layers = detail::get<std::int32_t>(is);
  GridSolution sol;
  try {
    p.validate();
    sol.mesh = build_mesh(p, s);
  } catch (const Error& e) {
    throw IoError(path + ": invalid header (" + e.what() + ")");
  }
  sol.op = assemble(sol.mesh);
  sol.converged = detail::get<std::uint8_t>(is) != 0;
  sol.iterations = detail::get<std::int32_t>(is);
  sol.tol = detail::get<double>(is);
  sol.contact_tol = 10.0 * sol.tol;
  sol.last_change = detail::get<double>(is);
  const auto nv = detail::get<std::uint64_t>(is);
  if (nv != sol.mesh->size()) throw IoError(path + ": node count does not match the mesh");
  sol.v.resize(nv);
  is.read(reinterpret_cast<char*>(sol.v.data()), static_cast<std::streamsize>(nv * sizeof(double)));
  const auto np = detail::get<std::uint64_t>(is);
  if (np != sol.mesh->ncols) throw IoError(path + ": obstacle count does not match the mesh");
  sol.phi.resize(np);
  is.read(reinterpret_cast<char*>(sol.phi.data()), static_cast<std::streamsize>(np * sizeof(double)));
  if (!is) throw IoError("truncated checkpoint " + path);
  return sol;
}

/// CSV of the y = 0 slice: x (x1,x2 for n = 2), v, phi, flux, contact.
inline std::string slice_csv(const GridSolution& sol) {
  const Mesh& m = *sol.mesh;
  const auto flux = sol.bottom_flux();
  const auto contact = sol.contact();
  std::ostringstream os;
  os << (m.n() == 1 ? "x" : "x1,x2") << ",v,phi,flux,contact\n";
  char buf[256];
  for (std::size_t col = 0; col < m.ncols; ++col) {
    const auto xc = m.column_x(col);
    for (double xv : xc) {
      std::snprintf(buf, sizeof buf, "%.17g,", xv);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d\n", sol.v[m.node(col, 0)], sol.phi[col], flux[col],
                  contact[col] ? 1 : 0);
    os << buf;
  }
  return os.str();
}

inline void write_slice_csv(const GridSolution& sol, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << slice_csv(sol);
  if (!f) throw IoError("write failed for " + path);
}

// ---------------------------------------------------------------------------
// standard data

/// Datum and zero obstacle for C·h_e^s.
inline ObstacleProblem profile_problem(const Params& p, std::vector<double> e, double C = 1.0) {
  RegularProfile prof(std::move(e), p.s);
  ObstacleProblem pr;
  pr.params = p;
  pr.datum = [prof, C](const double* X) { return C * eval_h_e_s(prof, X); };
  pr.obstacle = [](const double*) { return 0.0; };
  return pr;
}

/// Datum and zero obstacle for a polynomial solution such as h_{2m}.
inline ObstacleProblem polynomial_problem(const Params& p, const Polynomial<double>& P) {
  ObstacleProblem pr;
  pr.params = p;
  pr.datum = [P](const double* X) { return P.evaluate(X); };
  pr.obstacle = [](const double*) { return 0.0; };
  return pr;
}

/// h_e^s datum minus 0.1 times the even L_a-harmonic extension of x_1^3 (still ≥ 0 on y = 0 for e = e_1).
inline ObstacleProblem perturbed_profile_problem(const Params& p) {
  std::vector<double> e(static_cast<std::size_t>(p.n), 0.0);
  e[0] = 1.0;
  RegularProfile prof(e, p.s);
  Exponents ex(static_cast<std::size_t>(p.n), 0);
  ex[0] = 3;
  const Polynomial<double> cubic = extend_La_harmonic(Polynomial<double>::monomial(ex), p.a);
  ObstacleProblem pr;
  pr.params = p;
  pr.datum = [prof, cubic](const double* X) { return eval_h_e_s(prof, X) - 0.1 * cubic.evaluate(X); };
  pr.obstacle = [](const double*) { return 0.0; };
  return pr;
}

}  // namespace fol
