#include "h3d/solver.hpp"

#include <chrono>
#include <cmath>
#include <mutex>
#include <stdexcept>

namespace h3d {

namespace {

using Clock = std::chrono::steady_clock;

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double a : v) s += a * a;
  return std::sqrt(s);
}

}  // namespace

GmresResult gmres(const LinearOp& apply, std::span<const double> rhs,
                  const GmresOptions& opt) {
  if (!(opt.tol > 0)) throw std::invalid_argument("gmres: tol must be positive");
  const std::size_t n = rhs.size();
  const int max_iter = std::max(opt.max_iter, 1);
  const int restart = opt.restart > 0 ? opt.restart : max_iter;

  GmresResult res;
  res.x.assign(n, 0.0);
  const double rhs_norm = norm2(rhs);
  if (rhs_norm == 0.0) {
    res.converged = true;
    return res;
  }

  int total_iter = 0;
  while (total_iter < max_iter) {
    // Residual of the current iterate (the rhs itself on the first pass).
    std::vector<double> r(n);
    if (total_iter == 0) {
      std::copy(rhs.begin(), rhs.end(), r.begin());
    } else {
      const std::vector<double> ax = apply(res.x);
      for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - ax[i];
    }
    double beta = norm2(r);
    if (beta / rhs_norm < opt.tol) {
      res.converged = true;
      return res;
    }

    const int m = std::min(restart, max_iter - total_iter);
    std::vector<std::vector<double>> basis;
    basis.reserve(m + 1);
    basis.emplace_back(n);
    for (std::size_t i = 0; i < n; ++i) basis[0][i] = r[i] / beta;

    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(m + 1, m);
    std::vector<double> cs(m), sn(m);
    std::vector<double> g(m + 1, 0.0);
    g[0] = beta;

    int k = 0;
    bool cycle_done = false;
    for (; k < m && !cycle_done; ++k) {
      std::vector<double> w = apply(basis[k]);
      for (int i = 0; i <= k; ++i) {
        double h = 0.0;
        for (std::size_t p = 0; p < n; ++p) h += w[p] * basis[i][p];
        hess(i, k) = h;
        for (std::size_t p = 0; p < n; ++p) w[p] -= h * basis[i][p];
      }
      const double h_next = norm2(w);
      hess(k + 1, k) = h_next;
      if (h_next > 0.0) {
        basis.emplace_back(n);
        for (std::size_t p = 0; p < n; ++p) basis[k + 1][p] = w[p] / h_next;
      }

      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * hess(i, k) + sn[i] * hess(i + 1, k);
        hess(i + 1, k) = -sn[i] * hess(i, k) + cs[i] * hess(i + 1, k);
        hess(i, k) = t;
      }
      const double denom = std::hypot(hess(k, k), hess(k + 1, k));
      cs[k] = denom == 0.0 ? 1.0 : hess(k, k) / denom;
      sn[k] = denom == 0.0 ? 0.0 : hess(k + 1, k) / denom;
      hess(k, k) = denom;
      hess(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];

      ++total_iter;
      const double rel = std::abs(g[k + 1]) / rhs_norm;
      res.residual_history.push_back(rel);
      if (rel < opt.tol || h_next == 0.0) cycle_done = true;
    }

    // Back-substitute and update the iterate.
    std::vector<double> y(k, 0.0);
    for (int i = k - 1; i >= 0; --i) {
      double acc = g[i];
      for (int j = i + 1; j < k; ++j) acc -= hess(i, j) * y[j];
      y[i] = acc / hess(i, i);
    }
    for (int j = 0; j < k; ++j) {
      for (std::size_t p = 0; p < n; ++p) res.x[p] += y[j] * basis[j][p];
    }
    res.iterations = total_iter;

    const std::vector<double> ax = apply(res.x);
    double rnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = rhs[i] - ax[i];
      rnorm += d * d;
    }
    if (std::sqrt(rnorm) / rhs_norm < opt.tol) {
      res.converged = true;
      return res;
    }
  }
  res.converged = false;  // best iterate is still returned
  return res;
}

namespace {

// Gauss-Legendre nodes/weights on [0,1] by Newton iteration.
void gauss_legendre01(int order, std::vector<double>& nodes,
                      std::vector<double>& weights) {
  nodes.resize(order);
  weights.resize(order);
  for (int i = 0; i < order; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (order + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < order; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = order * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = 0.5 * (1.0 - x);  // descending x maps to ascending node
    weights[i] = 1.0 / ((1.0 - x * x) * pp * pp);
  }
}

// Integral of 1/|u| over the box with corner (ox,oy,oz) and side s.
double gauss_box_inverse_r(double ox, double oy, double oz, double s, int order) {
  std::vector<double> nodes, weights;
  gauss_legendre01(order, nodes, weights);
  double acc = 0.0;
  for (int a = 0; a < order; ++a) {
    const double x = ox + s * nodes[a];
    for (int b = 0; b < order; ++b) {
      const double y = oy + s * nodes[b];
      double inner = 0.0;
      for (int c = 0; c < order; ++c) {
        const double z = oz + s * nodes[c];
        inner += weights[c] / std::sqrt(x * x + y * y + z * z);
      }
      acc += weights[a] * weights[b] * inner;
    }
  }
  return acc * s * s * s;
}

// Corner-singular integral over [0,1]^3 of 1/|u|. The corner octant is
// self-similar with factor 1/4, so the seven regular octants of the first
// shell determine the whole integral exactly.
double corner_integral_unit() {
  double shell = 0.0;
  for (int o = 1; o < 8; ++o) {
    const double ox = 0.5 * (o & 1);
    const double oy = 0.5 * ((o >> 1) & 1);
    const double oz = 0.5 * ((o >> 2) & 1);
    shell += gauss_box_inverse_r(ox, oy, oz, 0.5, 40);
  }
  return shell * 4.0 / 3.0;
}

}  // namespace

double unit_cell_integral_constant() {
  static const double c = 2.0 * corner_integral_unit();
  return c;
}

double cell_self_integral(double h) {
  return h * h * unit_cell_integral_constant();
}

std::vector<double> IEOperator::apply(std::span<const double> x) const {
  std::vector<double> y = matvec(rep, x);
  for (std::int64_t i = 0; i < size; ++i) {
    y[i] = diagonal * x[i] + cell_volume * y[i];
  }
  return y;
}

Eigen::MatrixXd IEOperator::dense_matrix(int max_n) const {
  if (grid_n > max_n) {
    throw std::invalid_argument("dense_matrix: grid too large for dense assembly");
  }
  Eigen::MatrixXd a(size, size);
  for (std::int64_t i = 0; i < size; ++i) {
    for (std::int64_t j = 0; j < size; ++j) {
      a(i, j) = i == j ? diagonal
                       : cell_volume * eval_pair(rep.kernel, collocation.points[i],
                                                 collocation.points[j]);
    }
  }
  return a;
}

IEOperator discretize_ie(int n, const KernelSpec& kernel, double eps,
                         Variant variant, const HmatOptions& base) {
  if (n < 2) throw std::invalid_argument("discretize_ie: n must be >= 2");
  if (kernel.id != KernelId::Laplace3d) {
    throw std::invalid_argument(
        "discretize_ie: unsupported kernel (only laplace3d has the singular "
        "cell quadrature wired)");
  }
  IEOperator op;
  op.grid_n = n;
  op.size = std::int64_t(n) * n * n;
  const double h = 2.0 / n;
  op.cell_volume = h * h * h;
  op.diagonal = 1.0 + cell_self_integral(h);
  op.collocation = generate_points(Distribution::TensorGrid,
                                   static_cast<std::size_t>(op.size), 0);
  HmatOptions options = base;
  options.epsilon = eps;
  op.rep = initialize(op.collocation, kernel, variant, options);
  return op;
}

IeReport ie_experiment(int n, const KernelSpec& kernel, double eps,
                       Variant variant, std::uint64_t seed,
                       const HmatOptions& base, const GmresOptions& gmres_opt) {
  IEOperator op = discretize_ie(n, kernel, eps, variant, base);
  const std::int64_t size = op.size;

  std::mt19937_64 gen(seed);
  std::vector<double> sigma(size);
  for (auto& s : sigma) s = 2.0 * uniform01(gen) - 1.0;

  // Right-hand side assembled exactly (dense row sums; the hierarchical
  // operator never touches f).
  std::vector<double> f(size);
  const KernelBlock whole(op.rep.kernel, op.collocation.points.data(), size,
                          op.collocation.points.data(), size, 0);
  {
    std::vector<double> buf(size);
    for (std::int64_t i = 0; i < size; ++i) {
      whole.row(i, buf.data());
      double acc = 0.0;
      for (std::int64_t j = 0; j < size; ++j) acc += buf[j] * sigma[j];
      f[i] = op.diagonal * sigma[i] + op.cell_volume * acc;
    }
  }

  const auto t0 = Clock::now();
  GmresResult sol = gmres([&op](std::span<const double> v) { return op.apply(v); },
                          f, gmres_opt);
  const double solve_s = std::chrono::duration<double>(Clock::now() - t0).count();

  double diff2 = 0.0, ref2 = 0.0;
  for (std::int64_t i = 0; i < size; ++i) {
    diff2 += (sol.x[i] - sigma[i]) * (sol.x[i] - sigma[i]);
    ref2 += sigma[i] * sigma[i];
  }

  IeReport rep;
  rep.variant = variant;
  rep.grid_n = n;
  rep.size = size;
  rep.epsilon = eps;
  rep.iterations = sol.iterations;
  rep.converged = sol.converged;
  rep.solve_seconds = solve_s;
  rep.forward_error = std::sqrt(diff2 / ref2);
  rep.seed = seed;
  return rep;
}

}  // namespace h3d
