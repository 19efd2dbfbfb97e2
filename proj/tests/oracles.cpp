#include "oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace oracles {

Eigen::MatrixXd dense_matrix(const h3d::KernelSpec& kernel,
                             const h3d::PointSet& pts) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      a(i, j) = h3d::eval_entry(kernel, pts, i, j);
  return a;
}

std::vector<double> dense_matvec(const h3d::KernelSpec& kernel,
                                 const h3d::PointSet& pts,
                                 const std::vector<double>& x) {
  const std::size_t n = pts.size();
  if (x.size() != n) throw std::invalid_argument("dense_matvec: bad length");
  std::vector<double> b(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      acc += h3d::eval_pair(kernel, pts.points[i], pts.points[j]) * x[j];
    }
    b[i] = acc + kernel.diagonal * x[i];
  }
  return b;
}

int rank_scan(const Eigen::MatrixXd& m, double eps) {
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index k = sv.size() - 1; k >= 0; --k) {
    if (sv(k) / sv(0) > eps) {
      rank = static_cast<int>(k) + 1;
      break;
    }
  }
  return rank;
}

void inorder_lu(const Eigen::MatrixXd& a, Eigen::MatrixXd& l, Eigen::MatrixXd& u) {
  const Eigen::Index n = a.rows();
  l = Eigen::MatrixXd::Identity(n, n);
  u = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index j = k; j < n; ++j) {
      double acc = a(k, j);
      for (Eigen::Index p = 0; p < k; ++p) acc -= l(k, p) * u(p, j);
      u(k, j) = acc;
    }
    for (Eigen::Index i = k + 1; i < n; ++i) {
      double acc = a(i, k);
      for (Eigen::Index p = 0; p < k; ++p) acc -= l(i, p) * u(p, k);
      l(i, k) = acc / u(k, k);
    }
  }
}

namespace {

// Midpoint-refined Gauss(8) box quadrature of 1/r, singularity-free boxes.
double box_quad(double ox, double oy, double oz, double s) {
  static const double nodes[8] = {
      0.019855071751231912, 0.10166676129318664, 0.2372337950418355,
      0.40828267875217511,  0.59171732124782483, 0.7627662049581645,
      0.89833323870681336,  0.98014492824876809};
  static const double weights[8] = {
      0.050614268145188344, 0.11119051722668717, 0.15685332293894352,
      0.18134189168918088,  0.18134189168918088, 0.15685332293894352,
      0.11119051722668717,  0.050614268145188344};
  double acc = 0.0;
  for (int a = 0; a < 8; ++a) {
    const double x = ox + s * nodes[a];
    for (int b = 0; b < 8; ++b) {
      const double y = oy + s * nodes[b];
      for (int c = 0; c < 8; ++c) {
        const double z = oz + s * nodes[c];
        acc += weights[a] * weights[b] * weights[c] /
               std::sqrt(x * x + y * y + z * z);
      }
    }
  }
  return acc * s * s * s;
}

}  // namespace

namespace {

double adaptive_box(double ox, double oy, double oz, double s, double tol,
                    int depth) {
  const double coarse = box_quad(ox, oy, oz, s);
  double fine = 0.0;
  const double h = 0.5 * s;
  for (int o = 0; o < 8; ++o) {
    fine += box_quad(ox + h * (o & 1), oy + h * ((o >> 1) & 1),
                     oz + h * ((o >> 2) & 1), h);
  }
  if (std::abs(fine - coarse) < tol || depth >= 12) return fine;
  double acc = 0.0;
  for (int o = 0; o < 8; ++o) {
    acc += adaptive_box(ox + h * (o & 1), oy + h * ((o >> 1) & 1),
                        oz + h * ((o >> 2) & 1), h, tol / 8.0, depth + 1);
  }
  return acc;
}

}  // namespace

double cell_integral_constant() {
  // 8 * integral over [0,1/2]^3 with the singular corner at the origin.
  // Shells of seven adaptively refined boxes are added until the estimate
  // moves by less than 1e-11; the skipped corner box vanishes in the limit.
  double total = 0.0;
  double s = 0.25;  // first shell splits [0,1/2]^3
  for (int level = 0; level < 60; ++level) {
    double shell = 0.0;
    for (int o = 1; o < 8; ++o) {
      shell += adaptive_box(s * (o & 1), s * ((o >> 1) & 1), s * ((o >> 2) & 1),
                            s, 1e-13, 0);
    }
    total += shell;
    if (shell < 1e-11) break;
    s *= 0.5;
  }
  return 8.0 * total;
}

double rel_error2(const std::vector<double>& approx,
                  const std::vector<double>& exact) {
  if (approx.size() != exact.size()) {
    throw std::invalid_argument("rel_error2: length mismatch");
  }
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < approx.size(); ++i) {
    diff += (approx[i] - exact[i]) * (approx[i] - exact[i]);
    ref += exact[i] * exact[i];
  }
  return std::sqrt(diff / ref);
}

}  // namespace oracles
