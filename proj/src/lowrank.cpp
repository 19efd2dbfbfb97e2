#include "h3d/lowrank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace h3d {

namespace {

constexpr double kCoincidentTol2 = kCoincidentTol * kCoincidentTol;

// Chunked evaluation: squared distances first (vectorizable), degeneracy
// scan, then the radial map. `diag` is the local index whose entry lies on
// the matrix diagonal (< 0 if none).
template <class F>
void fill_values(const KernelSpec& kernel, double px, double py, double pz,
                 const double* qx, const double* qy, const double* qz,
                 std::int64_t n, double* out, std::int64_t diag, F f) {
  constexpr std::int64_t kChunk = 256;
  double r2[kChunk];
  for (std::int64_t base = 0; base < n; base += kChunk) {
    const std::int64_t len = std::min(kChunk, n - base);
    for (std::int64_t j = 0; j < len; ++j) {
      const double dx = px - qx[base + j];
      const double dy = py - qy[base + j];
      const double dz = pz - qz[base + j];
      r2[j] = dx * dx + dy * dy + dz * dz;
    }
    const std::int64_t dloc = diag - base;
    if (dloc >= 0 && dloc < len) r2[dloc] = 1.0;  // patched below
    for (std::int64_t j = 0; j < len; ++j) {
      if (r2[j] < kCoincidentTol2) {
        throw DegenerateGeometryError("coincident distinct points in block");
      }
    }
    for (std::int64_t j = 0; j < len; ++j) out[base + j] = f(r2[j]);
    if (dloc >= 0 && dloc < len) out[base + dloc] = kernel.diagonal;
  }
}

template <class F>
void fill_dispatch_dir(const KernelSpec& kernel, double px, double py, double pz,
                       const double* qx, const double* qy, const double* qz,
                       std::int64_t n, double* out, std::int64_t diag) {
  F f;
  fill_values(kernel, px, py, pz, qx, qy, qz, n, out, diag, f);
}

struct LaplaceF {
  double operator()(double r2) const { return 1.0 / std::sqrt(r2); }
};
struct QuarticF {
  double operator()(double r2) const { return 1.0 / (r2 * r2); }
};
struct HelmholtzF {
  double operator()(double r2) const {
    const double r = std::sqrt(r2);
    return std::cos(r) / r;
  }
};

void fill_kernel_row(const KernelSpec& kernel, double px, double py, double pz,
                     const double* qx, const double* qy, const double* qz,
                     std::int64_t n, double* out, std::int64_t diag) {
  switch (kernel.id) {
    case KernelId::Laplace3d:
      fill_dispatch_dir<LaplaceF>(kernel, px, py, pz, qx, qy, qz, n, out, diag);
      return;
    case KernelId::InverseQuartic:
      fill_dispatch_dir<QuarticF>(kernel, px, py, pz, qx, qy, qz, n, out, diag);
      return;
    case KernelId::HelmholtzRe:
      fill_dispatch_dir<HelmholtzF>(kernel, px, py, pz, qx, qy, qz, n, out, diag);
      return;
    case KernelId::Custom: {
      auto f = [&kernel](double r2) { return kernel.f_of_r(std::sqrt(r2)); };
      fill_values(kernel, px, py, pz, qx, qy, qz, n, out, diag, f);
      return;
    }
  }
}

}  // namespace

KernelBlock::KernelBlock(const KernelSpec& kernel, const Point3* row_pts,
                         std::int64_t m, const Point3* col_pts, std::int64_t n,
                         std::int64_t diag_offset)
    : kernel_(kernel),
      row_pts_(row_pts),
      col_pts_(col_pts),
      m_(m),
      n_(n),
      diag_offset_(diag_offset) {
  rx_.resize(m);
  ry_.resize(m);
  rz_.resize(m);
  for (std::int64_t i = 0; i < m; ++i) {
    rx_[i] = row_pts[i].x;
    ry_[i] = row_pts[i].y;
    rz_[i] = row_pts[i].z;
  }
  if (col_pts == row_pts && n == m) {
    cx_ = rx_.data();
    cy_ = ry_.data();
    cz_ = rz_.data();
  } else {
    cx_own_.resize(n);
    cy_own_.resize(n);
    cz_own_.resize(n);
    for (std::int64_t j = 0; j < n; ++j) {
      cx_own_[j] = col_pts[j].x;
      cy_own_[j] = col_pts[j].y;
      cz_own_[j] = col_pts[j].z;
    }
    cx_ = cx_own_.data();
    cy_ = cy_own_.data();
    cz_ = cz_own_.data();
  }
}

double KernelBlock::entry(std::int64_t i, std::int64_t j) const {
  if (diag_offset_ != kNoDiagonal && j == i + diag_offset_) return kernel_.diagonal;
  return eval_pair(kernel_, row_pts_[i], col_pts_[j]);
}

void KernelBlock::row(std::int64_t i, double* out) const {
  const std::int64_t diag =
      diag_offset_ == kNoDiagonal ? std::int64_t(-1) : i + diag_offset_;
  fill_kernel_row(kernel_, rx_[i], ry_[i], rz_[i], cx_, cy_, cz_, n_, out, diag);
}

void KernelBlock::col(std::int64_t j, double* out) const {
  const std::int64_t diag =
      diag_offset_ == kNoDiagonal ? std::int64_t(-1) : j - diag_offset_;
  fill_kernel_row(kernel_, cx_[j], cy_[j], cz_[j], rx_.data(), ry_.data(),
                  rz_.data(), m_, out, diag);
}

Eigen::MatrixXd LowRankBlock::lower() const {
  const int r = rank();
  Eigen::MatrixXd l = Eigen::MatrixXd::Identity(r, r);
  for (int i = 1; i < r; ++i)
    for (int j = 0; j < i; ++j) l(i, j) = lu(i, j);
  return l;
}

Eigen::MatrixXd LowRankBlock::upper() const {
  const int r = rank();
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(r, r);
  for (int i = 0; i < r; ++i)
    for (int j = i; j < r; ++j) u(i, j) = lu(i, j);
  return u;
}

LowRankBlock aca_compress(const BlockOracle& block, const AcaOptions& opt) {
  const std::int64_t m = block.rows();
  const std::int64_t n = block.cols();
  if (m <= 0 || n <= 0) throw std::invalid_argument("aca_compress: empty block");
  if (!(opt.epsilon > 0)) throw std::invalid_argument("aca_compress: eps <= 0");
  const std::int64_t cap =
      opt.max_rank > 0 ? std::min(opt.max_rank, std::min(m, n)) : std::min(m, n);

  Eigen::MatrixXd us(m, std::min<std::int64_t>(cap, 16));  // unnormalized u_k
  Eigen::MatrixXd vs(n, std::min<std::int64_t>(cap, 16));  // normalized v_k
  std::vector<double> deltas;
  std::vector<std::int32_t> row_piv, col_piv;
  std::vector<char> row_used(m, 0), col_used(n, 0);
  Eigen::VectorXd rowbuf(n), colbuf(m), vbuf(n);
  double fro2 = 0.0;  // Frobenius norm^2 of the running approximant

  std::int64_t suggested = 0;
  std::int64_t rank = 0;
  int hits = 0;  // consecutive candidates satisfying the stopping test
  while (rank < cap) {
    // Find a row pivot: residual rows that vanish are retired for good.
    std::int64_t pi = -1, pj = -1;
    while (true) {
      std::int64_t i = -1;
      if (suggested >= 0 && suggested < m && !row_used[suggested]) {
        i = suggested;
      } else {
        for (std::int64_t t = 0; t < m; ++t) {
          if (!row_used[t]) {
            i = t;
            break;
          }
        }
      }
      if (i < 0) break;  // all rows spent
      block.row(i, rowbuf.data());
      if (rank > 0) {
        rowbuf.noalias() -= vs.leftCols(rank) * us.row(i).head(rank).transpose();
      }
      double best = -1.0;
      std::int64_t bestj = -1;
      for (std::int64_t j = 0; j < n; ++j) {
        if (col_used[j]) continue;
        const double a = std::abs(rowbuf[j]);
        if (a > best) {
          best = a;
          bestj = j;
        }
      }
      if (bestj < 0) break;
      if (best < opt.pivot_floor) {
        row_used[i] = 1;  // numerically zero residual row
        suggested = -1;
        continue;
      }
      pi = i;
      pj = bestj;
      break;
    }
    if (pi < 0) break;

    const double delta = rowbuf[pj];
    block.col(pj, colbuf.data());
    if (rank > 0) {
      colbuf.noalias() -= us.leftCols(rank) * vs.row(pj).head(rank).transpose();
    }
    vbuf = rowbuf / delta;

    const double u2 = colbuf.squaredNorm();
    const double v2 = vbuf.squaredNorm();
    const double uv = std::sqrt(u2 * v2);
    // Stop on a machine-level residual at once (the candidate is roundoff),
    // otherwise require the |u||v| <= eps |S|_F test to hold for two
    // consecutive candidates; a single dip can be a spurious weak pivot.
    if (rank > 0) {
      const double ns = std::sqrt(std::max(fro2, 0.0));
      if (uv <= 1e-12 * ns) break;
      if (uv <= opt.epsilon * ns) {
        if (++hits >= 2) break;
      } else {
        hits = 0;
      }
    }

    if (rank == us.cols()) {
      us.conservativeResize(Eigen::NoChange, std::min<std::int64_t>(cap, 2 * rank));
      vs.conservativeResize(Eigen::NoChange, std::min<std::int64_t>(cap, 2 * rank));
    }
    double cross = 0.0;
    if (rank > 0) {
      cross = (us.leftCols(rank).transpose() * colbuf)
                  .dot(vs.leftCols(rank).transpose() * vbuf);
    }
    fro2 += u2 * v2 + 2.0 * cross;
    us.col(rank) = colbuf;
    vs.col(rank) = vbuf;
    deltas.push_back(delta);
    row_piv.push_back(static_cast<std::int32_t>(pi));
    col_piv.push_back(static_cast<std::int32_t>(pj));
    row_used[pi] = 1;
    col_used[pj] = 1;
    ++rank;

    // Next row pivot: largest entry of the new residual column.
    double best = -1.0;
    suggested = -1;
    for (std::int64_t i = 0; i < m; ++i) {
      if (row_used[i]) continue;
      const double a = std::abs(colbuf[i]);
      if (a > best) {
        best = a;
        suggested = i;
      }
    }
  }

  LowRankBlock out;
  out.row_pivots = std::move(row_piv);
  out.col_pivots = std::move(col_piv);
  const int r = static_cast<int>(rank);
  out.lu.resize(r, r);
  // Pivot-restricted factors accumulated from the elimination history:
  // strict lower = u_a(i_b)/delta_a, upper = delta_a * v_a(j_b).
  for (int a = 0; a < r; ++a) {
    for (int b = a + 1; b < r; ++b) {
      out.lu(b, a) = us(out.row_pivots[b], a) / deltas[a];
    }
    for (int b = a; b < r; ++b) {
      out.lu(a, b) = deltas[a] * vs(out.col_pivots[b], a);
    }
  }
  return out;
}

void lr_apply(const LowRankBlock& lr, const BlockOracle& block, const double* x,
              double* b) {
  const int r = lr.rank();
  if (r == 0) return;
  const std::int64_t m = block.rows();
  const std::int64_t n = block.cols();

  thread_local std::vector<double> rowbuf, colbuf, t;
  rowbuf.resize(static_cast<std::size_t>(n));
  colbuf.resize(static_cast<std::size_t>(m));
  t.resize(static_cast<std::size_t>(r));

  // t = K(sigma, Y) x, rows regenerated on the fly.
  for (int k = 0; k < r; ++k) {
    block.row(lr.row_pivots[k], rowbuf.data());
    double acc = 0.0;
    for (std::int64_t j = 0; j < n; ++j) acc += rowbuf[j] * x[j];
    t[k] = acc;
  }
  // Forward then backward substitution on the packed LU.
  for (int k = 0; k < r; ++k) {
    double acc = t[k];
    for (int a = 0; a < k; ++a) acc -= lr.lu(k, a) * t[a];
    t[k] = acc;
  }
  for (int k = r - 1; k >= 0; --k) {
    double acc = t[k];
    for (int a = k + 1; a < r; ++a) acc -= lr.lu(k, a) * t[a];
    t[k] = acc / lr.lu(k, k);
  }
  // b += K(X, tau) t, columns regenerated on the fly.
  for (int k = 0; k < r; ++k) {
    block.col(lr.col_pivots[k], colbuf.data());
    const double tk = t[k];
    for (std::int64_t i = 0; i < m; ++i) b[i] += tk * colbuf[i];
  }
}

Eigen::MatrixXd lr_reconstruct(const LowRankBlock& lr, const BlockOracle& block) {
  const std::int64_t m = block.rows();
  const std::int64_t n = block.cols();
  const int r = lr.rank();
  if (r == 0) return Eigen::MatrixXd::Zero(m, n);
  Eigen::MatrixXd kxt(m, r), ksy(r, n);
  std::vector<double> buf(std::max(m, n));
  for (int k = 0; k < r; ++k) {
    block.col(lr.col_pivots[k], buf.data());
    for (std::int64_t i = 0; i < m; ++i) kxt(i, k) = buf[i];
    block.row(lr.row_pivots[k], buf.data());
    for (std::int64_t j = 0; j < n; ++j) ksy(k, j) = buf[j];
  }
  Eigen::MatrixXd mid = lr.lower().triangularView<Eigen::UnitLower>().solve(ksy);
  mid = lr.upper().triangularView<Eigen::Upper>().solve(mid);
  return kxt * mid;
}

int numerical_rank(const Eigen::MatrixXd& m, double eps) {
  if (m.rows() == 0 || m.cols() == 0) {
    throw std::invalid_argument("numerical_rank: empty matrix");
  }
  Eigen::VectorXd sv;
  if (std::min(m.rows(), m.cols()) <= 32) {
    sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
  } else {
    sv = Eigen::BDCSVD<Eigen::MatrixXd>(m).singularValues();
  }
  const double s0 = sv(0);
  if (s0 == 0.0) return 0;
  int r = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv(k) / s0 > eps) r = static_cast<int>(k) + 1;
  }
  return r;
}

namespace {

PointSet cube_points(int n, double ox, double oy, double oz, std::uint64_t seed) {
  PointSet ps;
  ps.seed = seed;
  std::mt19937_64 gen(seed);
  ps.points.reserve(n);
  for (int i = 0; i < n; ++i) {
    ps.points.push_back({ox + uniform01(gen), oy + uniform01(gen), oz + uniform01(gen)});
  }
  return ps;
}

Eigen::MatrixXd cross_matrix(const KernelSpec& kernel, const PointSet& a,
                             const PointSet& b) {
  Eigen::MatrixXd m(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      m(i, j) = eval_pair(kernel, a.points[i], b.points[j]);
  return m;
}

}  // namespace

std::map<char, int> rank_study_single(const KernelSpec& kernel, int n_per_cube,
                                      double eps, std::uint64_t seed) {
  if (n_per_cube < 8) throw std::invalid_argument("rank study needs n >= 8");
  auto salt = [seed](int k) {
    return seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(k + 1);
  };
  // Unit cubes: X at the origin; F shares a face, W sits one box beyond F,
  // E shares an edge, V shares a vertex.
  const PointSet x = cube_points(n_per_cube, 0, 0, 0, salt(0));
  const PointSet w = cube_points(n_per_cube, -2, 0, 0, salt(1));
  const PointSet f = cube_points(n_per_cube, -1, 0, 0, salt(2));
  const PointSet e = cube_points(n_per_cube, 1, 1, 0, salt(3));
  const PointSet v = cube_points(n_per_cube, 1, 1, 1, salt(4));

  std::map<char, int> out;
  out['W'] = numerical_rank(cross_matrix(kernel, x, w), eps);
  out['F'] = numerical_rank(cross_matrix(kernel, x, f), eps);
  out['E'] = numerical_rank(cross_matrix(kernel, x, e), eps);
  out['V'] = numerical_rank(cross_matrix(kernel, x, v), eps);
  return out;
}

double loglog_slope(const std::vector<std::pair<double, double>>& xy) {
  const auto n = static_cast<double>(xy.size());
  if (xy.size() < 2) throw std::invalid_argument("slope needs >= 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : xy) {
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

RankStudyResult rank_study(const KernelSpec& kernel,
                           const std::vector<int>& n_sweep, double eps,
                           std::uint64_t seed) {
  RankStudyResult res;
  res.epsilon = eps;
  res.seed = seed;
  std::map<char, std::vector<std::pair<double, double>>> pts;
  for (int n : n_sweep) {
    const auto ranks = rank_study_single(kernel, n, eps, seed);
    for (const auto& [cls, r] : ranks) {
      res.samples.push_back({cls, n, r});
      pts[cls].push_back({double(n), double(std::max(r, 1))});
    }
  }
  if (n_sweep.size() >= 2) {
    for (const auto& [cls, xy] : pts) res.slope[cls] = loglog_slope(xy);
  }
  return res;
}

}  // namespace h3d
