#include "h3d/kernel.hpp"

#include <cmath>

namespace h3d {

double KernelSpec::operator()(double r) const {
  switch (id) {
    case KernelId::Laplace3d:
      return 1.0 / r;
    case KernelId::InverseQuartic: {
      const double r2 = r * r;
      return 1.0 / (r2 * r2);
    }
    case KernelId::HelmholtzRe:
      return std::cos(r) / r;
    case KernelId::Custom:
      return f_of_r(r);
  }
  throw std::logic_error("unreachable kernel id");
}

KernelSpec make_kernel(KernelId id) {
  KernelSpec k;
  k.id = id;
  switch (id) {
    case KernelId::Laplace3d:
      k.name = "laplace3d";
      break;
    case KernelId::InverseQuartic:
      k.name = "r4";
      break;
    case KernelId::HelmholtzRe:
      k.name = "helmholtz-re";
      break;
    case KernelId::Custom:
      throw std::invalid_argument("use make_custom_kernel for custom kernels");
  }
  return k;
}

KernelSpec make_custom_kernel(std::string name, std::function<double(double)> f,
                              double diagonal) {
  KernelSpec k;
  k.id = KernelId::Custom;
  k.name = std::move(name);
  k.f_of_r = std::move(f);
  k.diagonal = diagonal;
  return k;
}

KernelSpec parse_kernel(const std::string& name) {
  if (name == "laplace3d") return make_kernel(KernelId::Laplace3d);
  if (name == "r4") return make_kernel(KernelId::InverseQuartic);
  if (name == "helmholtz-re") return make_kernel(KernelId::HelmholtzRe);
  throw std::invalid_argument("unknown kernel: " + name);
}

double eval_pair(const KernelSpec& kernel, const Point3& a, const Point3& b) {
  const double r = distance(a, b);
  if (r < kCoincidentTol) {
    throw DegenerateGeometryError(
        "coincident distinct points (r = " + std::to_string(r) + ")");
  }
  const double v = kernel(r);
  if (!std::isfinite(v)) {
    throw DegenerateGeometryError("non-finite kernel value at r = " +
                                  std::to_string(r));
  }
  return v;
}

double eval_entry(const KernelSpec& kernel, const PointSet& pts, std::size_t i,
                  std::size_t j) {
  if (i >= pts.size() || j >= pts.size()) {
    throw std::invalid_argument("eval_entry: index out of range");
  }
  if (i == j) return kernel.diagonal;
  return eval_pair(kernel, pts.points[i], pts.points[j]);
}

PointSet generate_points(Distribution dist, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_points: N must be >= 1");
  PointSet ps;
  ps.seed = seed;
  ps.distribution = dist;
  ps.points.reserve(n);
  if (dist == Distribution::UniformRandom) {
    std::mt19937_64 gen(seed);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = 2.0 * uniform01(gen) - 1.0;
      const double y = 2.0 * uniform01(gen) - 1.0;
      const double z = 2.0 * uniform01(gen) - 1.0;
      ps.points.push_back({x, y, z});
    }
  } else {
    const auto side = static_cast<std::size_t>(std::llround(std::cbrt(static_cast<double>(n))));
    if (side * side * side != n) {
      throw std::invalid_argument("tensor-grid N must be a perfect cube, got " +
                                  std::to_string(n));
    }
    // Cell centers of the side^3 uniform partition of [-1,1]^3.
    auto center = [&](std::size_t k) {
      return -1.0 + (2.0 * static_cast<double>(k) + 1.0) / static_cast<double>(side);
    };
    for (std::size_t ix = 0; ix < side; ++ix)
      for (std::size_t iy = 0; iy < side; ++iy)
        for (std::size_t iz = 0; iz < side; ++iz)
          ps.points.push_back({center(ix), center(iy), center(iz)});
  }
  return ps;
}

}  // namespace h3d
