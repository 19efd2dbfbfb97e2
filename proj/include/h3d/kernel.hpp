#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace h3d {

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

inline double distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// Portable uniform double in [0,1): top 53 bits of the engine output,
/// bit-stable across platforms (std::uniform_real_distribution is not).
inline double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

enum class Distribution { UniformRandom, TensorGrid };

/// An immutable cloud of particles in the computational cube [-1,1]^3,
/// reproducible from (distribution, N, seed).
struct PointSet {
  std::vector<Point3> points;
  std::uint64_t seed = 0;
  Distribution distribution = Distribution::UniformRandom;

  std::size_t size() const { return points.size(); }
};

PointSet generate_points(Distribution dist, std::size_t n, std::uint64_t seed);

enum class KernelId { Laplace3d, InverseQuartic, HelmholtzRe, Custom };

/// Radial kernel with an explicit diagonal rule. Built-in kernels are
/// symmetric and depend only on r = |r_i - r_j|.
struct KernelSpec {
  KernelId id = KernelId::Laplace3d;
  std::string name = "laplace3d";
  double diagonal = 0.0;
  std::function<double(double)> f_of_r;  // used only when id == Custom

  double operator()(double r) const;
};

KernelSpec make_kernel(KernelId id);
KernelSpec make_custom_kernel(std::string name, std::function<double(double)> f,
                              double diagonal = 0.0);
/// Accepts "laplace3d", "r4" and "helmholtz-re" (the CLI spellings).
KernelSpec parse_kernel(const std::string& name);

/// Two distinct particles closer than this are treated as coincident.
inline constexpr double kCoincidentTol = 1e-14;

struct DegenerateGeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Kernel value between two distinct locations. Throws
/// DegenerateGeometryError instead of returning a non-finite value.
double eval_pair(const KernelSpec& kernel, const Point3& a, const Point3& b);

/// Matrix entry A_ij: the diagonal rule at i == j, eval_pair otherwise.
double eval_entry(const KernelSpec& kernel, const PointSet& pts, std::size_t i,
                  std::size_t j);

}  // namespace h3d
