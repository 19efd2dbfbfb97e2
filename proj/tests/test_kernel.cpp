#include <doctest.h>

#include <cmath>
#include <cstring>

#include "h3d/kernel.hpp"

using namespace h3d;

TEST_CASE("builtin kernel values") {
  const KernelSpec lap = make_kernel(KernelId::Laplace3d);
  PointSet ps;
  ps.points = {{0, 0, 0}, {2, 0, 0}, {M_PI, 0, 0}};

  CHECK(eval_entry(lap, ps, 0, 0) == 0.0);  // diagonal rule
  CHECK(eval_entry(lap, ps, 0, 1) == doctest::Approx(0.5).epsilon(1e-15));

  const KernelSpec helm = make_kernel(KernelId::HelmholtzRe);
  CHECK(eval_entry(helm, ps, 0, 2) ==
        doctest::Approx(-1.0 / M_PI).epsilon(1e-14));

  const KernelSpec quart = make_kernel(KernelId::InverseQuartic);
  CHECK(eval_entry(quart, ps, 0, 1) == doctest::Approx(1.0 / 16.0).epsilon(1e-15));
}

TEST_CASE("coincident distinct points raise") {
  const KernelSpec lap = make_kernel(KernelId::Laplace3d);
  PointSet ps;
  ps.points = {{0.25, 0.5, -0.5}, {0.25, 0.5, -0.5}};
  CHECK_THROWS_AS(eval_entry(lap, ps, 0, 1), DegenerateGeometryError);
  CHECK(eval_entry(lap, ps, 1, 1) == 0.0);  // diagonal is still fine
}

TEST_CASE("custom kernel and parse") {
  const KernelSpec k = make_custom_kernel("exp", [](double r) { return std::exp(-r); });
  PointSet ps;
  ps.points = {{0, 0, 0}, {1, 0, 0}};
  CHECK(eval_entry(k, ps, 0, 1) == doctest::Approx(std::exp(-1.0)));
  CHECK(parse_kernel("r4").id == KernelId::InverseQuartic);
  CHECK_THROWS_AS(parse_kernel("nope"), std::invalid_argument);
}

TEST_CASE("tensor grid n=2 gives the eight half-unit centers") {
  const PointSet ps = generate_points(Distribution::TensorGrid, 8, 42);
  REQUIRE(ps.size() == 8);
  for (const auto& p : ps.points) {
    CHECK(std::abs(p.x) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::abs(p.y) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::abs(p.z) == doctest::Approx(0.5).epsilon(1e-15));
  }
  CHECK_THROWS_AS(generate_points(Distribution::TensorGrid, 9, 0),
                  std::invalid_argument);
}

TEST_CASE("generation is bit-reproducible") {
  const PointSet a = generate_points(Distribution::UniformRandom, 1000, 7);
  const PointSet b = generate_points(Distribution::UniformRandom, 1000, 7);
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.points.data(), b.points.data(),
                    a.size() * sizeof(Point3)) == 0);
  const PointSet c = generate_points(Distribution::UniformRandom, 1000, 8);
  CHECK(std::memcmp(a.points.data(), c.points.data(),
                    a.size() * sizeof(Point3)) != 0);
}

TEST_CASE("uniform draws stay in the cube with near-zero mean") {
  const PointSet ps = generate_points(Distribution::UniformRandom, 100000, 11);
  double mx = 0, my = 0, mz = 0;
  for (const auto& p : ps.points) {
    REQUIRE(p.x >= -1.0);
    REQUIRE(p.x <= 1.0);
    REQUIRE(p.y >= -1.0);
    REQUIRE(p.y <= 1.0);
    REQUIRE(p.z >= -1.0);
    REQUIRE(p.z <= 1.0);
    mx += p.x;
    my += p.y;
    mz += p.z;
  }
  const double n = double(ps.size());
  CHECK(std::abs(mx / n) < 0.02);
  CHECK(std::abs(my / n) < 0.02);
  CHECK(std::abs(mz / n) < 0.02);
}

TEST_CASE("symmetry and translation invariance") {
  std::mt19937_64 gen(5);
  PointSet ps;
  for (int i = 0; i < 40; ++i) {
    ps.points.push_back({2 * uniform01(gen) - 1, 2 * uniform01(gen) - 1,
                         2 * uniform01(gen) - 1});
  }
  PointSet shifted = ps;
  for (auto& p : shifted.points) {
    p.x += 0.375;
    p.y -= 0.25;
    p.z += 0.125;
  }
  for (KernelId id :
       {KernelId::Laplace3d, KernelId::InverseQuartic, KernelId::HelmholtzRe}) {
    const KernelSpec k = make_kernel(id);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      for (std::size_t j = i + 1; j < ps.size(); ++j) {
        const double v = eval_entry(k, ps, i, j);
        CHECK(v == eval_entry(k, ps, j, i));  // exact symmetry
        CHECK(eval_entry(k, shifted, i, j) ==
              doctest::Approx(v).epsilon(1e-12));
      }
    }
  }
}
