#pragma once

#include "ddm/core.hpp"
#include "ddm/geom.hpp"

namespace ddm::shapes {

/// Unit-radius icosphere; level 0 is the icosahedron (12 vertices).
TriangleMesh icosphere(int subdivisions);

/// Icosphere with smooth radial bumps and unequal axes, rescaled to unit
/// bounding-sphere diameter. Has no rotational symmetry.
TriangleMesh blob(int subdivisions);

/// Axis-aligned box centred at the origin with the given full extents,
/// each face split into an n x n grid of quads (two triangles each).
TriangleMesh box(const Vec3& extents, int n);

/// n x n vertex grid on the z = 0 plane spanning [0, size]^2.
TriangleMesh grid(int n, double size);

/// Uniform points in the cube [-half, half]^3.
PointCloud random_cloud(std::size_t n, double half, Rng& rng);

/// Scales every vertex/point component-wise.
TriangleMesh scaled(const TriangleMesh& mesh, const Vec3& s);

/// Uniform-by-area samples of the ellipsoid (x/a)^2 + (y/b)^2 + (z/c)^2 = 1,
/// drawn by rejection from sphere directions.
std::vector<Vec3> sample_ellipsoid(const Vec3& semi_axes, std::size_t n, Rng& rng);

/// Uniform-by-area samples of the surface of an axis-aligned box.
std::vector<Vec3> sample_box(const Vec3& extents, std::size_t n, Rng& rng);

}  // namespace ddm::shapes
