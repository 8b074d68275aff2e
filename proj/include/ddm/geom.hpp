#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "ddm/core.hpp"

namespace ddm {

using Rng = std::mt19937_64;

struct Neighbor {
    int index = -1;
    double distance = 0.0;
};

/// Closest point on a triangle expressed in barycentric form.
struct BarycentricFoot {
    int face_index = -1;
    std::array<double, 3> weights{1.0, 0.0, 0.0};
    Vec3 point = Vec3::Zero();
};

/// Static kd-tree over a point set. Query results are identical to a linear
/// scan ordered by (squared distance, index).
class KdTree {
public:
    KdTree() = default;
    explicit KdTree(std::vector<Vec3> points, int leaf_size = 8);

    std::size_t size() const { return points_.size(); }
    const std::vector<Vec3>& points() const { return points_; }

    /// K nearest points in ascending distance; ties go to the lower index.
    std::vector<Neighbor> knn(const Vec3& q, int k) const;
    void knn(const Vec3& q, int k, std::vector<Neighbor>& out) const;

    Neighbor nearest(const Vec3& q) const;

private:
    struct Node {
        Eigen::AlignedBox3d box;
        int begin = 0, end = 0;  // range into order_
        int left = -1, right = -1;
    };

    int build(int begin, int end, int leaf_size);

    std::vector<Vec3> points_;
    std::vector<int> order_;
    std::vector<Vec3> ordered_;  // points_ permuted by order_, for cache-friendly leaf scans
    std::vector<Node> nodes_;
};

/// Bounding-volume hierarchy over the faces of a triangle mesh. The tree only
/// stores face indices and boxes, so queries take the mesh it was built from.
class MeshBvh {
public:
    MeshBvh() = default;
    explicit MeshBvh(const TriangleMesh& mesh, int leaf_size = 4);

    std::size_t num_faces() const { return faces_.size(); }

    /// Globally closest point over all faces; distance ties go to the lower face index.
    BarycentricFoot closest_point(const TriangleMesh& mesh, const Vec3& q) const;

private:
    struct Node {
        Eigen::AlignedBox3d box;
        int begin = 0, end = 0;
        int left = -1, right = -1;
    };

    int build(const TriangleMesh& mesh, std::vector<Vec3>& centroids, int begin, int end, int leaf_size);

    std::vector<int> faces_;
    std::vector<Node> nodes_;
};

/// K-NN structure for clouds, closest-triangle structure for meshes.
using SpatialIndex = std::variant<KdTree, MeshBvh>;

/// Builds the acceleration structure for a surface; throws InvalidInput on an
/// empty surface or a faceless mesh.
SpatialIndex build_index(const Surface& surface);

/// K nearest neighbors of q; throws InvalidInput if k is not in [1, N].
std::vector<Neighbor> knn(const SpatialIndex& index, const Vec3& q, int k);

/// Exact closest point on a (possibly degenerate) triangle. Collinear or
/// collapsed triangles are projected onto their longest segment / point.
BarycentricFoot closest_point_on_triangle(const Vec3& q, const Vec3& v1, const Vec3& v2, const Vec3& v3);

BarycentricFoot closest_point_on_mesh(const SpatialIndex& index, const TriangleMesh& mesh, const Vec3& q);

struct MeshSamples {
    std::vector<Vec3> points;
    std::vector<int> faces;
    std::vector<std::array<double, 3>> weights;
};

/// Area-weighted uniform surface samples, with the face each one landed on.
MeshSamples sample_mesh_surface(const TriangleMesh& mesh, std::size_t n, Rng& rng);

PointCloud sample_points_on_mesh(const TriangleMesh& mesh, std::size_t n, Rng& rng);

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);
Vec3 face_normal(const TriangleMesh& mesh, int face);

/// Shortest-path distances over the vertex/edge graph from one source vertex,
/// restricted to vertices with distance <= cutoff. Sorted by vertex index.
std::vector<std::pair<int, double>> geodesic_distances(const TriangleMesh& mesh, int source_vertex, double cutoff);

/// Same as above but reuses a prebuilt adjacency list.
std::vector<std::pair<int, double>> geodesic_distances(const TriangleMesh& mesh,
                                                       const std::vector<std::vector<int>>& adjacency,
                                                       int source_vertex, double cutoff);

}  // namespace ddm
