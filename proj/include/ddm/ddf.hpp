#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "ddm/core.hpp"
#include "ddm/geom.hpp"

namespace ddm {

enum class RefSources { FixedOnly, BothSurfaces };

struct RefGenConfig {
    std::size_t M = 1;  ///< reference points for a point-cloud base; mesh sample count otherwise
    double sigma = 0.05;
    std::uint64_t seed = 0;
    RefSources sources = RefSources::FixedOnly;
    /// When set, each base point gets its own std-dev: scale times the
    /// distance to its nearest other point in the fixed cloud.
    std::optional<double> adaptive_sigma_scale;
};

struct ReferencePointSet {
    std::vector<Vec3> points;
    RefGenConfig config;

    std::size_t size() const { return points.size(); }
};

/// Shared query points near `fixed`.
///
/// Base points: a cloud's own points, cycled in index order until M is
/// reached with the remainder drawn from a seeded shuffle; a mesh contributes
/// M area-weighted surface samples. In BothSurfaces mode each surface adds its
/// base set (a cloud contributes every point exactly once). Every base point is
/// then offset by per-coordinate N(0, sigma^2) noise.
ReferencePointSet generate_reference_points(const Surface& fixed, const RefGenConfig& cfg,
                                            const Surface* moving = nullptr);

struct DdfSample {
    double f = 0.0;
    Vec3 h = Vec3::Zero();  ///< closest point minus query
};

struct DdfConfig {
    int K = 5;
    bool distance_only = false;
    /// Mesh gradients only: restrict d(q_hat)/d(v_j) to the directions that
    /// move the closest feature (face normal, plane across an edge). The
    /// f-gradient is the same either way; h loses its tangential part.
    bool project_mesh_jacobian = false;
};

/// Derivatives of one DDF sample w.r.t. the coordinates of the surface
/// elements it depends on.
struct DdfGradient {
    std::vector<int> support;
    std::vector<Mat3> dh;                     ///< d(h)/d(p_j); equals d(q_hat)/d(p_j)
    std::vector<Eigen::RowVector3d> df;       ///< d(f)/d(p_j)
};

/// Inverse-square-distance blend of the K nearest points.
std::pair<DdfSample, Vec3> ddf_point_cloud(const KdTree& index, const Vec3& q, const DdfConfig& cfg);
std::pair<DdfSample, DdfGradient> ddf_grad_point_cloud(const KdTree& index, const Vec3& q, const DdfConfig& cfg);
/// Overload that reuses the storage of `grad`.
DdfSample ddf_grad_point_cloud(const KdTree& index, const Vec3& q, const DdfConfig& cfg, DdfGradient& grad);

std::pair<DdfSample, BarycentricFoot> ddf_mesh(const MeshBvh& index, const TriangleMesh& mesh, const Vec3& q);
/// Barycentric weights are held constant: d(q_hat)/d(v_j) = w_j I, or w_j P
/// with P the feature projector when `project_jacobian` is set.
std::pair<DdfSample, DdfGradient> ddf_grad_mesh(const MeshBvh& index, const TriangleMesh& mesh, const Vec3& q,
                                                bool project_jacobian = false);
DdfSample ddf_grad_mesh(const MeshBvh& index, const TriangleMesh& mesh, const Vec3& q, DdfGradient& grad,
                        bool project_jacobian = false);

/// A surface together with its spatial index, ready for DDF queries.
class DdfField {
public:
    DdfField(Surface surface, DdfConfig cfg);

    const Surface& surface() const { return surface_; }
    const DdfConfig& config() const { return cfg_; }

    DdfSample evaluate(const Vec3& q) const;
    DdfSample evaluate(const Vec3& q, DdfGradient& grad) const;

    std::vector<DdfSample> evaluate_all(const std::vector<Vec3>& queries) const;

private:
    Surface surface_;
    SpatialIndex index_;
    DdfConfig cfg_;
};

}  // namespace ddm
