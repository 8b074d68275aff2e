#pragma once

#include <utility>

#include "ddm/ddf.hpp"
#include "ddm/metric.hpp"
#include "ddm/optim.hpp"

namespace ddm {

struct RigidTransform {
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return R * p + t; }
    /// (this ∘ other)(p) = this(other(p))
    RigidTransform compose(const RigidTransform& other) const { return {R * other.R, R * other.t + t}; }
    RigidTransform inverse() const { return {R.transpose(), -(R.transpose() * t)}; }
};

/// Throws InvalidInput unless R is orthonormal with det +1 (within tol).
void validate(const RigidTransform& T, double tol = 1e-9);

Mat3 skew(const Vec3& v);

/// Rodrigues formula; exact identity at zero.
Mat3 so3_exp(const Vec3& omega);

/// Axis-angle of a rotation matrix, angle in [0, pi].
Vec3 so3_log(const Mat3& R);

/// Right Jacobian of SO(3): d exp(w) ≈ exp(w) exp(J_r(w) dw).
Mat3 so3_right_jacobian(const Vec3& omega);

/// Jacobian of exp(omega) * p with respect to omega.
Mat3 rotate_point_jacobian(const Vec3& omega, const Vec3& p);

PointCloud apply_rigid(const PointCloud& cloud, const RigidTransform& T);

struct RigidRegConfig {
    MetricConfig metric{20.0, DdfConfig{5, false}, Reduction::Mean};
    RefGenConfig refgen{};          ///< M == 0 means 10x the target size
    OptimConfig optim{};
    RigidTransform init{};
};

/// Rigid registration defaults: K=5, beta=20, sigma=0.05, M=10N,
/// Adam lr 0.02 for 200 iterations.
RigidRegConfig default_rigid_config();

/// DDM objective over the 6-vector (axis-angle, translation).
class RigidObjective {
public:
    RigidObjective(const PointCloud& src, const PointCloud& tgt, ReferencePointSet refs, MetricConfig metric);

    double operator()(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;
    double value(const Eigen::VectorXd& x) const;

    const ReferencePointSet& refs() const { return refs_; }

    static RigidTransform to_transform(const Eigen::VectorXd& x);
    static Eigen::VectorXd to_params(const RigidTransform& T);

private:
    PointCloud src_;
    ReferencePointSet refs_;
    MetricConfig metric_;
    std::vector<DdfSample> target_values_;
};

std::pair<RigidTransform, OptimTrace> register_rigid(const PointCloud& src, const PointCloud& tgt,
                                                     const RigidRegConfig& cfg);

}  // namespace ddm
