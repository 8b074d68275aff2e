#include "ddm/rigid.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace ddm {

void validate(const RigidTransform& T, double tol)
{
    if (!T.R.allFinite() || !T.t.allFinite()) throw InvalidInput("rigid transform has non-finite entries");
    if ((T.R.transpose() * T.R - Mat3::Identity()).cwiseAbs().maxCoeff() > tol)
        throw InvalidInput("rotation is not orthonormal");
    if (std::abs(T.R.determinant() - 1.0) > tol) throw InvalidInput("rotation determinant is not +1");
}

Mat3 skew(const Vec3& v)
{
    Mat3 S;
    S << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return S;
}

Mat3 so3_exp(const Vec3& omega)
{
    const double theta2 = omega.squaredNorm();
    const Mat3 W = skew(omega);
    if (theta2 == 0.0) return Mat3::Identity();
    double a, b;
    if (theta2 < 1e-8) {
        a = 1.0 - theta2 / 6.0;
        b = 0.5 - theta2 / 24.0;
    } else {
        const double theta = std::sqrt(theta2);
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / theta2;
    }
    return Mat3::Identity() + a * W + b * W * W;
}

Vec3 so3_log(const Mat3& R)
{
    const double c = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
    const Vec3 v(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    // |v| = 2 sin(theta); atan2 keeps full precision near 0 and pi where acos does not.
    const double theta = std::atan2(0.5 * v.norm(), c);
    if (theta < 1e-6) {
        // sin(theta)/theta ~ 1 - theta^2/6
        return 0.5 * (1.0 + theta * theta / 6.0) * v;
    }
    if (std::numbers::pi - theta < 1e-6) {
        // Near pi the antisymmetric part vanishes; take the axis from the
        // symmetric part: sym(R) = cos(theta) I + (1 - cos(theta)) a a^T.
        const Mat3 B = (0.5 * (R + R.transpose()) - c * Mat3::Identity()) / (1.0 - c);
        int k;
        B.diagonal().maxCoeff(&k);
        Vec3 axis = B.col(k) / std::sqrt(std::max(B(k, k), 1e-300));
        axis.normalize();
        // Keep the sign consistent with the residual antisymmetric part.
        if (axis.dot(v) < 0.0) axis = -axis;
        return theta * axis;
    }
    return theta / (2.0 * std::sin(theta)) * v;
}

Mat3 so3_right_jacobian(const Vec3& omega)
{
    const double theta2 = omega.squaredNorm();
    const Mat3 W = skew(omega);
    double a, b;
    if (theta2 < 1e-8) {
        a = 0.5 - theta2 / 24.0;
        b = 1.0 / 6.0 - theta2 / 120.0;
    } else {
        const double theta = std::sqrt(theta2);
        a = (1.0 - std::cos(theta)) / theta2;
        b = (theta - std::sin(theta)) / (theta2 * theta);
    }
    return Mat3::Identity() - a * W + b * W * W;
}

Mat3 rotate_point_jacobian(const Vec3& omega, const Vec3& p)
{
    return -so3_exp(omega) * skew(p) * so3_right_jacobian(omega);
}

PointCloud apply_rigid(const PointCloud& cloud, const RigidTransform& T)
{
    PointCloud out;
    out.points.reserve(cloud.size());
    for (const auto& p : cloud.points) out.points.push_back(T.apply(p));
    return out;
}

RigidRegConfig default_rigid_config()
{
    RigidRegConfig cfg;
    cfg.metric.beta = 20.0;  // rigid registration settings: beta = 20
    cfg.metric.ddf.K = 5;    // K = 5
    cfg.refgen.sigma = 0.05; // sigma = 0.05
    cfg.refgen.M = 0;        // M = 10x the number of points
    cfg.optim.algorithm = Algorithm::Adam;
    cfg.optim.learning_rate = 0.02;  // Adam, lr 0.02
    cfg.optim.iterations = 200;      // 200 iterations
    // Not fixed by the rigid settings: decay the step so Adam settles below the
    // success thresholds, and weight terms by s without differentiating it.
    cfg.optim.schedule = Schedule::Cosine;
    cfg.optim.final_lr_fraction = 0.01;
    cfg.metric.detach_confidence = true;
    return cfg;
}

RigidObjective::RigidObjective(const PointCloud& src, const PointCloud& tgt, ReferencePointSet refs,
                               MetricConfig metric)
    : src_(src), refs_(std::move(refs)), metric_(metric)
{
    validate(src_);
    const DdfField target(tgt, metric_.ddf);
    if (static_cast<std::size_t>(metric_.ddf.K) > src_.size())
        throw InvalidInput("rigid registration: K exceeds the source cloud size");
    target_values_ = target.evaluate_all(refs_.points);
}

RigidTransform RigidObjective::to_transform(const Eigen::VectorXd& x)
{
    return {so3_exp(x.head<3>()), x.tail<3>()};
}

Eigen::VectorXd RigidObjective::to_params(const RigidTransform& T)
{
    Eigen::VectorXd x(6);
    x.head<3>() = so3_log(T.R);
    x.tail<3>() = T.t;
    return x;
}

double RigidObjective::value(const Eigen::VectorXd& x) const
{
    return ddm_against(target_values_, apply_rigid(src_, to_transform(x)), refs_, metric_).value;
}

double RigidObjective::operator()(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const
{
    const Vec3 omega = x.head<3>();
    const RigidTransform T = to_transform(x);
    auto [val, g] = ddm_grad_against(target_values_, apply_rigid(src_, T), refs_, metric_);
    // d(R p)/d omega = -R [p]x J_r(omega); accumulate J_r at the end.
    Vec3 g_rot = Vec3::Zero();
    Vec3 g_t = Vec3::Zero();
    for (std::size_t i = 0; i < src_.size(); ++i) {
        g_t += g[i];
        g_rot += src_.points[i].cross(T.R.transpose() * g[i]);
    }
    // g_omega = J_r^T * sum_i (-R [p]x)^T g = J_r^T * sum_i [p]x R^T g = J_r^T * sum_i p x (R^T g)
    grad.resize(6);
    grad.head<3>() = so3_right_jacobian(omega).transpose() * g_rot;
    grad.tail<3>() = g_t;
    return val.value;
}

std::pair<RigidTransform, OptimTrace> register_rigid(const PointCloud& src, const PointCloud& tgt,
                                                     const RigidRegConfig& cfg)
{
    validate(src);
    validate(tgt);
    validate(cfg.init, 1e-6);
    if (static_cast<std::size_t>(cfg.metric.ddf.K) > src.size() ||
        static_cast<std::size_t>(cfg.metric.ddf.K) > tgt.size())
        throw InvalidInput("rigid registration: both clouds need at least K points");
    RefGenConfig rg = cfg.refgen;
    rg.sources = RefSources::FixedOnly;
    if (rg.M == 0) rg.M = 10 * tgt.size();
    // Reference points come from the target, which never moves.
    RigidObjective objective(src, tgt, generate_reference_points(tgt, rg), cfg.metric);
    OptimTrace trace = optimize(std::cref(objective), RigidObjective::to_params(cfg.init), cfg.optim);
    RigidTransform T = RigidObjective::to_transform(trace.x);
    return {T, std::move(trace)};
}

}  // namespace ddm
