#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "ddm/ddf.hpp"

namespace ddm {

enum class Reduction { Mean, Sum };

struct MetricConfig {
    double beta = 20.0;
    DdfConfig ddf;
    Reduction reduction = Reduction::Mean;
    /// Treat the confidence s as a constant weight in the gradient.
    bool detach_confidence = false;
};

struct PointTerm {
    double d = 0.0;  ///< L1 distance between the two DDF values
    double s = 1.0;  ///< confidence exp(-beta * d)
};

struct MetricValue {
    double value = 0.0;
    std::vector<PointTerm> per_point;  ///< filled only when requested
};

/// L1 distance between two DDF samples over [f | h], or |f1 - f2| when
/// distance_only is set.
double ddf_l1(const DdfSample& a, const DdfSample& b, bool distance_only);

/// Confidence-weighted reduction of per-reference-point DDF differences.
MetricValue ddm(const Surface& s1, const Surface& s2, const ReferencePointSet& refs, const MetricConfig& cfg,
                bool keep_per_point = false);

/// Same as ddm() with the first surface's DDF values already evaluated at `refs`.
MetricValue ddm_against(const std::vector<DdfSample>& fixed_values, const Surface& moving,
                        const ReferencePointSet& refs, const MetricConfig& cfg, bool keep_per_point = false);

/// Value plus dense gradient w.r.t. every point/vertex coordinate of `moving`.
std::pair<MetricValue, std::vector<Vec3>> ddm_grad(const Surface& fixed, const Surface& moving,
                                                   const ReferencePointSet& refs, const MetricConfig& cfg);

std::pair<MetricValue, std::vector<Vec3>> ddm_grad_against(const std::vector<DdfSample>& fixed_values,
                                                           const Surface& moving, const ReferencePointSet& refs,
                                                           const MetricConfig& cfg);

/// Symmetric Chamfer distance: summed nearest-neighbor Euclidean distances in both directions.
double chamfer(const PointCloud& p1, const PointCloud& p2);

/// Summed exact point-to-mesh distance of `samples` against `target`.
double p2f(const PointCloud& samples, const TriangleMesh& target);

/// p2f(samples_a, b) + p2f(samples_b, a).
double p2f_symmetric(const PointCloud& samples_a, const TriangleMesh& a, const PointCloud& samples_b,
                     const TriangleMesh& b);

}  // namespace ddm
