#pragma once

#include <utility>
#include <vector>

#include "ddm/ddf.hpp"
#include "ddm/metric.hpp"
#include "ddm/optim.hpp"

namespace ddm {

struct FlowField {
    std::vector<Vec3> delta;
};

struct FlowConfig {
    MetricConfig metric{1.0, DdfConfig{5, false}, Reduction::Mean};
    RefGenConfig refgen{};
    OptimConfig optim{};
    double lambda_smooth = 100.0;
    int smooth_neighbors = 8;
    double adaptive_sigma_scale = 3.0;
};

/// Scene-flow defaults: K = 5, M = 81920, sigma = 3x nearest-point distance,
/// Adam lr 0.01 with cosine decay for 500 iterations, lambda = 100, K_s = 8.
FlowConfig default_flow_config();

/// K_s nearest neighbours of every source point, excluding the point itself.
std::vector<std::vector<int>> flow_neighbors(const PointCloud& src, int k);

/// Mean squared flow difference over each point's K_s neighbours, divided by 3.
double flow_smooth_reg(const std::vector<std::vector<int>>& neighbors, const FlowField& flow,
                       std::vector<Vec3>* grad = nullptr);
double flow_smooth_reg(const PointCloud& src, const FlowField& flow, int k);

class FlowObjective {
public:
    FlowObjective(const PointCloud& src, const PointCloud& tgt, ReferencePointSet refs, const FlowConfig& cfg);

    double operator()(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;

private:
    PointCloud src_;
    ReferencePointSet refs_;
    FlowConfig cfg_;
    std::vector<std::vector<int>> neighbors_;
    std::vector<DdfSample> target_values_;
};

std::pair<FlowField, OptimTrace> estimate_scene_flow(const PointCloud& src, const PointCloud& tgt,
                                                     const FlowConfig& cfg);

}  // namespace ddm
