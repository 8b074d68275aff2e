#include "ddm/flow.hpp"

namespace ddm {

FlowConfig default_flow_config()
{
    FlowConfig cfg;
    cfg.metric.ddf.K = 5;             // K = 5
    cfg.refgen.M = 81920;             // M = 81920
    cfg.adaptive_sigma_scale = 3.0;   // sigma = 3x distance to the nearest point
    cfg.optim.algorithm = Algorithm::Adam;
    cfg.optim.learning_rate = 0.01;   // Adam, lr 0.01
    cfg.optim.iterations = 500;       // 500 iterations
    // Not fixed by the scene-flow settings. At lambda = 1 the smoothness
    // gradient is ~1e-3 of the data gradient on unit-scale clouds and points
    // stall independently; the decay lets Adam settle below 1e-3 EPE.
    cfg.lambda_smooth = 100.0;
    cfg.smooth_neighbors = 8;
    cfg.optim.schedule = Schedule::Cosine;
    cfg.optim.final_lr_fraction = 0.01;
    return cfg;
}

std::vector<std::vector<int>> flow_neighbors(const PointCloud& src, int k)
{
    if (k < 1) throw InvalidInput("flow smoothness: K_s must be >= 1");
    if (src.size() < static_cast<std::size_t>(k) + 1)
        throw InvalidInput("flow smoothness: source needs at least K_s + 1 points");
    const KdTree tree(src.points);
    std::vector<std::vector<int>> out(src.size());
    std::vector<Neighbor> nb;
    for (std::size_t i = 0; i < src.size(); ++i) {
        tree.knn(src.points[i], k + 1, nb);
        for (const auto& n : nb) {
            if (n.index == static_cast<int>(i)) continue;
            if (static_cast<int>(out[i].size()) < k) out[i].push_back(n.index);
        }
    }
    return out;
}

double flow_smooth_reg(const std::vector<std::vector<int>>& neighbors, const FlowField& flow,
                       std::vector<Vec3>* grad)
{
    const std::size_t n = flow.delta.size();
    if (neighbors.size() != n) throw InvalidInput("flow smoothness: neighbour lists do not match the flow");
    if (n == 0) return 0.0;
    const double ks = static_cast<double>(neighbors.front().size());
    const double scale = 1.0 / (3.0 * static_cast<double>(n) * ks);
    if (grad) grad->assign(n, Vec3::Zero());
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (int j : neighbors[i]) {
            const Vec3 e = flow.delta[i] - flow.delta[j];
            sum += e.squaredNorm();
            if (grad) {
                (*grad)[i] += 2.0 * scale * e;
                (*grad)[j] -= 2.0 * scale * e;
            }
        }
    }
    return scale * sum;
}

double flow_smooth_reg(const PointCloud& src, const FlowField& flow, int k)
{
    if (flow.delta.size() != src.size()) throw InvalidInput("flow does not match the source cloud");
    return flow_smooth_reg(flow_neighbors(src, k), flow);
}

FlowObjective::FlowObjective(const PointCloud& src, const PointCloud& tgt, ReferencePointSet refs,
                             const FlowConfig& cfg)
    : src_(src), refs_(std::move(refs)), cfg_(cfg), neighbors_(flow_neighbors(src, cfg.smooth_neighbors))
{
    target_values_ = DdfField(tgt, cfg_.metric.ddf).evaluate_all(refs_.points);
}

double FlowObjective::operator()(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const
{
    FlowField flow;
    flow.delta.resize(src_.size());
    PointCloud moved;
    moved.points.resize(src_.size());
    for (std::size_t i = 0; i < src_.size(); ++i) {
        flow.delta[i] = x.segment<3>(3 * static_cast<Eigen::Index>(i));
        moved.points[i] = src_.points[i] + flow.delta[i];
    }
    auto [val, g] = ddm_grad_against(target_values_, moved, refs_, cfg_.metric);
    std::vector<Vec3> g_smooth;
    const double smooth = flow_smooth_reg(neighbors_, flow, &g_smooth);
    grad.resize(x.size());
    for (std::size_t i = 0; i < src_.size(); ++i)
        grad.segment<3>(3 * static_cast<Eigen::Index>(i)) = g[i] + cfg_.lambda_smooth * g_smooth[i];
    return val.value + cfg_.lambda_smooth * smooth;
}

std::pair<FlowField, OptimTrace> estimate_scene_flow(const PointCloud& src, const PointCloud& tgt,
                                                     const FlowConfig& cfg)
{
    validate(src);
    validate(tgt);
    if (cfg.lambda_smooth < 0.0) throw InvalidInput("scene flow: lambda must be >= 0");
    RefGenConfig rg = cfg.refgen;
    rg.sources = RefSources::FixedOnly;
    rg.adaptive_sigma_scale = cfg.adaptive_sigma_scale;
    FlowObjective objective(src, tgt, generate_reference_points(tgt, rg), cfg);
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(3 * static_cast<Eigen::Index>(src.size()));
    OptimTrace trace = optimize(std::cref(objective), x0, cfg.optim);
    FlowField flow;
    flow.delta.resize(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) flow.delta[i] = trace.x.segment<3>(3 * static_cast<Eigen::Index>(i));
    return {std::move(flow), std::move(trace)};
}

}  // namespace ddm
