#include "ddm/metric.hpp"

#include <cmath>

#include "ddm/parallel.hpp"

namespace ddm {

namespace {

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double reduce_terms(const std::vector<PointTerm>& terms, Reduction reduction)
{
    double sum = 0.0;
    for (const auto& t : terms) sum += t.s * t.d;
    if (reduction == Reduction::Mean && !terms.empty()) sum /= static_cast<double>(terms.size());
    return sum;
}

void check_refs(const ReferencePointSet& refs)
{
    if (refs.points.empty()) throw InvalidInput("reference point set is empty");
}

}  // namespace

double ddf_l1(const DdfSample& a, const DdfSample& b, bool distance_only)
{
    double d = std::abs(a.f - b.f);
    if (!distance_only) d += std::abs(a.h.x() - b.h.x()) + std::abs(a.h.y() - b.h.y()) + std::abs(a.h.z() - b.h.z());
    return d;
}

MetricValue ddm_against(const std::vector<DdfSample>& fixed_values, const Surface& moving,
                        const ReferencePointSet& refs, const MetricConfig& cfg, bool keep_per_point)
{
    check_refs(refs);
    if (fixed_values.size() != refs.size()) throw InvalidInput("fixed DDF values do not match the reference set");
    const DdfField field(moving, cfg.ddf);
    std::vector<PointTerm> terms(refs.size());
    parallel_for(refs.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const double d = ddf_l1(fixed_values[i], field.evaluate(refs.points[i]), cfg.ddf.distance_only);
            terms[i] = {d, std::exp(-cfg.beta * d)};
        }
    });
    MetricValue out;
    out.value = reduce_terms(terms, cfg.reduction);
    if (keep_per_point) out.per_point = std::move(terms);
    return out;
}

MetricValue ddm(const Surface& s1, const Surface& s2, const ReferencePointSet& refs, const MetricConfig& cfg,
                bool keep_per_point)
{
    check_refs(refs);
    const DdfField f1(s1, cfg.ddf);
    return ddm_against(f1.evaluate_all(refs.points), s2, refs, cfg, keep_per_point);
}

std::pair<MetricValue, std::vector<Vec3>> ddm_grad_against(const std::vector<DdfSample>& fixed_values,
                                                           const Surface& moving, const ReferencePointSet& refs,
                                                           const MetricConfig& cfg)
{
    check_refs(refs);
    if (fixed_values.size() != refs.size()) throw InvalidInput("fixed DDF values do not match the reference set");
    const DdfField field(moving, cfg.ddf);
    const std::size_t m = refs.size();
    const double scale = cfg.reduction == Reduction::Mean ? 1.0 / static_cast<double>(m) : 1.0;

    // Per-reference contributions land in fixed slots and are scattered serially,
    // so the summation order never depends on the thread count.
    const std::size_t slots = is_mesh(moving) ? 3 : static_cast<std::size_t>(cfg.ddf.K);
    std::vector<PointTerm> terms(m);
    std::vector<int> support(m * slots, -1);
    std::vector<Vec3> contrib(m * slots);
    parallel_for(m, [&](std::size_t b, std::size_t e) {
        DdfGradient local;
        for (std::size_t i = b; i < e; ++i) {
            const DdfSample mv = field.evaluate(refs.points[i], local);
            const DdfSample& fx = fixed_values[i];
            const double d = ddf_l1(fx, mv, cfg.ddf.distance_only);
            const double s = std::exp(-cfg.beta * d);
            terms[i] = {d, s};
            // d/dd [d exp(-beta d)] = exp(-beta d) (1 - beta d)
            const double dz = cfg.detach_confidence ? scale * s : scale * s * (1.0 - cfg.beta * d);
            if (dz == 0.0) continue;
            const double df_sign = sgn(mv.f - fx.f);
            Vec3 dh_sign = Vec3::Zero();
            if (!cfg.ddf.distance_only)
                dh_sign = Vec3(sgn(mv.h.x() - fx.h.x()), sgn(mv.h.y() - fx.h.y()), sgn(mv.h.z() - fx.h.z()));
            for (std::size_t k = 0; k < local.support.size(); ++k) {
                support[i * slots + k] = local.support[k];
                contrib[i * slots + k] = dz * (df_sign * local.df[k].transpose() + local.dh[k].transpose() * dh_sign);
            }
        }
    });

    std::vector<Vec3> grad(element_count(moving), Vec3::Zero());
    for (std::size_t j = 0; j < m * slots; ++j)
        if (support[j] >= 0) grad[support[j]] += contrib[j];
    MetricValue out;
    out.value = reduce_terms(terms, cfg.reduction);
    return {std::move(out), std::move(grad)};
}

std::pair<MetricValue, std::vector<Vec3>> ddm_grad(const Surface& fixed, const Surface& moving,
                                                   const ReferencePointSet& refs, const MetricConfig& cfg)
{
    check_refs(refs);
    const DdfField f1(fixed, cfg.ddf);
    return ddm_grad_against(f1.evaluate_all(refs.points), moving, refs, cfg);
}

double chamfer(const PointCloud& p1, const PointCloud& p2)
{
    if (p1.empty() || p2.empty()) throw InvalidInput("chamfer: empty point cloud");
    const KdTree t1(p1.points), t2(p2.points);
    double sum = 0.0;
    for (const auto& p : p1.points) sum += t2.nearest(p).distance;
    for (const auto& p : p2.points) sum += t1.nearest(p).distance;
    return sum;
}

double p2f(const PointCloud& samples, const TriangleMesh& target)
{
    const MeshBvh bvh(target);
    double sum = 0.0;
    for (const auto& p : samples.points) sum += (bvh.closest_point(target, p).point - p).norm();
    return sum;
}

double p2f_symmetric(const PointCloud& samples_a, const TriangleMesh& a, const PointCloud& samples_b,
                     const TriangleMesh& b)
{
    return p2f(samples_a, b) + p2f(samples_b, a);
}

}  // namespace ddm
