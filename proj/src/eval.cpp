#include "ddm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace ddm {

double rotation_error(const Mat3& R_hat, const Mat3& R_gt)
{
    const double c = std::clamp(((R_gt.transpose() * R_hat).trace() - 1.0) / 2.0, -1.0, 1.0);
    return std::acos(c) * 180.0 / std::numbers::pi;
}

double translation_error(const Vec3& t_hat, const Vec3& t_gt) { return (t_hat - t_gt).norm(); }

SuccessSummary success_rate(const std::vector<RegistrationError>& results, double re_thresh, double te_thresh)
{
    if (results.empty()) throw InvalidInput("success_rate: no results");
    SuccessSummary s;
    for (const auto& r : results) {
        if (r.re_deg < re_thresh && r.te < te_thresh) {
            ++s.successes;
            s.mean_re += r.re_deg;
            s.mean_te += r.te;
        }
    }
    s.success_rate = static_cast<double>(s.successes) / static_cast<double>(results.size());
    if (s.successes > 0) {
        s.mean_re /= static_cast<double>(s.successes);
        s.mean_te /= static_cast<double>(s.successes);
    }
    return s;
}

namespace {

template <typename Get>
std::vector<std::pair<double, double>> recall(const std::vector<RegistrationError>& results,
                                              const std::vector<double>& thresholds, Get get)
{
    if (results.empty()) throw InvalidInput("recall_curve: no results");
    std::vector<std::pair<double, double>> out;
    for (double t : thresholds) {
        const auto hits = std::count_if(results.begin(), results.end(), [&](const auto& r) { return get(r) < t; });
        out.emplace_back(t, static_cast<double>(hits) / static_cast<double>(results.size()));
    }
    return out;
}

void check_same_size(std::size_t a, std::size_t b, const char* what)
{
    if (a != b) throw InvalidInput(std::string(what) + ": size mismatch");
    if (a == 0) throw InvalidInput(std::string(what) + ": empty input");
}

}  // namespace

std::vector<std::pair<double, double>> recall_curve_rotation(const std::vector<RegistrationError>& results,
                                                             const std::vector<double>& thresholds)
{
    return recall(results, thresholds, [](const RegistrationError& r) { return r.re_deg; });
}

std::vector<std::pair<double, double>> recall_curve_translation(const std::vector<RegistrationError>& results,
                                                                const std::vector<double>& thresholds)
{
    return recall(results, thresholds, [](const RegistrationError& r) { return r.te; });
}

double vertex_rmse(const std::vector<Vec3>& v_hat, const std::vector<Vec3>& v_gt)
{
    check_same_size(v_hat.size(), v_gt.size(), "vertex_rmse");
    double sum = 0.0;
    for (std::size_t i = 0; i < v_hat.size(); ++i) sum += (v_hat[i] - v_gt[i]).squaredNorm();
    return std::sqrt(sum / static_cast<double>(v_hat.size()));
}

double v2v(const std::vector<Vec3>& v_hat, const std::vector<Vec3>& v_gt)
{
    check_same_size(v_hat.size(), v_gt.size(), "v2v");
    double sum = 0.0;
    for (std::size_t i = 0; i < v_hat.size(); ++i) sum += (v_hat[i] - v_gt[i]).norm();
    return sum / static_cast<double>(v_hat.size());
}

FlowMetrics flow_metrics(const std::vector<Vec3>& flow_hat, const std::vector<Vec3>& flow_gt)
{
    check_same_size(flow_hat.size(), flow_gt.size(), "flow_metrics");
    FlowMetrics m;
    const double n = static_cast<double>(flow_hat.size());
    for (std::size_t i = 0; i < flow_hat.size(); ++i) {
        const double err = (flow_hat[i] - flow_gt[i]).norm();
        const double gt = flow_gt[i].norm();
        const double rel = gt > 0.0 ? err / gt : (err > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
        m.epe += err;
        if (err < 0.05 || rel < 0.05) m.acc_strict += 1.0;
        if (err < 0.1 || rel < 0.1) m.acc_relax += 1.0;
        if (err > 0.3 || rel > 0.1) m.outliers += 1.0;
    }
    m.epe /= n;
    m.acc_strict /= n;
    m.acc_relax /= n;
    m.outliers /= n;
    return m;
}

FScore fscore(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, double threshold)
{
    if (pred.empty() || gt.empty()) throw InvalidInput("fscore: empty sample set");
    const KdTree tp(pred), tg(gt);
    FScore s;
    for (const auto& p : pred) s.precision += tg.nearest(p).distance < threshold ? 1.0 : 0.0;
    for (const auto& g : gt) s.recall += tp.nearest(g).distance < threshold ? 1.0 : 0.0;
    s.precision /= static_cast<double>(pred.size());
    s.recall /= static_cast<double>(gt.size());
    s.f = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

double normal_consistency(const TriangleMesh& pred, const TriangleMesh& gt, std::size_t samples, Rng& rng)
{
    const MeshSamples sp = sample_mesh_surface(pred, samples, rng);
    const MeshSamples sg = sample_mesh_surface(gt, samples, rng);
    const KdTree tp(sp.points), tg(sg.points);
    double sum = 0.0;
    for (std::size_t i = 0; i < sp.points.size(); ++i) {
        const int j = tg.nearest(sp.points[i]).index;
        sum += std::abs(face_normal(pred, sp.faces[i]).dot(face_normal(gt, sg.faces[j])));
    }
    for (std::size_t i = 0; i < sg.points.size(); ++i) {
        const int j = tp.nearest(sg.points[i]).index;
        sum += std::abs(face_normal(gt, sg.faces[i]).dot(face_normal(pred, sp.faces[j])));
    }
    return sum / static_cast<double>(sp.points.size() + sg.points.size());
}

std::string to_json(const EvalReport& report, int indent)
{
    nlohmann::ordered_json j;
    j["kind"] = report.kind;
    if (!report.notes.empty()) j["notes"] = report.notes;
    j["metrics"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : report.scalars) j["metrics"][k] = v;
    if (!report.curves.empty()) {
        j["curves"] = nlohmann::ordered_json::object();
        for (const auto& [name, pts] : report.curves) {
            auto arr = nlohmann::ordered_json::array();
            for (const auto& [t, r] : pts) arr.push_back({{"threshold", t}, {"recall", r}});
            j["curves"][name] = arr;
        }
    }
    return j.dump(indent);
}

std::string to_text(const EvalReport& report)
{
    std::ostringstream os;
    os << std::setprecision(17);
    for (const auto& note : report.notes) os << "# " << note << '\n';
    os << "kind = " << report.kind << '\n';
    for (const auto& [k, v] : report.scalars) os << k << " = " << v << '\n';
    for (const auto& [name, pts] : report.curves)
        for (const auto& [t, r] : pts) os << "curve." << name << '.' << t << " = " << r << '\n';
    return os.str();
}

}  // namespace ddm
