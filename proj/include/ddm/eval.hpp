#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ddm/core.hpp"
#include "ddm/geom.hpp"

namespace ddm {

/// Named scalars plus optional threshold/recall curves.
struct EvalReport {
    std::string kind;
    std::map<std::string, double> scalars;
    std::map<std::string, std::vector<std::pair<double, double>>> curves;
    std::vector<std::string> notes;
};

/// Geodesic angle between two rotations, in degrees.
double rotation_error(const Mat3& R_hat, const Mat3& R_gt);
double translation_error(const Vec3& t_hat, const Vec3& t_gt);

struct RegistrationError {
    double re_deg = 0.0;
    double te = 0.0;
};

struct SuccessSummary {
    double success_rate = 0.0;
    double mean_re = 0.0;  ///< over successful results only
    double mean_te = 0.0;
    std::size_t successes = 0;
};

/// A result succeeds when RE < re_thresh and TE < te_thresh.
SuccessSummary success_rate(const std::vector<RegistrationError>& results, double re_thresh, double te_thresh);

/// Fraction of results with RE below each threshold (TE ignored), and vice versa.
std::vector<std::pair<double, double>> recall_curve_rotation(const std::vector<RegistrationError>& results,
                                                             const std::vector<double>& thresholds);
std::vector<std::pair<double, double>> recall_curve_translation(const std::vector<RegistrationError>& results,
                                                                const std::vector<double>& thresholds);

/// Root-mean-square per-vertex Euclidean error.
double vertex_rmse(const std::vector<Vec3>& v_hat, const std::vector<Vec3>& v_gt);
/// Mean per-vertex Euclidean error.
double v2v(const std::vector<Vec3>& v_hat, const std::vector<Vec3>& v_gt);

struct FlowMetrics {
    double epe = 0.0;
    double acc_strict = 0.0;  ///< EPE < 0.05 or relative < 5%
    double acc_relax = 0.0;   ///< EPE < 0.1 or relative < 10%
    double outliers = 0.0;    ///< EPE > 0.3 or relative > 10%
};

FlowMetrics flow_metrics(const std::vector<Vec3>& flow_hat, const std::vector<Vec3>& flow_gt);

struct FScore {
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
};

/// Precision/recall of nearest-neighbour distances strictly below `threshold`.
FScore fscore(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, double threshold);

/// Mean |<n_pred, n_gt>| of face normals over nearest sample pairs in both directions.
double normal_consistency(const TriangleMesh& pred, const TriangleMesh& gt, std::size_t samples, Rng& rng);

std::string to_json(const EvalReport& report, int indent = 2);
/// One `key = value` line per scalar; curves as `curve.<name>.<threshold> = recall`.
std::string to_text(const EvalReport& report);

}  // namespace ddm
