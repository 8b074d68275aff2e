#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ddm/core.hpp"

namespace ddm {

enum class Algorithm { GD, Momentum, Adam };

/// Learning-rate schedule over the fixed iteration budget.
enum class Schedule { Constant, Cosine };

struct OptimConfig {
    Algorithm algorithm = Algorithm::Adam;
    double learning_rate = 0.02;
    int iterations = 200;
    double beta1 = 0.9;  ///< Adam first moment, or heavy-ball coefficient for Momentum
    double beta2 = 0.999;
    double eps = 1e-8;
    std::optional<double> grad_clip;  ///< global-norm clip
    int log_every = 1;
    Schedule schedule = Schedule::Constant;
    double final_lr_fraction = 1.0;  ///< lr multiplier reached at the last step (Cosine only)
};

struct TraceEntry {
    int iteration = 0;
    double value = 0.0;
    double grad_norm = 0.0;
};

struct OptimTrace {
    std::vector<TraceEntry> entries;
    Eigen::VectorXd x;
    double final_value = 0.0;
};

/// Returns the objective at x and writes its gradient into grad (pre-sized to x).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

/// Thrown when the objective or its gradient turns non-finite; carries the
/// trace up to the failing iteration.
class OptimizationAborted : public NumericalError {
public:
    OptimizationAborted(const std::string& what, OptimTrace trace)
        : NumericalError(what), trace_(std::move(trace))
    {
    }
    const OptimTrace& trace() const { return trace_; }

private:
    OptimTrace trace_;
};

void validate(const OptimConfig& cfg);

/// Runs exactly cfg.iterations first-order steps from x0.
OptimTrace optimize(const Objective& objective, Eigen::VectorXd x0, const OptimConfig& cfg);

}  // namespace ddm
