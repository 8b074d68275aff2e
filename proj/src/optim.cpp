#include "ddm/optim.hpp"

#include <cmath>
#include <numbers>

namespace ddm {

void validate(const OptimConfig& cfg)
{
    if (!(cfg.learning_rate > 0.0)) throw InvalidInput("optimizer: learning_rate must be > 0");
    if (cfg.iterations < 1) throw InvalidInput("optimizer: iterations must be >= 1");
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
        throw InvalidInput("optimizer: beta1 and beta2 must lie in [0, 1)");
    if (!(cfg.eps > 0.0)) throw InvalidInput("optimizer: eps must be > 0");
    if (cfg.grad_clip && !(*cfg.grad_clip > 0.0)) throw InvalidInput("optimizer: grad_clip must be > 0");
    if (!(cfg.final_lr_fraction > 0.0 && cfg.final_lr_fraction <= 1.0))
        throw InvalidInput("optimizer: final_lr_fraction must lie in (0, 1]");
}

namespace {

double scheduled_lr(const OptimConfig& cfg, int t)
{
    if (cfg.schedule == Schedule::Constant || cfg.iterations <= 1) return cfg.learning_rate;
    const double progress = static_cast<double>(t) / static_cast<double>(cfg.iterations - 1);
    const double lo = cfg.final_lr_fraction;
    return cfg.learning_rate * (lo + (1.0 - lo) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

}  // namespace

OptimTrace optimize(const Objective& objective, Eigen::VectorXd x0, const OptimConfig& cfg)
{
    validate(cfg);
    OptimTrace trace;
    Eigen::VectorXd x = std::move(x0);
    const Eigen::Index n = x.size();
    Eigen::VectorXd grad(n), m = Eigen::VectorXd::Zero(n), v = Eigen::VectorXd::Zero(n);
    const int log_every = std::max(1, cfg.log_every);

    auto evaluate = [&](int iteration) {
        grad.setZero();
        double value = 0.0;
        try {
            value = objective(x, grad);
        } catch (const InvalidInput& e) {
            // Past the starting point only the iterate has changed, so a
            // rejected evaluation means the iterate itself has blown up.
            if (iteration == 0) throw;
            trace.x = x;
            throw OptimizationAborted("objective rejected the iterate at iteration " + std::to_string(iteration) +
                                          ": " + e.what(),
                                      trace);
        }
        if (!std::isfinite(value) || !grad.allFinite() || grad.size() != n) {
            trace.x = x;
            throw OptimizationAborted("non-finite objective or gradient at iteration " + std::to_string(iteration),
                                      trace);
        }
        return value;
    };

    for (int t = 0; t < cfg.iterations; ++t) {
        const double value = evaluate(t);
        double gnorm = grad.norm();
        if (t % log_every == 0) trace.entries.push_back({t, value, gnorm});
        if (cfg.grad_clip && gnorm > *cfg.grad_clip) {
            grad *= *cfg.grad_clip / gnorm;
            gnorm = *cfg.grad_clip;
        }
        const double lr = scheduled_lr(cfg, t);
        switch (cfg.algorithm) {
        case Algorithm::GD:
            x -= lr * grad;
            break;
        case Algorithm::Momentum:
            m = cfg.beta1 * m + grad;
            x -= lr * m;
            break;
        case Algorithm::Adam: {
            const double step = static_cast<double>(t + 1);
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
            const double c1 = 1.0 - std::pow(cfg.beta1, step);
            const double c2 = 1.0 - std::pow(cfg.beta2, step);
            x.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
            break;
        }
        }
    }
    trace.final_value = evaluate(cfg.iterations);
    trace.entries.push_back({cfg.iterations, trace.final_value, grad.norm()});
    trace.x = std::move(x);
    return trace;
}

}  // namespace ddm
