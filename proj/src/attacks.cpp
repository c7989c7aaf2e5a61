#include "advsel/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "advsel/errors.hpp"

namespace advsel {

namespace {

double sign_or_zero(double v) {
    if (v > 0.0) return 1.0;
    if (v < 0.0) return -1.0;
    return 0.0;
}

void check_inputs_in_range(const Matrix& inputs, double clip_min, double clip_max) {
    for (double v : inputs.data) {
        if (!(v >= clip_min && v <= clip_max)) {
            throw value_error("attack: input outside clip range [" + std::to_string(clip_min) +
                              ", " + std::to_string(clip_max) + "]");
        }
    }
}

/// Largest hi with hi - x <= eps under double arithmetic. Plain x + eps can
/// round up so that (x + eps) - x exceeds eps by an ulp, which would break
/// the exact feasibility checks downstream; one nextafter step repairs it.
double ball_hi(double x, double eps) {
    double hi = x + eps;
    while (hi - x > eps) hi = std::nextafter(hi, -std::numeric_limits<double>::infinity());
    return hi;
}

double ball_lo(double x, double eps) {
    double lo = x - eps;
    while (x - lo > eps) lo = std::nextafter(lo, std::numeric_limits<double>::infinity());
    return lo;
}

/// Clamp onto the intersection of the eps-ball around origin and the clip
/// range, elementwise.
void project(Matrix& x, const Matrix& origin, double epsilon, double clip_min, double clip_max) {
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        double lo = std::max(ball_lo(origin.data[i], epsilon), clip_min);
        double hi = std::min(ball_hi(origin.data[i], epsilon), clip_max);
        x.data[i] = std::clamp(x.data[i], lo, hi);
    }
}

} // namespace

void AttackConfig::validate() const {
    if (epsilon < 0.0) throw value_error("attack config: epsilon must be >= 0");
    if (!(alpha > 0.0)) throw value_error("attack config: alpha must be > 0");
    if (steps < 1) throw value_error("attack config: steps must be >= 1");
    if (!(clip_min < clip_max)) throw value_error("attack config: clip_min must be < clip_max");
}

EpsilonGrid::EpsilonGrid(std::vector<double> v) : values(std::move(v)) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] < 0.0) throw value_error("epsilon grid: negative value");
        if (i > 0 && values[i] <= values[i - 1]) {
            throw value_error("epsilon grid: values must be strictly increasing");
        }
    }
}

Matrix fgsm(const Model& model, const Matrix& inputs, const std::vector<int>& labels,
            double epsilon, double clip_min, double clip_max) {
    if (epsilon < 0.0) throw value_error("fgsm: epsilon must be >= 0");
    check_inputs_in_range(inputs, clip_min, clip_max);
    InputGradResult g = loss_and_input_grad(model, inputs, labels);
    Matrix out = inputs;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] += epsilon * sign_or_zero(g.grad_inputs.data[i]);
    }
    project(out, inputs, epsilon, clip_min, clip_max);
    out.ensure_finite("fgsm");
    return out;
}

Matrix pgd(const Model& model, const Matrix& inputs, const std::vector<int>& labels,
           const AttackConfig& cfg, Rng& rng) {
    cfg.validate();
    check_inputs_in_range(inputs, cfg.clip_min, cfg.clip_max);

    Matrix x = inputs;
    if (cfg.random_start) {
        for (double& v : x.data) {
            v += rng.uniform(-cfg.epsilon, cfg.epsilon);
        }
        project(x, inputs, cfg.epsilon, cfg.clip_min, cfg.clip_max);
    }
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        InputGradResult g = loss_and_input_grad(model, x, labels);
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            x.data[i] += cfg.alpha * sign_or_zero(g.grad_inputs.data[i]);
        }
        project(x, inputs, cfg.epsilon, cfg.clip_min, cfg.clip_max);
    }
    x.ensure_finite("pgd");
    return x;
}

Matrix pgd(const Model& model, const Matrix& inputs, const std::vector<int>& labels,
           const AttackConfig& cfg) {
    if (cfg.random_start) {
        throw value_error("pgd: random_start requires an explicit rng");
    }
    Rng unused(0);
    return pgd(model, inputs, labels, cfg, unused);
}

std::optional<double> min_adversarial_eps(const Model& model, const Matrix& input_row, int label,
                                          const EpsilonGrid& grid,
                                          const AttackConfig& cfg_template) {
    if (grid.empty()) throw value_error("min_adversarial_eps: empty grid");
    if (input_row.rows != 1) {
        throw dimension_error("min_adversarial_eps: expected a single row");
    }
    int clean_pred = predict_classes(forward(model, input_row))[0];
    if (clean_pred != label) {
        return grid.values.front();
    }
    AttackConfig cfg = cfg_template;
    cfg.random_start = false; // deterministic scan
    std::vector<int> labels{label};
    for (double eps : grid.values) {
        Matrix attacked = pgd(model, input_row, labels, cfg.with_epsilon(eps));
        if (predict_classes(forward(model, attacked))[0] != clean_pred) {
            return eps;
        }
    }
    return std::nullopt;
}

} // namespace advsel
