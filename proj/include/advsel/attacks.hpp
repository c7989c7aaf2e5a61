#ifndef ADVSEL_ATTACKS_HPP
#define ADVSEL_ATTACKS_HPP

#include <optional>
#include <vector>

#include "advsel/model.hpp"
#include "advsel/rng.hpp"

namespace advsel {

/// l_inf attack parameters. Defaults are the evaluation setting used
/// throughout: epsilon 8/255, alpha 0.01, 20 iterations, inputs in [0,1].
struct AttackConfig {
    double epsilon = 8.0 / 255.0;
    double alpha = 0.01;
    std::size_t steps = 20;
    bool random_start = false;
    double clip_min = 0.0;
    double clip_max = 1.0;

    void validate() const;
    AttackConfig with_epsilon(double eps) const {
        AttackConfig c = *this;
        c.epsilon = eps;
        return c;
    }
};

/// Strictly increasing, non-negative candidate budgets for the minimum-eps
/// search.
struct EpsilonGrid {
    std::vector<double> values;

    EpsilonGrid() = default;
    explicit EpsilonGrid(std::vector<double> v);

    bool empty() const { return values.empty(); }
};

/// Single signed-gradient step: clip(x + eps * sign(grad_x L)), sign(0) = 0.
/// The result stays inside the eps-ball of x and inside the clip range.
Matrix fgsm(const Model& model, const Matrix& inputs, const std::vector<int>& labels,
            double epsilon, double clip_min = 0.0, double clip_max = 1.0);

/// Iterative projected attack: alpha-sized signed steps on the current
/// iterate, each followed by projection onto the eps-ball around the original
/// input and the clip range. With random_start the first iterate is drawn
/// uniformly from the ball via the supplied generator; rng is untouched
/// otherwise.
Matrix pgd(const Model& model, const Matrix& inputs, const std::vector<int>& labels,
           const AttackConfig& cfg, Rng& rng);

/// Deterministic pgd convenience for callers without a random-start stream.
Matrix pgd(const Model& model, const Matrix& inputs, const std::vector<int>& labels,
           const AttackConfig& cfg);

/// Scans the grid in increasing order and returns the first budget whose
/// deterministic pgd flips the model's clean prediction on this sample;
/// nullopt if none does. Samples the model already misclassifies report the
/// first grid value.
std::optional<double> min_adversarial_eps(const Model& model, const Matrix& input_row,
                                          int label, const EpsilonGrid& grid,
                                          const AttackConfig& cfg_template);

} // namespace advsel

#endif
