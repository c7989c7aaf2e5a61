#ifndef ADVSEL_MODEL_HPP
#define ADVSEL_MODEL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "advsel/matrix.hpp"
#include "advsel/rng.hpp"

namespace advsel {

enum class Activation : std::uint8_t { relu = 0 };

/// Fully-connected feed-forward classifier. layer_dims is
/// {input dim, hidden dims..., class count}; weights[l] maps layer_dims[l]
/// to layer_dims[l+1] (stored input-major so a batch row left-multiplies it),
/// biases[l] has layer_dims[l+1] entries. Hidden layers use ReLU; the last
/// layer emits raw logits. Softmax is never materialized outside the loss.
struct Model {
    std::vector<std::size_t> layer_dims;
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
    Activation hidden_activation = Activation::relu;

    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t class_count() const { return layer_dims.back(); }
    std::size_t layer_count() const { return weights.size(); }
    std::size_t parameter_count() const;

    /// Throws dimension_error if dims/weights/biases are inconsistent.
    void validate() const;

    bool equals_bitwise(const Model& other) const;
};

/// Per-layer parameter gradients, shapes mirroring the Model that produced
/// them.
struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    double max_abs() const;
};

/// Glorot-uniform weights, zero biases, drawn from an explicit seeded stream.
Model init_model(const std::vector<std::size_t>& layer_dims, std::uint64_t seed);

/// Batch forward pass; returns pre-softmax logits [b x C].
Matrix forward(const Model& model, const Matrix& inputs);

/// argmax per logits row, ties broken by lowest class index.
std::vector<int> predict_classes(const Matrix& logits);

/// Per-sample softmax cross-entropy of precomputed logits,
/// logsumexp(z) - z[y], evaluated with max-subtraction.
std::vector<double> cross_entropy(const Matrix& logits, const std::vector<int>& labels);

/// Per-sample loss plus the gradient of each sample's own loss with respect
/// to its input row.
struct InputGradResult {
    std::vector<double> losses;
    Matrix grad_inputs;
};
InputGradResult loss_and_input_grad(const Model& model, const Matrix& inputs,
                                    const std::vector<int>& labels);

/// Selection-masked parameter gradient: (1/k) * sum_i w_i * grad_theta L_i
/// with k = sum w_i. Weights must be 0 or 1; an all-zero mask throws
/// empty_selection_error. Samples with weight 0 are skipped outright, so
/// their features cannot influence the result even at the bit level.
Gradients param_grad(const Model& model, const Matrix& inputs,
                     const std::vector<int>& labels,
                     const std::vector<double>& weights_per_sample);

/// theta <- theta - mu * grad.
Model sgd_step(const Model& model, const Gradients& grads, double mu);

/// Central-difference estimate of the mean-loss parameter gradient. Test and
/// gradcheck oracle; deliberately routed through forward() only.
Gradients finite_diff_param_grad(const Model& model, const Matrix& inputs,
                                 const std::vector<int>& labels, double step);

/// Central-difference estimate of per-sample input gradients, companion
/// oracle to loss_and_input_grad.
Matrix finite_diff_input_grad(const Model& model, const Matrix& inputs,
                              const std::vector<int>& labels, double step);

/// Worst floored relative error between two gradient sets, the gradcheck
/// metric: |a - n| / max(|a|, |n|, floor).
struct GradCompareEntry {
    std::size_t layer = 0;
    bool is_bias = false;
    std::size_t row = 0;
    std::size_t col = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};
struct GradCompareReport {
    double max_rel_err = 0.0;
    std::vector<GradCompareEntry> per_layer_worst; // one entry per layer
};
GradCompareReport compare_gradients(const Model& model, const Gradients& analytic,
                                    const Gradients& numeric, double denom_floor);

/// Binary checkpoint; save/load round-trips are bit-exact. Format documented
/// in the README.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

} // namespace advsel

#endif
