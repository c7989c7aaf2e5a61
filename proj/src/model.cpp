#include "advsel/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace advsel {

namespace {

constexpr char kModelMagic[8] = {'A', 'D', 'V', 'S', 'E', 'L', 'M', '1'};

void relu_inplace(Matrix& m) {
    for (double& v : m.data) {
        if (v < 0.0) v = 0.0;
    }
}

/// Activations and pre-activations kept for the backward pass.
/// layer_inputs[l] feeds weights[l]; preacts[l] is the affine output of
/// layer l, so preacts.back() holds the logits.
struct ForwardTrace {
    std::vector<Matrix> layer_inputs;
    std::vector<Matrix> preacts;
};

Matrix run_forward(const Model& model, const Matrix& inputs, ForwardTrace* trace) {
    model.validate();
    Matrix current = inputs;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        if (current.cols != model.layer_dims[l]) {
            throw dimension_error("forward: layer " + std::to_string(l) + " expects input dim " +
                                  std::to_string(model.layer_dims[l]) + ", got " +
                                  std::to_string(current.cols));
        }
        if (trace) trace->layer_inputs.push_back(current);
        Matrix z = matmul(current, model.weights[l]);
        const std::vector<double>& bias = model.biases[l];
        for (std::size_t i = 0; i < z.rows; ++i) {
            double* zrow = z.row(i);
            for (std::size_t j = 0; j < z.cols; ++j) {
                zrow[j] += bias[j];
            }
        }
        if (trace) trace->preacts.push_back(z);
        if (l + 1 < model.layer_count()) {
            relu_inplace(z);
        }
        current = std::move(z);
    }
    current.ensure_finite("forward");
    return current;
}

void check_labels(const std::vector<int>& labels, std::size_t batch, std::size_t classes) {
    if (labels.size() != batch) {
        throw dimension_error("labels: got " + std::to_string(labels.size()) + " for batch " +
                              std::to_string(batch));
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
            throw value_error("label " + std::to_string(labels[i]) + " at row " +
                              std::to_string(i) + " outside [0, " + std::to_string(classes) + ")");
        }
    }
}

/// softmax(z) - onehot(y), scaled, written into out. Max-subtraction keeps
/// exp() in range for any logit magnitude.
void loss_delta_row(const double* logits, std::size_t classes, int label, double scale,
                    double* out, double* loss) {
    double zmax = logits[0];
    for (std::size_t c = 1; c < classes; ++c) zmax = std::max(zmax, logits[c]);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(logits[c] - zmax);
    if (loss) {
        *loss = std::log(denom) + zmax - logits[label];
    }
    if (out) {
        for (std::size_t c = 0; c < classes; ++c) {
            double p = std::exp(logits[c] - zmax) / denom;
            out[c] = scale * (p - (static_cast<int>(c) == label ? 1.0 : 0.0));
        }
    }
}

Gradients zero_gradients(const Model& model) {
    Gradients g;
    g.weights.reserve(model.layer_count());
    g.biases.reserve(model.layer_count());
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        g.weights.emplace_back(model.layer_dims[l], model.layer_dims[l + 1]);
        g.biases.emplace_back(model.layer_dims[l + 1], 0.0);
    }
    return g;
}

struct BackpropResult {
    std::vector<double> losses;
    Gradients grads;
    Matrix grad_inputs;
};

/// Shared backward pass. per_sample_scale multiplies each sample's dL/dz
/// row; rows with scale exactly 0 are skipped in every loop, in ascending
/// index order, so the reduction order is fixed and unselected samples
/// cannot touch the result.
BackpropResult backprop(const Model& model, const Matrix& inputs, const std::vector<int>& labels,
                        const std::vector<double>& per_sample_scale, bool want_param,
                        bool want_input) {
    ForwardTrace trace;
    Matrix logits = run_forward(model, inputs, &trace);
    check_labels(labels, inputs.rows, model.class_count());

    const std::size_t batch = inputs.rows;
    const std::size_t classes = model.class_count();
    const std::size_t layers = model.layer_count();

    std::vector<std::size_t> active;
    active.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        if (per_sample_scale[i] != 0.0) active.push_back(i);
    }

    BackpropResult result;
    result.losses.resize(batch);
    Matrix delta(batch, classes);
    for (std::size_t i = 0; i < batch; ++i) {
        double scale = per_sample_scale[i];
        loss_delta_row(logits.row(i), classes, labels[i], scale,
                       scale != 0.0 ? delta.row(i) : nullptr, &result.losses[i]);
    }

    if (want_param) result.grads = zero_gradients(model);
    if (want_input) result.grad_inputs = Matrix(batch, model.input_dim());

    for (std::size_t l = layers; l-- > 0;) {
        const Matrix& layer_in = trace.layer_inputs[l];
        if (want_param) {
            Matrix& gw = result.grads.weights[l];
            std::vector<double>& gb = result.grads.biases[l];
            for (std::size_t i : active) {
                const double* arow = layer_in.row(i);
                const double* drow = delta.row(i);
                for (std::size_t r = 0; r < gw.rows; ++r) {
                    double av = arow[r];
                    if (av == 0.0) continue;
                    double* grow = gw.row(r);
                    for (std::size_t j = 0; j < gw.cols; ++j) {
                        grow[j] += av * drow[j];
                    }
                }
                for (std::size_t j = 0; j < gb.size(); ++j) {
                    gb[j] += drow[j];
                }
            }
        }
        if (l > 0) {
            // delta_{l-1} = (delta_l * W_l^T) .* relu'(Z_{l-1}); relu' is 0 at 0.
            const Matrix& w = model.weights[l];
            const Matrix& preact = trace.preacts[l - 1];
            Matrix next(batch, model.layer_dims[l]);
            for (std::size_t i : active) {
                const double* drow = delta.row(i);
                const double* zrow = preact.row(i);
                double* nrow = next.row(i);
                for (std::size_t r = 0; r < next.cols; ++r) {
                    if (zrow[r] <= 0.0) continue;
                    const double* wrow = w.row(r);
                    double acc = 0.0;
                    for (std::size_t j = 0; j < w.cols; ++j) {
                        acc += drow[j] * wrow[j];
                    }
                    nrow[r] = acc;
                }
            }
            delta = std::move(next);
        } else if (want_input) {
            const Matrix& w = model.weights[0];
            for (std::size_t i : active) {
                const double* drow = delta.row(i);
                double* xrow = result.grad_inputs.row(i);
                for (std::size_t r = 0; r < result.grad_inputs.cols; ++r) {
                    const double* wrow = w.row(r);
                    double acc = 0.0;
                    for (std::size_t j = 0; j < w.cols; ++j) {
                        acc += drow[j] * wrow[j];
                    }
                    xrow[r] = acc;
                }
            }
        }
    }

    if (want_param) {
        for (std::size_t l = 0; l < layers; ++l) {
            result.grads.weights[l].ensure_finite("param_grad");
        }
    }
    if (want_input) result.grad_inputs.ensure_finite("input_grad");
    return result;
}

double mean_loss(const Model& model, const Matrix& inputs, const std::vector<int>& labels) {
    Matrix logits = run_forward(model, inputs, nullptr);
    std::vector<double> losses = cross_entropy(logits, labels);
    double total = 0.0;
    for (double v : losses) total += v;
    return total / static_cast<double>(losses.size());
}

void write_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    write_bytes(out, b, 4);
}

void write_f64(std::ostream& out, double d) {
    auto v = std::bit_cast<std::uint64_t>(d);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    write_bytes(out, b, 8);
}

void read_bytes(std::istream& in, void* p, std::size_t n, const char* what) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in.gcount() != static_cast<std::streamsize>(n)) {
        throw io_error(std::string("checkpoint: truncated while reading ") + what);
    }
}

std::uint32_t read_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    read_bytes(in, b, 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double read_f64(std::istream& in, const char* what) {
    unsigned char b[8];
    read_bytes(in, b, 8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

} // namespace

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        n += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
    }
    return n;
}

void Model::validate() const {
    if (layer_dims.size() < 2) {
        throw dimension_error("model: need at least input and output dims");
    }
    if (weights.size() != layer_dims.size() - 1 || biases.size() != weights.size()) {
        throw dimension_error("model: layer count mismatch between dims and parameters");
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows != layer_dims[l] || weights[l].cols != layer_dims[l + 1] ||
            biases[l].size() != layer_dims[l + 1]) {
            throw dimension_error("model: layer " + std::to_string(l) +
                                  " parameter shapes do not match layer_dims");
        }
    }
}

bool Model::equals_bitwise(const Model& other) const {
    if (layer_dims != other.layer_dims || hidden_activation != other.hidden_activation) {
        return false;
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (std::memcmp(weights[l].data.data(), other.weights[l].data.data(),
                        weights[l].data.size() * sizeof(double)) != 0) {
            return false;
        }
        if (std::memcmp(biases[l].data(), other.biases[l].data(),
                        biases[l].size() * sizeof(double)) != 0) {
            return false;
        }
    }
    return true;
}

double Gradients::max_abs() const {
    double worst = 0.0;
    for (const Matrix& w : weights) {
        for (double v : w.data) worst = std::max(worst, std::fabs(v));
    }
    for (const auto& b : biases) {
        for (double v : b) worst = std::max(worst, std::fabs(v));
    }
    return worst;
}

Model init_model(const std::vector<std::size_t>& layer_dims, std::uint64_t seed) {
    if (layer_dims.size() < 2) {
        throw value_error("init_model: need at least input and output dims");
    }
    for (std::size_t d : layer_dims) {
        if (d == 0) throw value_error("init_model: zero-sized layer");
    }
    Model model;
    model.layer_dims = layer_dims;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        std::size_t fan_in = layer_dims[l];
        std::size_t fan_out = layer_dims[l + 1];
        double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Matrix w(fan_in, fan_out);
        for (double& v : w.data) v = rng.uniform(-limit, limit);
        model.weights.push_back(std::move(w));
        model.biases.emplace_back(fan_out, 0.0);
    }
    return model;
}

Matrix forward(const Model& model, const Matrix& inputs) {
    return run_forward(model, inputs, nullptr);
}

std::vector<int> predict_classes(const Matrix& logits) {
    std::vector<int> out(logits.rows);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const double* row = logits.row(i);
        int best = 0;
        for (std::size_t c = 1; c < logits.cols; ++c) {
            if (row[c] > row[best]) best = static_cast<int>(c);
        }
        out[i] = best;
    }
    return out;
}

std::vector<double> cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
    check_labels(labels, logits.rows, logits.cols);
    std::vector<double> losses(logits.rows);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        loss_delta_row(logits.row(i), logits.cols, labels[i], 0.0, nullptr, &losses[i]);
    }
    return losses;
}

InputGradResult loss_and_input_grad(const Model& model, const Matrix& inputs,
                                    const std::vector<int>& labels) {
    std::vector<double> ones(inputs.rows, 1.0);
    BackpropResult r = backprop(model, inputs, labels, ones, false, true);
    return {std::move(r.losses), std::move(r.grad_inputs)};
}

Gradients param_grad(const Model& model, const Matrix& inputs, const std::vector<int>& labels,
                     const std::vector<double>& weights_per_sample) {
    if (weights_per_sample.size() != inputs.rows) {
        throw dimension_error("param_grad: weight vector length " +
                              std::to_string(weights_per_sample.size()) + " for batch " +
                              std::to_string(inputs.rows));
    }
    std::size_t k = 0;
    for (double w : weights_per_sample) {
        if (w != 0.0 && w != 1.0) {
            throw value_error("param_grad: per-sample weights must be 0 or 1");
        }
        if (w == 1.0) ++k;
    }
    if (k == 0) {
        throw empty_selection_error("param_grad: selection mask is all zero");
    }
    std::vector<double> scale(weights_per_sample.size());
    for (std::size_t i = 0; i < scale.size(); ++i) {
        scale[i] = weights_per_sample[i] / static_cast<double>(k);
    }
    return backprop(model, inputs, labels, scale, true, false).grads;
}

Model sgd_step(const Model& model, const Gradients& grads, double mu) {
    if (!(mu > 0.0)) {
        throw value_error("sgd_step: learning rate must be positive");
    }
    if (grads.weights.size() != model.layer_count()) {
        throw dimension_error("sgd_step: gradient layer count mismatch");
    }
    Model next = model;
    for (std::size_t l = 0; l < next.layer_count(); ++l) {
        if (!grads.weights[l].same_shape(next.weights[l]) ||
            grads.biases[l].size() != next.biases[l].size()) {
            throw dimension_error("sgd_step: gradient shape mismatch at layer " +
                                  std::to_string(l));
        }
        for (std::size_t i = 0; i < next.weights[l].data.size(); ++i) {
            next.weights[l].data[i] -= mu * grads.weights[l].data[i];
        }
        for (std::size_t i = 0; i < next.biases[l].size(); ++i) {
            next.biases[l][i] -= mu * grads.biases[l][i];
        }
    }
    return next;
}

Gradients finite_diff_param_grad(const Model& model, const Matrix& inputs,
                                 const std::vector<int>& labels, double step) {
    if (!(step > 0.0)) {
        throw value_error("finite_diff_param_grad: step must be positive");
    }
    model.validate();
    check_labels(labels, inputs.rows, model.class_count());
    Gradients grads = zero_gradients(model);
    Model probe = model;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        for (std::size_t i = 0; i < probe.weights[l].data.size(); ++i) {
            double saved = probe.weights[l].data[i];
            probe.weights[l].data[i] = saved + step;
            double up = mean_loss(probe, inputs, labels);
            probe.weights[l].data[i] = saved - step;
            double down = mean_loss(probe, inputs, labels);
            probe.weights[l].data[i] = saved;
            grads.weights[l].data[i] = (up - down) / (2.0 * step);
        }
        for (std::size_t i = 0; i < probe.biases[l].size(); ++i) {
            double saved = probe.biases[l][i];
            probe.biases[l][i] = saved + step;
            double up = mean_loss(probe, inputs, labels);
            probe.biases[l][i] = saved - step;
            double down = mean_loss(probe, inputs, labels);
            probe.biases[l][i] = saved;
            grads.biases[l][i] = (up - down) / (2.0 * step);
        }
    }
    return grads;
}

Matrix finite_diff_input_grad(const Model& model, const Matrix& inputs,
                              const std::vector<int>& labels, double step) {
    if (!(step > 0.0)) {
        throw value_error("finite_diff_input_grad: step must be positive");
    }
    model.validate();
    check_labels(labels, inputs.rows, model.class_count());
    Matrix grads(inputs.rows, inputs.cols);
    for (std::size_t i = 0; i < inputs.rows; ++i) {
        Matrix row(1, inputs.cols);
        std::copy(inputs.row(i), inputs.row(i) + inputs.cols, row.row(0));
        std::vector<int> label{labels[i]};
        for (std::size_t j = 0; j < inputs.cols; ++j) {
            double saved = row.at(0, j);
            row.at(0, j) = saved + step;
            double up = cross_entropy(run_forward(model, row, nullptr), label)[0];
            row.at(0, j) = saved - step;
            double down = cross_entropy(run_forward(model, row, nullptr), label)[0];
            row.at(0, j) = saved;
            grads.at(i, j) = (up - down) / (2.0 * step);
        }
    }
    return grads;
}

GradCompareReport compare_gradients(const Model& model, const Gradients& analytic,
                                    const Gradients& numeric, double denom_floor) {
    GradCompareReport report;
    auto rel = [denom_floor](double a, double n) {
        return std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), denom_floor});
    };
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        GradCompareEntry worst;
        worst.layer = l;
        worst.rel_err = -1.0;
        const Matrix& aw = analytic.weights[l];
        const Matrix& nw = numeric.weights[l];
        for (std::size_t r = 0; r < aw.rows; ++r) {
            for (std::size_t c = 0; c < aw.cols; ++c) {
                double e = rel(aw.at(r, c), nw.at(r, c));
                if (e > worst.rel_err) {
                    worst = {l, false, r, c, aw.at(r, c), nw.at(r, c), e};
                }
            }
        }
        for (std::size_t c = 0; c < analytic.biases[l].size(); ++c) {
            double e = rel(analytic.biases[l][c], numeric.biases[l][c]);
            if (e > worst.rel_err) {
                worst = {l, true, 0, c, analytic.biases[l][c], numeric.biases[l][c], e};
            }
        }
        report.max_rel_err = std::max(report.max_rel_err, worst.rel_err);
        report.per_layer_worst.push_back(worst);
    }
    return report;
}

void save_model(const Model& model, const std::string& path) {
    model.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("checkpoint: cannot open " + path + " for writing");
    write_bytes(out, kModelMagic, sizeof(kModelMagic));
    write_u32(out, static_cast<std::uint32_t>(model.layer_dims.size()));
    for (std::size_t d : model.layer_dims) write_u32(out, static_cast<std::uint32_t>(d));
    unsigned char act = static_cast<unsigned char>(model.hidden_activation);
    write_bytes(out, &act, 1);
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        for (double v : model.weights[l].data) write_f64(out, v);
        for (double v : model.biases[l]) write_f64(out, v);
    }
    if (!out) throw io_error("checkpoint: write failed for " + path);
}

Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("checkpoint: cannot open " + path);
    char magic[8];
    read_bytes(in, magic, 8, "magic");
    if (std::memcmp(magic, kModelMagic, 8) != 0) {
        throw io_error("checkpoint: bad magic in " + path);
    }
    std::uint32_t dim_count = read_u32(in, "dim count");
    if (dim_count < 2 || dim_count > 1024) {
        throw io_error("checkpoint: implausible layer count");
    }
    Model model;
    model.layer_dims.resize(dim_count);
    for (auto& d : model.layer_dims) d = read_u32(in, "layer dim");
    unsigned char act;
    read_bytes(in, &act, 1, "activation");
    if (act != 0) throw io_error("checkpoint: unknown activation tag");
    model.hidden_activation = Activation::relu;
    for (std::size_t l = 0; l + 1 < dim_count; ++l) {
        Matrix w(model.layer_dims[l], model.layer_dims[l + 1]);
        for (double& v : w.data) v = read_f64(in, "weights");
        model.weights.push_back(std::move(w));
        std::vector<double> b(model.layer_dims[l + 1]);
        for (double& v : b) v = read_f64(in, "biases");
        model.biases.push_back(std::move(b));
    }
    model.validate();
    return model;
}

} // namespace advsel
