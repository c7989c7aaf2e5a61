#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "advsel/model.hpp"

using namespace advsel;

namespace {

Matrix random_inputs(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.uniform01();
    return m;
}

std::vector<int> random_labels(std::size_t n, std::size_t classes, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng.below(classes));
    return y;
}

/// Independent forward oracle: plain scalar loops, no shared code with the
/// library path beyond the Model fields.
Matrix naive_forward(const Model& model, const Matrix& inputs) {
    Matrix a = inputs;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        Matrix z(a.rows, model.layer_dims[l + 1]);
        for (std::size_t i = 0; i < a.rows; ++i) {
            for (std::size_t j = 0; j < z.cols; ++j) {
                double acc = model.biases[l][j];
                for (std::size_t k = 0; k < a.cols; ++k) {
                    acc += a.at(i, k) * model.weights[l].at(k, j);
                }
                z.at(i, j) = acc;
            }
        }
        if (l + 1 < model.layer_count()) {
            for (double& v : z.data) v = v > 0.0 ? v : 0.0;
        }
        a = z;
    }
    return a;
}

std::vector<double> softmax_row(const Matrix& logits, std::size_t i) {
    double zmax = logits.at(i, 0);
    for (std::size_t c = 1; c < logits.cols; ++c) zmax = std::max(zmax, logits.at(i, c));
    std::vector<double> p(logits.cols);
    double denom = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) {
        p[c] = std::exp(logits.at(i, c) - zmax);
        denom += p[c];
    }
    for (double& v : p) v /= denom;
    return p;
}

double rel_err(double a, double n) {
    return std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), 1e-3});
}

double max_rel_err(const Gradients& a, const Gradients& n) {
    double worst = 0.0;
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        for (std::size_t i = 0; i < a.weights[l].data.size(); ++i) {
            worst = std::max(worst, rel_err(a.weights[l].data[i], n.weights[l].data[i]));
        }
        for (std::size_t i = 0; i < a.biases[l].size(); ++i) {
            worst = std::max(worst, rel_err(a.biases[l][i], n.biases[l][i]));
        }
    }
    return worst;
}

} // namespace

TEST_CASE("forward: zero parameters give zero logits") {
    Model model = init_model({3, 4, 2}, 1);
    for (auto& w : model.weights) {
        for (double& v : w.data) v = 0.0;
    }
    Matrix x = random_inputs(5, 3, 2);
    Matrix logits = forward(model, x);
    for (double v : logits.data) CHECK(v == 0.0);
}

TEST_CASE("forward: identity single layer") {
    Model model;
    model.layer_dims = {2, 2};
    model.weights.push_back(Matrix(2, 2, {1.0, 0.0, 0.0, 1.0}));
    model.biases.push_back({0.0, 0.0});
    Matrix x(1, 2, {3.0, 5.0});
    Matrix logits = forward(model, x);
    CHECK(logits.at(0, 0) == 3.0);
    CHECK(logits.at(0, 1) == 5.0);
}

TEST_CASE("forward: matches the scalar-loop oracle") {
    Model model = init_model({6, 16, 8, 3}, 42);
    Matrix x = random_inputs(7, 6, 43);
    Matrix fast = forward(model, x);
    Matrix slow = naive_forward(model, x);
    CHECK(max_abs_diff(fast, slow) < 1e-12);
}

TEST_CASE("forward: shape mismatch names the layer") {
    Model model = init_model({4, 3}, 1);
    Matrix x = random_inputs(2, 5, 2);
    CHECK_THROWS_WITH_AS(forward(model, x), doctest::Contains("layer 0"), dimension_error);
}

TEST_CASE("loss_and_input_grad: linear model closed form") {
    // No hidden layer: grad_x = (softmax(z) - onehot(y)) W^T per row.
    Model model = init_model({3, 4}, 7);
    Matrix x = random_inputs(5, 3, 8);
    std::vector<int> y = random_labels(5, 4, 9);
    InputGradResult r = loss_and_input_grad(model, x, y);
    Matrix logits = forward(model, x);
    for (std::size_t i = 0; i < x.rows; ++i) {
        std::vector<double> p = softmax_row(logits, i);
        p[static_cast<std::size_t>(y[i])] -= 1.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            double expect = 0.0;
            for (std::size_t c = 0; c < 4; ++c) {
                expect += p[c] * model.weights[0].at(j, c);
            }
            CHECK(std::fabs(r.grad_inputs.at(i, j) - expect) < 1e-12);
        }
    }
}

TEST_CASE("loss_and_input_grad: matches central finite differences") {
    Model model = init_model({5, 12, 6, 3}, 11);
    Matrix x = random_inputs(4, 5, 12);
    std::vector<int> y = random_labels(4, 3, 13);
    InputGradResult r = loss_and_input_grad(model, x, y);
    Matrix fd = finite_diff_input_grad(model, x, y, 1e-4);
    for (std::size_t i = 0; i < fd.data.size(); ++i) {
        CHECK(rel_err(r.grad_inputs.data[i], fd.data[i]) < 1e-4);
    }
}

TEST_CASE("loss_and_input_grad: saturated prediction has near-zero gradient") {
    Model model;
    model.layer_dims = {2, 2};
    model.weights.push_back(Matrix(2, 2, {60.0, -60.0, 0.0, 0.0}));
    model.biases.push_back({0.0, 0.0});
    Matrix x(1, 2, {1.0, 0.5}); // logit margin 120: softmax saturates on class 0
    InputGradResult r = loss_and_input_grad(model, x, {0});
    CHECK(r.losses[0] < 1e-12);
    for (double v : r.grad_inputs.data) CHECK(std::fabs(v) < 1e-12);
}

TEST_CASE("param_grad: matches finite differences with all samples selected") {
    Model model = init_model({4, 9, 5, 3}, 21);
    Matrix x = random_inputs(6, 4, 22);
    std::vector<int> y = random_labels(6, 3, 23);
    Gradients analytic = param_grad(model, x, y, std::vector<double>(6, 1.0));
    Gradients numeric = finite_diff_param_grad(model, x, y, 1e-4);
    CHECK(max_rel_err(analytic, numeric) < 1e-4);
}

TEST_CASE("param_grad: singleton mask equals that sample's own gradient") {
    Model model = init_model({4, 6, 2}, 31);
    Matrix x = random_inputs(5, 4, 32);
    std::vector<int> y = random_labels(5, 2, 33);
    std::vector<double> mask(5, 0.0);
    mask[3] = 1.0;
    Gradients masked = param_grad(model, x, y, mask);

    Matrix alone(1, 4);
    std::copy(x.row(3), x.row(3) + 4, alone.row(0));
    Gradients solo = param_grad(model, alone, {y[3]}, {1.0});
    for (std::size_t l = 0; l < masked.weights.size(); ++l) {
        CHECK(max_abs_diff(masked.weights[l], solo.weights[l]) == 0.0);
    }
}

TEST_CASE("param_grad: invariant under batch duplication") {
    Model model = init_model({3, 5, 2}, 41);
    Matrix x = random_inputs(4, 3, 42);
    std::vector<int> y = random_labels(4, 2, 43);
    Gradients base = param_grad(model, x, y, std::vector<double>(4, 1.0));

    Matrix doubled(8, 3);
    std::copy(x.data.begin(), x.data.end(), doubled.data.begin());
    std::copy(x.data.begin(), x.data.end(), doubled.data.begin() + 12);
    std::vector<int> y2 = y;
    y2.insert(y2.end(), y.begin(), y.end());
    Gradients dup = param_grad(model, doubled, y2, std::vector<double>(8, 1.0));
    for (std::size_t l = 0; l < base.weights.size(); ++l) {
        CHECK(max_abs_diff(base.weights[l], dup.weights[l]) < 1e-15);
    }
}

TEST_CASE("param_grad: all-zero mask is an error") {
    Model model = init_model({3, 2}, 51);
    Matrix x = random_inputs(2, 3, 52);
    CHECK_THROWS_AS(param_grad(model, x, {0, 1}, {0.0, 0.0}), empty_selection_error);
    CHECK_THROWS_AS(param_grad(model, x, {0, 1}, {0.5, 1.0}), value_error);
}

TEST_CASE("sgd_step: zero gradient leaves the model unchanged") {
    Model model = init_model({3, 4, 2}, 61);
    Gradients zero;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        zero.weights.emplace_back(model.layer_dims[l], model.layer_dims[l + 1]);
        zero.biases.emplace_back(model.layer_dims[l + 1], 0.0);
    }
    Model next = sgd_step(model, zero, 0.1);
    CHECK(next.equals_bitwise(model));
}

TEST_CASE("sgd_step: plain arithmetic") {
    Model model;
    model.layer_dims = {1, 1};
    model.weights.push_back(Matrix(1, 1, {1.0}));
    model.biases.push_back({0.0});
    Gradients g;
    g.weights.push_back(Matrix(1, 1, {0.5}));
    g.biases.push_back({0.0});
    Model next = sgd_step(model, g, 0.1);
    CHECK(next.weights[0].at(0, 0) == doctest::Approx(0.95).epsilon(1e-12));
    CHECK_THROWS_AS(sgd_step(model, g, 0.0), value_error);
}

TEST_CASE("sgd_step: one small step decreases the batch loss") {
    Model model = init_model({4, 8, 3}, 71);
    Matrix x = random_inputs(6, 4, 72);
    std::vector<int> y = random_labels(6, 3, 73);
    auto batch_loss = [&](const Model& m) {
        std::vector<double> losses = cross_entropy(forward(m, x), y);
        double total = 0.0;
        for (double v : losses) total += v;
        return total / static_cast<double>(losses.size());
    };
    double before = batch_loss(model);
    Model next = sgd_step(model, param_grad(model, x, y, std::vector<double>(6, 1.0)), 0.05);
    CHECK(batch_loss(next) < before);
}

TEST_CASE("finite_diff_param_grad: second-order convergence on a smooth model") {
    // Linear softmax model: no ReLU kinks, the analytic gradient is exact, so
    // halving the step should shrink the error roughly 4x.
    Model model = init_model({3, 4}, 81);
    Matrix x = random_inputs(5, 3, 82);
    std::vector<int> y = random_labels(5, 4, 83);
    Gradients exact = param_grad(model, x, y, std::vector<double>(5, 1.0));

    auto fd_error = [&](double step) {
        Gradients fd = finite_diff_param_grad(model, x, y, step);
        double worst = 0.0;
        for (std::size_t i = 0; i < exact.weights[0].data.size(); ++i) {
            worst = std::max(worst, std::fabs(fd.weights[0].data[i] - exact.weights[0].data[i]));
        }
        return worst;
    };
    double coarse = fd_error(2e-2);
    double fine = fd_error(1e-2);
    CHECK(fine < coarse);
    double ratio = coarse / fine;
    CHECK(ratio > 2.0);
    CHECK(ratio < 8.0);
}

TEST_CASE("determinism: same seed, same model, bit-identical outputs") {
    Model a = init_model({5, 7, 3}, 99);
    Model b = init_model({5, 7, 3}, 99);
    CHECK(a.equals_bitwise(b));
    Matrix x = random_inputs(3, 5, 100);
    Matrix la = forward(a, x);
    Matrix lb = forward(b, x);
    CHECK(max_abs_diff(la, lb) == 0.0);
    CHECK_FALSE(a.equals_bitwise(init_model({5, 7, 3}, 98)));
}

TEST_CASE("zero-hidden pipeline is convex: loss decreases monotonically") {
    Model model = init_model({4, 3}, 111);
    Matrix x = random_inputs(12, 4, 112);
    std::vector<int> y = random_labels(12, 3, 113);
    std::vector<double> ones(12, 1.0);
    double prev = 1e300;
    for (int step = 0; step < 25; ++step) {
        std::vector<double> losses = cross_entropy(forward(model, x), y);
        double mean = 0.0;
        for (double v : losses) mean += v;
        mean /= 12.0;
        CHECK(mean <= prev + 1e-12);
        prev = mean;
        model = sgd_step(model, param_grad(model, x, y, ones), 0.1);
    }
}

TEST_CASE("checkpoint: save/load round-trip is bit-exact") {
    namespace fs = std::filesystem;
    Model model = init_model({6, 10, 4}, 121);
    fs::path path = fs::temp_directory_path() / "advsel_test_model.bin";
    save_model(model, path.string());
    Model loaded = load_model(path.string());
    CHECK(loaded.equals_bitwise(model));

    // Corrupt the magic and expect a load failure.
    {
        std::FILE* f = std::fopen(path.string().c_str(), "r+b");
        REQUIRE(f != nullptr);
        std::fputc('X', f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_model(path.string()), io_error);
    fs::remove(path);
}

TEST_CASE("gradient property: random small models agree with finite differences") {
    for (std::uint64_t seed = 200; seed < 206; ++seed) {
        Rng rng(seed);
        std::size_t hidden = 2 + rng.below(3);
        std::vector<std::size_t> dims{2 + rng.below(5)};
        for (std::size_t l = 0; l + 1 < hidden; ++l) dims.push_back(2 + rng.below(10));
        dims.push_back(2 + rng.below(3));
        std::size_t batch = 1 + rng.below(4);

        Model model = init_model(dims, seed * 7 + 1);
        Matrix x = random_inputs(batch, dims.front(), seed * 7 + 2);
        std::vector<int> y = random_labels(batch, dims.back(), seed * 7 + 3);
        Gradients analytic = param_grad(model, x, y, std::vector<double>(batch, 1.0));
        Gradients numeric = finite_diff_param_grad(model, x, y, 1e-4);
        CHECK(max_rel_err(analytic, numeric) < 1e-4);
    }
}
