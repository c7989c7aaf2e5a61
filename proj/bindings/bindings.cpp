#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "advsel/attacks.hpp"
#include "advsel/dataset.hpp"
#include "advsel/model.hpp"
#include "advsel/selection.hpp"
#include "advsel/training.hpp"

namespace py = pybind11;
using namespace advsel;

namespace {

Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() == 1) {
        Matrix m(1, static_cast<std::size_t>(arr.shape(0)));
        std::copy(arr.data(), arr.data() + arr.size(), m.data.begin());
        return m;
    }
    if (arr.ndim() != 2) throw value_error("expected a 1-d or 2-d array");
    Matrix m(static_cast<std::size_t>(arr.shape(0)), static_cast<std::size_t>(arr.shape(1)));
    std::copy(arr.data(), arr.data() + arr.size(), m.data.begin());
    return m;
}

py::array_t<double> to_array(const Matrix& m) {
    py::array_t<double> arr({m.rows, m.cols});
    std::copy(m.data.begin(), m.data.end(), arr.mutable_data());
    return arr;
}

using NpArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Adversarial training engine with loss-ranked mini-batch data selection";

    py::register_exception<error>(m, "AdvselError", PyExc_RuntimeError);

    py::class_<Rng>(m, "Rng")
        .def(py::init<std::uint64_t>(), py::arg("seed"))
        .def("uniform01", &Rng::uniform01)
        .def("normal", &Rng::normal);

    py::class_<Gradients>(m, "Gradients")
        .def("max_abs", &Gradients::max_abs)
        .def_property_readonly("weights",
                               [](const Gradients& g) {
                                   py::list out;
                                   for (const Matrix& w : g.weights) out.append(to_array(w));
                                   return out;
                               })
        .def_property_readonly("biases", [](const Gradients& g) {
            py::list out;
            for (const auto& b : g.biases) {
                py::array_t<double> arr(b.size());
                std::copy(b.begin(), b.end(), arr.mutable_data());
                out.append(arr);
            }
            return out;
        });

    py::class_<Model>(m, "Model")
        .def_static(
            "init",
            [](const std::vector<std::size_t>& dims, std::uint64_t seed) {
                return init_model(dims, seed);
            },
            py::arg("layer_dims"), py::arg("seed"))
        .def_static("load", &load_model, py::arg("path"))
        .def("save", &save_model, py::arg("path"))
        .def_property_readonly("layer_dims", [](const Model& mo) { return mo.layer_dims; })
        .def("parameter_count", &Model::parameter_count)
        .def("forward", [](const Model& mo, const NpArray& x) { return to_array(forward(mo, to_matrix(x))); },
             py::arg("inputs"))
        .def("predict",
             [](const Model& mo, const NpArray& x) {
                 return predict_classes(forward(mo, to_matrix(x)));
             },
             py::arg("inputs"))
        .def("equals_bitwise", &Model::equals_bitwise);

    m.def(
        "loss_and_input_grad",
        [](const Model& mo, const NpArray& x, const std::vector<int>& y) {
            InputGradResult r = loss_and_input_grad(mo, to_matrix(x), y);
            return py::make_tuple(r.losses, to_array(r.grad_inputs));
        },
        py::arg("model"), py::arg("inputs"), py::arg("labels"));
    m.def(
        "param_grad",
        [](const Model& mo, const NpArray& x, const std::vector<int>& y,
           const std::vector<double>& w) { return param_grad(mo, to_matrix(x), y, w); },
        py::arg("model"), py::arg("inputs"), py::arg("labels"), py::arg("weights_per_sample"));
    m.def("sgd_step", &sgd_step, py::arg("model"), py::arg("grads"), py::arg("mu"));
    m.def(
        "finite_diff_param_grad",
        [](const Model& mo, const NpArray& x, const std::vector<int>& y, double step) {
            return finite_diff_param_grad(mo, to_matrix(x), y, step);
        },
        py::arg("model"), py::arg("inputs"), py::arg("labels"), py::arg("step") = 1e-4);

    py::class_<AttackConfig>(m, "AttackConfig")
        .def(py::init([](double epsilon, double alpha, std::size_t steps, bool random_start,
                         double clip_min, double clip_max) {
                 AttackConfig cfg{epsilon, alpha, steps, random_start, clip_min, clip_max};
                 cfg.validate();
                 return cfg;
             }),
             py::arg("epsilon") = 8.0 / 255.0, py::arg("alpha") = 0.01, py::arg("steps") = 20,
             py::arg("random_start") = false, py::arg("clip_min") = 0.0, py::arg("clip_max") = 1.0)
        .def_readwrite("epsilon", &AttackConfig::epsilon)
        .def_readwrite("alpha", &AttackConfig::alpha)
        .def_readwrite("steps", &AttackConfig::steps)
        .def_readwrite("random_start", &AttackConfig::random_start)
        .def_readwrite("clip_min", &AttackConfig::clip_min)
        .def_readwrite("clip_max", &AttackConfig::clip_max);

    m.def(
        "fgsm",
        [](const Model& mo, const NpArray& x, const std::vector<int>& y, double epsilon,
           double clip_min, double clip_max) {
            return to_array(fgsm(mo, to_matrix(x), y, epsilon, clip_min, clip_max));
        },
        py::arg("model"), py::arg("inputs"), py::arg("labels"), py::arg("epsilon"),
        py::arg("clip_min") = 0.0, py::arg("clip_max") = 1.0);
    m.def(
        "pgd",
        [](const Model& mo, const NpArray& x, const std::vector<int>& y, const AttackConfig& cfg,
           std::optional<std::uint64_t> seed) {
            Rng rng(seed.value_or(0));
            return to_array(pgd(mo, to_matrix(x), y, cfg, rng));
        },
        py::arg("model"), py::arg("inputs"), py::arg("labels"), py::arg("config"),
        py::arg("seed") = std::nullopt);
    m.def(
        "min_adversarial_eps",
        [](const Model& mo, const NpArray& x, int label, const std::vector<double>& grid,
           const AttackConfig& cfg) {
            return min_adversarial_eps(mo, to_matrix(x), label, EpsilonGrid(grid), cfg);
        },
        py::arg("model"), py::arg("input_row"), py::arg("label"), py::arg("grid"),
        py::arg("config"));

    py::class_<SelectionResult>(m, "SelectionResult")
        .def_readonly("selected_indices", &SelectionResult::selected_indices)
        .def_readonly("losses", &SelectionResult::losses)
        .def_readonly("clean_selected", &SelectionResult::clean_selected)
        .def_readonly("adversarial_selected", &SelectionResult::adversarial_selected)
        .def("count", &SelectionResult::count);

    m.def(
        "error_signal",
        [](const NpArray& logits, const std::vector<int>& y) {
            return error_signal(to_matrix(logits), y);
        },
        py::arg("logits"), py::arg("labels"));
    m.def(
        "error_signal_literal",
        [](const NpArray& logits, const std::vector<int>& y) {
            return error_signal_literal(to_matrix(logits), y);
        },
        py::arg("logits"), py::arg("labels"));
    m.def("select_top", &select_top, py::arg("losses"), py::arg("pup"));
    m.def(
        "select_random",
        [](std::size_t batch, double pup, std::uint64_t seed) {
            Rng rng(seed);
            return select_random(batch, pup, rng);
        },
        py::arg("batch"), py::arg("pup"), py::arg("seed"));
    m.def("update_pup", &update_pup, py::arg("p_prev"), py::arg("acc_prev"), py::arg("floor") = 0.0);
    m.def("selection_count", &selection_count, py::arg("pup"), py::arg("batch"));

    py::class_<Dataset>(m, "Dataset")
        .def(py::init([](const NpArray& features, const std::vector<int>& labels,
                         std::size_t class_count) {
                 Dataset d;
                 d.features = to_matrix(features);
                 d.labels = labels;
                 d.class_count = class_count;
                 d.validate();
                 return d;
             }),
             py::arg("features"), py::arg("labels"), py::arg("class_count"))
        .def_static("load", &load_dataset, py::arg("path"))
        .def("save", &save_dataset, py::arg("path"))
        .def_property_readonly("features", [](const Dataset& d) { return to_array(d.features); })
        .def_property_readonly("labels", [](const Dataset& d) { return d.labels; })
        .def_readonly("class_count", &Dataset::class_count)
        .def_readonly("label_names", &Dataset::label_names)
        .def("__len__", &Dataset::size);

    m.def("load_idx", &load_idx, py::arg("images_path"), py::arg("labels_path"));
    m.def("load_csv", &load_csv, py::arg("path"), py::arg("label_column"));
    m.def("synth_gaussians", &synth_gaussians, py::arg("seed"), py::arg("samples_per_class"),
          py::arg("dims"), py::arg("class_means"), py::arg("sigma"));
    m.def(
        "split",
        [](const Dataset& d, double train, double validation, double test, std::uint64_t seed) {
            SplitResult r = split(d, SplitFractions{train, validation, test}, seed);
            return py::make_tuple(r.train, r.validation, r.test);
        },
        py::arg("dataset"), py::arg("train"), py::arg("validation"), py::arg("test"),
        py::arg("seed"));

    py::enum_<TrainMode>(m, "TrainMode")
        .value("standard", TrainMode::standard)
        .value("robust", TrainMode::robust)
        .value("ds_robust", TrainMode::ds_robust)
        .value("random_robust", TrainMode::random_robust);
    py::enum_<SelectionKind>(m, "SelectionKind")
        .value("all", SelectionKind::all)
        .value("top_loss", SelectionKind::top_loss)
        .value("random", SelectionKind::random_k);
    py::enum_<AccuracySource>(m, "AccuracySource")
        .value("validation_standard", AccuracySource::validation_standard)
        .value("validation_robust", AccuracySource::validation_robust)
        .value("train_standard", AccuracySource::train_standard);

    py::class_<SelectionPolicy>(m, "SelectionPolicy")
        .def(py::init([](SelectionKind kind, bool adaptive, double pup, double p0, double floor,
                         AccuracySource source, bool literal) {
                 SelectionPolicy p;
                 p.kind = kind;
                 p.pup.kind = adaptive ? PupSchedule::Kind::adaptive : PupSchedule::Kind::fixed;
                 p.pup.p = pup;
                 p.pup.p0 = p0;
                 p.pup.floor = floor;
                 p.accuracy_source = source;
                 p.literal_error_signal = literal;
                 p.validate();
                 return p;
             }),
             py::arg("kind") = SelectionKind::top_loss, py::arg("adaptive") = false,
             py::arg("pup") = 0.5, py::arg("p0") = 1.0, py::arg("floor") = 0.0,
             py::arg("accuracy_source") = AccuracySource::validation_standard,
             py::arg("literal_error_signal") = false);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init([](TrainMode mode, std::size_t batch, std::size_t epochs, double lr,
                         const AttackConfig& attack, const AttackConfig& eval_attack,
                         const SelectionPolicy& policy, std::uint64_t seed) {
                 TrainConfig cfg;
                 cfg.mode = mode;
                 cfg.batch_clean = batch;
                 cfg.epochs = epochs;
                 cfg.learning_rate = lr;
                 cfg.attack = attack;
                 cfg.eval_attack = eval_attack;
                 cfg.policy = policy;
                 cfg.seed = seed;
                 cfg.validate();
                 return cfg;
             }),
             py::arg("mode") = TrainMode::ds_robust, py::arg("batch") = 128,
             py::arg("epochs") = 10, py::arg("lr") = 0.1, py::arg("attack") = AttackConfig{},
             py::arg("eval_attack") = AttackConfig{}, py::arg("policy") = SelectionPolicy{},
             py::arg("seed") = 1);

    py::class_<EpochMetrics>(m, "EpochMetrics")
        .def_readonly("epoch", &EpochMetrics::epoch)
        .def_readonly("standard_accuracy", &EpochMetrics::standard_accuracy)
        .def_readonly("robust_accuracy", &EpochMetrics::robust_accuracy)
        .def_readonly("effective_pup", &EpochMetrics::effective_pup)
        .def_readonly("selected_clean", &EpochMetrics::selected_clean)
        .def_readonly("selected_adversarial", &EpochMetrics::selected_adversarial)
        .def_readonly("backward_passes", &EpochMetrics::backward_passes)
        .def_readonly("batches", &EpochMetrics::batches)
        .def_readonly("mean_train_loss", &EpochMetrics::mean_train_loss)
        .def_readonly("mean_min_eps", &EpochMetrics::mean_min_eps)
        .def_readonly("min_eps_flipped", &EpochMetrics::min_eps_flipped);

    m.def(
        "evaluate",
        [](const Model& mo, const Dataset& d, std::optional<AttackConfig> attack) {
            return evaluate(mo, d, attack);
        },
        py::arg("model"), py::arg("dataset"), py::arg("attack") = std::nullopt);
    m.def(
        "run_training",
        [](const Model& mo, const Dataset& train, const Dataset& eval_set, const TrainConfig& cfg) {
            TrainOutcome out = run_training(mo, train, eval_set, cfg);
            return py::make_tuple(out.model, out.metrics);
        },
        py::arg("model"), py::arg("train_data"), py::arg("eval_data"), py::arg("config"));

#ifdef VERSION_INFO
    m.attr("__version__") = VERSION_INFO;
#else
    m.attr("__version__") = "dev";
#endif
}
