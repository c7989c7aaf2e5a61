#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "advsel/errors.hpp"
#include "advsel/run_config.hpp"

namespace fs = std::filesystem;
using advsel::RunConfig;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

/// Command-line overrides; unset fields leave the config file value alone.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> pup;
    std::optional<std::string> mode;
    std::optional<double> epsilon;
    std::optional<double> alpha;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> epochs;
    std::optional<double> lr;
    std::optional<std::size_t> batch;
    std::optional<std::string> out_dir;
};

void add_override_flags(CLI::App* cmd, Overrides& ov, bool training_flags) {
    cmd->add_option("--seed", ov.seed, "Run seed (train.seed)");
    cmd->add_option("--epsilon", ov.epsilon, "Attack l_inf budget");
    cmd->add_option("--alpha", ov.alpha, "Attack step size");
    cmd->add_option("--steps", ov.steps, "Attack iteration count");
    cmd->add_option("--out", ov.out_dir, "Output directory");
    if (training_flags) {
        cmd->add_option("--pup", ov.pup, "Fixed selection fraction P_up in (0,1]");
        cmd->add_option("--mode", ov.mode, "standard | robust | ds_robust | random_robust");
        cmd->add_option("--epochs", ov.epochs, "Training epochs");
        cmd->add_option("--lr", ov.lr, "SGD learning rate");
        cmd->add_option("--batch", ov.batch, "Clean samples per mini-batch (b')");
    }
}

json load_config_json(const std::string& config_path) {
    if (config_path.empty()) return json::object();
    std::ifstream in(config_path);
    if (!in) throw advsel::config_error("cannot open config file " + config_path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw advsel::config_error(config_path + ": " + e.what());
    }
    if (!root.is_object()) throw advsel::config_error(config_path + ": expected a JSON object");
    return root;
}

/// Precedence: command line > config file > defaults. Overrides are merged
/// into the file JSON before parsing so the manifest records the resolved
/// result. eval_attack_overrides additionally points the evaluation attack
/// at the same flags (used by eval/attack, which have a single attack).
RunConfig resolve_config(const std::string& config_path, const Overrides& ov,
                         bool eval_attack_overrides = false) {
    json root = load_config_json(config_path);
    json& train = root["train"];
    if (!train.is_object()) train = json::object();

    if (ov.seed) train["seed"] = *ov.seed;
    if (ov.mode) train["mode"] = *ov.mode;
    if (ov.epochs) train["epochs"] = *ov.epochs;
    if (ov.lr) train["lr"] = *ov.lr;
    if (ov.batch) train["batch"] = *ov.batch;
    if (ov.epsilon) train["attack"]["epsilon"] = *ov.epsilon;
    if (ov.alpha) train["attack"]["alpha"] = *ov.alpha;
    if (ov.steps) train["attack"]["steps"] = *ov.steps;
    if (eval_attack_overrides) {
        if (ov.epsilon) train["eval_attack"]["epsilon"] = *ov.epsilon;
        if (ov.alpha) train["eval_attack"]["alpha"] = *ov.alpha;
        if (ov.steps) train["eval_attack"]["steps"] = *ov.steps;
    }

    std::string mode = "ds_robust";
    if (train.contains("mode")) {
        if (!train["mode"].is_string()) throw advsel::config_error("train: bad value for 'mode'");
        mode = train["mode"].get<std::string>();
    }
    bool kind_explicit = train.contains("policy") && train["policy"].is_object() &&
                         train["policy"].contains("kind");
    if (!kind_explicit) {
        // Baseline conventions: the plain modes update on the whole batch,
        // the selection modes rank or draw.
        std::string kind = "top_loss";
        if (mode == "standard" || mode == "robust") kind = "all";
        if (mode == "random_robust") kind = "random";
        if (ov.pup && kind == "all") kind = "top_loss";
        train["policy"]["kind"] = kind;
    }
    if (ov.pup) {
        train["policy"]["schedule"] = "fixed";
        train["policy"]["pup"] = *ov.pup;
    }
    if (ov.out_dir) root["out_dir"] = *ov.out_dir;

    return advsel::run_config_from_json(root);
}

struct PreparedData {
    advsel::Dataset full;
    advsel::SplitResult splits;

    const advsel::Dataset& eval_set() const {
        return splits.validation.size() > 0 ? splits.validation : splits.test;
    }
    const advsel::Dataset& by_name(const std::string& name) const {
        if (name == "train") return splits.train;
        if (name == "validation") return splits.validation;
        if (name == "test") return splits.test;
        if (name == "full") return full;
        throw advsel::config_error("unknown split '" + name + "'");
    }
};

PreparedData prepare_data(const RunConfig& cfg) {
    PreparedData data;
    data.full = advsel::build_dataset(cfg.dataset);
    data.splits = advsel::split(data.full, cfg.split.fractions, cfg.split.seed);
    return data;
}

advsel::Model build_model(const RunConfig& cfg, const advsel::Dataset& dataset) {
    std::vector<std::size_t> dims;
    dims.push_back(dataset.feature_dim());
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(dataset.class_count);
    return advsel::init_model(dims, cfg.effective_model_seed());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw advsel::io_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw advsel::io_error("write failed for " + path.string());
}

void write_manifest(const fs::path& out_dir, const std::string& command, const RunConfig& cfg,
                    const std::vector<std::string>& label_names, const json& outputs) {
    json manifest{{"schema", 1},
                  {"command", command},
                  {"config", advsel::run_config_to_json(cfg)},
                  {"label_mapping", label_names},
                  {"outputs", outputs}};
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

int cmd_train(const std::string& config_path, const Overrides& ov) {
    RunConfig cfg = resolve_config(config_path, ov);
    PreparedData data = prepare_data(cfg);
    advsel::Model model = build_model(cfg, data.full);

    fs::create_directories(cfg.out_dir);
    fs::path out_dir(cfg.out_dir);
    fs::path metrics_path = out_dir / "metrics.jsonl";
    fs::path checkpoint_path = out_dir / "model.bin";

    std::ofstream metrics_out(metrics_path, std::ios::binary | std::ios::trunc);
    if (!metrics_out) throw advsel::io_error("cannot open " + metrics_path.string());

    std::size_t interval = cfg.train.checkpoint_interval;
    auto outcome = advsel::run_training(
        model, data.splits.train, data.eval_set(), cfg.train,
        [&](const advsel::EpochMetrics& m, const advsel::Model& current) {
            metrics_out << advsel::metrics_line(m);
            metrics_out.flush();
            std::cerr << "epoch " << m.epoch << ": standard=" << m.standard_accuracy
                      << " robust=" << m.robust_accuracy << " pup=" << m.effective_pup
                      << " backward=" << m.backward_passes << " (" << m.wall_time_sec << "s)\n";
            if (interval > 0 && m.epoch % interval == 0) {
                std::ostringstream name;
                name << "model_ep" << m.epoch << ".bin";
                advsel::save_model(current, (out_dir / name.str()).string());
            }
        });
    metrics_out.close();

    advsel::save_model(outcome.model, checkpoint_path.string());
    write_manifest(out_dir, "train", cfg, data.full.label_names,
                   json{{"metrics", metrics_path.string()},
                        {"checkpoint", checkpoint_path.string()}});

    const advsel::EpochMetrics& last = outcome.metrics.back();
    std::cout << "final standard_accuracy=" << last.standard_accuracy
              << " robust_accuracy=" << last.robust_accuracy << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& config_path, const Overrides& ov, const std::string& checkpoint,
             const std::string& split_name) {
    RunConfig cfg = resolve_config(config_path, ov, true);
    PreparedData data = prepare_data(cfg);
    const advsel::Dataset& dataset = data.by_name(split_name);
    advsel::Model model = advsel::load_model(checkpoint);

    double standard = advsel::evaluate(model, dataset);
    double robust = advsel::evaluate(model, dataset, cfg.train.eval_attack);

    fs::path out_dir(ov.out_dir ? *ov.out_dir : std::string("runs/eval"));
    fs::create_directories(out_dir);
    json report{{"schema", 1},
                {"checkpoint", checkpoint},
                {"split", split_name},
                {"samples", dataset.size()},
                {"standard_accuracy", standard},
                {"robust_accuracy", robust},
                {"attack",
                 json{{"epsilon", cfg.train.eval_attack.epsilon},
                      {"alpha", cfg.train.eval_attack.alpha},
                      {"steps", cfg.train.eval_attack.steps}}}};
    write_text(out_dir / "eval.json", report.dump(2) + "\n");
    write_manifest(out_dir, "eval", cfg, data.full.label_names,
                   json{{"report", (out_dir / "eval.json").string()}});

    std::cout << "standard_accuracy=" << standard << " robust_accuracy=" << robust << "\n";
    return kExitOk;
}

int cmd_attack(const std::string& config_path, const Overrides& ov, const std::string& checkpoint,
               const std::string& split_name) {
    RunConfig cfg = resolve_config(config_path, ov, true);
    PreparedData data = prepare_data(cfg);
    const advsel::Dataset& dataset = data.by_name(split_name);
    advsel::Model model = advsel::load_model(checkpoint);

    advsel::AttackConfig attack = cfg.train.eval_attack;
    attack.random_start = false;
    advsel::Matrix attacked = advsel::pgd(model, dataset.features, dataset.labels, attack);

    std::vector<int> clean_pred = advsel::predict_classes(advsel::forward(model, dataset.features));
    std::vector<int> adv_pred = advsel::predict_classes(advsel::forward(model, attacked));
    std::vector<double> clean_loss =
        advsel::cross_entropy(advsel::forward(model, dataset.features), dataset.labels);
    std::vector<double> adv_loss =
        advsel::cross_entropy(advsel::forward(model, attacked), dataset.labels);

    fs::path out_dir(ov.out_dir ? *ov.out_dir : std::string("runs/attack"));
    fs::create_directories(out_dir);

    advsel::Dataset attacked_set = dataset;
    attacked_set.features = attacked;
    fs::path data_path = out_dir / "attacked.bin";
    advsel::save_dataset(attacked_set, data_path.string());

    fs::path report_path = out_dir / "report.jsonl";
    std::ofstream report(report_path, std::ios::binary);
    if (!report) throw advsel::io_error("cannot open " + report_path.string());
    std::size_t flipped = 0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        double linf = 0.0;
        for (std::size_t j = 0; j < dataset.feature_dim(); ++j) {
            linf = std::max(linf, std::fabs(attacked.at(i, j) - dataset.features.at(i, j)));
        }
        bool flip = adv_pred[i] != clean_pred[i];
        if (flip) ++flipped;
        if (adv_pred[i] == dataset.labels[i]) ++correct;
        report << json{{"index", i},
                       {"label", dataset.labels[i]},
                       {"pred_clean", clean_pred[i]},
                       {"pred_attacked", adv_pred[i]},
                       {"flipped", flip},
                       {"loss_clean", clean_loss[i]},
                       {"loss_attacked", adv_loss[i]},
                       {"linf", linf}}
                      .dump()
               << "\n";
    }
    report.close();

    double robust_acc = static_cast<double>(correct) / static_cast<double>(dataset.size());
    write_manifest(out_dir, "attack", cfg, data.full.label_names,
                   json{{"attacked_dataset", data_path.string()}, {"report", report_path.string()}});
    std::cout << "flip_rate=" << (static_cast<double>(flipped) / static_cast<double>(dataset.size()))
              << " robust_accuracy=" << robust_acc << "\n";
    return kExitOk;
}

int cmd_sweep_pup(const std::string& config_path, const Overrides& ov,
                  const std::vector<double>& pups) {
    if (pups.empty()) throw advsel::config_error("sweep-pup: need at least one --pups value");
    fs::path out_dir(ov.out_dir ? *ov.out_dir : std::string("runs/sweep"));
    fs::create_directories(out_dir);

    std::ostringstream table;
    table << "pup,standard_accuracy,robust_accuracy,total_backward_passes\n";
    RunConfig manifest_cfg;
    std::vector<std::string> label_names;
    for (double pup : pups) {
        Overrides run_ov = ov;
        run_ov.pup = pup;
        RunConfig cfg = resolve_config(config_path, run_ov);
        if (cfg.train.policy.kind == advsel::SelectionKind::all) {
            cfg.train.policy.kind = advsel::SelectionKind::top_loss;
        }
        PreparedData data = prepare_data(cfg);
        advsel::Model model = build_model(cfg, data.full);
        auto outcome = advsel::run_training(model, data.splits.train, data.eval_set(), cfg.train);
        const advsel::EpochMetrics& last = outcome.metrics.back();
        std::size_t total_backward = 0;
        for (const auto& m : outcome.metrics) total_backward += m.backward_passes;
        table << json(pup).dump() << "," << json(last.standard_accuracy).dump() << ","
              << json(last.robust_accuracy).dump() << "," << total_backward << "\n";
        std::cerr << "pup=" << pup << ": standard=" << last.standard_accuracy
                  << " robust=" << last.robust_accuracy << " backward=" << total_backward << "\n";
        manifest_cfg = cfg;
        label_names = data.full.label_names;
    }
    fs::path table_path = out_dir / "sweep.csv";
    write_text(table_path, table.str());
    write_manifest(out_dir, "sweep-pup", manifest_cfg, label_names,
                   json{{"table", table_path.string()}});
    std::cout << table.str();
    return kExitOk;
}

int cmd_gradcheck(const std::vector<std::size_t>& dims, std::uint64_t seed, std::size_t batch,
                  double step, double tol, const std::string& out_path, bool inject_fault) {
    if (dims.size() < 2) throw advsel::config_error("gradcheck: need at least two --dims entries");
    advsel::Model model = advsel::init_model(dims, seed);
    advsel::Rng rng(advsel::mix_seed(seed, 0xdadaull));
    advsel::Matrix inputs(batch, dims.front());
    for (double& v : inputs.data) v = rng.uniform01();
    std::vector<int> labels(batch);
    for (auto& y : labels) y = static_cast<int>(rng.below(dims.back()));

    std::vector<double> ones(batch, 1.0);
    advsel::Gradients analytic = advsel::param_grad(model, inputs, labels, ones);
    if (inject_fault) {
        analytic.weights[0].data[0] += 1e-2; // deliberate corruption, for testing the gate
    }
    advsel::Gradients numeric = advsel::finite_diff_param_grad(model, inputs, labels, step);
    advsel::GradCompareReport params = advsel::compare_gradients(model, analytic, numeric, 1e-3);

    advsel::InputGradResult ig = advsel::loss_and_input_grad(model, inputs, labels);
    advsel::Matrix ig_numeric = advsel::finite_diff_input_grad(model, inputs, labels, step);
    double input_worst = 0.0;
    std::size_t worst_row = 0, worst_col = 0;
    for (std::size_t i = 0; i < ig.grad_inputs.rows; ++i) {
        for (std::size_t j = 0; j < ig.grad_inputs.cols; ++j) {
            double a = ig.grad_inputs.at(i, j);
            double n = ig_numeric.at(i, j);
            double rel = std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), 1e-3});
            if (rel > input_worst) {
                input_worst = rel;
                worst_row = i;
                worst_col = j;
            }
        }
    }

    double overall = std::max(params.max_rel_err, input_worst);
    json layers = json::array();
    for (const auto& e : params.per_layer_worst) {
        layers.push_back(json{{"layer", e.layer},
                              {"kind", e.is_bias ? "bias" : "weight"},
                              {"row", e.row},
                              {"col", e.col},
                              {"analytic", e.analytic},
                              {"numeric", e.numeric},
                              {"rel_err", e.rel_err}});
    }
    json report{{"schema", 1},
                {"dims", dims},
                {"seed", seed},
                {"batch", batch},
                {"step", step},
                {"tolerance", tol},
                {"max_rel_err", overall},
                {"param_layers", layers},
                {"input_grad", json{{"max_rel_err", input_worst},
                                    {"worst_row", worst_row},
                                    {"worst_col", worst_col}}},
                {"pass", overall < tol}};
    if (!out_path.empty()) {
        write_text(out_path, report.dump(2) + "\n");
    }
    std::cout << report.dump(2) << "\n";
    return overall < tol ? kExitOk : kExitRuntime;
}

int cmd_export_curves(const std::string& metrics_path, const std::string& out_path) {
    std::ifstream in(metrics_path);
    if (!in) throw advsel::io_error("cannot open " + metrics_path);
    std::ostringstream csv;
    const auto header = advsel::curves_csv_header();
    for (std::size_t i = 0; i < header.size(); ++i) {
        csv << (i ? "," : "") << header[i];
    }
    csv << "\n";
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw advsel::io_error(metrics_path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        csv << advsel::curves_csv_row(record) << "\n";
    }
    write_text(out_path, csv.str());
    std::cout << "wrote " << out_path << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adversarial training with loss-ranked mini-batch data selection"};
    app.require_subcommand(1);

    std::string config_path;
    std::string checkpoint;
    std::string split_name = "test";
    std::vector<double> pups;
    std::vector<std::size_t> gc_dims{8, 16, 16, 3};
    std::uint64_t gc_seed = 7;
    std::size_t gc_batch = 4;
    double gc_step = 1e-4;
    double gc_tol = 1e-4;
    std::string gc_out;
    bool gc_fault = false;
    std::string metrics_path;
    std::string curves_out = "curves.csv";
    Overrides ov_train, ov_eval, ov_attack, ov_sweep;

    CLI::App* train = app.add_subcommand("train", "Train a model per the configured mode");
    train->add_option("--config", config_path, "JSON config file");
    add_override_flags(train, ov_train, true);

    CLI::App* eval = app.add_subcommand("eval", "Standard and robust accuracy of a checkpoint");
    eval->add_option("--config", config_path, "JSON config file");
    eval->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    eval->add_option("--split", split_name, "train | validation | test | full");
    add_override_flags(eval, ov_eval, false);

    CLI::App* attack = app.add_subcommand("attack", "Attack a dataset and emit a per-sample report");
    attack->add_option("--config", config_path, "JSON config file");
    attack->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    attack->add_option("--split", split_name, "train | validation | test | full");
    add_override_flags(attack, ov_attack, false);

    CLI::App* sweep = app.add_subcommand("sweep-pup", "Train once per P_up value and tabulate");
    sweep->add_option("--config", config_path, "JSON config file");
    sweep->add_option("--pups", pups, "P_up values")->required()->delimiter(',');
    add_override_flags(sweep, ov_sweep, true);

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "Verify analytic gradients against finite differences");
    gradcheck->add_option("--dims", gc_dims, "Layer dims, e.g. 8,16,16,3")->delimiter(',');
    gradcheck->add_option("--seed", gc_seed, "Model/data seed");
    gradcheck->add_option("--batch", gc_batch, "Batch size");
    gradcheck->add_option("--step", gc_step, "Central difference step");
    gradcheck->add_option("--tol", gc_tol, "Maximum allowed relative error");
    gradcheck->add_option("--report", gc_out, "Write the JSON report here");
    gradcheck->add_flag("--inject-fault", gc_fault,
                        "Corrupt the analytic gradient first (verifies the gate trips)");

    CLI::App* curves = app.add_subcommand("export-curves", "Project a metrics stream to CSV");
    curves->add_option("--metrics", metrics_path, "metrics.jsonl from a train run")->required();
    curves->add_option("--out", curves_out, "Output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (train->parsed()) return cmd_train(config_path, ov_train);
        if (eval->parsed()) return cmd_eval(config_path, ov_eval, checkpoint, split_name);
        if (attack->parsed()) return cmd_attack(config_path, ov_attack, checkpoint, split_name);
        if (sweep->parsed()) return cmd_sweep_pup(config_path, ov_sweep, pups);
        if (gradcheck->parsed()) {
            return cmd_gradcheck(gc_dims, gc_seed, gc_batch, gc_step, gc_tol, gc_out, gc_fault);
        }
        if (curves->parsed()) return cmd_export_curves(metrics_path, curves_out);
    } catch (const advsel::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
