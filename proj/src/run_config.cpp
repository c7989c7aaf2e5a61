#include "advsel/run_config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "advsel/errors.hpp"
#include "advsel/rng.hpp"

namespace advsel {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& context) {
    if (!j.is_object()) throw config_error(context + ": expected an object");
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key())) {
            throw config_error(context + ": unknown key '" + item.key() + "'");
        }
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& context) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw config_error(context + ": bad value for '" + key + "'");
    }
}

TrainMode parse_mode(const std::string& s) {
    if (s == "standard") return TrainMode::standard;
    if (s == "robust") return TrainMode::robust;
    if (s == "ds_robust") return TrainMode::ds_robust;
    if (s == "random_robust") return TrainMode::random_robust;
    throw config_error("unknown mode '" + s + "'");
}

std::string mode_name(TrainMode m) {
    switch (m) {
        case TrainMode::standard: return "standard";
        case TrainMode::robust: return "robust";
        case TrainMode::ds_robust: return "ds_robust";
        case TrainMode::random_robust: return "random_robust";
    }
    return "ds_robust";
}

SelectionKind parse_selection_kind(const std::string& s) {
    if (s == "all") return SelectionKind::all;
    if (s == "top_loss") return SelectionKind::top_loss;
    if (s == "random") return SelectionKind::random_k;
    throw config_error("unknown selection kind '" + s + "'");
}

std::string selection_kind_name(SelectionKind k) {
    switch (k) {
        case SelectionKind::all: return "all";
        case SelectionKind::top_loss: return "top_loss";
        case SelectionKind::random_k: return "random";
    }
    return "top_loss";
}

AccuracySource parse_accuracy_source(const std::string& s) {
    if (s == "validation_standard") return AccuracySource::validation_standard;
    if (s == "validation_robust") return AccuracySource::validation_robust;
    if (s == "train_standard") return AccuracySource::train_standard;
    throw config_error("unknown accuracy source '" + s + "'");
}

std::string accuracy_source_name(AccuracySource s) {
    switch (s) {
        case AccuracySource::validation_standard: return "validation_standard";
        case AccuracySource::validation_robust: return "validation_robust";
        case AccuracySource::train_standard: return "train_standard";
    }
    return "validation_standard";
}

AttackConfig parse_attack(const json& j, const AttackConfig& defaults, const std::string& context) {
    check_keys(j, {"epsilon", "alpha", "steps", "random_start", "clip_min", "clip_max"}, context);
    AttackConfig cfg = defaults;
    cfg.epsilon = get_or(j, "epsilon", cfg.epsilon, context);
    cfg.alpha = get_or(j, "alpha", cfg.alpha, context);
    cfg.steps = get_or(j, "steps", cfg.steps, context);
    cfg.random_start = get_or(j, "random_start", cfg.random_start, context);
    cfg.clip_min = get_or(j, "clip_min", cfg.clip_min, context);
    cfg.clip_max = get_or(j, "clip_max", cfg.clip_max, context);
    return cfg;
}

json attack_to_json(const AttackConfig& cfg) {
    return json{{"epsilon", cfg.epsilon},   {"alpha", cfg.alpha},
                {"steps", cfg.steps},       {"random_start", cfg.random_start},
                {"clip_min", cfg.clip_min}, {"clip_max", cfg.clip_max}};
}

} // namespace

std::uint64_t RunConfig::effective_model_seed() const {
    return model_init_seed ? *model_init_seed : mix_seed(train.seed, 0x30de1ull);
}

RunConfig default_run_config() { return RunConfig{}; }

RunConfig run_config_from_json(const json& root) {
    RunConfig cfg;
    check_keys(root, {"dataset", "split", "model", "train", "out_dir"}, "config");

    if (root.contains("dataset")) {
        const json& d = root.at("dataset");
        check_keys(d, {"kind", "synth", "idx", "csv", "cache"}, "dataset");
        std::string kind = get_or<std::string>(d, "kind", "synth", "dataset");
        if (kind == "synth") {
            cfg.dataset.kind = DatasetSpec::Kind::synth;
        } else if (kind == "idx") {
            cfg.dataset.kind = DatasetSpec::Kind::idx;
        } else if (kind == "csv") {
            cfg.dataset.kind = DatasetSpec::Kind::csv;
        } else if (kind == "cache") {
            cfg.dataset.kind = DatasetSpec::Kind::cache;
        } else {
            throw config_error("dataset: unknown kind '" + kind + "'");
        }
        if (d.contains("synth")) {
            const json& s = d.at("synth");
            check_keys(s, {"seed", "samples_per_class", "dims", "classes", "sigma", "separation", "means"},
                       "dataset.synth");
            SynthSpec& sy = cfg.dataset.synth;
            sy.seed = get_or(s, "seed", sy.seed, "dataset.synth");
            sy.samples_per_class = get_or(s, "samples_per_class", sy.samples_per_class, "dataset.synth");
            sy.dims = get_or(s, "dims", sy.dims, "dataset.synth");
            sy.classes = get_or(s, "classes", sy.classes, "dataset.synth");
            sy.sigma = get_or(s, "sigma", sy.sigma, "dataset.synth");
            sy.separation = get_or(s, "separation", sy.separation, "dataset.synth");
            if (s.contains("means") && !s.at("means").is_null()) {
                try {
                    sy.means = s.at("means").get<std::vector<std::vector<double>>>();
                } catch (const json::exception&) {
                    throw config_error("dataset.synth: bad value for 'means'");
                }
            }
        }
        if (d.contains("idx")) {
            const json& s = d.at("idx");
            check_keys(s, {"images", "labels"}, "dataset.idx");
            cfg.dataset.idx_images = get_or<std::string>(s, "images", "", "dataset.idx");
            cfg.dataset.idx_labels = get_or<std::string>(s, "labels", "", "dataset.idx");
        }
        if (d.contains("csv")) {
            const json& s = d.at("csv");
            check_keys(s, {"path", "label_column"}, "dataset.csv");
            cfg.dataset.csv_path = get_or<std::string>(s, "path", "", "dataset.csv");
            cfg.dataset.csv_label_column =
                get_or<std::string>(s, "label_column", cfg.dataset.csv_label_column, "dataset.csv");
        }
        if (d.contains("cache")) {
            const json& s = d.at("cache");
            check_keys(s, {"path"}, "dataset.cache");
            cfg.dataset.cache_path = get_or<std::string>(s, "path", "", "dataset.cache");
        }
    }

    if (root.contains("split")) {
        const json& s = root.at("split");
        check_keys(s, {"train", "validation", "test", "seed"}, "split");
        cfg.split.fractions.train = get_or(s, "train", cfg.split.fractions.train, "split");
        cfg.split.fractions.validation =
            get_or(s, "validation", cfg.split.fractions.validation, "split");
        cfg.split.fractions.test = get_or(s, "test", cfg.split.fractions.test, "split");
        cfg.split.seed = get_or(s, "seed", cfg.split.seed, "split");
    }

    if (root.contains("model")) {
        const json& m = root.at("model");
        check_keys(m, {"hidden", "init_seed"}, "model");
        cfg.hidden = get_or(m, "hidden", cfg.hidden, "model");
        if (m.contains("init_seed") && !m.at("init_seed").is_null()) {
            cfg.model_init_seed = get_or<std::uint64_t>(m, "init_seed", 0, "model");
        }
    }

    if (root.contains("train")) {
        const json& t = root.at("train");
        check_keys(t,
                   {"mode", "batch", "epochs", "lr", "seed", "attack", "eval_attack", "policy",
                    "early_stop_patience", "probe", "checkpoint_interval"},
                   "train");
        TrainConfig& tc = cfg.train;
        tc.mode = parse_mode(get_or<std::string>(t, "mode", mode_name(tc.mode), "train"));
        tc.batch_clean = get_or(t, "batch", tc.batch_clean, "train");
        tc.epochs = get_or(t, "epochs", tc.epochs, "train");
        tc.learning_rate = get_or(t, "lr", tc.learning_rate, "train");
        tc.seed = get_or(t, "seed", tc.seed, "train");
        if (t.contains("attack")) tc.attack = parse_attack(t.at("attack"), tc.attack, "train.attack");
        if (t.contains("eval_attack")) {
            tc.eval_attack = parse_attack(t.at("eval_attack"), tc.eval_attack, "train.eval_attack");
        }
        if (t.contains("policy")) {
            const json& p = t.at("policy");
            check_keys(p,
                       {"kind", "schedule", "pup", "p0", "floor", "accuracy_source",
                        "literal_error_signal", "seed"},
                       "train.policy");
            SelectionPolicy& pol = tc.policy;
            pol.kind = parse_selection_kind(
                get_or<std::string>(p, "kind", selection_kind_name(pol.kind), "train.policy"));
            std::string schedule = get_or<std::string>(p, "schedule", "fixed", "train.policy");
            if (schedule == "fixed") {
                pol.pup.kind = PupSchedule::Kind::fixed;
            } else if (schedule == "adaptive") {
                pol.pup.kind = PupSchedule::Kind::adaptive;
            } else {
                throw config_error("train.policy: unknown schedule '" + schedule + "'");
            }
            pol.pup.p = get_or(p, "pup", pol.pup.p, "train.policy");
            pol.pup.p0 = get_or(p, "p0", pol.pup.p0, "train.policy");
            pol.pup.floor = get_or(p, "floor", pol.pup.floor, "train.policy");
            pol.accuracy_source = parse_accuracy_source(get_or<std::string>(
                p, "accuracy_source", accuracy_source_name(pol.accuracy_source), "train.policy"));
            pol.literal_error_signal =
                get_or(p, "literal_error_signal", pol.literal_error_signal, "train.policy");
            if (p.contains("seed") && !p.at("seed").is_null()) {
                pol.seed = get_or<std::uint64_t>(p, "seed", 0, "train.policy");
            }
        }
        if (t.contains("early_stop_patience") && !t.at("early_stop_patience").is_null()) {
            tc.early_stop_patience =
                get_or<std::size_t>(t, "early_stop_patience", 0, "train");
        }
        if (t.contains("probe")) {
            const json& p = t.at("probe");
            check_keys(p, {"count", "grid"}, "train.probe");
            tc.probe_count = get_or<std::size_t>(p, "count", tc.probe_count, "train.probe");
            if (p.contains("grid")) {
                try {
                    tc.probe_grid = EpsilonGrid(p.at("grid").get<std::vector<double>>());
                } catch (const json::exception&) {
                    throw config_error("train.probe: bad value for 'grid'");
                } catch (const value_error& e) {
                    throw config_error(std::string("train.probe: ") + e.what());
                }
            }
        }
        tc.checkpoint_interval = get_or(t, "checkpoint_interval", tc.checkpoint_interval, "train");
    }

    cfg.out_dir = get_or<std::string>(root, "out_dir", cfg.out_dir, "config");

    try {
        cfg.train.validate();
    } catch (const error& e) {
        throw config_error(e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file " + path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw config_error(path + ": " + e.what());
    }
    return run_config_from_json(root);
}

json run_config_to_json(const RunConfig& cfg) {
    json synth{{"seed", cfg.dataset.synth.seed},
               {"samples_per_class", cfg.dataset.synth.samples_per_class},
               {"dims", cfg.dataset.synth.dims},
               {"classes", cfg.dataset.synth.classes},
               {"sigma", cfg.dataset.synth.sigma},
               {"separation", cfg.dataset.synth.separation},
               {"means", cfg.dataset.synth.means ? json(*cfg.dataset.synth.means) : json(nullptr)}};
    std::string kind;
    switch (cfg.dataset.kind) {
        case DatasetSpec::Kind::synth: kind = "synth"; break;
        case DatasetSpec::Kind::idx: kind = "idx"; break;
        case DatasetSpec::Kind::csv: kind = "csv"; break;
        case DatasetSpec::Kind::cache: kind = "cache"; break;
    }
    json dataset{{"kind", kind},
                 {"synth", synth},
                 {"idx", json{{"images", cfg.dataset.idx_images}, {"labels", cfg.dataset.idx_labels}}},
                 {"csv", json{{"path", cfg.dataset.csv_path},
                              {"label_column", cfg.dataset.csv_label_column}}},
                 {"cache", json{{"path", cfg.dataset.cache_path}}}};
    json policy{{"kind", selection_kind_name(cfg.train.policy.kind)},
                {"schedule",
                 cfg.train.policy.pup.kind == PupSchedule::Kind::fixed ? "fixed" : "adaptive"},
                {"pup", cfg.train.policy.pup.p},
                {"p0", cfg.train.policy.pup.p0},
                {"floor", cfg.train.policy.pup.floor},
                {"accuracy_source", accuracy_source_name(cfg.train.policy.accuracy_source)},
                {"literal_error_signal", cfg.train.policy.literal_error_signal},
                {"seed", cfg.train.policy.seed ? json(*cfg.train.policy.seed) : json(nullptr)}};
    json train{{"mode", mode_name(cfg.train.mode)},
               {"batch", cfg.train.batch_clean},
               {"epochs", cfg.train.epochs},
               {"lr", cfg.train.learning_rate},
               {"seed", cfg.train.seed},
               {"attack", attack_to_json(cfg.train.attack)},
               {"eval_attack", attack_to_json(cfg.train.eval_attack)},
               {"policy", policy},
               {"early_stop_patience", cfg.train.early_stop_patience
                                           ? json(*cfg.train.early_stop_patience)
                                           : json(nullptr)},
               {"probe", json{{"count", cfg.train.probe_count},
                              {"grid", cfg.train.probe_grid.values}}},
               {"checkpoint_interval", cfg.train.checkpoint_interval}};
    return json{{"dataset", dataset},
                {"split", json{{"train", cfg.split.fractions.train},
                               {"validation", cfg.split.fractions.validation},
                               {"test", cfg.split.fractions.test},
                               {"seed", cfg.split.seed}}},
                {"model", json{{"hidden", cfg.hidden},
                               {"init_seed", cfg.model_init_seed ? json(*cfg.model_init_seed)
                                                                 : json(nullptr)}}},
                {"train", train},
                {"out_dir", cfg.out_dir}};
}

Dataset build_dataset(const DatasetSpec& spec) {
    switch (spec.kind) {
        case DatasetSpec::Kind::idx: return load_idx(spec.idx_images, spec.idx_labels);
        case DatasetSpec::Kind::csv: return load_csv(spec.csv_path, spec.csv_label_column);
        case DatasetSpec::Kind::cache: return load_dataset(spec.cache_path);
        case DatasetSpec::Kind::synth: break;
    }
    const SynthSpec& sy = spec.synth;
    std::vector<std::vector<double>> means;
    if (sy.means) {
        means = *sy.means;
    } else if (sy.classes == 2) {
        means.assign(2, std::vector<double>(sy.dims, 0.5));
        for (std::size_t d = 0; d < sy.dims; ++d) {
            means[0][d] = 0.5 - sy.separation / 2.0;
            means[1][d] = 0.5 + sy.separation / 2.0;
        }
    } else {
        Rng rng(mix_seed(sy.seed, 0xb10bull));
        means.assign(sy.classes, std::vector<double>(sy.dims, 0.0));
        for (auto& mean : means) {
            for (double& v : mean) v = rng.uniform(0.25, 0.75);
        }
    }
    return synth_gaussians(sy.seed, sy.samples_per_class, sy.dims, means, sy.sigma);
}

json metrics_to_json(const EpochMetrics& m) {
    return json{{"schema", 1},
                {"epoch", m.epoch},
                {"standard_accuracy", m.standard_accuracy},
                {"robust_accuracy", m.robust_accuracy},
                {"effective_pup", m.effective_pup},
                {"selected_clean", m.selected_clean},
                {"selected_adversarial", m.selected_adversarial},
                {"backward_passes", m.backward_passes},
                {"batches", m.batches},
                {"mean_train_loss", m.mean_train_loss},
                {"mean_min_eps", m.mean_min_eps ? json(*m.mean_min_eps) : json(nullptr)},
                {"min_eps_flipped", m.min_eps_flipped}};
}

std::string metrics_line(const EpochMetrics& m) { return metrics_to_json(m).dump() + "\n"; }

std::vector<std::string> curves_csv_header() {
    return {"epoch",
            "standard_accuracy",
            "robust_accuracy",
            "effective_pup",
            "selected_clean",
            "selected_adversarial",
            "selected_clean_mean",
            "selected_adversarial_mean",
            "backward_passes",
            "batches",
            "mean_train_loss",
            "mean_min_eps",
            "min_eps_flipped"};
}

namespace {

std::string csv_number(const json& v) {
    if (v.is_null()) return "";
    return v.dump(); // identical formatting to the metrics stream
}

} // namespace

std::string curves_csv_row(const json& record) {
    double batches = record.at("batches").get<double>();
    json clean_mean = record.at("selected_clean").get<double>() / batches;
    json adv_mean = record.at("selected_adversarial").get<double>() / batches;
    std::string row;
    row += csv_number(record.at("epoch"));
    row += "," + csv_number(record.at("standard_accuracy"));
    row += "," + csv_number(record.at("robust_accuracy"));
    row += "," + csv_number(record.at("effective_pup"));
    row += "," + csv_number(record.at("selected_clean"));
    row += "," + csv_number(record.at("selected_adversarial"));
    row += "," + csv_number(clean_mean);
    row += "," + csv_number(adv_mean);
    row += "," + csv_number(record.at("backward_passes"));
    row += "," + csv_number(record.at("batches"));
    row += "," + csv_number(record.at("mean_train_loss"));
    row += "," + csv_number(record.at("mean_min_eps"));
    row += "," + csv_number(record.at("min_eps_flipped"));
    return row;
}

} // namespace advsel
