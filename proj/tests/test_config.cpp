#include <doctest.h>

#include <json.hpp>

#include "advsel/errors.hpp"
#include "advsel/run_config.hpp"

using namespace advsel;
using nlohmann::json;

TEST_CASE("run config: defaults carry the evaluation attack setting") {
    RunConfig cfg = default_run_config();
    CHECK(cfg.train.attack.epsilon == doctest::Approx(8.0 / 255.0));
    CHECK(cfg.train.attack.alpha == doctest::Approx(0.01));
    CHECK(cfg.train.attack.steps == 20);
    CHECK(cfg.train.eval_attack.steps == 20);
    CHECK(cfg.train.policy.pup.p0 == 1.0);
    CHECK_NOTHROW(cfg.train.validate());
}

TEST_CASE("run config: file values override defaults, round-trips through json") {
    json j{{"train", {{"mode", "robust"},
                      {"lr", 0.05},
                      {"attack", {{"epsilon", 0.1}, {"steps", 5}}},
                      {"policy", {{"kind", "all"}}}}},
           {"split", {{"train", 0.7}, {"validation", 0.1}, {"test", 0.2}}}};
    RunConfig cfg = run_config_from_json(j);
    CHECK(cfg.train.mode == TrainMode::robust);
    CHECK(cfg.train.learning_rate == 0.05);
    CHECK(cfg.train.attack.epsilon == 0.1);
    CHECK(cfg.train.attack.steps == 5);
    CHECK(cfg.train.attack.alpha == doctest::Approx(0.01)); // untouched default
    CHECK(cfg.train.policy.kind == SelectionKind::all);
    CHECK(cfg.split.fractions.validation == 0.1);

    RunConfig rebuilt = run_config_from_json(run_config_to_json(cfg));
    CHECK(run_config_to_json(rebuilt) == run_config_to_json(cfg));
}

TEST_CASE("run config: unknown keys and bad values are config errors") {
    CHECK_THROWS_AS(run_config_from_json(json{{"trian", json::object()}}), config_error);
    CHECK_THROWS_AS(run_config_from_json(json{{"train", {{"modes", "robust"}}}}), config_error);
    CHECK_THROWS_AS(run_config_from_json(json{{"train", {{"mode", "fancy"}}}}), config_error);
    CHECK_THROWS_AS(run_config_from_json(json{{"train", {{"lr", "fast"}}}}), config_error);
    CHECK_THROWS_AS(run_config_from_json(json{{"train", {{"lr", -1.0}}}}), config_error);
    CHECK_THROWS_AS(run_config_from_json(json{{"train", {{"policy", {{"schedule", "warp"}}}}}}),
                    config_error);
}

TEST_CASE("metrics line: stable schema, wall time excluded") {
    EpochMetrics m;
    m.epoch = 3;
    m.standard_accuracy = 0.75;
    m.robust_accuracy = 0.5;
    m.effective_pup = 0.25;
    m.selected_clean = 10;
    m.selected_adversarial = 22;
    m.backward_passes = 32;
    m.batches = 4;
    m.mean_train_loss = 1.5;
    m.wall_time_sec = 123.0; // must not appear in the record

    json record = json::parse(metrics_line(m));
    CHECK(record.at("schema") == 1);
    CHECK(record.at("epoch") == 3);
    CHECK(record.at("standard_accuracy") == 0.75);
    CHECK(record.at("mean_min_eps").is_null());
    CHECK_FALSE(record.contains("wall_time_sec"));

    m.mean_min_eps = 0.125;
    CHECK(json::parse(metrics_line(m)).at("mean_min_eps") == 0.125);
}

TEST_CASE("curves csv: projection of a metrics record") {
    EpochMetrics m;
    m.epoch = 2;
    m.standard_accuracy = 0.8;
    m.robust_accuracy = 0.6;
    m.effective_pup = 0.5;
    m.selected_clean = 6;
    m.selected_adversarial = 10;
    m.backward_passes = 16;
    m.batches = 4;
    m.mean_train_loss = 0.9;
    json record = metrics_to_json(m);
    std::string row = curves_csv_row(record);
    CHECK(row == "2,0.8,0.6,0.5,6,10,1.5,2.5,16,4,0.9,,0");
    CHECK(curves_csv_header().size() == 13);
}

TEST_CASE("build_dataset: synthetic two-class default is balanced and in range") {
    RunConfig cfg = default_run_config();
    cfg.dataset.synth.samples_per_class = 30;
    Dataset data = build_dataset(cfg.dataset);
    CHECK(data.size() == 60);
    CHECK(data.class_count == 2);
    CHECK_NOTHROW(data.validate());
}
