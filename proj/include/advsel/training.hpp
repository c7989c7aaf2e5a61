#ifndef ADVSEL_TRAINING_HPP
#define ADVSEL_TRAINING_HPP

#include <functional>
#include <optional>
#include <vector>

#include "advsel/attacks.hpp"
#include "advsel/dataset.hpp"
#include "advsel/model.hpp"
#include "advsel/selection.hpp"

namespace advsel {

/// Baseline modes. standard trains on clean rows only, robust on attacked
/// rows only; ds_robust and random_robust build mixed 2b' batches with the
/// attacked counterparts first.
enum class TrainMode : std::uint8_t { standard = 0, robust = 1, ds_robust = 2, random_robust = 3 };

struct TrainConfig {
    TrainMode mode = TrainMode::ds_robust;
    std::size_t batch_clean = 128; // b'
    std::size_t epochs = 10;
    double learning_rate = 0.1;
    AttackConfig attack;
    AttackConfig eval_attack;
    SelectionPolicy policy;
    std::uint64_t seed = 1;
    std::optional<std::size_t> early_stop_patience; // on eval robust accuracy
    std::size_t probe_count = 0;                    // 0 disables min-eps probes
    EpsilonGrid probe_grid;
    std::size_t checkpoint_interval = 0; // epochs between checkpoints; 0 = final only

    void validate() const;
};

enum class Origin : std::uint8_t { clean = 0, adversarial = 1 };

/// One composed mini-batch. In the mixed modes rows [0, b') are the attacked
/// counterparts of rows [b', 2b'), matching the composition order
/// {x'_1..x'_b', x_1..x_b'} of the training procedure.
struct BatchComposition {
    Matrix inputs;
    std::vector<int> labels;
    std::vector<Origin> origin;
    std::vector<std::size_t> source_index;

    std::size_t rows() const { return inputs.rows; }
};

struct EpochMetrics {
    std::size_t epoch = 0; // 1-based
    double standard_accuracy = 0.0;
    double robust_accuracy = 0.0;
    double effective_pup = 1.0;
    std::size_t selected_clean = 0;
    std::size_t selected_adversarial = 0;
    std::size_t backward_passes = 0;
    std::size_t batches = 0;
    double mean_train_loss = 0.0;
    std::optional<double> mean_min_eps;
    std::size_t min_eps_flipped = 0;
    /// Measured, not serialized: metrics streams stay byte-identical across
    /// reruns of the same (config, seed).
    double wall_time_sec = 0.0;
};

/// Mutable cross-epoch state: the next epoch index and the adaptive
/// schedule's current fraction.
struct EpochState {
    std::size_t next_epoch = 1;
    double pup = 1.0;
};
EpochState initial_epoch_state(const TrainConfig& cfg);

/// Builds the mini-batch for the given clean sample indices per the mode.
/// Adversarial rows are generated with pgd against the current model; rng
/// feeds random starts only.
BatchComposition compose_batch(const Model& model, const Dataset& dataset,
                               const std::vector<std::size_t>& indices,
                               const AttackConfig& attack, TrainMode mode, Rng& rng);

/// Fraction of samples whose (optionally attacked) prediction matches the
/// label. Attacked evaluation always runs pgd without random start so runs
/// stay comparable.
double evaluate(const Model& model, const Dataset& dataset,
                const std::optional<AttackConfig>& attack = std::nullopt);

/// Splits a selection by row origin; returns {clean, adversarial} counts.
std::pair<std::size_t, std::size_t> selection_composition(const SelectionResult& selection,
                                                          const BatchComposition& batch);

/// One pass over the training set: per batch compose -> forward -> error
/// signal -> selection -> masked parameter update. Accuracies are measured
/// on eval_data; the adaptive schedule is advanced at epoch end.
std::pair<Model, EpochMetrics> train_epoch(const Model& model, const Dataset& train_data,
                                           const Dataset& eval_data, const TrainConfig& cfg,
                                           EpochState& state);

/// Minimum-eps diagnostics over a probe subset.
struct ProbeSummary {
    std::vector<std::optional<double>> per_sample;
    std::optional<double> mean_min_eps; // over samples with a defined eps
    std::size_t flipped_count = 0;
};
ProbeSummary min_eps_probe(const Model& model, const Dataset& dataset,
                           const std::vector<std::size_t>& probe_indices,
                           const EpsilonGrid& grid, const AttackConfig& cfg_template);

/// Probe subset drawn once per run from the evaluation set.
std::vector<std::size_t> choose_probe_indices(std::size_t dataset_size, std::size_t count,
                                              std::uint64_t seed);

/// Full run: epochs, optional per-epoch probes, optional early stopping on
/// eval robust accuracy. on_epoch (may be null) sees each record and the
/// model state as they are produced.
struct TrainOutcome {
    Model model;
    std::vector<EpochMetrics> metrics;
};
using EpochCallback = std::function<void(const EpochMetrics&, const Model&)>;
TrainOutcome run_training(const Model& initial, const Dataset& train_data,
                          const Dataset& eval_data, const TrainConfig& cfg,
                          const EpochCallback& on_epoch = nullptr);

} // namespace advsel

#endif
