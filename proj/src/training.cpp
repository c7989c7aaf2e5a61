#include "advsel/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "advsel/errors.hpp"

namespace advsel {

namespace {

bool is_mixed_mode(TrainMode mode) {
    return mode == TrainMode::ds_robust || mode == TrainMode::random_robust;
}

std::size_t batch_rows_for_mode(TrainMode mode, std::size_t clean_rows) {
    return is_mixed_mode(mode) ? 2 * clean_rows : clean_rows;
}

double accuracy_for_source(AccuracySource source, double eval_standard, double eval_robust,
                           double train_standard) {
    switch (source) {
        case AccuracySource::validation_standard: return eval_standard;
        case AccuracySource::validation_robust: return eval_robust;
        case AccuracySource::train_standard: return train_standard;
    }
    return eval_standard;
}

} // namespace

void TrainConfig::validate() const {
    if (batch_clean < 1) throw value_error("train config: batch size must be >= 1");
    if (epochs < 1) throw value_error("train config: epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw value_error("train config: learning rate must be > 0");
    attack.validate();
    eval_attack.validate();
    policy.validate();
    if (probe_count > 0 && probe_grid.empty()) {
        throw value_error("train config: probes enabled but epsilon grid is empty");
    }
}

EpochState initial_epoch_state(const TrainConfig& cfg) {
    EpochState state;
    state.pup = cfg.policy.pup.kind == PupSchedule::Kind::fixed ? cfg.policy.pup.p
                                                                : cfg.policy.pup.p0;
    return state;
}

BatchComposition compose_batch(const Model& model, const Dataset& dataset,
                               const std::vector<std::size_t>& indices,
                               const AttackConfig& attack, TrainMode mode, Rng& rng) {
    if (indices.empty()) throw value_error("compose_batch: no sample indices");
    const std::size_t clean_rows = indices.size();
    const std::size_t dims = dataset.feature_dim();

    Matrix clean(clean_rows, dims);
    std::vector<int> labels(clean_rows);
    for (std::size_t i = 0; i < clean_rows; ++i) {
        std::size_t src = indices[i];
        if (src >= dataset.size()) throw value_error("compose_batch: index out of range");
        std::copy(dataset.features.row(src), dataset.features.row(src) + dims, clean.row(i));
        labels[i] = dataset.labels[src];
    }

    BatchComposition batch;
    if (mode == TrainMode::standard) {
        batch.inputs = std::move(clean);
        batch.labels = std::move(labels);
        batch.origin.assign(clean_rows, Origin::clean);
        batch.source_index = indices;
        return batch;
    }

    Matrix attacked = pgd(model, clean, labels, attack, rng);
    if (mode == TrainMode::robust) {
        batch.inputs = std::move(attacked);
        batch.labels = std::move(labels);
        batch.origin.assign(clean_rows, Origin::adversarial);
        batch.source_index = indices;
        return batch;
    }

    // Mixed modes: attacked counterparts first, then their clean sources.
    batch.inputs = Matrix(2 * clean_rows, dims);
    std::copy(attacked.data.begin(), attacked.data.end(), batch.inputs.data.begin());
    std::copy(clean.data.begin(), clean.data.end(),
              batch.inputs.data.begin() + static_cast<std::ptrdiff_t>(clean_rows * dims));
    batch.labels.resize(2 * clean_rows);
    std::copy(labels.begin(), labels.end(), batch.labels.begin());
    std::copy(labels.begin(), labels.end(), batch.labels.begin() + static_cast<std::ptrdiff_t>(clean_rows));
    batch.origin.assign(2 * clean_rows, Origin::clean);
    std::fill(batch.origin.begin(), batch.origin.begin() + static_cast<std::ptrdiff_t>(clean_rows),
              Origin::adversarial);
    batch.source_index.resize(2 * clean_rows);
    std::copy(indices.begin(), indices.end(), batch.source_index.begin());
    std::copy(indices.begin(), indices.end(),
              batch.source_index.begin() + static_cast<std::ptrdiff_t>(clean_rows));
    return batch;
}

double evaluate(const Model& model, const Dataset& dataset,
                const std::optional<AttackConfig>& attack) {
    if (dataset.size() == 0) throw value_error("evaluate: empty dataset");
    Matrix inputs = dataset.features;
    if (attack) {
        AttackConfig cfg = *attack;
        cfg.random_start = false; // comparable across runs
        inputs = pgd(model, inputs, dataset.labels, cfg);
    }
    std::vector<int> preds = predict_classes(forward(model, inputs));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] == dataset.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

std::pair<std::size_t, std::size_t> selection_composition(const SelectionResult& selection,
                                                          const BatchComposition& batch) {
    std::size_t clean = 0;
    std::size_t adversarial = 0;
    for (std::size_t idx : selection.selected_indices) {
        if (idx >= batch.rows()) throw value_error("selection_composition: index out of range");
        if (batch.origin[idx] == Origin::clean) {
            ++clean;
        } else {
            ++adversarial;
        }
    }
    return {clean, adversarial};
}

std::pair<Model, EpochMetrics> train_epoch(const Model& model, const Dataset& train_data,
                                           const Dataset& eval_data, const TrainConfig& cfg,
                                           EpochState& state) {
    cfg.validate();
    if (train_data.size() == 0) throw value_error("train_epoch: empty training set");
    auto t0 = std::chrono::steady_clock::now();

    const std::size_t epoch = state.next_epoch;
    Rng epoch_rng(mix_seed(cfg.seed, epoch));
    Rng selection_rng(mix_seed(mix_seed(cfg.policy.seed.value_or(cfg.seed), 0x5e1ecull), epoch));

    std::vector<std::size_t> perm(train_data.size());
    std::iota(perm.begin(), perm.end(), 0);
    epoch_rng.shuffle(perm);

    const double pup = cfg.policy.kind == SelectionKind::all ? 1.0 : state.pup;

    Model current = model;
    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.effective_pup = pup;
    double loss_sum = 0.0;

    for (std::size_t start = 0; start < perm.size(); start += cfg.batch_clean) {
        std::size_t end = std::min(start + cfg.batch_clean, perm.size());
        std::vector<std::size_t> indices(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                         perm.begin() + static_cast<std::ptrdiff_t>(end));
        BatchComposition batch =
            compose_batch(current, train_data, indices, cfg.attack, cfg.mode, epoch_rng);

        Matrix logits = forward(current, batch.inputs);
        std::vector<double> losses = cfg.policy.literal_error_signal
                                         ? error_signal_literal(logits, batch.labels)
                                         : error_signal(logits, batch.labels);

        SelectionResult selection;
        switch (cfg.policy.kind) {
            case SelectionKind::all: {
                selection.selected_indices.resize(batch.rows());
                std::iota(selection.selected_indices.begin(), selection.selected_indices.end(), 0);
                selection.losses = losses;
                break;
            }
            case SelectionKind::top_loss:
                selection = select_top(losses, pup);
                break;
            case SelectionKind::random_k:
                selection = select_random(batch.rows(), pup, selection_rng);
                selection.losses = losses;
                break;
        }
        auto [clean_count, adv_count] = selection_composition(selection, batch);
        selection.clean_selected = clean_count;
        selection.adversarial_selected = adv_count;

        std::vector<double> mask(batch.rows(), 0.0);
        for (std::size_t idx : selection.selected_indices) mask[idx] = 1.0;
        Gradients grads = param_grad(current, batch.inputs, batch.labels, mask);
        current = sgd_step(current, grads, cfg.learning_rate);

        metrics.backward_passes += selection.count();
        metrics.selected_clean += clean_count;
        metrics.selected_adversarial += adv_count;
        metrics.batches += 1;
        double batch_mean = 0.0;
        for (double v : losses) batch_mean += v;
        loss_sum += batch_mean / static_cast<double>(losses.size());
    }

    metrics.mean_train_loss = loss_sum / static_cast<double>(metrics.batches);
    metrics.standard_accuracy = evaluate(current, eval_data);
    metrics.robust_accuracy = evaluate(current, eval_data, cfg.eval_attack);

    // Advance the adaptive schedule with this epoch's accuracy.
    if (cfg.policy.pup.kind == PupSchedule::Kind::adaptive && cfg.policy.kind != SelectionKind::all) {
        double train_standard = evaluate(current, train_data);
        double acc = accuracy_for_source(cfg.policy.accuracy_source, metrics.standard_accuracy,
                                         metrics.robust_accuracy, train_standard);
        std::size_t full_batch = batch_rows_for_mode(cfg.mode, cfg.batch_clean);
        double floor = std::max(cfg.policy.pup.floor, 1.0 / static_cast<double>(full_batch));
        state.pup = update_pup(state.pup, acc, floor);
    }
    state.next_epoch = epoch + 1;

    metrics.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(current), metrics};
}

ProbeSummary min_eps_probe(const Model& model, const Dataset& dataset,
                           const std::vector<std::size_t>& probe_indices, const EpsilonGrid& grid,
                           const AttackConfig& cfg_template) {
    if (grid.empty()) throw value_error("min_eps_probe: empty grid");
    ProbeSummary summary;
    summary.per_sample.reserve(probe_indices.size());
    double total = 0.0;
    for (std::size_t idx : probe_indices) {
        if (idx >= dataset.size()) throw value_error("min_eps_probe: index out of range");
        Matrix row(1, dataset.feature_dim());
        std::copy(dataset.features.row(idx), dataset.features.row(idx) + dataset.feature_dim(),
                  row.row(0));
        std::optional<double> eps =
            min_adversarial_eps(model, row, dataset.labels[idx], grid, cfg_template);
        if (eps) {
            total += *eps;
            ++summary.flipped_count;
        }
        summary.per_sample.push_back(eps);
    }
    if (summary.flipped_count > 0) {
        summary.mean_min_eps = total / static_cast<double>(summary.flipped_count);
    }
    return summary;
}

std::vector<std::size_t> choose_probe_indices(std::size_t dataset_size, std::size_t count,
                                              std::uint64_t seed) {
    std::vector<std::size_t> all(dataset_size);
    std::iota(all.begin(), all.end(), 0);
    Rng rng(mix_seed(seed, 0x9e0beull));
    rng.shuffle(all);
    all.resize(std::min(count, dataset_size));
    std::sort(all.begin(), all.end());
    return all;
}

TrainOutcome run_training(const Model& initial, const Dataset& train_data,
                          const Dataset& eval_data, const TrainConfig& cfg,
                          const EpochCallback& on_epoch) {
    cfg.validate();
    TrainOutcome outcome;
    outcome.model = initial;
    EpochState state = initial_epoch_state(cfg);
    std::vector<std::size_t> probes;
    if (cfg.probe_count > 0) {
        probes = choose_probe_indices(eval_data.size(), cfg.probe_count, cfg.seed);
    }

    double best_robust = -1.0;
    std::size_t epochs_since_best = 0;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        auto [next_model, metrics] = train_epoch(outcome.model, train_data, eval_data, cfg, state);
        outcome.model = std::move(next_model);
        if (!probes.empty()) {
            ProbeSummary probe =
                min_eps_probe(outcome.model, eval_data, probes, cfg.probe_grid, cfg.attack);
            metrics.mean_min_eps = probe.mean_min_eps;
            metrics.min_eps_flipped = probe.flipped_count;
        }
        outcome.metrics.push_back(metrics);
        if (on_epoch) on_epoch(outcome.metrics.back(), outcome.model);

        if (cfg.early_stop_patience) {
            if (metrics.robust_accuracy > best_robust) {
                best_robust = metrics.robust_accuracy;
                epochs_since_best = 0;
            } else {
                ++epochs_since_best;
                if (epochs_since_best >= *cfg.early_stop_patience) break;
            }
        }
    }
    return outcome;
}

} // namespace advsel
