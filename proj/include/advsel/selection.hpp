#ifndef ADVSEL_SELECTION_HPP
#define ADVSEL_SELECTION_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "advsel/matrix.hpp"
#include "advsel/rng.hpp"

namespace advsel {

enum class SelectionKind : std::uint8_t { all = 0, top_loss = 1, random_k = 2 };

/// Which accuracy the adaptive schedule consumes. The choice is not pinned
/// by the method itself; validation standard accuracy is the default.
enum class AccuracySource : std::uint8_t {
    validation_standard = 0,
    validation_robust = 1,
    train_standard = 2,
};

struct PupSchedule {
    enum class Kind : std::uint8_t { fixed = 0, adaptive = 1 };
    Kind kind = Kind::fixed;
    double p = 0.5;      // fixed value
    double p0 = 1.0;     // adaptive start
    double floor = 0.0;  // adaptive lower bound

    void validate() const;
};

struct SelectionPolicy {
    SelectionKind kind = SelectionKind::top_loss;
    PupSchedule pup;
    AccuracySource accuracy_source = AccuracySource::validation_standard;
    /// Audit switch: rank by the summed label-independent form of the error
    /// signal instead of per-sample cross-entropy.
    bool literal_error_signal = false;
    /// Stream seed for the random kind; defaults to the run seed.
    std::optional<std::uint64_t> seed;

    void validate() const;
};

/// Outcome of one batch selection. Indices are unique, ascending, and within
/// batch bounds; the clean/adversarial counts are filled in once the batch
/// layout is known (selection itself only sees losses).
struct SelectionResult {
    std::vector<std::size_t> selected_indices;
    std::vector<double> losses;
    std::size_t clean_selected = 0;
    std::size_t adversarial_selected = 0;

    std::size_t count() const { return selected_indices.size(); }
};

/// Number of samples a fraction keeps: max(1, ceil(pup * batch)).
std::size_t selection_count(double pup, std::size_t batch);

/// Per-sample error signal: softmax cross-entropy logsumexp(z) - z[y],
/// computed with max-subtraction. Always >= 0.
std::vector<double> error_signal(const Matrix& logits, const std::vector<int>& labels);

/// The summed form as printed: sum_c [logsumexp(z) - y_c], which for one-hot
/// labels is C * logsumexp(z) - 1 and carries no label information. Kept for
/// auditing side-by-side with error_signal.
std::vector<double> error_signal_literal(const Matrix& logits, const std::vector<int>& labels);

/// Keeps the selection_count(pup, b) highest-loss samples. Ties break by
/// ascending index; returned indices are sorted ascending.
SelectionResult select_top(const std::vector<double>& losses, double pup);

/// Uniform sample of selection_count(pup, batch) indices without
/// replacement; deterministic for a given rng state.
SelectionResult select_random(std::size_t batch, double pup, Rng& rng);

/// Accuracy-adaptive schedule: p_next = (1 - acc_prev) * p_prev, floored and
/// never increasing.
double update_pup(double p_prev, double acc_prev, double floor);

} // namespace advsel

#endif
