#include "advsel/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "advsel/errors.hpp"
#include "advsel/model.hpp"

namespace advsel {

void PupSchedule::validate() const {
    if (kind == Kind::fixed) {
        if (!(p > 0.0 && p <= 1.0)) throw value_error("pup schedule: fixed p must be in (0, 1]");
    } else {
        if (!(p0 > 0.0 && p0 <= 1.0)) throw value_error("pup schedule: p0 must be in (0, 1]");
        if (!(floor >= 0.0 && floor < 1.0)) throw value_error("pup schedule: floor must be in [0, 1)");
    }
}

void SelectionPolicy::validate() const { pup.validate(); }

std::size_t selection_count(double pup, std::size_t batch) {
    if (batch == 0) throw value_error("selection: empty batch");
    if (!(pup > 0.0 && pup <= 1.0)) throw value_error("selection: pup must be in (0, 1]");
    auto k = static_cast<std::size_t>(std::ceil(pup * static_cast<double>(batch)));
    k = std::min(k, batch);
    return std::max<std::size_t>(k, 1);
}

std::vector<double> error_signal(const Matrix& logits, const std::vector<int>& labels) {
    return cross_entropy(logits, labels);
}

std::vector<double> error_signal_literal(const Matrix& logits, const std::vector<int>& labels) {
    std::vector<double> ce = cross_entropy(logits, labels);
    std::vector<double> out(logits.rows);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        // logsumexp(z) = ce + z[y]; the literal sum over classes is
        // C * logsumexp(z) - sum_c y_c with one-hot y.
        double lse = ce[i] + logits.at(i, static_cast<std::size_t>(labels[i]));
        out[i] = static_cast<double>(logits.cols) * lse - 1.0;
    }
    return out;
}

SelectionResult select_top(const std::vector<double>& losses, double pup) {
    if (losses.empty()) throw value_error("select_top: empty loss vector");
    std::size_t k = selection_count(pup, losses.size());

    std::vector<std::size_t> order(losses.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return losses[a] > losses[b]; // descending; stability keeps ties by index
    });
    order.resize(k);
    std::sort(order.begin(), order.end());

    SelectionResult result;
    result.selected_indices = std::move(order);
    result.losses = losses;
    return result;
}

SelectionResult select_random(std::size_t batch, double pup, Rng& rng) {
    std::size_t k = selection_count(pup, batch);
    // Partial Fisher-Yates: the first k slots are a uniform sample without
    // replacement.
    std::vector<std::size_t> pool(batch);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.below(batch - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());

    SelectionResult result;
    result.selected_indices = std::move(pool);
    result.losses.assign(batch, 0.0);
    return result;
}

double update_pup(double p_prev, double acc_prev, double floor) {
    if (!(p_prev >= 0.0 && p_prev <= 1.0) || !(acc_prev >= 0.0 && acc_prev <= 1.0) ||
        !(floor >= 0.0 && floor < 1.0)) {
        throw value_error("update_pup: arguments must lie in [0, 1]");
    }
    double next = (1.0 - acc_prev) * p_prev;
    next = std::max(next, floor);
    return std::min(next, p_prev); // schedule never increases
}

} // namespace advsel
