#pragma once

#include <cstdint>
#include <vector>

namespace keydyn {

/// Flattened feature rows with labels; synthetic rows (SMOTE output) carry a
/// provenance flag.
struct LabeledSet {
    std::size_t dim = 0;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::vector<std::uint8_t> synthetic;  // 1 for SMOTE rows

    std::size_t size() const { return rows.size(); }
    std::size_t count_label(int label) const;
    std::size_t count_synthetic() const;
    void push(std::vector<double> row, int label, bool synth = false);
};

/// Stream of `count` indices where class selection probability is
/// proportional to 1/class frequency. Reproducible under seed.
std::vector<std::size_t> weighted_sampler(const std::vector<int>& labels,
                                          std::size_t count, std::uint64_t seed);

/// SMOTE interpolation: each synthetic row is x + u*(nn - x) with u uniform
/// in [0,1) and nn one of x's k nearest minority neighbors (Euclidean).
/// k > |minority|-1 is clamped (reported via `k_clamped`).
std::vector<std::vector<double>> smote(
    const std::vector<std::vector<double>>& minority_rows,
    std::size_t target_count, int k_neighbors, std::uint64_t seed,
    bool* k_clamped = nullptr);

/// Tops positives (label 1) up to floor(ratio * negatives); no-op if already
/// at or above. Binary labels {0,1}.
LabeledSet smote_balance(const LabeledSet& set, double ratio, std::uint64_t seed,
                         int k_neighbors = 5);

/// Keeps a uniform random subset of floor(positives/ratio) negatives (capped
/// at the current count); positives untouched.
LabeledSet undersample(const LabeledSet& set, double ratio, std::uint64_t seed);

}  // namespace keydyn
