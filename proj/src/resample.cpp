#include "keydyn/resample.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

namespace keydyn {

std::size_t LabeledSet::count_label(int label) const {
    return static_cast<std::size_t>(
        std::count(labels.begin(), labels.end(), label));
}

std::size_t LabeledSet::count_synthetic() const {
    return static_cast<std::size_t>(
        std::count(synthetic.begin(), synthetic.end(), std::uint8_t{1}));
}

void LabeledSet::push(std::vector<double> row, int label, bool synth) {
    if (dim == 0) dim = row.size();
    if (row.size() != dim)
        throw std::invalid_argument("LabeledSet: row dimensionality mismatch");
    rows.push_back(std::move(row));
    labels.push_back(label);
    synthetic.push_back(synth ? 1 : 0);
}

std::vector<std::size_t> weighted_sampler(const std::vector<int>& labels,
                                          std::size_t count,
                                          std::uint64_t seed) {
    if (labels.empty()) throw std::invalid_argument("weighted_sampler: empty labels");
    std::map<int, std::size_t> freq;
    for (int l : labels) ++freq[l];
    for (const auto& [l, n] : freq)
        if (n == 0) throw std::invalid_argument("weighted_sampler: empty class");

    std::vector<double> weights(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        weights[i] = 1.0 / static_cast<double>(freq.at(labels[i]));

    std::mt19937_64 rng(seed);
    std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
    std::vector<std::size_t> out(count);
    for (auto& i : out) i = dist(rng);
    return out;
}

std::vector<std::vector<double>> smote(
    const std::vector<std::vector<double>>& minority_rows,
    std::size_t target_count, int k_neighbors, std::uint64_t seed,
    bool* k_clamped) {
    if (minority_rows.size() < 2)
        throw std::invalid_argument("smote: need at least 2 minority rows");
    if (k_neighbors < 1)
        throw std::invalid_argument("smote: k_neighbors must be >= 1");
    const std::size_t n = minority_rows.size();
    const std::size_t dim = minority_rows.front().size();
    for (const auto& r : minority_rows)
        if (r.size() != dim)
            throw std::invalid_argument("smote: inconsistent row dimensions");

    int k = k_neighbors;
    if (static_cast<std::size_t>(k) > n - 1) {
        k = static_cast<int>(n - 1);
        if (k_clamped) *k_clamped = true;
    } else if (k_clamped) {
        *k_clamped = false;
    }

    // k nearest neighbors per row, squared Euclidean.
    std::vector<std::vector<std::size_t>> nn(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, std::size_t>> dists;
        dists.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double d = 0;
            for (std::size_t c = 0; c < dim; ++c) {
                const double diff = minority_rows[i][c] - minority_rows[j][c];
                d += diff * diff;
            }
            dists.emplace_back(d, j);
        }
        std::partial_sort(dists.begin(), dists.begin() + k, dists.end());
        nn[i].reserve(k);
        for (int j = 0; j < k; ++j) nn[i].push_back(dists[j].second);
    }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_row(0, n - 1);
    std::uniform_int_distribution<int> pick_nn(0, k - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<std::vector<double>> out;
    out.reserve(target_count);
    for (std::size_t s = 0; s < target_count; ++s) {
        const std::size_t i = pick_row(rng);
        const std::size_t j = nn[i][static_cast<std::size_t>(pick_nn(rng))];
        const double u = unit(rng);
        std::vector<double> row(dim);
        for (std::size_t c = 0; c < dim; ++c)
            row[c] = minority_rows[i][c] +
                     u * (minority_rows[j][c] - minority_rows[i][c]);
        out.push_back(std::move(row));
    }
    return out;
}

LabeledSet smote_balance(const LabeledSet& set, double ratio, std::uint64_t seed,
                         int k_neighbors) {
    const std::size_t pos = set.count_label(1);
    const std::size_t neg = set.count_label(0);
    if (pos + neg != set.size())
        throw std::invalid_argument("smote_balance: labels must be binary {0,1}");
    const std::size_t target =
        static_cast<std::size_t>(std::floor(ratio * static_cast<double>(neg)));
    if (pos >= target) return set;

    std::vector<std::vector<double>> minority;
    for (std::size_t i = 0; i < set.size(); ++i)
        if (set.labels[i] == 1) minority.push_back(set.rows[i]);

    auto synth = smote(minority, target - pos, k_neighbors, seed);
    LabeledSet out = set;
    for (auto& row : synth) out.push(std::move(row), 1, /*synth=*/true);
    return out;
}

LabeledSet undersample(const LabeledSet& set, double ratio, std::uint64_t seed) {
    if (ratio <= 0) throw std::invalid_argument("undersample: ratio must be > 0");
    const std::size_t pos = set.count_label(1);
    const std::size_t neg = set.count_label(0);
    if (pos + neg != set.size())
        throw std::invalid_argument("undersample: labels must be binary {0,1}");
    std::size_t keep =
        static_cast<std::size_t>(std::floor(static_cast<double>(pos) / ratio));
    keep = std::min(keep, neg);

    std::vector<std::size_t> neg_idx;
    for (std::size_t i = 0; i < set.size(); ++i)
        if (set.labels[i] == 0) neg_idx.push_back(i);
    std::mt19937_64 rng(seed);
    std::shuffle(neg_idx.begin(), neg_idx.end(), rng);
    neg_idx.resize(keep);
    std::sort(neg_idx.begin(), neg_idx.end());

    LabeledSet out;
    out.dim = set.dim;
    std::size_t next_neg = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (set.labels[i] == 1) {
            out.push(set.rows[i], 1, set.synthetic[i] != 0);
        } else if (next_neg < neg_idx.size() && neg_idx[next_neg] == i) {
            out.push(set.rows[i], 0, set.synthetic[i] != 0);
            ++next_neg;
        }
    }
    return out;
}

}  // namespace keydyn
