#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "keydyn/keylog.hpp"

namespace keydyn {

/// 6-element timing vector for one consecutive key pair (x, y).
struct DigraphVector {
    int id_x = 0;
    int id_y = 0;
    double hold_x = 0;     // H[x]
    double hold_y = 0;     // H[y]
    double down_up = 0;    // D[x]U[y]
    double down_down = 0;  // D[x]D[y]
};

constexpr int kTimingChannels = 6;
constexpr int kRateFeatures = 7;

using RateVector = std::array<double, kRateFeatures>;

/// One vector per consecutive press pair; n presses -> n-1 vectors.
std::vector<DigraphVector> digraphs(const SessionRecord& session);

/// A fixed-length timing window: L digraph rows, row-major (L x 6), plus the
/// press span [first_press, first_press + L + 1) it covers.
struct TimingWindow {
    int key_length = 0;
    std::vector<double> values;  // key_length * 6
    std::size_t first_press = 0;
    std::size_t press_count = 0;  // key_length + 1
};

/// Non-padded sliding windows over the digraph sequence.
/// count = floor((n - L)/stride) + 1 for n >= L, else 0.
std::vector<TimingWindow> make_windows(const std::vector<DigraphVector>& vectors,
                                       int key_length, int stride);

/// Per-column normalization stats for the 4 timing columns (hold_x, hold_y,
/// down_up, down_down), fitted on training folds only. Population variance.
struct NormStats {
    std::array<double, 4> mean{};
    std::array<double, 4> std{};
    std::array<bool, 4> zero_variance{};  // std clamped to 1 for these
    int key_table_size = 0;               // key_id columns scale to [0,1]
};

NormStats fit_norm(const std::vector<TimingWindow>& train_windows);
void apply_norm(TimingWindow& window, const NormStats& stats);

/// 7 special-key usage fractions over a press span. Empty span -> all zeros.
RateVector rate_features(const std::vector<KeyPress>& presses,
                         std::size_t first, std::size_t count);

/// A normalized window fused with its rate block and label.
struct FeatureWindow {
    int key_length = 0;
    std::vector<double> timing;  // key_length * 6, normalized
    RateVector rates{};
    bool has_rates = false;
    int user_id = 0;
    int session_index = 0;
};

/// Both blocks must come from the same press span of the same session.
FeatureWindow fuse(const SessionRecord& session, const TimingWindow& timing,
                   std::optional<RateVector> rates);

/// Flattened row for export / resampling: timing then rates (when fused).
std::vector<double> flatten(const FeatureWindow& w);
std::size_t flat_dim(int key_length, bool fused);

// Feature-matrix CSV: one row per window -- L*6 timing values, 7 rates
// (zeros when not fused), label, user, session.
void save_feature_csv(const std::vector<FeatureWindow>& windows,
                      const std::string& path);
std::vector<FeatureWindow> load_feature_csv(const std::string& path);

}  // namespace keydyn
