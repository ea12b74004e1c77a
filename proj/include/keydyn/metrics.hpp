#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace keydyn {

/// Per-window predicted probabilities with ground-truth binary labels.
struct ScoredSet {
    std::vector<double> prob;  // in [0,1]
    std::vector<int> label;    // {0,1}
};

struct RocPoint {
    double fpr = 0;
    double tpr = 0;
    double threshold = 0;
};

struct EvalReport {
    double accuracy = 0, precision = 0, recall = 0, f1 = 0;
    double auc = 0, eer = 0, eer_threshold = 0;
    long tp = 0, fp = 0, tn = 0, fn = 0;
    std::vector<RocPoint> roc;
    bool positive_is_one = true;

    std::string text_table() const;
    std::string to_json() const;
};

/// Confusion-matrix metrics plus ROC/AUC/EER at the given threshold.
/// positive_is_one=false evaluates with labels inverted and probabilities
/// complemented (the label-swap convention).
EvalReport classify_metrics(const ScoredSet& scored, double threshold = 0.5,
                            bool positive_is_one = true);

/// Thresholds at every distinct score; fpr/tpr non-decreasing, starts at
/// (0,0), ends at (1,1).
std::vector<RocPoint> roc_curve(const ScoredSet& scored);

/// Trapezoid-rule AUC; equals the midrank Mann-Whitney statistic.
double auc_trapezoid(const std::vector<RocPoint>& roc);

/// EER by linear interpolation on the ROC segment where FPR crosses FNR.
/// Returns {eer, operating threshold}. Throws on single-class input.
std::pair<double, double> eer_from_roc(const std::vector<RocPoint>& roc);

/// Complements probabilities and inverts labels.
ScoredSet swap_labels(const ScoredSet& scored);

void save_scores_csv(const ScoredSet& scored, const std::string& path);
ScoredSet load_scores_csv(const std::string& path);
void save_roc_csv(const std::vector<RocPoint>& roc, const std::string& path);

// ---- perturbation-based local explanation ----

struct Explanation {
    std::vector<double> weights;  // one per input feature
    double fidelity = 0;          // surrogate R^2 on the perturbed neighborhood
    // Mean |weight| per feature group: key_id / hold / down_up / down_down /
    // rates, sorted descending.
    std::vector<std::pair<std::string, double>> group_importance;
};

struct LimeOptions {
    int n_perturb = 200;
    double noise_sigma = 0.25;    // Gaussian noise in normalized feature space
    double mask_prob = 0.1;       // feature-wise reset to the training mean
    double kernel_sigma = 2.0;    // proximity kernel exp(-d^2 / sigma^2)
    double ridge = 1e-3;
};

/// Fits a ridge-regularized linear surrogate to `scorer` around `x`.
/// `key_length` < 0 disables group reporting (weights only).
Explanation lime_explain(
    const std::function<double(const std::vector<double>&)>& scorer,
    const std::vector<double>& x, const std::vector<double>& train_mean,
    int key_length, bool has_rates, std::uint64_t seed,
    const LimeOptions& opts = {});

}  // namespace keydyn
