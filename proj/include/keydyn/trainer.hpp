#pragma once

#include <optional>

#include "keydyn/features.hpp"
#include "keydyn/metrics.hpp"
#include "keydyn/model.hpp"
#include "keydyn/optim.hpp"
#include "keydyn/resample.hpp"

namespace keydyn {

/// Flattened, normalized windows ready for the model.
struct DataSet {
    int key_length = 0;
    bool fused = false;
    std::vector<std::vector<float>> timing;  // L*6 per row
    std::vector<std::array<float, 7>> rates;
    std::vector<int> labels;

    std::size_t size() const { return timing.size(); }
};

Tensor<float> batch_timing(const DataSet& ds, const std::vector<std::size_t>& idx);
Tensor<float> batch_rates(const DataSet& ds, const std::vector<std::size_t>& idx);

/// One cross-validation fold, featurized: normalization fitted on the train
/// sessions only, then applied to both splits.
struct FoldFeatures {
    Fold fold{{0, 1}, 2};
    int key_length = 0;
    int stride = 0;
    bool fused = false;
    NormStats stats;
    std::vector<int> user_ids;  // label index -> user id
    DataSet train, test;
};

FoldFeatures build_fold_features(const Corpus& corpus, const Fold& fold,
                                 int key_length, int stride, bool fused);

struct TrainConfig {
    double learning_rate = 0.001;
    double weight_decay = 1e-5;
    std::vector<int> milestones{70};
    double gamma = 0.1;
    int epochs = 80;
    int batch_size = 32;
    double pos_weight = 1.0;
    std::uint64_t seed = 1;
    bool weighted_sampler = false;
    double validation_fraction = 0.1;
};

enum class SelectMode { AtBestVal, AtBestEer, Final };
SelectMode select_mode_from_string(const std::string& s);
std::string to_string(SelectMode mode);

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_metric;  // accuracy (or 1-EER for AtBestEer)
    bool diverged = false;
    int best_epoch = -1;
};

struct ResampleConfig {
    double smote_ratio = 0;        // 0 disables
    double undersample_ratio = 0;  // 0 disables
    int k_neighbors = 5;
};

struct MulticlassResult {
    Model<float> model;
    TrainHistory history;
    double test_accuracy = 0;
    double val_accuracy = 0;
    std::vector<int> user_ids;
};

MulticlassResult train_multiclass(const FoldFeatures& ff, ModelConfig mcfg,
                                  const TrainConfig& tcfg);

struct DistillTeacher {
    Model<float>* teacher = nullptr;  // multiclass backbone
    double w_student = 1.0;
    double w_teacher = 0.0;
};

struct BinaryResult {
    Model<float> model;
    TrainHistory history;
    ScoredSet test_scores;
    EvalReport report;
    ScoredSet val_scores;
    double val_accuracy = 0;
    int user_id = 0;
};

/// Pre-train/fine-tune binary verification for one target user. When `base`
/// is given its backbone initializes the model (head replaced by one logit);
/// `freeze` then trains the head only. Resampling applies to the training
/// rows after normalization.
BinaryResult train_binary(Model<float>* base, const ModelConfig& fresh_cfg,
                          const FoldFeatures& ff, int label_index,
                          const TrainConfig& tcfg, bool freeze, SelectMode mode,
                          const ResampleConfig& rcfg = {},
                          const DistillTeacher* distill = nullptr);

struct FinetuneSummary {
    std::vector<BinaryResult> users;
    double avg_accuracy = 0, avg_precision = 0, avg_recall = 0, avg_f1 = 0;
    double avg_eer = 0;
};

FinetuneSummary finetune_all_users(Model<float>& base, const FoldFeatures& ff,
                                   const TrainConfig& tcfg, bool freeze,
                                   SelectMode mode,
                                   const ResampleConfig& rcfg = {});

/// Arithmetic mean of member sigmoid probabilities on the test split.
ScoredSet ensemble_scores(std::vector<Model<float>>& members,
                          const DataSet& test, int label_index);

struct SweepRow {
    double pos_weight = 1;
    double avg_accuracy = 0, avg_precision = 0, avg_recall = 0, avg_eer = 0;
};

std::vector<SweepRow> posweight_sweep(Model<float>& base, const FoldFeatures& ff,
                                      const TrainConfig& base_cfg,
                                      const std::vector<double>& weights,
                                      bool freeze, SelectMode mode);

// Evaluation helpers shared with the CLI.
double multiclass_accuracy(Model<float>& model, const DataSet& ds);
ScoredSet binary_scores(Model<float>& model, const DataSet& ds, int label_index);
std::vector<double> multiclass_target_probs(Model<float>& model,
                                            const DataSet& ds, int label_index);

}  // namespace keydyn
