#include "keydyn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "keydyn/losses.hpp"

namespace keydyn {

namespace {
constexpr std::size_t kEvalBatch = 64;
}

Tensor<float> batch_timing(const DataSet& ds, const std::vector<std::size_t>& idx) {
    const int L = ds.key_length;
    Tensor<float> x({static_cast<int>(idx.size()), L, kTimingChannels});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto& row = ds.timing[idx[i]];
        std::copy(row.begin(), row.end(),
                  x.data.begin() + static_cast<std::ptrdiff_t>(i * row.size()));
    }
    return x;
}

Tensor<float> batch_rates(const DataSet& ds, const std::vector<std::size_t>& idx) {
    Tensor<float> r({static_cast<int>(idx.size()), kRateFeatures});
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (int c = 0; c < kRateFeatures; ++c)
            r(static_cast<int>(i), c) = ds.rates[idx[i]][c];
    return r;
}

FoldFeatures build_fold_features(const Corpus& corpus, const Fold& fold,
                                 int key_length, int stride, bool fused) {
    FoldFeatures ff;
    ff.fold = fold;
    ff.key_length = key_length;
    ff.stride = stride;
    ff.fused = fused;
    ff.train.key_length = ff.test.key_length = key_length;
    ff.train.fused = ff.test.fused = fused;

    std::set<int> users;
    for (const auto& s : corpus.sessions) users.insert(s.user_id);
    ff.user_ids.assign(users.begin(), users.end());
    std::map<int, int> label_of;
    for (std::size_t i = 0; i < ff.user_ids.size(); ++i)
        label_of[ff.user_ids[i]] = static_cast<int>(i);

    struct Pending {
        TimingWindow window;
        RateVector rates;
        int label;
        bool train;
    };
    std::vector<Pending> pending;
    std::vector<TimingWindow> fit_rows;

    for (const auto& s : corpus.sessions) {
        const bool is_train = s.session_index == fold.train_sessions[0] ||
                              s.session_index == fold.train_sessions[1];
        if (!is_train && s.session_index != fold.test_session) continue;
        const auto vectors = digraphs(s);
        for (auto& w : make_windows(vectors, key_length, stride)) {
            Pending p;
            p.rates = rate_features(s.presses, w.first_press, w.press_count);
            p.label = label_of.at(s.user_id);
            p.train = is_train;
            if (is_train) fit_rows.push_back(w);
            p.window = std::move(w);
            pending.push_back(std::move(p));
        }
    }
    if (fit_rows.empty())
        throw std::runtime_error("build_fold_features: no training windows");
    ff.stats = fit_norm(fit_rows);

    for (auto& p : pending) {
        apply_norm(p.window, ff.stats);
        DataSet& ds = p.train ? ff.train : ff.test;
        std::vector<float> row(p.window.values.begin(), p.window.values.end());
        ds.timing.push_back(std::move(row));
        std::array<float, kRateFeatures> r{};
        for (int c = 0; c < kRateFeatures; ++c)
            r[c] = static_cast<float>(p.rates[c]);
        ds.rates.push_back(r);
        ds.labels.push_back(p.label);
    }
    return ff;
}

SelectMode select_mode_from_string(const std::string& s) {
    if (s == "at-best-val") return SelectMode::AtBestVal;
    if (s == "at-best-eer") return SelectMode::AtBestEer;
    if (s == "final") return SelectMode::Final;
    throw std::invalid_argument("unknown selection mode: " + s);
}

std::string to_string(SelectMode mode) {
    switch (mode) {
        case SelectMode::AtBestVal: return "at-best-val";
        case SelectMode::AtBestEer: return "at-best-eer";
        default: return "final";
    }
}

namespace {

using Snapshot = std::vector<std::vector<float>>;

Snapshot take_snapshot(Model<float>& m) {
    Snapshot s;
    for (auto& p : m.params()) s.push_back(p.value->data);
    return s;
}

void restore_snapshot(Model<float>& m, const Snapshot& s) {
    auto params = m.params();
    for (std::size_t i = 0; i < params.size(); ++i)
        params[i].value->data = s[i];
}

/// Deterministic stratified split: for each class, every k-th shuffled row
/// goes to validation.
void split_validation(const DataSet& all, double fraction, std::uint64_t seed,
                      DataSet& train, DataSet& val) {
    train.key_length = val.key_length = all.key_length;
    train.fused = val.fused = all.fused;
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < all.size(); ++i)
        by_class[all.labels[i]].push_back(i);
    std::vector<std::size_t> val_idx;
    std::mt19937_64 rng(seed ^ 0xa11da7e5ull);
    for (auto& [label, idx] : by_class) {
        std::shuffle(idx.begin(), idx.end(), rng);
        std::size_t n_val = static_cast<std::size_t>(
            std::floor(fraction * static_cast<double>(idx.size())));
        if (idx.size() >= 2 && n_val == 0) n_val = 1;
        val_idx.insert(val_idx.end(), idx.begin(), idx.begin() + n_val);
    }
    std::sort(val_idx.begin(), val_idx.end());
    std::size_t next = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const bool in_val = next < val_idx.size() && val_idx[next] == i;
        if (in_val) ++next;
        DataSet& dst = in_val ? val : train;
        dst.timing.push_back(all.timing[i]);
        dst.rates.push_back(all.rates[i]);
        dst.labels.push_back(all.labels[i]);
    }
}

DataSet to_binary(const DataSet& src, int label_index) {
    DataSet out = src;
    for (auto& l : out.labels) l = (l == label_index) ? 1 : 0;
    return out;
}

DataSet apply_resample(const DataSet& ds, const ResampleConfig& rcfg,
                       std::uint64_t seed) {
    if (rcfg.smote_ratio <= 0 && rcfg.undersample_ratio <= 0) return ds;
    LabeledSet set;
    set.dim = ds.timing.front().size() +
              (ds.fused ? static_cast<std::size_t>(kRateFeatures) : 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::vector<double> row(ds.timing[i].begin(), ds.timing[i].end());
        if (ds.fused)
            row.insert(row.end(), ds.rates[i].begin(), ds.rates[i].end());
        set.push(std::move(row), ds.labels[i]);
    }
    if (rcfg.smote_ratio > 0)
        set = smote_balance(set, rcfg.smote_ratio, seed, rcfg.k_neighbors);
    if (rcfg.undersample_ratio > 0)
        set = undersample(set, rcfg.undersample_ratio, seed + 1);

    DataSet out;
    out.key_length = ds.key_length;
    out.fused = ds.fused;
    const std::size_t timing_dim = ds.timing.front().size();
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto& row = set.rows[i];
        out.timing.emplace_back(row.begin(),
                                row.begin() + static_cast<std::ptrdiff_t>(timing_dim));
        std::array<float, kRateFeatures> r{};
        if (ds.fused)
            for (int c = 0; c < kRateFeatures; ++c)
                r[c] = static_cast<float>(row[timing_dim + c]);
        out.rates.push_back(r);
        out.labels.push_back(set.labels[i]);
    }
    return out;
}

/// Shared epoch loop. `batch_step` does zero_grad-forward-backward and
/// returns the batch loss; `val_metric` scores the validation split (higher
/// is better). Non-finite losses or gradients roll the model back to the end
/// of the previous epoch.
TrainHistory run_loop(
    Model<float>& model, const std::vector<int>& labels,
    const TrainConfig& tcfg, bool freeze, SelectMode mode,
    const std::function<double(const std::vector<std::size_t>&,
                               std::mt19937_64&)>& batch_step,
    const std::function<double()>& val_metric) {
    auto trainable = freeze ? model.head_params() : model.params();
    AdamW<float> opt(trainable, tcfg.weight_decay);
    StepScheduler sched(tcfg.learning_rate, tcfg.milestones, tcfg.gamma);
    std::mt19937_64 rng(tcfg.seed);

    TrainHistory hist;
    Snapshot last_good = take_snapshot(model);
    Snapshot best;
    double best_metric = -std::numeric_limits<double>::infinity();
    const std::size_t n = labels.size();

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        const double lr = sched.lr_at(epoch);
        std::vector<std::size_t> order;
        if (tcfg.weighted_sampler) {
            order = weighted_sampler(labels, n,
                                     tcfg.seed + 1000003ull * (epoch + 1));
        } else {
            order.resize(n);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::shuffle(order.begin(), order.end(), rng);
        }
        double total = 0;
        std::size_t batches = 0;
        try {
            for (std::size_t start = 0; start < n;
                 start += static_cast<std::size_t>(tcfg.batch_size)) {
                const std::size_t end =
                    std::min(n, start + static_cast<std::size_t>(tcfg.batch_size));
                std::vector<std::size_t> idx(order.begin() + start,
                                             order.begin() + end);
                model.zero_grad();
                const double loss = batch_step(idx, rng);
                if (!std::isfinite(loss)) throw DivergedError("loss is not finite");
                opt.step(lr);
                total += loss;
                ++batches;
            }
        } catch (const DivergedError&) {
            restore_snapshot(model, last_good);
            hist.diverged = true;
            break;
        }
        hist.train_loss.push_back(total / static_cast<double>(batches));
        const double vm = val_metric();
        hist.val_metric.push_back(vm);
        if (vm > best_metric) {
            best_metric = vm;
            best = take_snapshot(model);
            hist.best_epoch = epoch;
        }
        last_good = take_snapshot(model);
    }
    if (mode != SelectMode::Final && !best.empty())
        restore_snapshot(model, best);
    return hist;
}

}  // namespace

double multiclass_accuracy(Model<float>& model, const DataSet& ds) {
    if (ds.size() == 0) return 0;
    std::mt19937_64 rng(0);
    std::size_t correct = 0;
    for (std::size_t start = 0; start < ds.size(); start += kEvalBatch) {
        const std::size_t end = std::min(ds.size(), start + kEvalBatch);
        std::vector<std::size_t> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        Tensor<float> x = batch_timing(ds, idx);
        Tensor<float> r = batch_rates(ds, idx);
        Tensor<float> logits = model.forward(
            x, model.config().rate_branch ? &r : nullptr, false, rng);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            int arg = 0;
            for (int k = 1; k < logits.dim(1); ++k)
                if (logits(static_cast<int>(i), k) >
                    logits(static_cast<int>(i), arg))
                    arg = k;
            if (arg == ds.labels[idx[i]]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

ScoredSet binary_scores(Model<float>& model, const DataSet& ds, int label_index) {
    ScoredSet out;
    std::mt19937_64 rng(0);
    for (std::size_t start = 0; start < ds.size(); start += kEvalBatch) {
        const std::size_t end = std::min(ds.size(), start + kEvalBatch);
        std::vector<std::size_t> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        Tensor<float> x = batch_timing(ds, idx);
        Tensor<float> r = batch_rates(ds, idx);
        Tensor<float> logits = model.forward(
            x, model.config().rate_branch ? &r : nullptr, false, rng);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            out.prob.push_back(
                detail::sigmoid(static_cast<double>(logits.data[i])));
            const int l = ds.labels[idx[i]];
            out.label.push_back(label_index < 0 ? l
                                                : (l == label_index ? 1 : 0));
        }
    }
    return out;
}

std::vector<double> multiclass_target_probs(Model<float>& model,
                                            const DataSet& ds, int label_index) {
    std::vector<double> out;
    std::mt19937_64 rng(0);
    for (std::size_t start = 0; start < ds.size(); start += kEvalBatch) {
        const std::size_t end = std::min(ds.size(), start + kEvalBatch);
        std::vector<std::size_t> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        Tensor<float> x = batch_timing(ds, idx);
        Tensor<float> r = batch_rates(ds, idx);
        Tensor<float> logits = model.forward(
            x, model.config().rate_branch ? &r : nullptr, false, rng);
        const int K = logits.dim(1);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            double mx = logits(static_cast<int>(i), 0);
            for (int k = 1; k < K; ++k)
                mx = std::max(mx,
                              static_cast<double>(logits(static_cast<int>(i), k)));
            double denom = 0;
            for (int k = 0; k < K; ++k)
                denom += std::exp(
                    static_cast<double>(logits(static_cast<int>(i), k)) - mx);
            out.push_back(
                std::exp(static_cast<double>(
                             logits(static_cast<int>(i), label_index)) -
                         mx) /
                denom);
        }
    }
    return out;
}

MulticlassResult train_multiclass(const FoldFeatures& ff, ModelConfig mcfg,
                                  const TrainConfig& tcfg) {
    const int K = static_cast<int>(ff.user_ids.size());
    if (K < 2)
        throw std::invalid_argument("train_multiclass: need at least 2 users");
    mcfg.seq_len = ff.key_length;
    mcfg.rate_branch = ff.fused;
    mcfg.head_dim = K;

    DataSet train, val;
    split_validation(ff.train, tcfg.validation_fraction, tcfg.seed, train, val);

    Model<float> model(mcfg, tcfg.seed);
    auto batch_step = [&](const std::vector<std::size_t>& idx,
                          std::mt19937_64& rng) {
        Tensor<float> x = batch_timing(train, idx);
        Tensor<float> r = batch_rates(train, idx);
        Tensor<float> logits =
            model.forward(x, mcfg.rate_branch ? &r : nullptr, true, rng);
        std::vector<int> targets;
        targets.reserve(idx.size());
        for (std::size_t i : idx) targets.push_back(train.labels[i]);
        Tensor<float> dlogits;
        const double loss = cross_entropy_loss(logits, targets, &dlogits);
        model.backward(dlogits);
        return loss;
    };
    auto val_metric = [&]() { return multiclass_accuracy(model, val); };

    TrainHistory hist = run_loop(model, train.labels, tcfg, /*freeze=*/false,
                                 SelectMode::AtBestVal, batch_step, val_metric);
    MulticlassResult res{std::move(model), std::move(hist), 0, 0, ff.user_ids};
    res.val_accuracy = multiclass_accuracy(res.model, val);
    res.test_accuracy = multiclass_accuracy(res.model, ff.test);
    return res;
}

BinaryResult train_binary(Model<float>* base, const ModelConfig& fresh_cfg,
                          const FoldFeatures& ff, int label_index,
                          const TrainConfig& tcfg, bool freeze, SelectMode mode,
                          const ResampleConfig& rcfg,
                          const DistillTeacher* distill) {
    if (label_index < 0 || label_index >= static_cast<int>(ff.user_ids.size()))
        throw std::invalid_argument("train_binary: bad target user index");
    if (distill && distill->w_student <= 0 && distill->w_teacher <= 0)
        throw std::invalid_argument("train_binary: distillation weights are both zero");

    ModelConfig mcfg = base ? base->config() : fresh_cfg;
    mcfg.seq_len = ff.key_length;
    mcfg.rate_branch = ff.fused;
    mcfg.head_dim = 1;
    if (base && (base->config().seq_len != ff.key_length ||
                 base->config().rate_branch != ff.fused))
        throw std::invalid_argument(
            "train_binary: checkpoint topology does not match features");

    Model<float> model = base ? with_new_head(*base, 1, tcfg.seed)
                              : Model<float>(mcfg, tcfg.seed);

    DataSet all = to_binary(ff.train, label_index);
    all = apply_resample(all, rcfg, tcfg.seed + 7);
    DataSet train, val;
    split_validation(all, tcfg.validation_fraction, tcfg.seed, train, val);

    auto batch_step = [&](const std::vector<std::size_t>& idx,
                          std::mt19937_64& rng) {
        Tensor<float> x = batch_timing(train, idx);
        Tensor<float> r = batch_rates(train, idx);
        Tensor<float> logits =
            model.forward(x, mcfg.rate_branch ? &r : nullptr, true, rng);
        std::vector<double> hard;
        hard.reserve(idx.size());
        for (std::size_t i : idx) hard.push_back(train.labels[i]);

        Tensor<float> dlogits;
        double loss = 0;
        if (!distill) {
            loss = bce_logits_loss(logits, hard, tcfg.pos_weight, &dlogits);
        } else {
            Tensor<float> d_hard, d_soft;
            const double hard_loss =
                bce_logits_loss(logits, hard, tcfg.pos_weight, &d_hard);
            // Teacher's target-class probability as the soft label.
            DataSet sub;
            sub.key_length = train.key_length;
            sub.fused = train.fused;
            for (std::size_t i : idx) {
                sub.timing.push_back(train.timing[i]);
                sub.rates.push_back(train.rates[i]);
                sub.labels.push_back(train.labels[i]);
            }
            const std::vector<double> soft =
                multiclass_target_probs(*distill->teacher, sub, label_index);
            const double soft_loss = bce_logits_loss(logits, soft, 1.0, &d_soft);
            loss = distill->w_student * hard_loss + distill->w_teacher * soft_loss;
            dlogits = Tensor<float>(logits.shape);
            for (std::size_t i = 0; i < dlogits.size(); ++i)
                dlogits.data[i] = static_cast<float>(
                    distill->w_student * d_hard.data[i] +
                    distill->w_teacher * d_soft.data[i]);
        }
        model.backward(dlogits);
        return loss;
    };

    auto val_metric = [&]() {
        ScoredSet scores = binary_scores(model, val, /*label_index=*/-1);
        if (mode == SelectMode::AtBestEer) {
            const bool has_pos =
                std::count(scores.label.begin(), scores.label.end(), 1) > 0;
            const bool has_neg =
                std::count(scores.label.begin(), scores.label.end(), 0) > 0;
            if (has_pos && has_neg) {
                auto [eer, thr] = eer_from_roc(roc_curve(scores));
                (void)thr;
                return 1.0 - eer;
            }
        }
        std::size_t correct = 0;
        for (std::size_t i = 0; i < scores.prob.size(); ++i)
            correct += (scores.prob[i] >= 0.5 ? 1 : 0) == scores.label[i];
        return static_cast<double>(correct) /
               static_cast<double>(scores.prob.size());
    };

    TrainHistory hist =
        run_loop(model, train.labels, tcfg, freeze, mode, batch_step, val_metric);
    BinaryResult res{std::move(model), std::move(hist), {}, {}, {}, 0,
                     ff.user_ids[static_cast<std::size_t>(label_index)]};
    res.val_scores = binary_scores(res.model, val, -1);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < res.val_scores.prob.size(); ++i)
        correct += (res.val_scores.prob[i] >= 0.5 ? 1 : 0) == res.val_scores.label[i];
    res.val_accuracy = res.val_scores.prob.empty()
                           ? 0
                           : static_cast<double>(correct) /
                                 static_cast<double>(res.val_scores.prob.size());
    res.test_scores = binary_scores(res.model, ff.test, label_index);
    res.report = classify_metrics(res.test_scores);
    return res;
}

FinetuneSummary finetune_all_users(Model<float>& base, const FoldFeatures& ff,
                                   const TrainConfig& tcfg, bool freeze,
                                   SelectMode mode, const ResampleConfig& rcfg) {
    FinetuneSummary summary;
    for (std::size_t u = 0; u < ff.user_ids.size(); ++u) {
        TrainConfig cfg = tcfg;
        cfg.seed = tcfg.seed + 101ull * u;
        summary.users.push_back(train_binary(&base, base.config(), ff,
                                             static_cast<int>(u), cfg, freeze,
                                             mode, rcfg));
    }
    const double n = static_cast<double>(summary.users.size());
    for (const auto& r : summary.users) {
        summary.avg_accuracy += r.report.accuracy / n;
        summary.avg_precision += r.report.precision / n;
        summary.avg_recall += r.report.recall / n;
        summary.avg_f1 += r.report.f1 / n;
        summary.avg_eer += r.report.eer / n;
    }
    return summary;
}

ScoredSet ensemble_scores(std::vector<Model<float>>& members,
                          const DataSet& test, int label_index) {
    if (members.size() < 2)
        throw std::invalid_argument("ensemble: need at least 2 members");
    ScoredSet out;
    for (std::size_t m = 0; m < members.size(); ++m) {
        ScoredSet s = binary_scores(members[m], test, label_index);
        if (m == 0) {
            out = s;
        } else {
            if (s.prob.size() != out.prob.size())
                throw std::invalid_argument("ensemble: member input contract mismatch");
            for (std::size_t i = 0; i < s.prob.size(); ++i)
                out.prob[i] += s.prob[i];
        }
    }
    for (double& p : out.prob) p /= static_cast<double>(members.size());
    return out;
}

std::vector<SweepRow> posweight_sweep(Model<float>& base, const FoldFeatures& ff,
                                      const TrainConfig& base_cfg,
                                      const std::vector<double>& weights,
                                      bool freeze, SelectMode mode) {
    std::vector<SweepRow> rows;
    for (double w : weights) {
        TrainConfig cfg = base_cfg;
        cfg.pos_weight = w;
        FinetuneSummary s = finetune_all_users(base, ff, cfg, freeze, mode);
        rows.push_back({w, s.avg_accuracy, s.avg_precision, s.avg_recall,
                        s.avg_eer});
    }
    return rows;
}

}  // namespace keydyn
