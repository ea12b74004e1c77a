#include "keydyn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace keydyn {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

ScoredSet swap_labels(const ScoredSet& scored) {
    ScoredSet out;
    out.prob.reserve(scored.prob.size());
    out.label.reserve(scored.label.size());
    for (double p : scored.prob) out.prob.push_back(1.0 - p);
    for (int l : scored.label) out.label.push_back(1 - l);
    return out;
}

std::vector<RocPoint> roc_curve(const ScoredSet& scored) {
    if (scored.prob.size() != scored.label.size() || scored.prob.empty())
        throw std::invalid_argument("roc_curve: empty or mismatched scored set");

    std::vector<std::size_t> order(scored.prob.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scored.prob[a] > scored.prob[b];
    });

    long pos = 0, neg = 0;
    for (int l : scored.label) (l == 1 ? pos : neg)++;

    std::vector<RocPoint> roc;
    roc.push_back({0.0, 0.0, kInf});
    long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double score = scored.prob[order[i]];
        // All samples tied at this score flip together.
        while (i < order.size() && scored.prob[order[i]] == score) {
            (scored.label[order[i]] == 1 ? tp : fp)++;
            ++i;
        }
        RocPoint pt;
        pt.threshold = score;
        pt.tpr = pos > 0 ? static_cast<double>(tp) / pos : 0.0;
        pt.fpr = neg > 0 ? static_cast<double>(fp) / neg : 0.0;
        roc.push_back(pt);
    }
    return roc;
}

double auc_trapezoid(const std::vector<RocPoint>& roc) {
    double auc = 0;
    for (std::size_t i = 1; i < roc.size(); ++i)
        auc += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) / 2.0;
    return auc;
}

std::pair<double, double> eer_from_roc(const std::vector<RocPoint>& roc) {
    if (roc.size() < 2)
        throw std::invalid_argument("eer_from_roc: degenerate ROC");
    // Reject single-class inputs: ROC must actually reach (1,1) in both axes.
    if (roc.back().fpr == 0.0 || roc.back().tpr == 0.0)
        throw std::invalid_argument("eer_from_roc: single-class scored set");

    auto diff = [](const RocPoint& p) { return p.fpr - (1.0 - p.tpr); };
    for (std::size_t i = 1; i < roc.size(); ++i) {
        const double d0 = diff(roc[i - 1]);
        const double d1 = diff(roc[i]);
        if (d1 < 0) continue;  // crossing not reached yet
        if (d0 == d1) {
            return {roc[i].fpr, roc[i].threshold};
        }
        const double s = -d0 / (d1 - d0);
        const double eer =
            roc[i - 1].fpr + s * (roc[i].fpr - roc[i - 1].fpr);
        double thr = roc[i].threshold;
        if (std::isfinite(roc[i - 1].threshold))
            thr = roc[i - 1].threshold +
                  s * (roc[i].threshold - roc[i - 1].threshold);
        return {eer, thr};
    }
    // FPR never reaches FNR before the end; the terminal point is the crossing.
    return {roc.back().fpr, roc.back().threshold};
}

EvalReport classify_metrics(const ScoredSet& scored, double threshold,
                            bool positive_is_one) {
    if (scored.prob.empty() || scored.prob.size() != scored.label.size())
        throw std::invalid_argument("classify_metrics: empty scored set");
    ScoredSet swapped;
    const ScoredSet* work = &scored;
    if (!positive_is_one) {
        swapped = swap_labels(scored);
        work = &swapped;
    }

    EvalReport r;
    r.positive_is_one = positive_is_one;
    for (std::size_t i = 0; i < work->prob.size(); ++i) {
        const bool pred = work->prob[i] >= threshold;
        const bool truth = work->label[i] == 1;
        if (pred && truth) ++r.tp;
        else if (pred && !truth) ++r.fp;
        else if (!pred && truth) ++r.fn;
        else ++r.tn;
    }
    const long n = r.tp + r.fp + r.tn + r.fn;
    r.accuracy = static_cast<double>(r.tp + r.tn) / n;
    // An empty acceptance set admits no false accepts, so precision is 1.
    r.precision = (r.tp + r.fp) > 0 ? static_cast<double>(r.tp) / (r.tp + r.fp) : 1;
    r.recall = (r.tp + r.fn) > 0 ? static_cast<double>(r.tp) / (r.tp + r.fn) : 0;
    r.f1 = (r.precision + r.recall) > 0
               ? 2 * r.precision * r.recall / (r.precision + r.recall)
               : 0;

    const bool has_pos = (r.tp + r.fn) > 0;
    const bool has_neg = (r.fp + r.tn) > 0;
    if (has_pos && has_neg) {
        r.roc = roc_curve(*work);
        r.auc = auc_trapezoid(r.roc);
        auto [eer, thr] = eer_from_roc(r.roc);
        r.eer = eer;
        r.eer_threshold = thr;
    } else {
        r.auc = kNaN;
        r.eer = kNaN;
        r.eer_threshold = kNaN;
    }
    return r;
}

std::string EvalReport::text_table() const {
    std::ostringstream out;
    out.precision(4);
    out << std::fixed;
    out << "accuracy   " << accuracy << "\n"
        << "precision  " << precision << "\n"
        << "recall     " << recall << "\n"
        << "f1         " << f1 << "\n"
        << "auc        " << auc << "\n"
        << "eer        " << eer << " (threshold " << eer_threshold << ")\n"
        << "confusion  tp=" << tp << " fp=" << fp << " tn=" << tn
        << " fn=" << fn << "\n"
        << "positive   " << (positive_is_one ? "label-1" : "label-0 (swapped)")
        << "\n";
    return out.str();
}

std::string EvalReport::to_json() const {
    std::ostringstream out;
    out.precision(17);
    out << "{\"accuracy\":" << accuracy << ",\"precision\":" << precision
        << ",\"recall\":" << recall << ",\"f1\":" << f1 << ",\"auc\":" << auc
        << ",\"eer\":" << eer << ",\"eer_threshold\":" << eer_threshold
        << ",\"tp\":" << tp << ",\"fp\":" << fp << ",\"tn\":" << tn
        << ",\"fn\":" << fn << ",\"positive_is_one\":"
        << (positive_is_one ? "true" : "false") << "}";
    return out.str();
}

void save_scores_csv(const ScoredSet& scored, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << "prob,label\n";
    out.precision(17);
    for (std::size_t i = 0; i < scored.prob.size(); ++i)
        out << scored.prob[i] << "," << scored.label[i] << "\n";
}

ScoredSet load_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scores file: " + path);
    ScoredSet s;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("bad scores row: " + line);
        s.prob.push_back(std::stod(line.substr(0, comma)));
        s.label.push_back(std::stoi(line.substr(comma + 1)));
    }
    return s;
}

void save_roc_csv(const std::vector<RocPoint>& roc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << "fpr,tpr,threshold\n";
    out.precision(17);
    for (const auto& p : roc)
        out << p.fpr << "," << p.tpr << "," << p.threshold << "\n";
}

namespace {

// Cholesky solve of the SPD system A x = b, in place.
std::vector<double> cholesky_solve(std::vector<double> a, std::vector<double> b,
                                   std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k)
                sum -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (sum <= 0)
                    throw std::runtime_error("cholesky: matrix not SPD");
                a[i * n + i] = std::sqrt(sum);
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double sum = b[i];
        for (std::size_t k = 0; k < i; ++k) sum -= a[i * n + k] * b[k];
        b[i] = sum / a[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double sum = b[i];
        for (std::size_t k = i + 1; k < n; ++k) sum -= a[k * n + i] * b[k];
        b[i] = sum / a[i * n + i];
    }
    return b;
}

}  // namespace

Explanation lime_explain(
    const std::function<double(const std::vector<double>&)>& scorer,
    const std::vector<double>& x, const std::vector<double>& train_mean,
    int key_length, bool has_rates, std::uint64_t seed,
    const LimeOptions& opts) {
    if (opts.n_perturb < 50)
        throw std::invalid_argument("lime_explain: n_perturb must be >= 50");
    const std::size_t d = x.size();
    if (train_mean.size() != d)
        throw std::invalid_argument("lime_explain: train_mean dimension mismatch");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, opts.noise_sigma);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<std::vector<double>> deltas;  // z - x
    std::vector<double> y, w;
    deltas.reserve(opts.n_perturb);
    for (int s = 0; s < opts.n_perturb; ++s) {
        std::vector<double> z(d);
        for (std::size_t c = 0; c < d; ++c) {
            z[c] = x[c] + noise(rng);
            if (unit(rng) < opts.mask_prob) z[c] = train_mean[c];
        }
        double dist2 = 0;
        for (std::size_t c = 0; c < d; ++c) {
            const double dc = z[c] - x[c];
            dist2 += dc * dc;
        }
        w.push_back(std::exp(-dist2 / (opts.kernel_sigma * opts.kernel_sigma)));
        y.push_back(scorer(z));
        std::vector<double> delta(d);
        for (std::size_t c = 0; c < d; ++c) delta[c] = z[c] - x[c];
        deltas.push_back(std::move(delta));
    }

    Explanation expl;
    expl.weights.assign(d, 0.0);

    // Constant model over the neighborhood: zero explanation, zero fidelity.
    double wsum = 0, ymean = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        wsum += w[i];
        ymean += w[i] * y[i];
    }
    ymean /= wsum;
    double ss_tot = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
        ss_tot += w[i] * (y[i] - ymean) * (y[i] - ymean);
    if (ss_tot <= 1e-18) {
        expl.fidelity = 0;
        return expl;
    }

    // Weighted ridge: features are centered deltas plus an unpenalized intercept
    // in slot d.
    const std::size_t m = d + 1;
    std::vector<double> a(m * m, 0.0), b(m, 0.0);
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        const auto& z = deltas[i];
        for (std::size_t p = 0; p < d; ++p) {
            const double wz = w[i] * z[p];
            for (std::size_t q = 0; q <= p; ++q) a[p * m + q] += wz * z[q];
            a[d * m + p] += wz;
            b[p] += wz * y[i];
        }
        a[d * m + d] += w[i];
        b[d] += w[i] * y[i];
    }
    for (std::size_t p = 0; p < m; ++p)
        for (std::size_t q = p + 1; q < m; ++q) a[p * m + q] = a[q * m + p];
    for (std::size_t p = 0; p < d; ++p) a[p * m + p] += opts.ridge;

    const std::vector<double> beta = cholesky_solve(std::move(a), std::move(b), m);
    for (std::size_t p = 0; p < d; ++p) expl.weights[p] = beta[p];

    double ss_res = 0;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        double pred = beta[d];
        for (std::size_t p = 0; p < d; ++p) pred += beta[p] * deltas[i][p];
        ss_res += w[i] * (y[i] - pred) * (y[i] - pred);
    }
    expl.fidelity = std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);

    if (key_length > 0) {
        const std::size_t timing = static_cast<std::size_t>(key_length) * 6;
        if (timing + (has_rates ? 7u : 0u) != d)
            throw std::invalid_argument("lime_explain: key_length inconsistent with x");
        std::map<std::string, std::pair<double, int>> groups;
        for (std::size_t c = 0; c < timing; ++c) {
            static const char* names[6] = {"key_id", "key_id", "hold", "hold",
                                           "down_up", "down_down"};
            auto& g = groups[names[c % 6]];
            g.first += std::abs(expl.weights[c]);
            g.second += 1;
        }
        if (has_rates) {
            auto& g = groups["rates"];
            for (std::size_t c = timing; c < d; ++c) {
                g.first += std::abs(expl.weights[c]);
                g.second += 1;
            }
        }
        for (const auto& [name, acc] : groups)
            expl.group_importance.emplace_back(name, acc.first / acc.second);
        std::sort(expl.group_importance.begin(), expl.group_importance.end(),
                  [](const auto& a2, const auto& b2) { return a2.second > b2.second; });
    }
    return expl;
}

}  // namespace keydyn
