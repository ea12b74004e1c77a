#include "keydyn/features.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace keydyn {

std::vector<DigraphVector> digraphs(const SessionRecord& session) {
    std::vector<DigraphVector> out;
    const auto& p = session.presses;
    if (p.size() < 2) return out;
    out.reserve(p.size() - 1);
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        const KeyPress& x = p[i];
        const KeyPress& y = p[i + 1];
        DigraphVector v;
        v.id_x = x.key_id;
        v.id_y = y.key_id;
        v.hold_x = static_cast<double>(x.up_ms - x.down_ms);
        v.hold_y = static_cast<double>(y.up_ms - y.down_ms);
        v.down_up = static_cast<double>(y.up_ms - x.down_ms);
        v.down_down = static_cast<double>(y.down_ms - x.down_ms);
        out.push_back(v);
    }
    return out;
}

std::vector<TimingWindow> make_windows(const std::vector<DigraphVector>& vectors,
                                       int key_length, int stride) {
    if (key_length < 1 || stride < 1)
        throw std::invalid_argument("key_length and stride must be >= 1");
    std::vector<TimingWindow> out;
    const std::size_t n = vectors.size();
    const std::size_t L = static_cast<std::size_t>(key_length);
    if (n < L) return out;
    for (std::size_t start = 0; start + L <= n;
         start += static_cast<std::size_t>(stride)) {
        TimingWindow w;
        w.key_length = key_length;
        w.first_press = start;
        w.press_count = L + 1;
        w.values.reserve(L * kTimingChannels);
        for (std::size_t i = start; i < start + L; ++i) {
            const DigraphVector& v = vectors[i];
            w.values.push_back(static_cast<double>(v.id_x));
            w.values.push_back(static_cast<double>(v.id_y));
            w.values.push_back(v.hold_x);
            w.values.push_back(v.hold_y);
            w.values.push_back(v.down_up);
            w.values.push_back(v.down_down);
        }
        out.push_back(std::move(w));
    }
    return out;
}

NormStats fit_norm(const std::vector<TimingWindow>& train_windows) {
    NormStats stats;
    stats.key_table_size = KeyTable::instance().size();
    std::array<double, 4> sum{}, sumsq{};
    std::size_t count = 0;
    for (const auto& w : train_windows) {
        for (int row = 0; row < w.key_length; ++row) {
            for (int c = 0; c < 4; ++c) {
                const double v = w.values[row * kTimingChannels + 2 + c];
                sum[c] += v;
                sumsq[c] += v * v;
            }
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("fit_norm: no training rows");
    for (int c = 0; c < 4; ++c) {
        stats.mean[c] = sum[c] / static_cast<double>(count);
        const double var =
            sumsq[c] / static_cast<double>(count) - stats.mean[c] * stats.mean[c];
        if (var <= 0) {
            stats.std[c] = 1.0;
            stats.zero_variance[c] = true;
        } else {
            stats.std[c] = std::sqrt(var);
        }
    }
    return stats;
}

void apply_norm(TimingWindow& window, const NormStats& stats) {
    const double id_scale = 1.0 / static_cast<double>(stats.key_table_size);
    for (int row = 0; row < window.key_length; ++row) {
        double* r = &window.values[row * kTimingChannels];
        r[0] *= id_scale;
        r[1] *= id_scale;
        for (int c = 0; c < 4; ++c)
            r[2 + c] = (r[2 + c] - stats.mean[c]) / stats.std[c];
    }
}

RateVector rate_features(const std::vector<KeyPress>& presses, std::size_t first,
                         std::size_t count) {
    RateVector rates{};
    if (count == 0) return rates;
    if (first + count > presses.size())
        throw std::out_of_range("rate_features: span exceeds press list");
    const KeyTable& t = KeyTable::instance();
    for (std::size_t i = first; i < first + count; ++i) {
        const int id = presses[i].key_id;
        if (t.is_delete(id)) rates[0] += 1;
        if (t.is_lshift(id)) rates[1] += 1;
        if (t.is_rshift(id)) rates[2] += 1;
        if (t.is_lcaps(id)) rates[3] += 1;
        if (t.is_rcaps(id)) rates[4] += 1;
        if (t.is_control(id)) rates[5] += 1;
        if (t.is_arrow(id)) rates[6] += 1;
    }
    for (double& r : rates) r /= static_cast<double>(count);
    return rates;
}

FeatureWindow fuse(const SessionRecord& session, const TimingWindow& timing,
                   std::optional<RateVector> rates) {
    if (timing.first_press + timing.press_count > session.presses.size())
        throw std::invalid_argument("fuse: timing window span not in session");
    FeatureWindow w;
    w.key_length = timing.key_length;
    w.timing = timing.values;
    w.user_id = session.user_id;
    w.session_index = session.session_index;
    if (rates) {
        w.rates = *rates;
        w.has_rates = true;
    }
    return w;
}

std::vector<double> flatten(const FeatureWindow& w) {
    std::vector<double> row = w.timing;
    if (w.has_rates) row.insert(row.end(), w.rates.begin(), w.rates.end());
    return row;
}

std::size_t flat_dim(int key_length, bool fused) {
    return static_cast<std::size_t>(key_length) * kTimingChannels +
           (fused ? kRateFeatures : 0);
}

void save_feature_csv(const std::vector<FeatureWindow>& windows,
                      const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    if (windows.empty()) throw std::invalid_argument("no windows to export");
    const int L = windows.front().key_length;
    out << "# keydyn-features v1 L=" << L << "\n";
    out << "user,session,has_rates";
    for (int i = 0; i < L * kTimingChannels; ++i) out << ",t" << i;
    for (int i = 0; i < kRateFeatures; ++i) out << ",r" << i;
    out << "\n";
    out.precision(17);
    for (const auto& w : windows) {
        if (w.key_length != L)
            throw std::invalid_argument("mixed key lengths in export");
        out << w.user_id << "," << w.session_index << "," << (w.has_rates ? 1 : 0);
        for (double v : w.timing) out << "," << v;
        for (double v : w.rates) out << "," << v;
        out << "\n";
    }
}

std::vector<FeatureWindow> load_feature_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open feature file: " + path);
    std::string line;
    std::getline(in, line);
    int L = 0;
    if (std::sscanf(line.c_str(), "# keydyn-features v1 L=%d", &L) != 1 || L < 1)
        throw std::runtime_error("unrecognized feature file header: " + line);
    std::getline(in, line);  // column header
    std::vector<FeatureWindow> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        FeatureWindow w;
        w.key_length = L;
        auto next = [&]() -> double {
            if (!std::getline(ls, cell, ','))
                throw std::runtime_error("short feature row: " + line);
            return std::stod(cell);
        };
        w.user_id = static_cast<int>(next());
        w.session_index = static_cast<int>(next());
        w.has_rates = next() != 0;
        w.timing.resize(static_cast<std::size_t>(L) * kTimingChannels);
        for (double& v : w.timing) v = next();
        for (double& v : w.rates) v = next();
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace keydyn
