#include "keydyn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace keydyn {

namespace {

// Log-normal parameters matching a target arithmetic mean and std.
std::lognormal_distribution<double> lognormal_from_moments(double mean,
                                                           double stddev) {
    const double sigma2 = std::log(1.0 + (stddev * stddev) / (mean * mean));
    const double mu = std::log(mean) - sigma2 / 2.0;
    return std::lognormal_distribution<double>(mu, std::sqrt(sigma2));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ull;
    h = (h ^ a) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ b) * 0x94d049bb133111ebull;
    return h ^ (h >> 31);
}

const std::array<const char*, 7> kSpecialNames = {
    "Backspace", "LShift", "RShift", "LCaps", "RCaps", "LCtrl", "Left"};

}  // namespace

std::vector<UserProfile> make_profiles(const SynthOptions& opts) {
    std::vector<UserProfile> out;
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int u = 0; u < opts.users; ++u) {
        UserProfile p;
        p.user_id = u;
        p.hold_mean_ms = opts.hold_base_ms + u * opts.hold_separation_ms;
        p.hold_std_ms = opts.hold_std_ms;
        p.gap_mean_ms = opts.gap_base_ms + 5.0 * (u % 4);
        p.gap_std_ms = opts.gap_std_ms;
        for (double& prop : p.special_propensity)
            prop = opts.rate_spread * unit(rng);
        p.seed = mix_seed(opts.seed, static_cast<std::uint64_t>(u), 0x5eedull);
        out.push_back(p);
    }
    return out;
}

std::string generate_raw_session(const UserProfile& profile, int session_index,
                                 int presses) {
    std::mt19937_64 rng(
        mix_seed(profile.seed, static_cast<std::uint64_t>(session_index), 17));
    auto hold_dist = lognormal_from_moments(profile.hold_mean_ms,
                                            profile.hold_std_ms);
    auto gap_dist = lognormal_from_moments(profile.gap_mean_ms,
                                           profile.gap_std_ms);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> letter(0, 25);
    std::uniform_int_distribution<int> arrow(0, 1);

    struct Ev {
        long long ms;
        int order;
        std::string name;
        bool down;
    };
    std::vector<Ev> events;
    events.reserve(static_cast<std::size_t>(presses) * 2);

    double t = 100.0;
    int order = 0;
    for (int i = 0; i < presses; ++i) {
        std::string key;
        for (int s = 0; s < 7 && key.empty(); ++s)
            if (unit(rng) < profile.special_propensity[s]) {
                key = kSpecialNames[s];
                if (s == 6 && arrow(rng)) key = "Right";
            }
        if (key.empty()) key = std::string(1, static_cast<char>('A' + letter(rng)));

        const long long down = static_cast<long long>(std::llround(t));
        const long long up =
            down + std::max<long long>(1, std::llround(hold_dist(rng)));
        events.push_back({down, order++, key, true});
        events.push_back({up, order++, key, false});
        t += std::max(1.0, gap_dist(rng));
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const Ev& a, const Ev& b) { return a.ms < b.ms; });
    std::ostringstream out;
    for (const auto& e : events)
        out << e.name << (e.down ? " KeyDown " : " KeyUp ") << e.ms << "\n";
    return out.str();
}

Corpus generate(const std::vector<UserProfile>& profiles, int sessions,
                int presses_per_session) {
    if (profiles.size() < 2)
        throw std::invalid_argument("generate: need at least 2 profiles");
    Corpus corpus;
    corpus.subset = Subset::Baseline;
    for (const auto& p : profiles)
        for (int s = 0; s < sessions; ++s) {
            SessionRecord rec = parse_session(
                generate_raw_session(p, s, presses_per_session), p.user_id, s);
            rec.keyboard_tag = "synth-kb";
            corpus.sessions.push_back(std::move(rec));
        }
    return corpus;
}

void write_raw_corpus(const std::vector<UserProfile>& profiles, int sessions,
                      int presses_per_session, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream manifest(fs::path(dir) / "manifest.txt");
    if (!manifest) throw std::runtime_error("cannot write manifest in " + dir);
    manifest << "# file user session keyboard subset\n";
    for (const auto& p : profiles)
        for (int s = 0; s < sessions; ++s) {
            const std::string name =
                std::to_string(p.user_id) + "_" + std::to_string(s) + ".txt";
            std::ofstream raw(fs::path(dir) / name);
            raw << generate_raw_session(p, s, presses_per_session);
            manifest << name << " " << p.user_id << " " << s
                     << " synth-kb baseline\n";
        }
}

}  // namespace keydyn
