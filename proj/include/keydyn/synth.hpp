#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "keydyn/keylog.hpp"

namespace keydyn {

/// Per-user typing profile for the synthetic corpus generator. Hold and gap
/// times are log-normal (non-negative, right-skewed); special keys are
/// injected as Bernoulli events per press.
struct UserProfile {
    int user_id = 0;
    double hold_mean_ms = 80;
    double hold_std_ms = 12;
    double gap_mean_ms = 150;
    double gap_std_ms = 40;
    // delete, lshift, rshift, lcaps, rcaps, control, arrow
    std::array<double, 7> special_propensity{};
    std::uint64_t seed = 0;
};

struct SynthOptions {
    int users = 10;
    int sessions = 3;
    int presses_per_session = 600;
    double hold_base_ms = 70;
    double hold_separation_ms = 30;  // mean-hold gap between adjacent users
    double hold_std_ms = 12;
    double gap_base_ms = 140;
    double gap_std_ms = 35;
    double rate_spread = 0.02;  // scale of per-user special-key propensities
    std::uint64_t seed = 1;
};

std::vector<UserProfile> make_profiles(const SynthOptions& opts);

/// Raw-log text for one session, deterministic per (profile.seed, session).
std::string generate_raw_session(const UserProfile& profile, int session_index,
                                 int presses);

/// Full corpus via generate + reparse, so generated data always passes the
/// ingest path.
Corpus generate(const std::vector<UserProfile>& profiles, int sessions,
                int presses_per_session);

/// Writes `<userid>_<session>.txt` raw logs plus `manifest.txt` into `dir`.
void write_raw_corpus(const std::vector<UserProfile>& profiles, int sessions,
                      int presses_per_session, const std::string& dir);

}  // namespace keydyn
