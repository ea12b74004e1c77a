#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace keydyn {

enum class KeyAction { Down, Up };

struct KeyEvent {
    int key_id = 0;
    KeyAction action = KeyAction::Down;
    long long timestamp_ms = 0;
};

struct KeyPress {
    int key_id = 0;
    long long down_ms = 0;
    long long up_ms = 0;
};

struct SessionRecord {
    int user_id = 0;
    int session_index = 0;  // 0, 1 or 2
    std::string keyboard_tag;
    std::vector<KeyPress> presses;  // sorted by down_ms
    int discarded_ups = 0;          // Up events with no pending Down
    int discarded_downs = 0;        // Down events never released
};

enum class Subset { Baseline, Rotation, All };

struct Corpus {
    Subset subset = Subset::All;
    std::vector<SessionRecord> sessions;
};

/// Fixed key-name <-> id mapping shared by every run. Lookups are
/// case-insensitive; unregistered names map to unknown_id().
class KeyTable {
public:
    static const KeyTable& instance();

    int id(std::string_view name) const;       // unknown_id() if unregistered
    const std::string& name(int id) const;
    int size() const;                          // number of ids including UNKNOWN
    int unknown_id() const;
    bool is_registered(std::string_view name) const;

    // Special-key groups backing the 7 rate features.
    bool is_delete(int id) const;
    bool is_lshift(int id) const;
    bool is_rshift(int id) const;
    bool is_lcaps(int id) const;
    bool is_rcaps(int id) const;
    bool is_control(int id) const;
    bool is_arrow(int id) const;   // left or right arrow

private:
    KeyTable();
    struct Impl;
    const Impl* impl_;
};

struct ParseError : std::runtime_error {
    int line_number;
    ParseError(const std::string& msg, int line)
        : std::runtime_error(msg), line_number(line) {}
};

/// Parses one raw session log. Each line is `<keyname> <KeyDown|KeyUp> <ms>`.
/// Up events match the most recent unmatched Down of the same key (per-key
/// LIFO); unmatched events are discarded and tallied on the record.
SessionRecord parse_session(const std::string& raw_text, int user_id, int session_index);

/// Canonical line-oriented serialization of a parsed session (presses only).
std::string serialize_session(const SessionRecord& s);

struct Fold {
    std::array<int, 2> train_sessions;
    int test_session;
    std::string name() const;  // e.g. "s01-train-s2-test"
};

struct FoldBuild {
    std::vector<Fold> folds;        // always the 3 session folds
    Corpus complete;                // users with all 3 sessions
    std::vector<int> excluded_users;
};

/// 3-fold cross validation with each session as a fold. Users missing a
/// session are excluded and reported.
FoldBuild build_folds(const Corpus& corpus);

/// Removes users whose smallest session has fewer than `threshold` presses.
Corpus min_length_filter(const Corpus& corpus, std::size_t threshold,
                         std::vector<int>* removed_users = nullptr);

// Canonical corpus file (versioned, line-oriented) so downstream stages
// never reparse raw logs.
void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

/// Reads a manifest (lines: `<file> <user_id> <session_index> <keyboard_tag>
/// <baseline|rotation>`; '#' comments) and parses every referenced raw log.
/// Relative file paths resolve against the manifest's directory.
Corpus ingest_manifest(const std::string& manifest_path);

}  // namespace keydyn
