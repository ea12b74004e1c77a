#include "keydyn/keylog.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

namespace keydyn {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

const std::vector<std::string>& key_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (char c = 'A'; c <= 'Z'; ++c) v.push_back(std::string(1, c));
        for (char c = '0'; c <= '9'; ++c) v.push_back(std::string(1, c));
        for (int i = 1; i <= 12; ++i) v.push_back("F" + std::to_string(i));
        for (const char* n : {"Space", "Enter", "Tab", "Backspace", "Delete",
                              "Insert", "Home", "End", "PageUp", "PageDown", "Esc",
                              "LShift", "RShift", "LCtrl", "RCtrl", "LAlt", "RAlt",
                              "LCaps", "RCaps",
                              "Left", "Right", "Up", "Down",
                              "Comma", "Period", "Slash", "Semicolon", "Quote",
                              "LBracket", "RBracket", "Backslash", "Minus", "Equal",
                              "Grave",
                              "Num0", "Num1", "Num2", "Num3", "Num4", "Num5",
                              "Num6", "Num7", "Num8", "Num9",
                              "NumAdd", "NumSub", "NumMul", "NumDiv", "NumEnter",
                              "NumDecimal",
                              "PrintScreen", "ScrollLock", "Pause", "NumLock",
                              "Menu", "LWin", "RWin"})
            v.push_back(n);
        v.push_back("UNKNOWN");
        return v;
    }();
    return names;
}

}  // namespace

struct KeyTable::Impl {
    std::unordered_map<std::string, int> by_name;  // lowercased
    int unknown;
    int id_lshift, id_rshift, id_lcaps, id_rcaps, id_left, id_right;
    std::set<int> deletes, controls;
};

KeyTable::KeyTable() {
    static Impl impl = [] {
        Impl im;
        const auto& names = key_names();
        for (int i = 0; i < static_cast<int>(names.size()); ++i)
            im.by_name[lower(names[i])] = i;
        im.unknown = im.by_name.at("unknown");
        // Aliases for logs that do not distinguish left/right.
        im.by_name["shift"] = im.by_name.at("lshift");
        im.by_name["ctrl"] = im.by_name.at("lctrl");
        im.by_name["control"] = im.by_name.at("lctrl");
        im.by_name["alt"] = im.by_name.at("lalt");
        im.by_name["capslock"] = im.by_name.at("lcaps");
        im.by_name["escape"] = im.by_name.at("esc");
        im.by_name["return"] = im.by_name.at("enter");
        im.id_lshift = im.by_name.at("lshift");
        im.id_rshift = im.by_name.at("rshift");
        im.id_lcaps = im.by_name.at("lcaps");
        im.id_rcaps = im.by_name.at("rcaps");
        im.id_left = im.by_name.at("left");
        im.id_right = im.by_name.at("right");
        im.deletes = {im.by_name.at("backspace"), im.by_name.at("delete")};
        im.controls = {im.by_name.at("lctrl"), im.by_name.at("rctrl")};
        return im;
    }();
    impl_ = &impl;
}

const KeyTable& KeyTable::instance() {
    static KeyTable table;
    return table;
}

int KeyTable::id(std::string_view name) const {
    auto it = impl_->by_name.find(lower(name));
    return it == impl_->by_name.end() ? impl_->unknown : it->second;
}

const std::string& KeyTable::name(int id) const {
    const auto& names = key_names();
    if (id < 0 || id >= static_cast<int>(names.size()))
        throw std::out_of_range("key id out of range: " + std::to_string(id));
    return names[id];
}

int KeyTable::size() const { return static_cast<int>(key_names().size()); }
int KeyTable::unknown_id() const { return impl_->unknown; }

bool KeyTable::is_registered(std::string_view name) const {
    return impl_->by_name.count(lower(name)) > 0;
}

bool KeyTable::is_delete(int id) const { return impl_->deletes.count(id) > 0; }
bool KeyTable::is_lshift(int id) const { return id == impl_->id_lshift; }
bool KeyTable::is_rshift(int id) const { return id == impl_->id_rshift; }
bool KeyTable::is_lcaps(int id) const { return id == impl_->id_lcaps; }
bool KeyTable::is_rcaps(int id) const { return id == impl_->id_rcaps; }
bool KeyTable::is_control(int id) const { return impl_->controls.count(id) > 0; }
bool KeyTable::is_arrow(int id) const {
    return id == impl_->id_left || id == impl_->id_right;
}

SessionRecord parse_session(const std::string& raw_text, int user_id,
                            int session_index) {
    SessionRecord rec;
    rec.user_id = user_id;
    rec.session_index = session_index;

    const KeyTable& table = KeyTable::instance();
    // Per-key LIFO of pending down timestamps.
    std::unordered_map<int, std::vector<long long>> pending;

    std::istringstream in(raw_text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string key, action, ts;
        if (!(ls >> key)) continue;  // blank line
        if (!(ls >> action >> ts))
            throw ParseError("malformed event line " + std::to_string(line_no) +
                                 ": '" + line + "'",
                             line_no);
        long long ms = 0;
        auto [p, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), ms);
        if (ec != std::errc() || p != ts.data() + ts.size() || ms < 0)
            throw ParseError("bad timestamp on line " + std::to_string(line_no),
                             line_no);
        const int id = table.id(key);
        const std::string act = [&] {
            std::string a = action;
            std::transform(a.begin(), a.end(), a.begin(), ::tolower);
            return a;
        }();
        if (act == "keydown") {
            pending[id].push_back(ms);
        } else if (act == "keyup") {
            auto& stack = pending[id];
            if (stack.empty()) {
                ++rec.discarded_ups;
            } else {
                KeyPress press;
                press.key_id = id;
                press.down_ms = stack.back();
                press.up_ms = std::max(ms, stack.back());
                stack.pop_back();
                rec.presses.push_back(press);
            }
        } else {
            throw ParseError("unknown action '" + action + "' on line " +
                                 std::to_string(line_no),
                             line_no);
        }
    }
    for (const auto& [id, stack] : pending)
        rec.discarded_downs += static_cast<int>(stack.size());

    std::stable_sort(rec.presses.begin(), rec.presses.end(),
                     [](const KeyPress& a, const KeyPress& b) {
                         return a.down_ms < b.down_ms;
                     });
    return rec;
}

std::string serialize_session(const SessionRecord& s) {
    const KeyTable& table = KeyTable::instance();
    std::ostringstream out;
    // Interleave down/up events in timestamp order so reparsing recovers the
    // same press list.
    struct Ev {
        long long ms;
        int order;
        std::string line;
    };
    std::vector<Ev> events;
    int order = 0;
    for (const auto& p : s.presses) {
        events.push_back({p.down_ms, order++, table.name(p.key_id) + " KeyDown " +
                                                  std::to_string(p.down_ms)});
        events.push_back({p.up_ms, order++, table.name(p.key_id) + " KeyUp " +
                                                std::to_string(p.up_ms)});
    }
    std::stable_sort(events.begin(), events.end(), [](const Ev& a, const Ev& b) {
        return a.ms < b.ms;
    });
    for (const auto& e : events) out << e.line << "\n";
    return out.str();
}

std::string Fold::name() const {
    std::ostringstream out;
    out << "s" << train_sessions[0] << train_sessions[1] << "-train-s"
        << test_session << "-test";
    return out.str();
}

FoldBuild build_folds(const Corpus& corpus) {
    FoldBuild out;
    out.folds = {Fold{{1, 2}, 0}, Fold{{0, 2}, 1}, Fold{{0, 1}, 2}};

    std::map<int, std::set<int>> sessions_by_user;
    for (const auto& s : corpus.sessions)
        sessions_by_user[s.user_id].insert(s.session_index);

    std::set<int> complete;
    for (const auto& [user, sessions] : sessions_by_user) {
        if (sessions == std::set<int>{0, 1, 2})
            complete.insert(user);
        else
            out.excluded_users.push_back(user);
    }
    out.complete.subset = corpus.subset;
    for (const auto& s : corpus.sessions)
        if (complete.count(s.user_id)) out.complete.sessions.push_back(s);
    return out;
}

Corpus min_length_filter(const Corpus& corpus, std::size_t threshold,
                         std::vector<int>* removed_users) {
    std::map<int, std::size_t> min_presses;
    for (const auto& s : corpus.sessions) {
        auto it = min_presses.find(s.user_id);
        if (it == min_presses.end())
            min_presses[s.user_id] = s.presses.size();
        else
            it->second = std::min(it->second, s.presses.size());
    }
    Corpus out;
    out.subset = corpus.subset;
    std::set<int> removed;
    for (const auto& [user, n] : min_presses)
        if (n < threshold) removed.insert(user);
    for (const auto& s : corpus.sessions)
        if (!removed.count(s.user_id)) out.sessions.push_back(s);
    if (removed_users)
        removed_users->assign(removed.begin(), removed.end());
    return out;
}

namespace {
const char* subset_tag(Subset s) {
    switch (s) {
        case Subset::Baseline: return "baseline";
        case Subset::Rotation: return "rotation";
        default: return "all";
    }
}
Subset parse_subset(const std::string& s) {
    if (s == "baseline") return Subset::Baseline;
    if (s == "rotation") return Subset::Rotation;
    if (s == "all") return Subset::All;
    throw std::runtime_error("unknown subset tag: " + s);
}
}  // namespace

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << "keydyn-corpus v1\n";
    out << "subset " << subset_tag(corpus.subset) << "\n";
    for (const auto& s : corpus.sessions) {
        out << "session " << s.user_id << " " << s.session_index << " "
            << (s.keyboard_tag.empty() ? "-" : s.keyboard_tag) << " "
            << s.presses.size() << " " << s.discarded_ups << " "
            << s.discarded_downs << "\n";
        for (const auto& p : s.presses)
            out << p.key_id << " " << p.down_ms << " " << p.up_ms << "\n";
    }
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);
    std::string header;
    std::getline(in, header);
    if (header != "keydyn-corpus v1")
        throw std::runtime_error("unrecognized corpus header: " + header);
    Corpus corpus;
    std::string word;
    in >> word;
    if (word != "subset") throw std::runtime_error("missing subset line");
    in >> word;
    corpus.subset = parse_subset(word);
    while (in >> word) {
        if (word != "session")
            throw std::runtime_error("expected 'session', got: " + word);
        SessionRecord s;
        std::size_t n = 0;
        in >> s.user_id >> s.session_index >> s.keyboard_tag >> n >>
            s.discarded_ups >> s.discarded_downs;
        if (s.keyboard_tag == "-") s.keyboard_tag.clear();
        s.presses.resize(n);
        for (auto& p : s.presses) in >> p.key_id >> p.down_ms >> p.up_ms;
        if (!in) throw std::runtime_error("truncated corpus file: " + path);
        corpus.sessions.push_back(std::move(s));
    }
    return corpus;
}

Corpus ingest_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("cannot open manifest: " + manifest_path);
    const auto base = std::filesystem::path(manifest_path).parent_path();

    Corpus corpus;
    std::set<std::string> subsets_seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string file, tag, subset;
        int user = 0, session = 0;
        if (!(ls >> file >> user >> session >> tag >> subset))
            throw std::runtime_error("malformed manifest line " +
                                     std::to_string(line_no));
        subsets_seen.insert(subset);
        auto path = std::filesystem::path(file);
        if (path.is_relative()) path = base / path;
        std::ifstream raw(path);
        if (!raw)
            throw std::runtime_error("manifest references missing file: " +
                                     path.string());
        std::stringstream buf;
        buf << raw.rdbuf();
        SessionRecord rec = parse_session(buf.str(), user, session);
        rec.keyboard_tag = tag;
        corpus.sessions.push_back(std::move(rec));
    }
    if (subsets_seen.size() == 1)
        corpus.subset = parse_subset(*subsets_seen.begin());
    else
        corpus.subset = Subset::All;
    return corpus;
}

}  // namespace keydyn
