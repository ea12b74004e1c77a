// keydyn: command-line front end for the keystroke-dynamics pipeline.
// Every run writes a <name>.run.json manifest with the full flag snapshot,
// input/output hashes and the metric summary, so results can be re-run and
// audited from the manifest alone.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "keydyn/metrics.hpp"
#include "keydyn/synth.hpp"
#include "keydyn/trainer.hpp"

using namespace keydyn;
using nlohmann::json;

namespace {

std::string fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "missing";
    std::uint64_t h = 0xcbf29ce484222325ull;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    std::ostringstream out;
    out << std::hex << h;
    return out.str();
}

struct RunManifest {
    std::string subcommand;
    json config = json::object();
    json inputs = json::object();
    json outputs = json::object();
    json metrics = json::object();

    void add_input(const std::string& key, const std::string& path) {
        inputs[key] = {{"path", path}, {"fnv1a", fnv1a_file(path)}};
    }
    void add_output(const std::string& key, const std::string& path) {
        outputs[key] = {{"path", path}, {"fnv1a", fnv1a_file(path)}};
    }
    void write(const std::string& path) const {
        json j = {{"subcommand", subcommand},
                  {"config", config},
                  {"inputs", inputs},
                  {"outputs", outputs},
                  {"metrics", metrics}};
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write manifest: " + path);
        out << j.dump(2) << "\n";
        std::cout << "run manifest: " << path << "\n";
    }
};

// Flags shared by every stage that consumes a canonical corpus file.
struct DataFlags {
    std::string corpus;
    int fold = 2;          // test-session index
    int key_length = 50;
    int stride = 50;
    bool fused = false;
    std::size_t min_length = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--corpus", corpus, "canonical corpus file")
            ->required();
        cmd->add_option("--fold", fold, "test session index (0..2)")
            ->check(CLI::Range(0, 2));
        cmd->add_option("--key-length", key_length, "digraph rows per window");
        cmd->add_option("--stride", stride, "window stride in digraphs");
        cmd->add_flag("--fused", fused, "append the 7 key-rate features");
        cmd->add_option("--min-length", min_length,
                        "drop users whose shortest session is below this");
    }

    FoldFeatures load(RunManifest& manifest) const {
        manifest.add_input("corpus", corpus);
        Corpus c = load_corpus(corpus);
        if (min_length > 0) c = min_length_filter(c, min_length);
        auto folds = build_folds(c);
        if (!folds.excluded_users.empty()) {
            std::cout << "excluded users (incomplete sessions):";
            for (int u : folds.excluded_users) std::cout << " " << u;
            std::cout << "\n";
        }
        return build_fold_features(folds.complete, folds.folds[fold],
                                   key_length, stride, fused);
    }

    json to_json() const {
        return {{"corpus", corpus},         {"fold", fold},
                {"key_length", key_length}, {"stride", stride},
                {"fused", fused},           {"min_length", min_length}};
    }
};

struct ModelFlags {
    std::vector<int> kernel_sizes{2, 2, 2};
    int out_channels = 32;
    int conv_depth = 1;
    int gru_hidden = 8;
    bool no_attention = false;
    int rate_width = 8;
    double dropout = 0.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--kernel-sizes", kernel_sizes,
                        "parallel convolution kernel sizes");
        cmd->add_option("--out-channels", out_channels, "channels per branch");
        cmd->add_option("--conv-depth", conv_depth, "convolution blocks");
        cmd->add_option("--gru-hidden", gru_hidden, "recurrent state width");
        cmd->add_flag("--no-attention", no_attention,
                      "pool with the last hidden state instead of attention");
        cmd->add_option("--rate-width", rate_width, "rate branch width");
        cmd->add_option("--dropout", dropout, "dropout before the head");
    }

    ModelConfig build(const DataFlags& data, int head_dim) const {
        ModelConfig cfg;
        cfg.seq_len = data.key_length;
        cfg.kernel_sizes = kernel_sizes;
        cfg.out_channels = out_channels;
        cfg.conv_depth = conv_depth;
        cfg.gru_hidden = gru_hidden;
        cfg.attention = !no_attention;
        cfg.rate_branch = data.fused;
        cfg.rate_branch_width = rate_width;
        cfg.head_dim = head_dim;
        cfg.dropout = dropout;
        return cfg;
    }
};

struct TrainFlags {
    double lr = 0.001;
    double weight_decay = 1e-5;
    std::vector<int> milestones{70};
    double gamma = 0.1;
    int epochs = 80;
    int batch_size = 32;
    double pos_weight = 1.0;
    std::uint64_t seed = 0;
    bool weighted_sampler = false;
    double validation_fraction = 0.1;

    void attach(CLI::App* cmd) {
        cmd->add_option("--lr", lr, "learning rate");
        cmd->add_option("--weight-decay", weight_decay, "decoupled decay");
        cmd->add_option("--milestones", milestones, "lr decay epochs");
        cmd->add_option("--gamma", gamma, "lr decay factor");
        cmd->add_option("--epochs", epochs, "training epochs");
        cmd->add_option("--batch-size", batch_size, "minibatch size");
        cmd->add_option("--pos-weight", pos_weight, "positive-class weight");
        cmd->add_option("--seed", seed, "rng seed (required, never implicit)")
            ->required();
        cmd->add_flag("--weighted-sampler", weighted_sampler,
                      "sample batches inversely to class frequency");
        cmd->add_option("--val-fraction", validation_fraction,
                        "stratified validation share of the train split");
    }

    TrainConfig build() const {
        TrainConfig t;
        t.learning_rate = lr;
        t.weight_decay = weight_decay;
        t.milestones = milestones;
        t.gamma = gamma;
        t.epochs = epochs;
        t.batch_size = batch_size;
        t.pos_weight = pos_weight;
        t.seed = seed;
        t.weighted_sampler = weighted_sampler;
        t.validation_fraction = validation_fraction;
        return t;
    }

    json to_json() const {
        return {{"lr", lr},
                {"weight_decay", weight_decay},
                {"milestones", milestones},
                {"gamma", gamma},
                {"epochs", epochs},
                {"batch_size", batch_size},
                {"pos_weight", pos_weight},
                {"seed", seed},
                {"weighted_sampler", weighted_sampler},
                {"validation_fraction", validation_fraction}};
    }
};

struct ResampleFlags {
    double smote_ratio = 0;
    double undersample_ratio = 0;
    int k_neighbors = 5;

    void attach(CLI::App* cmd) {
        cmd->add_option("--smote-ratio", smote_ratio,
                        "oversample positives up to ratio * negatives");
        cmd->add_option("--undersample-ratio", undersample_ratio,
                        "keep positives/ratio negatives");
        cmd->add_option("--k-neighbors", k_neighbors, "smote neighborhood");
    }
    ResampleConfig build() const {
        return {smote_ratio, undersample_ratio, k_neighbors};
    }
    json to_json() const {
        return {{"smote_ratio", smote_ratio},
                {"undersample_ratio", undersample_ratio},
                {"k_neighbors", k_neighbors}};
    }
};

json report_to_json(const EvalReport& r) {
    return {{"accuracy", r.accuracy}, {"precision", r.precision},
            {"recall", r.recall},     {"f1", r.f1},
            {"auc", r.auc},           {"eer", r.eer},
            {"tp", r.tp},             {"fp", r.fp},
            {"tn", r.tn},             {"fn", r.fn}};
}

std::string manifest_path(const std::string& anchor, const std::string& fallback) {
    return (anchor.empty() ? fallback : anchor) + ".run.json";
}

std::string trimmed(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Rewrites "<stage> ... --config file ..." into explicit flags. Lines are flat
// key=value pairs; an optional [section] header restricts keys to that stage.
// Flags given on the command line win over the file.
void expand_stage_config(CLI::App& app, std::vector<std::string>& args) {
    std::size_t sub_pos = args.size();
    CLI::App* sub = nullptr;
    for (std::size_t i = 0; i < args.size(); ++i) {
        sub = app.get_subcommand_no_throw(args[i]);
        if (sub != nullptr) {
            sub_pos = i;
            break;
        }
    }
    if (sub == nullptr) return;

    std::string file;
    std::size_t cfg_pos = args.size(), cfg_len = 0;
    for (std::size_t i = sub_pos + 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            file = args[i + 1];
            cfg_pos = i;
            cfg_len = 2;
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            file = args[i].substr(9);
            cfg_pos = i;
            cfg_len = 1;
            break;
        }
    }
    if (cfg_len == 0) return;
    args.erase(args.begin() + cfg_pos, args.begin() + cfg_pos + cfg_len);

    std::set<std::string> given;
    for (const auto& a : args)
        if (a.rfind("--", 0) == 0) given.insert(a.substr(0, a.find('=')));

    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open config file: " + file);
    std::vector<std::string> extra;
    std::string line, section;
    while (std::getline(in, line)) {
        line = trimmed(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trimmed(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("bad config line (want key=value): " + line);
        if (!section.empty() && section != sub->get_name()) continue;
        const std::string flag = "--" + trimmed(line.substr(0, eq));
        if (given.count(flag)) continue;
        extra.push_back(flag);
        extra.push_back(trimmed(line.substr(eq + 1)));
    }
    args.insert(args.begin() + sub_pos + 1, extra.begin(), extra.end());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"keystroke-dynamics authentication toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "flat key=value config file");
    app.get_config_formatter_base()->valueSeparator('=');
    int jobs = 1;
    app.add_option("--jobs", jobs, "worker pool size (current stages are single-threaded)");

    // ---- ingest ----
    auto* ingest = app.add_subcommand("ingest", "parse raw logs into a canonical corpus");
    std::string ingest_manifest_path, ingest_out;
    std::size_t ingest_min_length = 0;
    ingest->add_option("--manifest", ingest_manifest_path, "raw-log manifest file")->required();
    ingest->add_option("--out", ingest_out, "canonical corpus output")->required();
    ingest->add_option("--min-length", ingest_min_length, "minimum presses per session");

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a deterministic synthetic corpus");
    SynthOptions synth_opts;
    std::string synth_out, synth_raw_dir;
    synth->add_option("--users", synth_opts.users, "number of users");
    synth->add_option("--sessions", synth_opts.sessions, "sessions per user");
    synth->add_option("--presses", synth_opts.presses_per_session, "presses per session");
    synth->add_option("--hold-base", synth_opts.hold_base_ms, "first user's mean hold (ms)");
    synth->add_option("--hold-sep", synth_opts.hold_separation_ms, "mean-hold gap between users (ms)");
    synth->add_option("--hold-std", synth_opts.hold_std_ms, "hold std (ms)");
    synth->add_option("--gap-base", synth_opts.gap_base_ms, "base inter-key gap (ms)");
    synth->add_option("--gap-std", synth_opts.gap_std_ms, "gap std (ms)");
    synth->add_option("--rate-spread", synth_opts.rate_spread, "special-key propensity scale");
    synth->add_option("--seed", synth_opts.seed, "rng seed (required)")->required();
    synth->add_option("--out", synth_out, "canonical corpus output");
    synth->add_option("--raw-dir", synth_raw_dir, "also write raw logs + manifest here");

    // ---- features ----
    auto* features = app.add_subcommand("features", "featurize one fold to csv");
    DataFlags feat_data;
    feat_data.attach(features);
    std::string feat_out;
    features->add_option("--out", feat_out, "output prefix (.train.csv/.test.csv)")->required();

    // ---- train-multiclass ----
    auto* trainmc = app.add_subcommand("train-multiclass", "train the identification backbone");
    DataFlags mc_data;
    ModelFlags mc_model;
    TrainFlags mc_train;
    mc_data.attach(trainmc);
    mc_model.attach(trainmc);
    mc_train.attach(trainmc);
    std::string mc_out;
    trainmc->add_option("--out", mc_out, "checkpoint output")->required();

    // ---- finetune ----
    auto* finetune = app.add_subcommand("finetune", "per-user binary verification from a backbone");
    DataFlags ft_data;
    ModelFlags ft_model;
    TrainFlags ft_train;
    ResampleFlags ft_resample;
    ft_data.attach(finetune);
    ft_model.attach(finetune);
    ft_train.attach(finetune);
    ft_resample.attach(finetune);
    std::string ft_from, ft_mode = "at-best-val", ft_out_dir = ".";
    int ft_user = -1;
    bool ft_freeze = false, ft_scratch = false;
    finetune->add_option("--from", ft_from, "multiclass checkpoint to start from");
    finetune->add_flag("--scratch", ft_scratch, "train from random init instead of --from");
    finetune->add_option("--user", ft_user, "label index; -1 runs every user");
    finetune->add_flag("--freeze", ft_freeze, "train the head only");
    finetune->add_option("--select", ft_mode, "at-best-val | at-best-eer | final");
    finetune->add_option("--out-dir", ft_out_dir, "checkpoint/score output directory");

    // ---- distill ----
    auto* distill = app.add_subcommand("distill", "train a student against teacher soft labels");
    DataFlags ds_data;
    ModelFlags ds_model;
    TrainFlags ds_train;
    ds_data.attach(distill);
    ds_model.attach(distill);
    ds_train.attach(distill);
    std::string ds_teacher, ds_out, ds_mode = "at-best-val";
    int ds_user = 0;
    double ds_w_student = 0.5, ds_w_teacher = 0.5;
    distill->add_option("--teacher", ds_teacher, "multiclass teacher checkpoint")->required();
    distill->add_option("--user", ds_user, "target label index")->required();
    distill->add_option("--w-student", ds_w_student, "hard-label loss weight");
    distill->add_option("--w-teacher", ds_w_teacher, "soft-label loss weight");
    distill->add_option("--select", ds_mode, "at-best-val | at-best-eer | final");
    distill->add_option("--out", ds_out, "student checkpoint output")->required();

    // ---- ensemble ----
    auto* ensemble = app.add_subcommand("ensemble", "average member probabilities on the test split");
    DataFlags en_data;
    en_data.attach(ensemble);
    std::vector<std::string> en_models;
    std::string en_scores_out;
    int en_user = 0;
    ensemble->add_option("--model", en_models, "member checkpoint (repeat)")
        ->required()
        ->expected(-2);
    ensemble->add_option("--user", en_user, "target label index")->required();
    ensemble->add_option("--scores-out", en_scores_out, "write member-mean scores csv");

    // ---- sweep-posweight ----
    auto* sweep = app.add_subcommand("sweep-posweight", "fine-tune every user per pos-weight");
    DataFlags sw_data;
    TrainFlags sw_train;
    sw_data.attach(sweep);
    sw_train.attach(sweep);
    std::string sw_from, sw_mode = "at-best-val";
    std::vector<double> sw_weights{0.1, 1.0, 10.0};
    bool sw_freeze = true;
    sweep->add_option("--from", sw_from, "multiclass checkpoint")->required();
    sweep->add_option("--weights", sw_weights, "pos-weight values to sweep");
    sweep->add_flag("--no-freeze{false}", sw_freeze, "also update the backbone");
    sweep->add_option("--select", sw_mode, "at-best-val | at-best-eer | final");

    // ---- smote ----
    auto* smote_cmd = app.add_subcommand("smote", "oversample one user's windows in a feature csv");
    std::string sm_in, sm_out;
    int sm_user = 0, sm_k = 5;
    double sm_ratio = 0.5;
    std::uint64_t sm_seed = 0;
    smote_cmd->add_option("--in", sm_in, "feature csv input")->required();
    smote_cmd->add_option("--user", sm_user, "minority user id")->required();
    smote_cmd->add_option("--ratio", sm_ratio, "target positives / negatives");
    smote_cmd->add_option("--k-neighbors", sm_k, "neighborhood size");
    smote_cmd->add_option("--seed", sm_seed, "rng seed (required)")->required();
    smote_cmd->add_option("--out", sm_out, "augmented csv output")->required();

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "score a checkpoint or a saved scores csv");
    std::string ev_scores, ev_model;
    double ev_threshold = 0.5;
    bool ev_swap = false;
    int ev_user = 0;
    DataFlags ev_data;
    auto* ev_corpus_opt = eval->add_option("--corpus", ev_data.corpus, "canonical corpus file");
    eval->add_option("--fold", ev_data.fold, "test session index")->check(CLI::Range(0, 2));
    eval->add_option("--key-length", ev_data.key_length, "digraph rows per window");
    eval->add_option("--stride", ev_data.stride, "window stride");
    eval->add_flag("--fused", ev_data.fused, "append rate features");
    eval->add_option("--model", ev_model, "binary checkpoint to score");
    eval->add_option("--user", ev_user, "target label index for --model");
    eval->add_option("--scores", ev_scores, "previously saved scores csv");
    eval->add_option("--threshold", ev_threshold, "decision threshold");
    eval->add_flag("--swap-labels", ev_swap, "treat the impostor class as positive");

    // ---- explain ----
    auto* explain = app.add_subcommand("explain", "local surrogate explanation of one window");
    DataFlags ex_data;
    ex_data.attach(explain);
    std::string ex_model;
    int ex_index = 0, ex_user = 0, ex_perturb = 200;
    std::uint64_t ex_seed = 0;
    explain->add_option("--model", ex_model, "checkpoint to explain")->required();
    explain->add_option("--user", ex_user, "target label index");
    explain->add_option("--index", ex_index, "test window index");
    explain->add_option("--perturbations", ex_perturb, "surrogate sample count");
    explain->add_option("--seed", ex_seed, "rng seed (required)")->required();

    // ---- eer-report ----
    auto* eer_cmd = app.add_subcommand("eer-report", "EER/AUC summary of a scores csv");
    std::string eer_scores;
    eer_cmd->add_option("--scores", eer_scores, "scores csv")->required();

    // Each stage also accepts its own flat key=value config file. The vendored
    // parser only reads config files at the top level, so a stage-level
    // "--config file" is expanded into the equivalent flags before parsing.
    for (auto* sub : app.get_subcommands(nullptr))
        sub->add_option("--config", "flat key=value config file for this stage");

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        expand_stage_config(app, args);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (*ingest) {
            RunManifest rm;
            rm.subcommand = "ingest";
            rm.config = {{"manifest", ingest_manifest_path},
                         {"out", ingest_out},
                         {"min_length", ingest_min_length}};
            rm.add_input("manifest", ingest_manifest_path);
            Corpus corpus = ingest_manifest(ingest_manifest_path);
            std::vector<int> removed;
            if (ingest_min_length > 0)
                corpus = min_length_filter(corpus, ingest_min_length, &removed);
            save_corpus(corpus, ingest_out);
            rm.add_output("corpus", ingest_out);
            rm.metrics = {{"sessions", corpus.sessions.size()},
                          {"removed_users", removed}};
            std::cout << "ingested " << corpus.sessions.size() << " sessions\n";
            rm.write(manifest_path(ingest_out, "ingest"));
        } else if (*synth) {
            if (synth_out.empty() && synth_raw_dir.empty())
                throw CLI::ValidationError("synth", "need --out and/or --raw-dir");
            RunManifest rm;
            rm.subcommand = "synth";
            rm.config = {{"users", synth_opts.users},
                         {"sessions", synth_opts.sessions},
                         {"presses", synth_opts.presses_per_session},
                         {"hold_base", synth_opts.hold_base_ms},
                         {"hold_sep", synth_opts.hold_separation_ms},
                         {"hold_std", synth_opts.hold_std_ms},
                         {"gap_base", synth_opts.gap_base_ms},
                         {"gap_std", synth_opts.gap_std_ms},
                         {"rate_spread", synth_opts.rate_spread},
                         {"seed", synth_opts.seed}};
            auto profiles = make_profiles(synth_opts);
            if (!synth_raw_dir.empty()) {
                write_raw_corpus(profiles, synth_opts.sessions,
                                 synth_opts.presses_per_session, synth_raw_dir);
                rm.outputs["raw_dir"] = synth_raw_dir;
            }
            if (!synth_out.empty()) {
                Corpus corpus = generate(profiles, synth_opts.sessions,
                                         synth_opts.presses_per_session);
                save_corpus(corpus, synth_out);
                rm.add_output("corpus", synth_out);
                rm.metrics["sessions"] = corpus.sessions.size();
            }
            rm.write(manifest_path(synth_out, "synth"));
        } else if (*features) {
            RunManifest rm;
            rm.subcommand = "features";
            rm.config = feat_data.to_json();
            auto ff = feat_data.load(rm);
            // Rebuild FeatureWindow rows from the normalized datasets so the
            // csv matches exactly what the trainer consumes.
            auto dump = [&](const DataSet& ds, const std::string& path) {
                std::vector<FeatureWindow> rows;
                for (std::size_t i = 0; i < ds.size(); ++i) {
                    FeatureWindow w;
                    w.key_length = ds.key_length;
                    w.timing.assign(ds.timing[i].begin(), ds.timing[i].end());
                    w.has_rates = ds.fused;
                    if (ds.fused)
                        for (int r = 0; r < 7; ++r)
                            w.rates[r] = ds.rates[i][r];
                    w.user_id = ff.user_ids[ds.labels[i]];
                    rows.push_back(std::move(w));
                }
                save_feature_csv(rows, path);
            };
            dump(ff.train, feat_out + ".train.csv");
            dump(ff.test, feat_out + ".test.csv");
            rm.add_output("train", feat_out + ".train.csv");
            rm.add_output("test", feat_out + ".test.csv");
            rm.metrics = {{"train_windows", ff.train.size()},
                          {"test_windows", ff.test.size()},
                          {"users", ff.user_ids.size()}};
            std::cout << "train " << ff.train.size() << " windows, test "
                      << ff.test.size() << " windows\n";
            rm.write(manifest_path(feat_out, "features"));
        } else if (*trainmc) {
            RunManifest rm;
            rm.subcommand = "train-multiclass";
            rm.config = {{"data", mc_data.to_json()},
                         {"train", mc_train.to_json()}};
            auto ff = mc_data.load(rm);
            auto cfg = mc_model.build(mc_data,
                                      static_cast<int>(ff.user_ids.size()));
            rm.config["model"] = cfg.to_json();
            auto result = train_multiclass(ff, cfg, mc_train.build());
            save_checkpoint(result.model, mc_out);
            rm.add_output("checkpoint", mc_out);
            rm.metrics = {{"test_accuracy", result.test_accuracy},
                          {"val_accuracy", result.val_accuracy},
                          {"diverged", result.history.diverged},
                          {"best_epoch", result.history.best_epoch}};
            std::cout << "test accuracy " << result.test_accuracy << "\n";
            rm.write(manifest_path(mc_out, "train-multiclass"));
        } else if (*finetune) {
            if (ft_from.empty() && !ft_scratch)
                throw CLI::ValidationError("finetune", "need --from or --scratch");
            RunManifest rm;
            rm.subcommand = "finetune";
            rm.config = {{"data", ft_data.to_json()},
                         {"train", ft_train.to_json()},
                         {"resample", ft_resample.to_json()},
                         {"from", ft_from},
                         {"freeze", ft_freeze},
                         {"select", ft_mode},
                         {"user", ft_user}};
            auto ff = ft_data.load(rm);
            const auto mode = select_mode_from_string(ft_mode);
            std::optional<Model<float>> base;
            if (!ft_scratch) {
                rm.add_input("from", ft_from);
                base = load_checkpoint<float>(ft_from);
            }
            const auto bin_cfg = ft_model.build(ft_data, 1);
            const auto tcfg = ft_train.build();
            const auto rcfg = ft_resample.build();
            auto run_user = [&](int u) {
                auto r = train_binary(base ? &*base : nullptr, bin_cfg, ff, u,
                                      tcfg, ft_freeze, mode, rcfg);
                const std::string stem =
                    ft_out_dir + "/user" + std::to_string(ff.user_ids[u]);
                save_checkpoint(r.model, stem + ".ckpt");
                save_scores_csv(r.test_scores, stem + ".scores.csv");
                rm.add_output("user" + std::to_string(ff.user_ids[u]),
                              stem + ".ckpt");
                std::cout << "user " << ff.user_ids[u] << ": "
                          << r.report.text_table() << "\n";
                return r;
            };
            if (ft_user >= 0) {
                auto r = run_user(ft_user);
                rm.metrics = report_to_json(r.report);
            } else {
                double acc = 0, eer = 0;
                const auto n = static_cast<double>(ff.user_ids.size());
                for (std::size_t u = 0; u < ff.user_ids.size(); ++u) {
                    auto r = run_user(static_cast<int>(u));
                    acc += r.report.accuracy / n;
                    eer += r.report.eer / n;
                }
                rm.metrics = {{"avg_accuracy", acc}, {"avg_eer", eer}};
                std::cout << "average accuracy " << acc << ", average eer "
                          << eer << "\n";
            }
            rm.write(manifest_path(ft_out_dir + "/finetune", ""));
        } else if (*distill) {
            RunManifest rm;
            rm.subcommand = "distill";
            rm.config = {{"data", ds_data.to_json()},
                         {"train", ds_train.to_json()},
                         {"teacher", ds_teacher},
                         {"user", ds_user},
                         {"w_student", ds_w_student},
                         {"w_teacher", ds_w_teacher},
                         {"select", ds_mode}};
            auto ff = ds_data.load(rm);
            rm.add_input("teacher", ds_teacher);
            auto teacher = load_checkpoint<float>(ds_teacher);
            DistillTeacher dt{&teacher, ds_w_student, ds_w_teacher};
            auto r = train_binary(&teacher, ds_model.build(ds_data, 1), ff,
                                  ds_user, ds_train.build(), /*freeze=*/false,
                                  select_mode_from_string(ds_mode), {}, &dt);
            save_checkpoint(r.model, ds_out);
            rm.add_output("student", ds_out);
            rm.metrics = report_to_json(r.report);
            std::cout << r.report.text_table() << "\n";
            rm.write(manifest_path(ds_out, "distill"));
        } else if (*ensemble) {
            RunManifest rm;
            rm.subcommand = "ensemble";
            rm.config = {{"data", en_data.to_json()},
                         {"models", en_models},
                         {"user", en_user}};
            auto ff = en_data.load(rm);
            std::vector<Model<float>> members;
            for (const auto& path : en_models) {
                rm.add_input(path, path);
                members.push_back(load_checkpoint<float>(path));
            }
            auto scored = ensemble_scores(members, ff.test, en_user);
            auto report = classify_metrics(scored);
            if (!en_scores_out.empty()) {
                save_scores_csv(scored, en_scores_out);
                rm.add_output("scores", en_scores_out);
            }
            rm.metrics = report_to_json(report);
            std::cout << report.text_table() << "\n";
            rm.write(manifest_path(en_scores_out, "ensemble"));
        } else if (*sweep) {
            RunManifest rm;
            rm.subcommand = "sweep-posweight";
            rm.config = {{"data", sw_data.to_json()},
                         {"train", sw_train.to_json()},
                         {"from", sw_from},
                         {"weights", sw_weights},
                         {"freeze", sw_freeze},
                         {"select", sw_mode}};
            auto ff = sw_data.load(rm);
            rm.add_input("from", sw_from);
            auto base = load_checkpoint<float>(sw_from);
            auto rows = posweight_sweep(base, ff, sw_train.build(), sw_weights,
                                        sw_freeze,
                                        select_mode_from_string(sw_mode));
            std::cout << "pos_weight accuracy precision recall eer\n";
            for (const auto& row : rows) {
                std::cout << row.pos_weight << " " << row.avg_accuracy << " "
                          << row.avg_precision << " " << row.avg_recall << " "
                          << row.avg_eer << "\n";
                rm.metrics[std::to_string(row.pos_weight)] = {
                    {"avg_accuracy", row.avg_accuracy},
                    {"avg_precision", row.avg_precision},
                    {"avg_recall", row.avg_recall},
                    {"avg_eer", row.avg_eer}};
            }
            rm.write(manifest_path(sw_from + ".sweep", ""));
        } else if (*smote_cmd) {
            RunManifest rm;
            rm.subcommand = "smote";
            rm.config = {{"in", sm_in},     {"user", sm_user},
                         {"ratio", sm_ratio}, {"k_neighbors", sm_k},
                         {"seed", sm_seed},  {"out", sm_out}};
            rm.add_input("features", sm_in);
            auto rows = load_feature_csv(sm_in);
            if (rows.empty()) throw std::runtime_error("empty feature csv");
            LabeledSet set;
            for (const auto& w : rows)
                set.push(flatten(w), w.user_id == sm_user ? 1 : 0);
            auto balanced = smote_balance(set, sm_ratio, sm_seed, sm_k);
            // Synthetic rows are appended after the originals; emit them as
            // extra windows for the minority user.
            std::vector<FeatureWindow> out_rows = rows;
            const bool has_rates = rows.front().has_rates;
            const int L = rows.front().key_length;
            for (std::size_t i = rows.size(); i < balanced.size(); ++i) {
                FeatureWindow w;
                w.key_length = L;
                w.has_rates = has_rates;
                const auto& flat = balanced.rows[i];
                w.timing.assign(flat.begin(), flat.begin() + L * 6);
                if (has_rates)
                    for (int r = 0; r < 7; ++r)
                        w.rates[r] = flat[L * 6 + r];
                w.user_id = sm_user;
                out_rows.push_back(std::move(w));
            }
            save_feature_csv(out_rows, sm_out);
            rm.add_output("features", sm_out);
            rm.metrics = {{"input_rows", rows.size()},
                          {"output_rows", out_rows.size()},
                          {"synthetic_rows", out_rows.size() - rows.size()}};
            std::cout << "wrote " << out_rows.size() << " rows ("
                      << out_rows.size() - rows.size() << " synthetic)\n";
            rm.write(manifest_path(sm_out, "smote"));
        } else if (*eval) {
            RunManifest rm;
            rm.subcommand = "eval";
            rm.config = {{"scores", ev_scores},   {"model", ev_model},
                         {"threshold", ev_threshold}, {"swap_labels", ev_swap},
                         {"user", ev_user}};
            ScoredSet scored;
            if (!ev_scores.empty()) {
                rm.add_input("scores", ev_scores);
                scored = load_scores_csv(ev_scores);
            } else if (!ev_model.empty() && *ev_corpus_opt) {
                rm.config["data"] = ev_data.to_json();
                auto ff = ev_data.load(rm);
                rm.add_input("model", ev_model);
                auto model = load_checkpoint<float>(ev_model);
                scored = binary_scores(model, ff.test, ev_user);
            } else {
                throw CLI::ValidationError(
                    "eval", "need --scores, or --model with --corpus");
            }
            auto report = classify_metrics(scored, ev_threshold, !ev_swap);
            rm.metrics = report_to_json(report);
            std::cout << report.text_table() << "\n";
            rm.write(manifest_path(ev_scores.empty() ? ev_model : ev_scores,
                                   "eval"));
        } else if (*explain) {
            RunManifest rm;
            rm.subcommand = "explain";
            rm.config = {{"data", ex_data.to_json()}, {"model", ex_model},
                         {"user", ex_user},           {"index", ex_index},
                         {"perturbations", ex_perturb}, {"seed", ex_seed}};
            auto ff = ex_data.load(rm);
            rm.add_input("model", ex_model);
            auto model = load_checkpoint<float>(ex_model);
            if (ex_index < 0 ||
                static_cast<std::size_t>(ex_index) >= ff.test.size())
                throw std::runtime_error("--index outside the test split");
            const int L = ff.key_length;
            const std::size_t dim =
                static_cast<std::size_t>(L) * 6 + (ff.fused ? 7 : 0);
            std::vector<double> mean(dim, 0.0);
            for (std::size_t i = 0; i < ff.train.size(); ++i) {
                for (std::size_t j = 0; j < static_cast<std::size_t>(L) * 6; ++j)
                    mean[j] +=
                        ff.train.timing[i][j] / static_cast<double>(ff.train.size());
                if (ff.fused)
                    for (int r = 0; r < 7; ++r)
                        mean[L * 6 + r] += ff.train.rates[i][r] /
                                           static_cast<double>(ff.train.size());
            }
            std::vector<double> x(ff.test.timing[ex_index].begin(),
                                  ff.test.timing[ex_index].end());
            if (ff.fused)
                for (int r = 0; r < 7; ++r)
                    x.push_back(ff.test.rates[ex_index][r]);
            auto scorer = [&](const std::vector<double>& z) {
                DataSet one;
                one.key_length = L;
                one.fused = ff.fused;
                one.timing.push_back(
                    std::vector<float>(z.begin(), z.begin() + L * 6));
                std::array<float, 7> rates{};
                if (ff.fused)
                    for (int r = 0; r < 7; ++r)
                        rates[r] = static_cast<float>(z[L * 6 + r]);
                one.rates.push_back(rates);
                one.labels.push_back(0);
                if (model.config().head_dim == 1)
                    return binary_scores(model, one, -1).prob[0];
                return multiclass_target_probs(model, one, ex_user)[0];
            };
            LimeOptions opts;
            opts.n_perturb = ex_perturb;
            auto expl =
                lime_explain(scorer, x, mean, L, ff.fused, ex_seed, opts);
            std::cout << "surrogate fidelity (r^2): " << expl.fidelity << "\n";
            std::cout << "group importances:\n";
            for (const auto& [group, weight] : expl.group_importance) {
                std::cout << "  " << group << " " << weight << "\n";
                rm.metrics["group_" + group] = weight;
            }
            rm.metrics["fidelity"] = expl.fidelity;
            rm.write(manifest_path(ex_model + ".explain", ""));
        } else if (*eer_cmd) {
            RunManifest rm;
            rm.subcommand = "eer-report";
            rm.config = {{"scores", eer_scores}};
            rm.add_input("scores", eer_scores);
            auto scored = load_scores_csv(eer_scores);
            auto roc = roc_curve(scored);
            auto [eer, thr] = eer_from_roc(roc);
            const double auc = auc_trapezoid(roc);
            std::cout << "eer " << eer << " at threshold " << thr << ", auc "
                      << auc << "\n";
            rm.metrics = {{"eer", eer}, {"eer_threshold", thr}, {"auc", auc}};
            rm.write(manifest_path(eer_scores + ".eer", ""));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
