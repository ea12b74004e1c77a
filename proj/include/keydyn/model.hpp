#pragma once

#include <cstring>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "keydyn/layers.hpp"

namespace keydyn {

/// Topology of the multi-kernel CNN-GRU-attention network with optional
/// rate-feature branch.
struct ModelConfig {
    int seq_len = 50;                       // key-length L
    int in_channels = 6;
    std::vector<int> kernel_sizes{2, 2, 2};  // parallel branches, first block
    int out_channels = 32;                   // per branch
    int conv_depth = 1;  // conv+ReLU blocks; blocks past the first are single-kernel
    int gru_hidden = 8;
    bool attention = true;
    bool rate_branch = false;
    int rate_branch_width = 8;
    int head_dim = 1;  // 1 = binary logit, K = multiclass
    double dropout = 0.0;

    int concat_width() const {
        return out_channels * static_cast<int>(kernel_sizes.size());
    }

    nlohmann::json to_json() const {
        return {{"seq_len", seq_len},
                {"in_channels", in_channels},
                {"kernel_sizes", kernel_sizes},
                {"out_channels", out_channels},
                {"conv_depth", conv_depth},
                {"gru_hidden", gru_hidden},
                {"attention", attention},
                {"rate_branch", rate_branch},
                {"rate_branch_width", rate_branch_width},
                {"head_dim", head_dim},
                {"dropout", dropout}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.seq_len = j.at("seq_len");
        c.in_channels = j.at("in_channels");
        c.kernel_sizes = j.at("kernel_sizes").get<std::vector<int>>();
        c.out_channels = j.at("out_channels");
        c.conv_depth = j.at("conv_depth");
        c.gru_hidden = j.at("gru_hidden");
        c.attention = j.at("attention");
        c.rate_branch = j.at("rate_branch");
        c.rate_branch_width = j.at("rate_branch_width");
        c.head_dim = j.at("head_dim");
        c.dropout = j.at("dropout");
        return c;
    }

    void validate() const {
        if (kernel_sizes.empty())
            throw std::invalid_argument("model: need at least one kernel");
        for (int k : kernel_sizes)
            if (k < 1 || k > seq_len)
                throw std::invalid_argument("model: kernel size out of [1, L]");
        if (conv_depth < 1 || gru_hidden < 1 || out_channels < 1 || head_dim < 1)
            throw std::invalid_argument("model: bad dimension");
    }
};

template <class T>
class Model {
public:
    explicit Model(const ModelConfig& cfg, std::uint64_t seed)
        : cfg_(cfg), rng_(seed) {
        cfg_.validate();
        const int width = cfg_.concat_width();
        for (int k : cfg_.kernel_sizes)
            branches_.emplace_back(k, cfg_.in_channels, cfg_.out_channels, rng_);
        branch_relu_.resize(branches_.size());
        for (int d = 1; d < cfg_.conv_depth; ++d)
            deep_.emplace_back(cfg_.kernel_sizes.front(), width, width, rng_);
        deep_relu_.resize(deep_.size());
        gru_ = Gru<T>(width, cfg_.gru_hidden, rng_);
        if (cfg_.attention)
            attn_ = AttentionPool<T>(cfg_.gru_hidden, cfg_.gru_hidden, rng_);
        if (cfg_.rate_branch)
            rate_fc_ = Dense<T>(7, cfg_.rate_branch_width, rng_);
        head_ = Dense<T>(head_in(), cfg_.head_dim, rng_);
    }

    const ModelConfig& config() const { return cfg_; }

    int head_in() const {
        return cfg_.gru_hidden + (cfg_.rate_branch ? cfg_.rate_branch_width : 0);
    }

    /// x is (B, L, 6); rates (B, 7) required iff the rate branch is active.
    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>* rates, bool training,
                      std::mt19937_64& dropout_rng) {
        x.check_finite("model input");
        if (x.dim(1) != cfg_.seq_len || x.dim(2) != cfg_.in_channels)
            throw std::invalid_argument("model: input shape mismatch");
        const int B = x.dim(0), L = x.dim(1);
        const int width = cfg_.concat_width();

        Tensor<T> concat({B, L, width});
        int offset = 0;
        for (std::size_t br = 0; br < branches_.size(); ++br) {
            Tensor<T> y = branch_relu_[br].forward(branches_[br].forward(x));
            for (int i = 0; i < B; ++i)
                for (int t = 0; t < L; ++t)
                    for (int o = 0; o < cfg_.out_channels; ++o)
                        concat(i, t, offset + o) = y(i, t, o);
            offset += cfg_.out_channels;
        }
        Tensor<T> cur = std::move(concat);
        for (std::size_t d = 0; d < deep_.size(); ++d)
            cur = deep_relu_[d].forward(deep_[d].forward(cur));

        Tensor<T> h = gru_.forward(cur);
        Tensor<T> pooled;
        if (cfg_.attention) {
            pooled = attn_.forward(h);
        } else {
            pooled = Tensor<T>({B, cfg_.gru_hidden});
            for (int i = 0; i < B; ++i)
                for (int j = 0; j < cfg_.gru_hidden; ++j)
                    pooled(i, j) = h(i, L - 1, j);
        }

        Tensor<T> head_in_t({B, head_in()});
        for (int i = 0; i < B; ++i)
            for (int j = 0; j < cfg_.gru_hidden; ++j)
                head_in_t(i, j) = pooled(i, j);
        if (cfg_.rate_branch) {
            if (!rates)
                throw std::invalid_argument("model: rate branch needs rates input");
            Tensor<T> r = rate_fc_.forward(*rates);
            for (int i = 0; i < B; ++i)
                for (int j = 0; j < cfg_.rate_branch_width; ++j)
                    head_in_t(i, cfg_.gru_hidden + j) = r(i, j);
        }
        head_in_t =
            dropout_.forward(head_in_t, cfg_.dropout, training, dropout_rng);
        Tensor<T> logits = head_.forward(head_in_t);
        logits.check_finite("model output");
        return logits;
    }

    void backward(const Tensor<T>& dlogits) {
        const int B = dlogits.dim(0), L = cfg_.seq_len;
        Tensor<T> dhead_in = dropout_.backward(head_.backward(dlogits));

        if (cfg_.rate_branch) {
            Tensor<T> dr({B, cfg_.rate_branch_width});
            for (int i = 0; i < B; ++i)
                for (int j = 0; j < cfg_.rate_branch_width; ++j)
                    dr(i, j) = dhead_in(i, cfg_.gru_hidden + j);
            rate_fc_.backward(dr);
        }
        Tensor<T> dpooled({B, cfg_.gru_hidden});
        for (int i = 0; i < B; ++i)
            for (int j = 0; j < cfg_.gru_hidden; ++j)
                dpooled(i, j) = dhead_in(i, j);

        Tensor<T> dh;
        if (cfg_.attention) {
            dh = attn_.backward(dpooled);
        } else {
            dh = Tensor<T>({B, L, cfg_.gru_hidden});
            for (int i = 0; i < B; ++i)
                for (int j = 0; j < cfg_.gru_hidden; ++j)
                    dh(i, L - 1, j) = dpooled(i, j);
        }
        Tensor<T> dcur = gru_.backward(dh);
        for (std::size_t d = deep_.size(); d-- > 0;)
            dcur = deep_[d].backward(deep_relu_[d].backward(dcur));

        for (std::size_t br = 0; br < branches_.size(); ++br) {
            Tensor<T> dy({B, L, cfg_.out_channels});
            const int offset = static_cast<int>(br) * cfg_.out_channels;
            for (int i = 0; i < B; ++i)
                for (int t = 0; t < L; ++t)
                    for (int o = 0; o < cfg_.out_channels; ++o)
                        dy(i, t, o) = dcur(i, t, offset + o);
            branches_[br].backward(branch_relu_[br].backward(dy));
        }
    }

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        for (std::size_t i = 0; i < branches_.size(); ++i)
            branches_[i].collect(out, "branch" + std::to_string(i));
        for (std::size_t i = 0; i < deep_.size(); ++i)
            deep_[i].collect(out, "deep" + std::to_string(i));
        gru_.collect(out, "gru");
        if (cfg_.attention) attn_.collect(out, "attn");
        if (cfg_.rate_branch) rate_fc_.collect(out, "rate");
        head_.collect(out, "head");
        return out;
    }

    /// Parameters excluding the head (the frozen set during head-only tuning).
    std::vector<ParamRef<T>> backbone_params() {
        std::vector<ParamRef<T>> all = params();
        std::vector<ParamRef<T>> out;
        for (auto& p : all)
            if (p.name.rfind("head.", 0) != 0) out.push_back(p);
        return out;
    }

    std::vector<ParamRef<T>> head_params() {
        std::vector<ParamRef<T>> all = params();
        std::vector<ParamRef<T>> out;
        for (auto& p : all)
            if (p.name.rfind("head.", 0) == 0) out.push_back(p);
        return out;
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (const auto& p : params()) n += p.value->size();
        return n;
    }

    void zero_grad() {
        for (auto& p : params()) p.grad->zero();
    }

private:
    ModelConfig cfg_;
    std::mt19937_64 rng_;
    std::vector<Conv1d<T>> branches_;
    std::vector<ReLU<T>> branch_relu_;
    std::vector<Conv1d<T>> deep_;
    std::vector<ReLU<T>> deep_relu_;
    Gru<T> gru_;
    AttentionPool<T> attn_;
    Dense<T> rate_fc_;
    Dropout<T> dropout_;
    Dense<T> head_;
};

// ---- checkpoint file: versioned text header + little-endian float payload ----

inline constexpr const char* kCheckpointMagic = "KEYDYNCKPT v1";

template <class T>
void save_checkpoint(Model<T>& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    auto params = model.params();
    nlohmann::json header;
    header["config"] = model.config().to_json();
    for (const auto& p : params) {
        header["params"].push_back(
            {{"name", p.name}, {"shape", p.value->shape}});
    }
    out << kCheckpointMagic << "\n" << header.dump() << "\n";
    std::uint64_t total = 0;
    for (const auto& p : params) total += p.value->size();
    out.write(reinterpret_cast<const char*>(&total), sizeof(total));
    for (const auto& p : params)
        for (T v : p.value->data) {
            const float f = static_cast<float>(v);
            out.write(reinterpret_cast<const char*>(&f), sizeof(f));
        }
}

template <class T>
Model<T> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string magic, header_line;
    std::getline(in, magic);
    if (magic != kCheckpointMagic)
        throw std::runtime_error("not a keydyn checkpoint: " + path);
    std::getline(in, header_line);
    const auto header = nlohmann::json::parse(header_line);
    Model<T> model(ModelConfig::from_json(header.at("config")), /*seed=*/0);
    auto params = model.params();
    const auto& plist = header.at("params");
    if (plist.size() != params.size())
        throw std::runtime_error("checkpoint parameter list mismatch");
    std::uint64_t total = 0;
    in.read(reinterpret_cast<char*>(&total), sizeof(total));
    std::uint64_t expect = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (plist[i].at("name") != params[i].name ||
            plist[i].at("shape").get<std::vector<int>>() != params[i].value->shape)
            throw std::runtime_error("checkpoint topology mismatch at " +
                                     params[i].name);
        expect += params[i].value->size();
    }
    if (total != expect)
        throw std::runtime_error("checkpoint payload size mismatch");
    for (auto& p : params)
        for (T& v : p.value->data) {
            float f;
            in.read(reinterpret_cast<char*>(&f), sizeof(f));
            v = static_cast<T>(f);
        }
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    return model;
}

/// New model sharing every non-head parameter of `base`, with a freshly
/// initialized head of `new_head_dim` outputs (the fine-tune head swap).
template <class T>
Model<T> with_new_head(Model<T>& base, int new_head_dim, std::uint64_t seed) {
    ModelConfig cfg = base.config();
    cfg.head_dim = new_head_dim;
    Model<T> out(cfg, seed);
    auto src = base.backbone_params();
    auto dst = out.backbone_params();
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (src[i].name != dst[i].name ||
            src[i].value->shape != dst[i].value->shape)
            throw std::runtime_error("head swap: backbone mismatch at " +
                                     src[i].name);
        dst[i].value->data = src[i].value->data;
    }
    return out;
}

}  // namespace keydyn
