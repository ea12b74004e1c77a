#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "keydyn/layers.hpp"
#include "keydyn/losses.hpp"
#include "keydyn/model.hpp"
#include "keydyn/optim.hpp"

using namespace keydyn;

TEST_CASE("conv1d hand example with right zero padding") {
    std::mt19937_64 rng(0);
    Conv1d<double> conv(2, 1, 1, rng);
    conv.W(0, 0, 0) = 1;
    conv.W(1, 0, 0) = 1;
    conv.b(0) = 0;
    Tensor<double> x({1, 3, 1});
    x(0, 0, 0) = 1; x(0, 1, 0) = 2; x(0, 2, 0) = 3;
    auto y = conv.forward(x);
    CHECK(y(0, 0, 0) == 3);
    CHECK(y(0, 1, 0) == 5);
    CHECK(y(0, 2, 0) == 3);  // 3 + zero pad
}

TEST_CASE("conv1d identity kernel passes input through") {
    std::mt19937_64 rng(1);
    Conv1d<double> conv(1, 2, 2, rng);
    conv.W.zero();
    conv.b.zero();
    conv.W(0, 0, 0) = 1;
    conv.W(0, 1, 1) = 1;
    Tensor<double> x({2, 4, 2});
    for (auto& v : x.data) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    auto y = conv.forward(x);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(y.data[i] == doctest::Approx(x.data[i]));
}

TEST_CASE("conv1d matches a brute-force nested-loop oracle") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 5; ++trial) {
        const int B = 2, L = 7, Cin = 3, Cout = 4, k = 1 + trial % 3;
        Conv1d<double> conv(k, Cin, Cout, rng);
        Tensor<double> x({B, L, Cin});
        for (auto& v : x.data)
            v = std::uniform_real_distribution<double>(-2, 2)(rng);
        auto y = conv.forward(x);
        for (int i = 0; i < B; ++i)
            for (int t = 0; t < L; ++t)
                for (int o = 0; o < Cout; ++o) {
                    double ref = conv.b(o);
                    for (int j = 0; j < k; ++j)
                        for (int c = 0; c < Cin; ++c)
                            if (t + j < L) ref += conv.W(j, c, o) * x(i, t + j, c);
                    CHECK(std::abs(y(i, t, o) - ref) < 1e-6);
                }
    }
}

TEST_CASE("gru with all-zero parameters stays at zero") {
    std::mt19937_64 rng(3);
    Gru<double> gru(2, 3, rng);
    for (auto& p : std::vector<Tensor<double>*>{&gru.Wz, &gru.Wr, &gru.Wh,
                                                &gru.Uz, &gru.Ur, &gru.Uh})
        p->zero();
    Tensor<double> x({1, 5, 2});
    for (auto& v : x.data) v = 1.0;
    auto h = gru.forward(x);
    // z = r = 0.5, hcand = 0, so h_t = 0.5 * h_{t-1} = 0 throughout.
    for (double v : h.data) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("gru single step matches a scalar hand computation") {
    std::mt19937_64 rng(4);
    Gru<double> gru(1, 1, rng);
    gru.Wz(0, 0) = 0.3; gru.Uz(0, 0) = -0.2; gru.bz(0) = 0.1;
    gru.Wr(0, 0) = -0.5; gru.Ur(0, 0) = 0.4; gru.br(0) = 0.0;
    gru.Wh(0, 0) = 0.7; gru.Uh(0, 0) = 0.6; gru.bh(0) = -0.1;
    Tensor<double> x({1, 1, 1});
    x(0, 0, 0) = 0.9;
    auto h = gru.forward(x);
    const double z = 1.0 / (1.0 + std::exp(-(0.3 * 0.9 + 0.1)));
    const double hc = std::tanh(0.7 * 0.9 - 0.1);  // h_prev = 0
    CHECK(h(0, 0, 0) == doctest::Approx(z * hc).epsilon(1e-12));
}

TEST_CASE("gru output depends on sequence order") {
    std::mt19937_64 rng(5);
    Gru<double> gru(2, 4, rng);
    Tensor<double> x({1, 6, 2}), rev({1, 6, 2});
    for (auto& v : x.data) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    for (int t = 0; t < 6; ++t)
        for (int c = 0; c < 2; ++c) rev(0, t, c) = x(0, 5 - t, c);
    auto h1 = gru.forward(x);
    auto h2 = gru.forward(rev);
    double diff = 0;
    for (int j = 0; j < 4; ++j) diff += std::abs(h1(0, 5, j) - h2(0, 5, j));
    CHECK(diff > 1e-6);
}

TEST_CASE("attention pooling normalizes and handles edge shapes") {
    std::mt19937_64 rng(6);
    AttentionPool<double> attn(3, 3, rng);

    SUBCASE("single step returns h exactly") {
        Tensor<double> h({2, 1, 3});
        for (auto& v : h.data)
            v = std::uniform_real_distribution<double>(-1, 1)(rng);
        auto out = attn.forward(h);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(out(i, j) == doctest::Approx(h(i, 0, j)));
    }

    SUBCASE("uniform scores reduce to the mean") {
        attn.v.zero();  // every score is 0
        Tensor<double> h({1, 4, 3});
        for (auto& v : h.data)
            v = std::uniform_real_distribution<double>(-1, 1)(rng);
        auto out = attn.forward(h);
        for (int j = 0; j < 3; ++j) {
            double mean = 0;
            for (int t = 0; t < 4; ++t) mean += h(0, t, j) / 4.0;
            CHECK(out(0, j) == doctest::Approx(mean));
        }
    }
}

TEST_CASE("dropout contract") {
    std::mt19937_64 rng(7);
    Dropout<double> drop;
    Tensor<double> x({1, 50});
    for (auto& v : x.data) v = 1.0;

    SUBCASE("rate 0 and inference mode are the identity") {
        CHECK(drop.forward(x, 0.0, true, rng).data == x.data);
        CHECK(drop.forward(x, 0.5, false, rng).data == x.data);
    }
    SUBCASE("inverted scaling keeps the mean within 2%") {
        double total = 0;
        const int draws = 4000;
        for (int i = 0; i < draws; ++i) {
            auto y = drop.forward(x, 0.3, true, rng);
            for (double v : y.data) total += v;
        }
        CHECK(total / (draws * 50.0) == doctest::Approx(1.0).epsilon(0.02));
    }
}

TEST_CASE("bce-with-logits closed forms and stability") {
    Tensor<double> z({1, 1});
    z(0, 0) = 0;
    CHECK(bce_logits_loss(z, {1.0}, 1.0) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(bce_logits_loss(z, {1.0}, 10.0) ==
          doctest::Approx(10 * std::log(2.0)).epsilon(1e-12));
    z(0, 0) = 50;
    CHECK(std::isfinite(bce_logits_loss(z, {0.0}, 1.0)));
    z(0, 0) = -50;
    CHECK(std::isfinite(bce_logits_loss(z, {1.0}, 1.0)));
}

TEST_CASE("cross entropy closed forms and naive oracle") {
    Tensor<double> z({1, 2});
    CHECK(cross_entropy_loss(z, {0}) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    z(0, 0) = 40;  // huge margin for the correct class
    CHECK(cross_entropy_loss(z, {0}) == doctest::Approx(0.0).epsilon(1e-12));

    std::mt19937_64 rng(8);
    Tensor<double> logits({3, 4});
    for (auto& v : logits.data)
        v = std::uniform_real_distribution<double>(-2, 2)(rng);
    std::vector<int> targets = {1, 3, 0};
    double naive = 0;
    for (int i = 0; i < 3; ++i) {
        double denom = 0;
        for (int k = 0; k < 4; ++k) denom += std::exp(logits(i, k));
        naive += -std::log(std::exp(logits(i, targets[i])) / denom);
    }
    naive /= 3.0;
    CHECK(cross_entropy_loss(logits, targets) ==
          doctest::Approx(naive).epsilon(1e-7));
}

TEST_CASE("adamw and scheduler behavior") {
    SUBCASE("zero gradients with zero decay leave parameters unchanged") {
        Tensor<double> w({3}), g({3});
        w(0) = 1; w(1) = -2; w(2) = 0.5;
        AdamW<double> opt({{"w", &w, &g}}, 0.0);
        auto before = w.data;
        opt.step(0.1);
        CHECK(w.data == before);
    }
    SUBCASE("milestone decays the rate by 0.1") {
        StepScheduler sched(0.001, {70});
        CHECK(sched.lr_at(0) == doctest::Approx(0.001));
        CHECK(sched.lr_at(69) == doctest::Approx(0.001));
        CHECK(sched.lr_at(70) == doctest::Approx(0.0001));
        CHECK(sched.lr_at(79) == doctest::Approx(0.0001));
        CHECK_THROWS(StepScheduler(0.1, {80, 80}));
    }
    SUBCASE("descent on f(w) = w^2") {
        Tensor<double> w({1}), g({1});
        w(0) = 1.0;
        AdamW<double> opt({{"w", &w, &g}}, 0.0);
        // Adam oscillates once the iterate is near the optimum, so strict
        // monotonicity only holds early; afterwards check containment.
        double prev = w(0) * w(0);
        for (int i = 0; i < 20; ++i) {
            g(0) = 2 * w(0);
            opt.step(0.05);
            const double loss = w(0) * w(0);
            CHECK(loss <= prev + 1e-12);
            prev = loss;
        }
        for (int i = 20; i < 100; ++i) {
            g(0) = 2 * w(0);
            opt.step(0.05);
        }
        CHECK(w(0) * w(0) < 1e-3);
    }
    SUBCASE("non-finite gradient rejects the step") {
        Tensor<double> w({1}), g({1});
        w(0) = 1.0;
        g(0) = std::numeric_limits<double>::quiet_NaN();
        AdamW<double> opt({{"w", &w, &g}}, 0.0);
        CHECK_THROWS_AS(opt.step(0.1), DivergedError);
        CHECK(w(0) == 1.0);
    }
}

TEST_CASE("multi-kernel concatenation width is the branch sum") {
    ModelConfig cfg;
    cfg.seq_len = 8;
    cfg.kernel_sizes = {2, 3, 4};
    cfg.out_channels = 5;
    CHECK(cfg.concat_width() == 15);
    Model<float> model(cfg, 1);
    std::mt19937_64 rng(0);
    Tensor<float> x({2, 8, 6});
    auto logits = model.forward(x, nullptr, false, rng);
    CHECK(logits.dim(0) == 2);
    CHECK(logits.dim(1) == 1);
}

TEST_CASE("timing-only and fusion differ only in head input width") {
    ModelConfig cfg;
    cfg.seq_len = 6;
    cfg.gru_hidden = 4;
    cfg.rate_branch_width = 3;
    cfg.rate_branch = false;
    Model<float> timing_only(cfg, 1);
    cfg.rate_branch = true;
    Model<float> fused(cfg, 1);
    CHECK(timing_only.head_in() == 4);
    CHECK(fused.head_in() == 7);
}

TEST_CASE("zero rates through a zero-bias branch give zero output") {
    std::mt19937_64 rng(10);
    Dense<double> fc(7, 4, rng);
    fc.b.zero();
    Tensor<double> rates({2, 7});
    auto y = fc.forward(rates);
    for (double v : y.data) CHECK(v == 0.0);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    ModelConfig cfg;
    cfg.seq_len = 10;
    cfg.kernel_sizes = {2, 2};
    cfg.out_channels = 4;
    cfg.gru_hidden = 3;
    cfg.rate_branch = true;
    cfg.head_dim = 5;
    Model<float> model(cfg, 99);
    const auto path =
        (std::filesystem::temp_directory_path() / "keydyn_ckpt_test.bin").string();
    save_checkpoint(model, path);
    Model<float> back = load_checkpoint<float>(path);
    auto a = model.params();
    auto b = back.params();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].name == b[i].name);
        CHECK(a[i].value->data == b[i].value->data);
    }
    // Re-saving reproduces the same bytes.
    const auto path2 =
        (std::filesystem::temp_directory_path() / "keydyn_ckpt_test2.bin").string();
    save_checkpoint(back, path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("head swap keeps the backbone and validates topology") {
    ModelConfig cfg;
    cfg.seq_len = 10;
    cfg.head_dim = 6;
    Model<float> base(cfg, 7);
    Model<float> binary = with_new_head(base, 1, 8);
    CHECK(binary.config().head_dim == 1);
    auto src = base.backbone_params();
    auto dst = binary.backbone_params();
    for (std::size_t i = 0; i < src.size(); ++i)
        CHECK(src[i].value->data == dst[i].value->data);
}
