#pragma once

#include <random>

#include "keydyn/tensor.hpp"

namespace keydyn {

template <class T>
void uniform_init(Tensor<T>& t, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (T& v : t.data) v = static_cast<T>(dist(rng));
}

/// Fully connected layer: y = x W + b, x is (B, in).
template <class T>
class Dense {
public:
    Dense() = default;
    Dense(int in, int out, std::mt19937_64& rng) {
        W = Tensor<T>({in, out});
        b = Tensor<T>({out});
        gW = Tensor<T>({in, out});
        gb = Tensor<T>({out});
        uniform_init(W, std::sqrt(1.0 / in), rng);
        uniform_init(b, std::sqrt(1.0 / in), rng);
    }

    Tensor<T> forward(const Tensor<T>& x) {
        x_ = x;
        const int B = x.dim(0), in = x.dim(1), out = W.dim(1);
        Tensor<T> y({B, out});
        for (int i = 0; i < B; ++i)
            for (int o = 0; o < out; ++o) {
                T acc = b(o);
                for (int c = 0; c < in; ++c) acc += x(i, c) * W(c, o);
                y(i, o) = acc;
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const int B = x_.dim(0), in = W.dim(0), out = W.dim(1);
        Tensor<T> dx({B, in});
        for (int i = 0; i < B; ++i)
            for (int o = 0; o < out; ++o) {
                const T g = dy(i, o);
                gb(o) += g;
                for (int c = 0; c < in; ++c) {
                    gW(c, o) += x_(i, c) * g;
                    dx(i, c) += W(c, o) * g;
                }
            }
        return dx;
    }

    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".W", &W, &gW});
        out.push_back({prefix + ".b", &b, &gb});
    }

    Tensor<T> W, b, gW, gb;

private:
    Tensor<T> x_;
};

/// 1-D convolution over (B, L, Cin) with same-length output; zero padding on
/// the right so multi-kernel branches concatenate cleanly.
template <class T>
class Conv1d {
public:
    Conv1d() = default;
    Conv1d(int kernel, int in_ch, int out_ch, std::mt19937_64& rng) {
        W = Tensor<T>({kernel, in_ch, out_ch});
        b = Tensor<T>({out_ch});
        gW = Tensor<T>({kernel, in_ch, out_ch});
        gb = Tensor<T>({out_ch});
        const double bound = std::sqrt(1.0 / (kernel * in_ch));
        uniform_init(W, bound, rng);
        uniform_init(b, bound, rng);
    }

    Tensor<T> forward(const Tensor<T>& x) {
        x_ = x;
        const int B = x.dim(0), L = x.dim(1), Cin = x.dim(2);
        const int k = W.dim(0), Cout = W.dim(2);
        Tensor<T> y({B, L, Cout});
        for (int i = 0; i < B; ++i)
            for (int t = 0; t < L; ++t)
                for (int o = 0; o < Cout; ++o) {
                    T acc = b(o);
                    for (int j = 0; j < k && t + j < L; ++j)
                        for (int c = 0; c < Cin; ++c)
                            acc += W(j, c, o) * x(i, t + j, c);
                    y(i, t, o) = acc;
                }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const int B = x_.dim(0), L = x_.dim(1), Cin = x_.dim(2);
        const int k = W.dim(0), Cout = W.dim(2);
        Tensor<T> dx({B, L, Cin});
        for (int i = 0; i < B; ++i)
            for (int t = 0; t < L; ++t)
                for (int o = 0; o < Cout; ++o) {
                    const T g = dy(i, t, o);
                    gb(o) += g;
                    for (int j = 0; j < k && t + j < L; ++j)
                        for (int c = 0; c < Cin; ++c) {
                            gW(j, c, o) += x_(i, t + j, c) * g;
                            dx(i, t + j, c) += W(j, c, o) * g;
                        }
                }
        return dx;
    }

    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".W", &W, &gW});
        out.push_back({prefix + ".b", &b, &gb});
    }

    Tensor<T> W, b, gW, gb;

private:
    Tensor<T> x_;
};

template <class T>
class ReLU {
public:
    Tensor<T> forward(const Tensor<T>& x) {
        mask_.assign(x.size(), 0);
        Tensor<T> y = x;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y.data[i] > T{0})
                mask_[i] = 1;
            else
                y.data[i] = T{0};
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (!mask_[i]) dx.data[i] = T{0};
        return dx;
    }

private:
    std::vector<std::uint8_t> mask_;
};

/// Inverted dropout: zero with probability `rate`, scale survivors by
/// 1/(1-rate); identity at inference.
template <class T>
class Dropout {
public:
    Tensor<T> forward(const Tensor<T>& x, double rate, bool training,
                      std::mt19937_64& rng) {
        rate_ = rate;
        if (!training || rate <= 0) {
            active_ = false;
            return x;
        }
        active_ = true;
        mask_.assign(x.size(), 0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const T scale = static_cast<T>(1.0 / (1.0 - rate));
        Tensor<T> y = x;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (unit(rng) < rate) {
                y.data[i] = T{0};
            } else {
                mask_[i] = 1;
                y.data[i] *= scale;
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) const {
        if (!active_) return dy;
        const T scale = static_cast<T>(1.0 / (1.0 - rate_));
        Tensor<T> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i)
            dx.data[i] = mask_[i] ? dx.data[i] * scale : T{0};
        return dx;
    }

private:
    std::vector<std::uint8_t> mask_;
    double rate_ = 0;
    bool active_ = false;
};

/// Single-layer uni-directional GRU over (B, L, C); h_0 = 0.
/// z_t = sigma(Wz x + Uz h + bz), r_t likewise,
/// hcand = tanh(Wh x + Uh (r*h) + bh), h_t = (1-z)*h + z*hcand.
template <class T>
class Gru {
public:
    Gru() = default;
    Gru(int in_ch, int hidden, std::mt19937_64& rng) {
        auto make = [&](Tensor<T>& w, Tensor<T>& g, int rows, int cols) {
            w = Tensor<T>({rows, cols});
            g = Tensor<T>({rows, cols});
            uniform_init(w, std::sqrt(1.0 / rows), rng);
        };
        make(Wz, gWz, in_ch, hidden);
        make(Wr, gWr, in_ch, hidden);
        make(Wh, gWh, in_ch, hidden);
        make(Uz, gUz, hidden, hidden);
        make(Ur, gUr, hidden, hidden);
        make(Uh, gUh, hidden, hidden);
        bz = Tensor<T>({hidden});
        br = Tensor<T>({hidden});
        bh = Tensor<T>({hidden});
        gbz = Tensor<T>({hidden});
        gbr = Tensor<T>({hidden});
        gbh = Tensor<T>({hidden});
    }

    Tensor<T> forward(const Tensor<T>& x) {
        x_ = x;
        const int B = x.dim(0), L = x.dim(1), C = x.dim(2), H = Wz.dim(1);
        z_ = Tensor<T>({B, L, H});
        r_ = Tensor<T>({B, L, H});
        hc_ = Tensor<T>({B, L, H});
        h_ = Tensor<T>({B, L, H});
        for (int i = 0; i < B; ++i) {
            std::vector<T> hprev(H, T{0});
            for (int t = 0; t < L; ++t) {
                for (int j = 0; j < H; ++j) {
                    T az = bz(j), ar = br(j);
                    for (int c = 0; c < C; ++c) {
                        az += Wz(c, j) * x(i, t, c);
                        ar += Wr(c, j) * x(i, t, c);
                    }
                    for (int k = 0; k < H; ++k) {
                        az += Uz(k, j) * hprev[k];
                        ar += Ur(k, j) * hprev[k];
                    }
                    z_(i, t, j) = sigmoid(az);
                    r_(i, t, j) = sigmoid(ar);
                }
                for (int j = 0; j < H; ++j) {
                    T ah = bh(j);
                    for (int c = 0; c < C; ++c) ah += Wh(c, j) * x(i, t, c);
                    for (int k = 0; k < H; ++k)
                        ah += Uh(k, j) * (r_(i, t, k) * hprev[k]);
                    hc_(i, t, j) = std::tanh(static_cast<double>(ah));
                }
                for (int j = 0; j < H; ++j) {
                    const T ht = (T{1} - z_(i, t, j)) * hprev[j] +
                                 z_(i, t, j) * hc_(i, t, j);
                    h_(i, t, j) = ht;
                }
                for (int j = 0; j < H; ++j) hprev[j] = h_(i, t, j);
            }
        }
        return h_;
    }

    /// dh_all carries the loss gradient wrt every hidden state (attention
    /// distributes gradient across all steps).
    Tensor<T> backward(const Tensor<T>& dh_all) {
        const int B = x_.dim(0), L = x_.dim(1), C = x_.dim(2), H = Wz.dim(1);
        Tensor<T> dx({B, L, C});
        for (int i = 0; i < B; ++i) {
            std::vector<T> carry(H, T{0});
            for (int t = L - 1; t >= 0; --t) {
                std::vector<T> hprev(H, T{0});
                if (t > 0)
                    for (int j = 0; j < H; ++j) hprev[j] = h_(i, t - 1, j);

                std::vector<T> dh(H), daz(H), dar(H), dah(H), dhprev(H, T{0});
                for (int j = 0; j < H; ++j) dh[j] = dh_all(i, t, j) + carry[j];

                for (int j = 0; j < H; ++j) {
                    const T z = z_(i, t, j), hc = hc_(i, t, j);
                    const T dz = dh[j] * (hc - hprev[j]);
                    const T dhc = dh[j] * z;
                    dhprev[j] += dh[j] * (T{1} - z);
                    dah[j] = dhc * (T{1} - hc * hc);
                    daz[j] = dz * z * (T{1} - z);
                }
                // Through hcand: d(r*hprev) = dah Uh^T.
                std::vector<T> drh(H, T{0});
                for (int k = 0; k < H; ++k)
                    for (int j = 0; j < H; ++j) drh[k] += Uh(k, j) * dah[j];
                for (int k = 0; k < H; ++k) {
                    const T r = r_(i, t, k);
                    const T dr = drh[k] * hprev[k];
                    dhprev[k] += drh[k] * r;
                    dar[k] = dr * r * (T{1} - r);
                }

                for (int j = 0; j < H; ++j) {
                    gbz(j) += daz[j];
                    gbr(j) += dar[j];
                    gbh(j) += dah[j];
                }
                for (int c = 0; c < C; ++c) {
                    T acc = T{0};
                    const T xv = x_(i, t, c);
                    for (int j = 0; j < H; ++j) {
                        gWz(c, j) += xv * daz[j];
                        gWr(c, j) += xv * dar[j];
                        gWh(c, j) += xv * dah[j];
                        acc += Wz(c, j) * daz[j] + Wr(c, j) * dar[j] +
                               Wh(c, j) * dah[j];
                    }
                    dx(i, t, c) = acc;
                }
                for (int k = 0; k < H; ++k) {
                    const T hp = hprev[k];
                    const T rhp = r_(i, t, k) * hp;
                    for (int j = 0; j < H; ++j) {
                        gUz(k, j) += hp * daz[j];
                        gUr(k, j) += hp * dar[j];
                        gUh(k, j) += rhp * dah[j];
                        dhprev[k] += Uz(k, j) * daz[j] + Ur(k, j) * dar[j];
                    }
                }
                carry = dhprev;
            }
        }
        return dx;
    }

    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".Wz", &Wz, &gWz});
        out.push_back({prefix + ".Wr", &Wr, &gWr});
        out.push_back({prefix + ".Wh", &Wh, &gWh});
        out.push_back({prefix + ".Uz", &Uz, &gUz});
        out.push_back({prefix + ".Ur", &Ur, &gUr});
        out.push_back({prefix + ".Uh", &Uh, &gUh});
        out.push_back({prefix + ".bz", &bz, &gbz});
        out.push_back({prefix + ".br", &br, &gbr});
        out.push_back({prefix + ".bh", &bh, &gbh});
    }

    Tensor<T> Wz, Wr, Wh, Uz, Ur, Uh, bz, br, bh;
    Tensor<T> gWz, gWr, gWh, gUz, gUr, gUh, gbz, gbr, gbh;

private:
    static T sigmoid(T v) {
        return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
    }
    Tensor<T> x_, z_, r_, hc_, h_;
};

/// Additive attention pooling: score_t = v^T tanh(W h_t + b),
/// alpha = softmax(score), out = sum_t alpha_t h_t.
template <class T>
class AttentionPool {
public:
    AttentionPool() = default;
    AttentionPool(int hidden, int attn_dim, std::mt19937_64& rng) {
        W = Tensor<T>({hidden, attn_dim});
        b = Tensor<T>({attn_dim});
        v = Tensor<T>({attn_dim});
        gW = Tensor<T>({hidden, attn_dim});
        gb = Tensor<T>({attn_dim});
        gv = Tensor<T>({attn_dim});
        uniform_init(W, std::sqrt(1.0 / hidden), rng);
        uniform_init(v, std::sqrt(1.0 / attn_dim), rng);
    }

    Tensor<T> forward(const Tensor<T>& h) {
        h_ = h;
        const int B = h.dim(0), L = h.dim(1), H = h.dim(2), A = W.dim(1);
        u_ = Tensor<T>({B, L, A});
        alpha_ = Tensor<T>({B, L});
        Tensor<T> out({B, H});
        for (int i = 0; i < B; ++i) {
            std::vector<double> score(L);
            for (int t = 0; t < L; ++t) {
                double s = 0;
                for (int a = 0; a < A; ++a) {
                    T acc = b(a);
                    for (int j = 0; j < H; ++j) acc += W(j, a) * h(i, t, j);
                    const T u = static_cast<T>(std::tanh(static_cast<double>(acc)));
                    u_(i, t, a) = u;
                    s += static_cast<double>(v(a)) * static_cast<double>(u);
                }
                score[t] = s;
            }
            double mx = score[0];
            for (double s : score) mx = std::max(mx, s);
            double denom = 0;
            for (int t = 0; t < L; ++t) denom += std::exp(score[t] - mx);
            for (int t = 0; t < L; ++t)
                alpha_(i, t) = static_cast<T>(std::exp(score[t] - mx) / denom);
            for (int j = 0; j < H; ++j) {
                T acc = T{0};
                for (int t = 0; t < L; ++t) acc += alpha_(i, t) * h(i, t, j);
                out(i, j) = acc;
            }
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dout) {
        const int B = h_.dim(0), L = h_.dim(1), H = h_.dim(2), A = W.dim(1);
        Tensor<T> dh({B, L, H});
        for (int i = 0; i < B; ++i) {
            std::vector<T> dalpha(L);
            for (int t = 0; t < L; ++t) {
                T acc = T{0};
                for (int j = 0; j < H; ++j) acc += dout(i, j) * h_(i, t, j);
                dalpha[t] = acc;
                for (int j = 0; j < H; ++j)
                    dh(i, t, j) += alpha_(i, t) * dout(i, j);
            }
            // Softmax backward.
            T inner = T{0};
            for (int t = 0; t < L; ++t) inner += alpha_(i, t) * dalpha[t];
            for (int t = 0; t < L; ++t) {
                const T ds = alpha_(i, t) * (dalpha[t] - inner);
                for (int a = 0; a < A; ++a) {
                    const T u = u_(i, t, a);
                    gv(a) += ds * u;
                    const T da = ds * v(a) * (T{1} - u * u);
                    gb(a) += da;
                    for (int j = 0; j < H; ++j) {
                        gW(j, a) += h_(i, t, j) * da;
                        dh(i, t, j) += W(j, a) * da;
                    }
                }
            }
        }
        return dh;
    }

    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".W", &W, &gW});
        out.push_back({prefix + ".b", &b, &gb});
        out.push_back({prefix + ".v", &v, &gv});
    }

    Tensor<T> W, b, v, gW, gb, gv;

private:
    Tensor<T> h_, u_, alpha_;
};

}  // namespace keydyn
