#include "memcol/toy/mlm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <set>

#include "memcol/errors.hpp"

namespace memcol::toy {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
    return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

void validate_config(const MlmConfig& cfg) {
    if (cfg.vocab < 5) throw ConfigError("vocabulary too small for the toy model");
    if (cfg.dim <= 0 || cfg.visual_dim <= 0 || cfg.layers <= 0 || cfg.heads <= 0 ||
        cfg.max_len <= 0 || cfg.ff_mult <= 0)
        throw ConfigError("model dimensions must be positive");
    if (cfg.dim % cfg.heads != 0) throw ConfigError("dim must be divisible by heads");
}

struct LayerCache {
    std::vector<double> a_hat, a, q, k, v, att, ctx, x_mid, b_hat, b, f1, g;
    std::vector<double> a_inv, b_inv;
};

struct Cache {
    int m = 0;  // text positions plus the optional visual slot
    int n = 0;  // text positions
    bool has_visual = false;
    std::vector<double> pv;
    std::vector<double> x0;
    std::vector<LayerCache> layers;
    std::vector<double> x_out, h_hat, h, h_inv;
    std::vector<char> key_ok;
};

// y = g .* (x - mu)/sigma + b, cached per position for the backward pass.
void ln_forward(const double* x, int m, int dim, const double* gain, const double* bias,
                double* y, double* y_hat, double* inv_sigma) {
    for (int i = 0; i < m; ++i) {
        const double* xi = x + static_cast<std::size_t>(i) * dim;
        double mu = 0.0;
        for (int d = 0; d < dim; ++d) mu += xi[d];
        mu /= dim;
        double var = 0.0;
        for (int d = 0; d < dim; ++d) var += (xi[d] - mu) * (xi[d] - mu);
        var /= dim;
        const double inv = 1.0 / std::sqrt(var + kLnEps);
        inv_sigma[i] = inv;
        double* yh = y_hat + static_cast<std::size_t>(i) * dim;
        double* yo = y + static_cast<std::size_t>(i) * dim;
        for (int d = 0; d < dim; ++d) {
            yh[d] = (xi[d] - mu) * inv;
            yo[d] = gain[d] * yh[d] + bias[d];
        }
    }
}

// dx += backward(dy); accumulates dgain/dbias.
void ln_backward(const double* dy, const double* y_hat, const double* inv_sigma, int m, int dim,
                 const double* gain, double* dx, double* dgain, double* dbias) {
    for (int i = 0; i < m; ++i) {
        const double* dyi = dy + static_cast<std::size_t>(i) * dim;
        const double* yh = y_hat + static_cast<std::size_t>(i) * dim;
        double* dxi = dx + static_cast<std::size_t>(i) * dim;
        double mean_dh = 0.0;
        double mean_dh_h = 0.0;
        for (int d = 0; d < dim; ++d) {
            const double dh = dyi[d] * gain[d];
            mean_dh += dh;
            mean_dh_h += dh * yh[d];
            dgain[d] += dyi[d] * yh[d];
            dbias[d] += dyi[d];
        }
        mean_dh /= dim;
        mean_dh_h /= dim;
        const double inv = inv_sigma[i];
        for (int d = 0; d < dim; ++d) {
            const double dh = dyi[d] * gain[d];
            dxi[d] += inv * (dh - mean_dh - yh[d] * mean_dh_h);
        }
    }
}

// y[i] = W x[i] with W stored row-major (out x in).
void linear_forward(const double* x, int m, int in, int out, const double* w, const double* bias,
                    double* y) {
    for (int i = 0; i < m; ++i) {
        const double* xi = x + static_cast<std::size_t>(i) * in;
        double* yi = y + static_cast<std::size_t>(i) * out;
        for (int o = 0; o < out; ++o) {
            double acc = bias ? bias[o] : 0.0;
            const double* wrow = w + static_cast<std::size_t>(o) * in;
            for (int d = 0; d < in; ++d) acc += wrow[d] * xi[d];
            yi[o] = acc;
        }
    }
}

// dx += dy W; dW += dy^T x; db += dy.
void linear_backward(const double* x, const double* dy, int m, int in, int out, const double* w,
                     double* dx, double* dw, double* db) {
    for (int i = 0; i < m; ++i) {
        const double* xi = x + static_cast<std::size_t>(i) * in;
        const double* dyi = dy + static_cast<std::size_t>(i) * out;
        double* dxi = dx ? dx + static_cast<std::size_t>(i) * in : nullptr;
        for (int o = 0; o < out; ++o) {
            const double d = dyi[o];
            if (d == 0.0) continue;
            const double* wrow = w + static_cast<std::size_t>(o) * in;
            double* dwrow = dw + static_cast<std::size_t>(o) * in;
            if (dxi)
                for (int e = 0; e < in; ++e) dxi[e] += d * wrow[e];
            for (int e = 0; e < in; ++e) dwrow[e] += d * xi[e];
            if (db) db[o] += d;
        }
    }
}

void encode_forward(const MlmParams& p, const std::vector<int>& tokens, const double* visual,
                    Cache& c) {
    const MlmConfig& cfg = p.cfg;
    const int n = static_cast<int>(tokens.size());
    if (n == 0) throw ShapeError("empty token sequence");
    if (n > cfg.max_len)
        throw ShapeError("sequence length " + std::to_string(n) + " exceeds max_len " +
                         std::to_string(cfg.max_len));
    for (int t : tokens)
        if (t < 0 || t >= cfg.vocab)
            throw EncodingError("token id out of range: " + std::to_string(t));

    const int D = cfg.dim;
    const int F = cfg.ff_mult * D;
    const double* W = p.w.data();

    c.n = n;
    c.has_visual = false;
    c.pv.assign(D, 0.0);
    if (visual) {
        const double* proj = W + p.layout.vis_proj;
        for (int d = 0; d < D; ++d) {
            double acc = 0.0;
            for (int j = 0; j < cfg.visual_dim; ++j)
                acc += proj[static_cast<std::size_t>(d) * cfg.visual_dim + j] * visual[j];
            c.pv[d] = acc;
            if (acc != 0.0) c.has_visual = true;
        }
    }
    const int m = n + (c.has_visual ? 1 : 0);
    c.m = m;

    c.key_ok.assign(m, 1);
    int real_keys = 0;
    for (int i = 0; i < n; ++i) {
        c.key_ok[i] = tokens[i] != 0 ? 1 : 0;  // [PAD] is id 0 by construction
        real_keys += c.key_ok[i];
    }
    if (c.has_visual) ++real_keys;
    if (real_keys == 0) throw ShapeError("sequence contains only [PAD] tokens");

    const auto md = static_cast<std::size_t>(m) * D;
    c.x0.assign(md, 0.0);
    for (int i = 0; i < n; ++i) {
        const double* te = W + p.layout.tok_emb + static_cast<std::size_t>(tokens[i]) * D;
        const double* pe = W + p.layout.pos_emb + static_cast<std::size_t>(i) * D;
        double* xi = c.x0.data() + static_cast<std::size_t>(i) * D;
        for (int d = 0; d < D; ++d) xi[d] = te[d] + pe[d];
    }
    if (c.has_visual)
        std::copy(c.pv.begin(), c.pv.end(), c.x0.begin() + static_cast<std::size_t>(n) * D);

    const int H = cfg.heads;
    const int dh = D / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    c.layers.resize(cfg.layers);
    std::vector<double> x = c.x0;
    for (int l = 0; l < cfg.layers; ++l) {
        auto& L = c.layers[l];
        const auto& lo = p.layout.layers[l];
        L.a.assign(md, 0.0);
        L.a_hat.assign(md, 0.0);
        L.a_inv.assign(m, 0.0);
        ln_forward(x.data(), m, D, W + lo.ln1_g, W + lo.ln1_b, L.a.data(), L.a_hat.data(),
                   L.a_inv.data());
        L.q.assign(md, 0.0);
        L.k.assign(md, 0.0);
        L.v.assign(md, 0.0);
        linear_forward(L.a.data(), m, D, D, W + lo.wq, nullptr, L.q.data());
        linear_forward(L.a.data(), m, D, D, W + lo.wk, nullptr, L.k.data());
        linear_forward(L.a.data(), m, D, D, W + lo.wv, nullptr, L.v.data());

        L.att.assign(static_cast<std::size_t>(H) * m * m, 0.0);
        L.ctx.assign(md, 0.0);
        std::vector<double> row(m);
        for (int h = 0; h < H; ++h) {
            const int off = h * dh;
            for (int i = 0; i < m; ++i) {
                const double* qi = L.q.data() + static_cast<std::size_t>(i) * D + off;
                double best = -std::numeric_limits<double>::infinity();
                for (int j = 0; j < m; ++j) {
                    if (!c.key_ok[j]) {
                        row[j] = -std::numeric_limits<double>::infinity();
                        continue;
                    }
                    const double* kj = L.k.data() + static_cast<std::size_t>(j) * D + off;
                    double s = 0.0;
                    for (int d = 0; d < dh; ++d) s += qi[d] * kj[d];
                    s *= scale;
                    row[j] = s;
                    best = std::max(best, s);
                }
                double denom = 0.0;
                for (int j = 0; j < m; ++j) {
                    if (!c.key_ok[j]) continue;
                    row[j] = std::exp(row[j] - best);
                    denom += row[j];
                }
                double* arow = L.att.data() +
                               (static_cast<std::size_t>(h) * m + i) * static_cast<std::size_t>(m);
                double* ci = L.ctx.data() + static_cast<std::size_t>(i) * D + off;
                for (int j = 0; j < m; ++j) {
                    const double aij = c.key_ok[j] ? row[j] / denom : 0.0;
                    arow[j] = aij;
                    if (aij == 0.0) continue;
                    const double* vj = L.v.data() + static_cast<std::size_t>(j) * D + off;
                    for (int d = 0; d < dh; ++d) ci[d] += aij * vj[d];
                }
            }
        }

        L.x_mid.assign(md, 0.0);
        linear_forward(L.ctx.data(), m, D, D, W + lo.wo, nullptr, L.x_mid.data());
        for (std::size_t i = 0; i < md; ++i) L.x_mid[i] += x[i];

        L.b.assign(md, 0.0);
        L.b_hat.assign(md, 0.0);
        L.b_inv.assign(m, 0.0);
        ln_forward(L.x_mid.data(), m, D, W + lo.ln2_g, W + lo.ln2_b, L.b.data(), L.b_hat.data(),
                   L.b_inv.data());
        const auto mf = static_cast<std::size_t>(m) * F;
        L.f1.assign(mf, 0.0);
        linear_forward(L.b.data(), m, D, F, W + lo.w1, W + lo.b1, L.f1.data());
        L.g.assign(mf, 0.0);
        for (std::size_t i = 0; i < mf; ++i) L.g[i] = gelu(L.f1[i]);
        x = L.x_mid;
        std::vector<double> f2(md, 0.0);
        linear_forward(L.g.data(), m, F, D, W + lo.w2, W + lo.b2, f2.data());
        for (std::size_t i = 0; i < md; ++i) x[i] += f2[i];
    }

    c.x_out = x;
    c.h.assign(md, 0.0);
    c.h_hat.assign(md, 0.0);
    c.h_inv.assign(m, 0.0);
    ln_forward(c.x_out.data(), m, D, W + p.layout.lnf_g, W + p.layout.lnf_b, c.h.data(),
               c.h_hat.data(), c.h_inv.data());
}

// Backward from d_h (gradient at the final layer-norm output, m x D) down to
// the parameter gradient buffer.
void encode_backward(const MlmParams& p, const std::vector<int>& tokens, const double* visual,
                     const Cache& c, std::vector<double>& d_h, double* G) {
    const MlmConfig& cfg = p.cfg;
    const int D = cfg.dim;
    const int F = cfg.ff_mult * D;
    const int H = cfg.heads;
    const int dh = D / H;
    const int m = c.m;
    const int n = c.n;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const double* W = p.w.data();
    const auto md = static_cast<std::size_t>(m) * D;

    std::vector<double> dx(md, 0.0);
    ln_backward(d_h.data(), c.h_hat.data(), c.h_inv.data(), m, D, W + p.layout.lnf_g, dx.data(),
                G + p.layout.lnf_g, G + p.layout.lnf_b);

    std::vector<double> d_xmid(md), d_b(md), d_g, d_f1, d_ctx(md), d_a(md), d_q(md), d_k(md),
        d_v(md), d_att;
    for (int l = cfg.layers - 1; l >= 0; --l) {
        const auto& L = c.layers[l];
        const auto& lo = p.layout.layers[l];
        const double* x_in = l == 0 ? c.x0.data() : c.layers[l - 1].x_mid.data();
        // x_in for the ffn residual is L.x_mid; dx currently holds dL/dx_out.
        const auto mf = static_cast<std::size_t>(m) * F;
        d_g.assign(mf, 0.0);
        linear_backward(L.g.data(), dx.data(), m, F, D, W + lo.w2, d_g.data(), G + lo.w2,
                        G + lo.b2);
        d_f1.assign(mf, 0.0);
        for (std::size_t i = 0; i < mf; ++i) d_f1[i] = d_g[i] * gelu_grad(L.f1[i]);
        d_b.assign(md, 0.0);
        linear_backward(L.b.data(), d_f1.data(), m, D, F, W + lo.w1, d_b.data(), G + lo.w1,
                        G + lo.b1);
        d_xmid.assign(md, 0.0);
        ln_backward(d_b.data(), L.b_hat.data(), L.b_inv.data(), m, D, W + lo.ln2_g, d_xmid.data(),
                    G + lo.ln2_g, G + lo.ln2_b);
        // residual: dL/dx_mid also receives dx directly
        for (std::size_t i = 0; i < md; ++i) d_xmid[i] += dx[i];

        d_ctx.assign(md, 0.0);
        linear_backward(L.ctx.data(), d_xmid.data(), m, D, D, W + lo.wo, d_ctx.data(), G + lo.wo,
                        nullptr);

        d_q.assign(md, 0.0);
        d_k.assign(md, 0.0);
        d_v.assign(md, 0.0);
        d_att.assign(static_cast<std::size_t>(m) * m, 0.0);
        for (int h = 0; h < H; ++h) {
            const int off = h * dh;
            for (int i = 0; i < m; ++i) {
                const double* arow = L.att.data() +
                                     (static_cast<std::size_t>(h) * m + i) *
                                         static_cast<std::size_t>(m);
                const double* dci = d_ctx.data() + static_cast<std::size_t>(i) * D + off;
                double* datt_row = d_att.data() + static_cast<std::size_t>(i) * m;
                double dot = 0.0;
                for (int j = 0; j < m; ++j) {
                    if (arow[j] == 0.0) {
                        datt_row[j] = 0.0;
                        continue;
                    }
                    const double* vj = L.v.data() + static_cast<std::size_t>(j) * D + off;
                    double da = 0.0;
                    for (int d = 0; d < dh; ++d) da += dci[d] * vj[d];
                    datt_row[j] = da;
                    dot += da * arow[j];
                    double* dvj = d_v.data() + static_cast<std::size_t>(j) * D + off;
                    for (int d = 0; d < dh; ++d) dvj[d] += arow[j] * dci[d];
                }
                const double* qi = L.q.data() + static_cast<std::size_t>(i) * D + off;
                double* dqi = d_q.data() + static_cast<std::size_t>(i) * D + off;
                for (int j = 0; j < m; ++j) {
                    if (arow[j] == 0.0) continue;
                    const double ds = arow[j] * (datt_row[j] - dot) * scale;
                    if (ds == 0.0) continue;
                    const double* kj = L.k.data() + static_cast<std::size_t>(j) * D + off;
                    double* dkj = d_k.data() + static_cast<std::size_t>(j) * D + off;
                    for (int d = 0; d < dh; ++d) {
                        dqi[d] += ds * kj[d];
                        dkj[d] += ds * qi[d];
                    }
                }
            }
        }

        d_a.assign(md, 0.0);
        linear_backward(L.a.data(), d_q.data(), m, D, D, W + lo.wq, d_a.data(), G + lo.wq,
                        nullptr);
        linear_backward(L.a.data(), d_k.data(), m, D, D, W + lo.wk, d_a.data(), G + lo.wk,
                        nullptr);
        linear_backward(L.a.data(), d_v.data(), m, D, D, W + lo.wv, d_a.data(), G + lo.wv,
                        nullptr);

        std::fill(dx.begin(), dx.end(), 0.0);
        ln_backward(d_a.data(), L.a_hat.data(), L.a_inv.data(), m, D, W + lo.ln1_g, dx.data(),
                    G + lo.ln1_g, G + lo.ln1_b);
        // residual into the layer input
        for (std::size_t i = 0; i < md; ++i) dx[i] += d_xmid[i];
        (void)x_in;
    }

    // dx is now the gradient at the embedded input x0.
    for (int i = 0; i < n; ++i) {
        const double* dxi = dx.data() + static_cast<std::size_t>(i) * D;
        double* dte = G + p.layout.tok_emb + static_cast<std::size_t>(tokens[i]) * D;
        double* dpe = G + p.layout.pos_emb + static_cast<std::size_t>(i) * D;
        for (int d = 0; d < D; ++d) {
            dte[d] += dxi[d];
            dpe[d] += dxi[d];
        }
    }
    if (c.has_visual) {
        const double* dpv = dx.data() + static_cast<std::size_t>(n) * D;
        double* dproj = G + p.layout.vis_proj;
        for (int d = 0; d < D; ++d) {
            if (dpv[d] == 0.0) continue;
            for (int j = 0; j < cfg.visual_dim; ++j)
                dproj[static_cast<std::size_t>(d) * cfg.visual_dim + j] += dpv[d] * visual[j];
        }
    }
}

struct MaskedExample {
    const std::vector<int>* input = nullptr;
    const std::vector<int>* positions = nullptr;
    const std::vector<int>* targets = nullptr;
    const std::vector<double>* visual = nullptr;  // nullptr or empty = absent
};

// Mean masked cross-entropy over the batch; fills G (same layout as params)
// when non-null. Returns the loss.
double mlm_loss(const MlmParams& p, const std::vector<MaskedExample>& batch, double* G) {
    const MlmConfig& cfg = p.cfg;
    const int D = cfg.dim;
    const int V = cfg.vocab;
    const double* W = p.w.data();

    std::size_t total_masked = 0;
    for (const auto& ex : batch) total_masked += ex.positions->size();
    if (total_masked == 0) throw TrainError("batch has no masked positions");

    double loss = 0.0;
    Cache cache;
    std::vector<double> probs(V);
    for (const auto& ex : batch) {
        const double* vis =
            ex.visual && !ex.visual->empty() ? ex.visual->data() : nullptr;
        if (vis && static_cast<int>(ex.visual->size()) != cfg.visual_dim)
            throw ShapeError("visual feature dimension mismatch");
        encode_forward(p, *ex.input, vis, cache);

        std::vector<double> d_h;
        if (G) d_h.assign(static_cast<std::size_t>(cache.m) * D, 0.0);
        for (std::size_t s = 0; s < ex.positions->size(); ++s) {
            const int pos = (*ex.positions)[s];
            const int target = (*ex.targets)[s];
            const double* hp = cache.h.data() + static_cast<std::size_t>(pos) * D;
            double best = -std::numeric_limits<double>::infinity();
            for (int t = 0; t < V; ++t) {
                const double* te = W + p.layout.tok_emb + static_cast<std::size_t>(t) * D;
                double acc = W[p.layout.out_bias + t];
                for (int d = 0; d < D; ++d) acc += hp[d] * te[d];
                probs[t] = acc;
                best = std::max(best, acc);
            }
            double denom = 0.0;
            for (int t = 0; t < V; ++t) {
                probs[t] = std::exp(probs[t] - best);
                denom += probs[t];
            }
            const double logp = std::log(probs[target] / denom);
            loss -= logp;
            if (!G) continue;
            double* dhp = d_h.data() + static_cast<std::size_t>(pos) * D;
            for (int t = 0; t < V; ++t) {
                double dl = probs[t] / denom;
                if (t == target) dl -= 1.0;
                dl /= static_cast<double>(total_masked);
                if (dl == 0.0) continue;
                G[p.layout.out_bias + t] += dl;
                const double* te = W + p.layout.tok_emb + static_cast<std::size_t>(t) * D;
                double* dte = G + p.layout.tok_emb + static_cast<std::size_t>(t) * D;
                for (int d = 0; d < D; ++d) {
                    dhp[d] += dl * te[d];
                    dte[d] += dl * hp[d];
                }
            }
        }
        if (G) encode_backward(p, *ex.input, vis, cache, d_h, G);
    }
    return loss / static_cast<double>(total_masked);
}

void validate_split(const MaskSplit& split) {
    if (split.mask < 0 || split.random < 0 || split.keep < 0 ||
        std::abs(split.mask + split.random + split.keep - 1.0) > 1e-9)
        throw ConfigError("mask split must be non-negative and sum to 1");
}

}  // namespace

ParamLayout make_layout(const MlmConfig& cfg) {
    validate_config(cfg);
    ParamLayout lo;
    std::size_t off = 0;
    auto take = [&off](std::size_t count) {
        const std::size_t at = off;
        off += count;
        return at;
    };
    const auto D = static_cast<std::size_t>(cfg.dim);
    const auto F = static_cast<std::size_t>(cfg.ff_mult) * D;
    lo.tok_emb = take(static_cast<std::size_t>(cfg.vocab) * D);
    lo.pos_emb = take(static_cast<std::size_t>(cfg.max_len) * D);
    lo.vis_proj = take(D * static_cast<std::size_t>(cfg.visual_dim));
    for (int l = 0; l < cfg.layers; ++l) {
        ParamLayout::Layer layer;
        layer.wq = take(D * D);
        layer.wk = take(D * D);
        layer.wv = take(D * D);
        layer.wo = take(D * D);
        layer.ln1_g = take(D);
        layer.ln1_b = take(D);
        layer.w1 = take(F * D);
        layer.b1 = take(F);
        layer.ln2_g = take(D);
        layer.ln2_b = take(D);
        layer.w2 = take(D * F);
        layer.b2 = take(D);
        lo.layers.push_back(layer);
    }
    lo.lnf_g = take(D);
    lo.lnf_b = take(D);
    lo.out_bias = take(static_cast<std::size_t>(cfg.vocab));
    lo.total = off;
    return lo;
}

MlmParams init_params(const MlmConfig& cfg, Rng& rng) {
    MlmParams p;
    p.cfg = cfg;
    p.layout = make_layout(cfg);
    p.w.assign(p.layout.total, 0.0);
    for (auto& x : p.w) x = rng.normal() * 0.02;
    auto ones = [&p](std::size_t off, int count) {
        for (int i = 0; i < count; ++i) p.w[off + i] = 1.0;
    };
    auto zeros = [&p](std::size_t off, int count) {
        for (int i = 0; i < count; ++i) p.w[off + i] = 0.0;
    };
    for (const auto& l : p.layout.layers) {
        ones(l.ln1_g, cfg.dim);
        zeros(l.ln1_b, cfg.dim);
        ones(l.ln2_g, cfg.dim);
        zeros(l.ln2_b, cfg.dim);
        zeros(l.b1, cfg.ff_mult * cfg.dim);
        zeros(l.b2, cfg.dim);
    }
    ones(p.layout.lnf_g, cfg.dim);
    zeros(p.layout.lnf_b, cfg.dim);
    zeros(p.layout.out_bias, cfg.vocab);
    return p;
}

MaskedSequence mask_tokens(const std::vector<int>& seq, const ToyVocab& vocab, double ratio,
                           Rng& rng, const MaskSplit& split) {
    if (!(ratio > 0.0) || !(ratio < 1.0))
        throw ConfigError("mask ratio must lie strictly between 0 and 1");
    validate_split(split);
    std::vector<int> maskable;
    for (std::size_t i = 0; i < seq.size(); ++i)
        if (!vocab.is_special(seq[i])) maskable.push_back(static_cast<int>(i));
    if (maskable.empty()) throw TrainError("sequence has no maskable token");

    MaskedSequence out;
    while (out.positions.empty()) {
        for (int pos : maskable)
            if (rng.real() < ratio) out.positions.push_back(pos);
    }
    out.input = seq;
    const int plain = vocab.size() - 4;  // non-special tokens start at id 4
    for (int pos : out.positions) {
        out.targets.push_back(seq[pos]);
        const double roll = rng.real();
        if (roll < split.mask) {
            out.input[pos] = vocab.mask_id;
        } else if (roll < split.mask + split.random) {
            out.input[pos] = 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(plain)));
        }
    }
    return out;
}

std::vector<std::vector<double>> forward_mlm(const MlmParams& p, const std::vector<int>& tokens,
                                             const std::vector<double>* visual) {
    const double* vis = nullptr;
    if (visual) {
        if (static_cast<int>(visual->size()) != p.cfg.visual_dim)
            throw ShapeError("visual feature dimension mismatch: got " +
                             std::to_string(visual->size()) + ", expected " +
                             std::to_string(p.cfg.visual_dim));
        vis = visual->data();
    }
    Cache cache;
    encode_forward(p, tokens, vis, cache);
    const int D = p.cfg.dim;
    const int V = p.cfg.vocab;
    const double* W = p.w.data();
    std::vector<std::vector<double>> logits(tokens.size(), std::vector<double>(V, 0.0));
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const double* hp = cache.h.data() + i * static_cast<std::size_t>(D);
        for (int t = 0; t < V; ++t) {
            const double* te = W + p.layout.tok_emb + static_cast<std::size_t>(t) * D;
            double acc = W[p.layout.out_bias + t];
            for (int d = 0; d < D; ++d) acc += hp[d] * te[d];
            logits[i][t] = acc;
        }
    }
    return logits;
}

TrainResult train_mlm(const std::vector<ToyExample>& corpus, const MlmConfig& cfg,
                      const ToyVocab& vocab, bool use_visual) {
    if (corpus.empty()) throw ConfigError("training corpus is empty");
    if (cfg.vocab != vocab.size())
        throw ConfigError("config vocab size does not match the vocabulary");
    if (cfg.steps < 1 || cfg.batch < 1) throw ConfigError("steps and batch must be positive");
    if (!(cfg.lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (cfg.heldout_fraction < 0.0 || cfg.heldout_fraction > 0.5)
        throw ConfigError("heldout fraction must lie in [0, 0.5]");
    validate_split(cfg.mask_split);

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::size_t heldout_n = static_cast<std::size_t>(corpus.size() * cfg.heldout_fraction);
    if (corpus.size() >= 2) heldout_n = std::max<std::size_t>(heldout_n, 1);
    heldout_n = std::min(heldout_n, corpus.size() - 1);
    const std::vector<std::size_t> heldout(order.begin(), order.begin() + heldout_n);
    const std::vector<std::size_t> train(order.begin() + heldout_n, order.end());

    // Frozen held-out masks so the initial and final losses are comparable.
    Rng heldout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<MaskedSequence> heldout_masks;
    heldout_masks.reserve(heldout.size());
    for (std::size_t idx : heldout)
        heldout_masks.push_back(
            mask_tokens(corpus[idx].tokens, vocab, cfg.mask_ratio, heldout_rng, cfg.mask_split));
    auto heldout_batch = [&]() {
        std::vector<MaskedExample> b;
        for (std::size_t i = 0; i < heldout.size(); ++i) {
            MaskedExample ex;
            ex.input = &heldout_masks[i].input;
            ex.positions = &heldout_masks[i].positions;
            ex.targets = &heldout_masks[i].targets;
            ex.visual = use_visual ? &corpus[heldout[i]].visual : nullptr;
            b.push_back(ex);
        }
        return b;
    };

    TrainResult result;
    result.params = init_params(cfg, rng);
    MlmParams& p = result.params;
    if (!heldout.empty()) result.initial_heldout_loss = mlm_loss(p, heldout_batch(), nullptr);

    std::vector<double> grad(p.layout.total, 0.0);
    std::vector<double> adam_m(p.layout.total, 0.0);
    std::vector<double> adam_v(p.layout.total, 0.0);
    const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;

    std::vector<std::size_t> epoch = train.empty() ? order : train;
    std::size_t cursor = epoch.size();
    std::vector<MaskedSequence> masks(cfg.batch);
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<MaskedExample> batch;
        for (int bi = 0; bi < cfg.batch; ++bi) {
            if (cursor >= epoch.size()) {
                rng.shuffle(epoch);
                cursor = 0;
            }
            const std::size_t idx = epoch[cursor++];
            masks[bi] = mask_tokens(corpus[idx].tokens, vocab, cfg.mask_ratio, rng,
                                    cfg.mask_split);
            MaskedExample ex;
            ex.input = &masks[bi].input;
            ex.positions = &masks[bi].positions;
            ex.targets = &masks[bi].targets;
            ex.visual = use_visual ? &corpus[idx].visual : nullptr;
            batch.push_back(ex);
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        const double loss = mlm_loss(p, batch, grad.data());
        if (!std::isfinite(loss))
            throw TrainError("loss diverged at step " + std::to_string(step));

        const double t = step + 1;
        const double corr1 = 1.0 - std::pow(b1, t);
        const double corr2 = 1.0 - std::pow(b2, t);
        for (std::size_t i = 0; i < p.w.size(); ++i) {
            adam_m[i] = b1 * adam_m[i] + (1.0 - b1) * grad[i];
            adam_v[i] = b2 * adam_v[i] + (1.0 - b2) * grad[i] * grad[i];
            p.w[i] -= cfg.lr * (adam_m[i] / corr1) / (std::sqrt(adam_v[i] / corr2) + adam_eps);
        }
    }
    if (!heldout.empty()) result.final_heldout_loss = mlm_loss(p, heldout_batch(), nullptr);
    return result;
}

double grad_check(const MlmParams& p, const std::vector<ToyExample>& batch, const ToyVocab& vocab,
                  const GradCheckOptions& opts) {
    if (!(opts.eps > 0.0)) throw ConfigError("grad check eps must be positive");
    if (batch.empty()) throw ConfigError("grad check batch is empty");
    Rng rng(opts.seed);
    std::vector<MaskedSequence> masks;
    masks.reserve(batch.size());
    std::vector<MaskedExample> mbatch;
    for (const auto& ex : batch) {
        masks.push_back(mask_tokens(ex.tokens, vocab, p.cfg.mask_ratio, rng, p.cfg.mask_split));
        MaskedExample me;
        me.input = &masks.back().input;
        me.positions = &masks.back().positions;
        me.targets = &masks.back().targets;
        me.visual = &ex.visual;
        mbatch.push_back(me);
    }

    std::vector<double> grad(p.layout.total, 0.0);
    mlm_loss(p, mbatch, grad.data());
    for (double g : grad)
        if (!std::isfinite(g)) throw TrainError("non-finite analytic gradient");
    if (opts.corrupt_projection_gradient) {
        const std::size_t count =
            static_cast<std::size_t>(p.cfg.dim) * static_cast<std::size_t>(p.cfg.visual_dim);
        for (std::size_t i = 0; i < count; ++i)
            grad[p.layout.vis_proj + i] = grad[p.layout.vis_proj + i] * 1.5 + 0.05;
    }

    const std::size_t proj_count =
        static_cast<std::size_t>(p.cfg.dim) * static_cast<std::size_t>(p.cfg.visual_dim);
    std::set<std::size_t> coords;
    const int proj_probes = std::max(10, opts.samples / 6);
    for (int i = 0; i < proj_probes; ++i)
        coords.insert(p.layout.vis_proj + rng.below(proj_count));
    while (coords.size() < static_cast<std::size_t>(opts.samples))
        coords.insert(rng.below(p.layout.total));

    MlmParams probe = p;
    double worst = 0.0;
    for (std::size_t idx : coords) {
        const double saved = probe.w[idx];
        probe.w[idx] = saved + opts.eps;
        const double up = mlm_loss(probe, mbatch, nullptr);
        probe.w[idx] = saved - opts.eps;
        const double down = mlm_loss(probe, mbatch, nullptr);
        probe.w[idx] = saved;
        const double numeric = (up - down) / (2.0 * opts.eps);
        if (!std::isfinite(numeric)) throw TrainError("non-finite numeric gradient");
        const double analytic = grad[idx];
        const double denom = std::max({1e-3, std::abs(analytic), std::abs(numeric)});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
    return worst;
}

}  // namespace memcol::toy
