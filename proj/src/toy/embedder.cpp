#include "memcol/toy/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "memcol/errors.hpp"

namespace memcol::toy {

namespace {

void normalize(std::vector<double>& x) {
    double nrm = 0.0;
    for (double v : x) nrm += v * v;
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) return;  // leave the zero vector alone
    for (double& v : x) v /= nrm;
}

// d_raw += (d_unit - y (y . d_unit)) / ||raw||, where y = raw/||raw||.
void normalize_backward(const std::vector<double>& raw, const std::vector<double>& unit,
                        const std::vector<double>& d_unit, std::vector<double>& d_raw) {
    double nrm = 0.0;
    for (double v : raw) nrm += v * v;
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) return;
    double dot = 0.0;
    for (std::size_t i = 0; i < unit.size(); ++i) dot += unit[i] * d_unit[i];
    for (std::size_t i = 0; i < raw.size(); ++i)
        d_raw[i] += (d_unit[i] - unit[i] * dot) / nrm;
}

std::vector<double> pool_text(const JointEmbedder& e, const std::vector<int>& tokens,
                              int* pooled_count) {
    const int dim = e.cfg.dim;
    std::vector<double> acc(dim, 0.0);
    int count = 0;
    for (int t : tokens) {
        if (t == 0) continue;  // [PAD]
        if (t < 0 || t >= e.cfg.vocab)
            throw EncodingError("token id out of range: " + std::to_string(t));
        const double* row = e.text_emb.data() + static_cast<std::size_t>(t) * dim;
        for (int d = 0; d < dim; ++d) acc[d] += row[d];
        ++count;
    }
    if (count == 0) throw ShapeError("no non-pad tokens to pool");
    for (double& v : acc) v /= count;
    if (pooled_count) *pooled_count = count;
    return acc;
}

std::vector<double> affine_image(const JointEmbedder& e, const std::vector<double>& feature) {
    const int dim = e.cfg.dim;
    if (static_cast<int>(feature.size()) != dim)
        throw ShapeError("image feature dimension mismatch: got " +
                         std::to_string(feature.size()) + ", expected " + std::to_string(dim));
    std::vector<double> out(dim, 0.0);
    for (int o = 0; o < dim; ++o) {
        double acc = e.img_b[o];
        const double* row = e.img_w.data() + static_cast<std::size_t>(o) * dim;
        for (int d = 0; d < dim; ++d) acc += row[d] * feature[d];
        out[o] = acc;
    }
    return out;
}

}  // namespace

JointEmbedder init_embedder(const EmbedderConfig& cfg, Rng& rng) {
    if (cfg.vocab < 5) throw ConfigError("vocabulary too small for the embedder");
    if (cfg.dim <= 0) throw ConfigError("embedder dim must be positive");
    JointEmbedder e;
    e.cfg = cfg;
    e.text_emb.assign(static_cast<std::size_t>(cfg.vocab) * cfg.dim, 0.0);
    e.img_w.assign(static_cast<std::size_t>(cfg.dim) * cfg.dim, 0.0);
    e.img_b.assign(cfg.dim, 0.0);
    for (auto& x : e.text_emb) x = rng.normal() * 0.1;
    for (auto& x : e.img_w) x = rng.normal() * (1.0 / std::sqrt(cfg.dim));
    e.log_scale = std::log(1.0 / 0.07);
    return e;
}

std::vector<double> encode_text(const JointEmbedder& e, const std::vector<int>& tokens) {
    std::vector<double> pooled = pool_text(e, tokens, nullptr);
    normalize(pooled);
    return pooled;
}

std::vector<double> encode_image(const JointEmbedder& e, const std::vector<double>& feature) {
    std::vector<double> out = affine_image(e, feature);
    normalize(out);
    return out;
}

std::vector<double> imagine(const JointEmbedder& e, const ToyVocab& vocab,
                            const std::string& text) {
    return encode_text(e, vocab.encode(text));
}

double retrieval_top1(const JointEmbedder& e, const std::vector<ToyExample>& pairs) {
    if (pairs.empty()) throw ConfigError("retrieval needs at least one pair");
    std::vector<std::vector<double>> imgs;
    imgs.reserve(pairs.size());
    for (const auto& p : pairs) imgs.push_back(encode_image(e, p.visual));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const std::vector<double> t = encode_text(e, pairs[i].tokens);
        std::size_t best = 0;
        double best_score = -2.0;
        for (std::size_t j = 0; j < imgs.size(); ++j) {
            double s = 0.0;
            for (int d = 0; d < e.cfg.dim; ++d) s += t[d] * imgs[j][d];
            if (s > best_score) {
                best_score = s;
                best = j;
            }
        }
        if (best == i) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

JointEmbedder train_joint_embedder(const std::vector<ToyExample>& pairs,
                                   const EmbedderConfig& cfg, const ToyVocab& vocab) {
    if (cfg.batch < 2) throw ConfigError("contrastive batch size must be at least 2");
    if (cfg.steps < 1) throw ConfigError("steps must be positive");
    if (!(cfg.lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (cfg.vocab != vocab.size())
        throw ConfigError("config vocab size does not match the vocabulary");
    if (pairs.size() < 2) throw ConfigError("need at least two pairs to contrast");
    for (const auto& p : pairs) {
        if (p.visual.empty()) throw ConfigError("every contrastive pair needs an image feature");
        if (static_cast<int>(p.visual.size()) != cfg.dim)
            throw ShapeError("image feature dimension mismatch: got " +
                             std::to_string(p.visual.size()) + ", expected " +
                             std::to_string(cfg.dim));
    }

    Rng rng(cfg.seed);
    JointEmbedder e = init_embedder(cfg, rng);
    const int dim = cfg.dim;
    const std::size_t n_text = e.text_emb.size();
    const std::size_t n_imgw = e.img_w.size();
    const std::size_t n_imgb = e.img_b.size();
    const std::size_t total = n_text + n_imgw + n_imgb + 1;
    std::vector<double> grad(total, 0.0);
    std::vector<double> adam_m(total, 0.0), adam_v(total, 0.0);
    const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;

    std::vector<std::size_t> epoch(pairs.size());
    std::iota(epoch.begin(), epoch.end(), 0);
    std::size_t cursor = epoch.size();
    const int B = std::min<int>(cfg.batch, static_cast<int>(pairs.size()));

    std::vector<std::size_t> batch(B);
    std::vector<std::vector<double>> t_raw(B), t_unit(B), v_raw(B), v_unit(B);
    std::vector<int> t_count(B);
    std::vector<double> sim(static_cast<std::size_t>(B) * B);
    std::vector<double> g_sim(static_cast<std::size_t>(B) * B);

    for (int step = 0; step < cfg.steps; ++step) {
        for (int i = 0; i < B; ++i) {
            if (cursor >= epoch.size()) {
                rng.shuffle(epoch);
                cursor = 0;
            }
            batch[i] = epoch[cursor++];
        }
        for (int i = 0; i < B; ++i) {
            const auto& p = pairs[batch[i]];
            t_raw[i] = pool_text(e, p.tokens, &t_count[i]);
            t_unit[i] = t_raw[i];
            normalize(t_unit[i]);
            v_raw[i] = affine_image(e, p.visual);
            v_unit[i] = v_raw[i];
            normalize(v_unit[i]);
        }
        const double scale = std::exp(e.log_scale);
        for (int i = 0; i < B; ++i)
            for (int j = 0; j < B; ++j) {
                double s = 0.0;
                for (int d = 0; d < dim; ++d) s += t_unit[i][d] * v_unit[j][d];
                sim[static_cast<std::size_t>(i) * B + j] = s;
            }

        // Symmetric cross entropy: rows are text -> image, columns the reverse.
        std::fill(g_sim.begin(), g_sim.end(), 0.0);
        double d_log_scale = 0.0;
        const double inv = 1.0 / (2.0 * B);
        for (int i = 0; i < B; ++i) {
            double best = -1e300;
            for (int j = 0; j < B; ++j)
                best = std::max(best, sim[static_cast<std::size_t>(i) * B + j]);
            double denom = 0.0;
            for (int j = 0; j < B; ++j)
                denom += std::exp(scale * (sim[static_cast<std::size_t>(i) * B + j] - best));
            for (int j = 0; j < B; ++j) {
                const double p =
                    std::exp(scale * (sim[static_cast<std::size_t>(i) * B + j] - best)) / denom;
                const double dl = (p - (i == j ? 1.0 : 0.0)) * inv;
                g_sim[static_cast<std::size_t>(i) * B + j] += dl * scale;
                d_log_scale += dl * scale * sim[static_cast<std::size_t>(i) * B + j];
            }
        }
        for (int j = 0; j < B; ++j) {
            double best = -1e300;
            for (int i = 0; i < B; ++i)
                best = std::max(best, sim[static_cast<std::size_t>(i) * B + j]);
            double denom = 0.0;
            for (int i = 0; i < B; ++i)
                denom += std::exp(scale * (sim[static_cast<std::size_t>(i) * B + j] - best));
            for (int i = 0; i < B; ++i) {
                const double p =
                    std::exp(scale * (sim[static_cast<std::size_t>(i) * B + j] - best)) / denom;
                const double dl = (p - (i == j ? 1.0 : 0.0)) * inv;
                g_sim[static_cast<std::size_t>(i) * B + j] += dl * scale;
                d_log_scale += dl * scale * sim[static_cast<std::size_t>(i) * B + j];
            }
        }

        std::fill(grad.begin(), grad.end(), 0.0);
        grad[total - 1] = d_log_scale;
        std::vector<double> d_unit(dim), d_raw(dim);
        for (int i = 0; i < B; ++i) {
            // text side
            std::fill(d_unit.begin(), d_unit.end(), 0.0);
            for (int j = 0; j < B; ++j) {
                const double g = g_sim[static_cast<std::size_t>(i) * B + j];
                if (g == 0.0) continue;
                for (int d = 0; d < dim; ++d) d_unit[d] += g * v_unit[j][d];
            }
            std::fill(d_raw.begin(), d_raw.end(), 0.0);
            normalize_backward(t_raw[i], t_unit[i], d_unit, d_raw);
            const auto& toks = pairs[batch[i]].tokens;
            for (int t : toks) {
                if (t == 0) continue;
                double* row = grad.data() + static_cast<std::size_t>(t) * dim;
                for (int d = 0; d < dim; ++d) row[d] += d_raw[d] / t_count[i];
            }
            // image side
            std::fill(d_unit.begin(), d_unit.end(), 0.0);
            for (int j = 0; j < B; ++j) {
                const double g = g_sim[static_cast<std::size_t>(j) * B + i];
                if (g == 0.0) continue;
                for (int d = 0; d < dim; ++d) d_unit[d] += g * t_unit[j][d];
            }
            std::fill(d_raw.begin(), d_raw.end(), 0.0);
            normalize_backward(v_raw[i], v_unit[i], d_unit, d_raw);
            const auto& feat = pairs[batch[i]].visual;
            for (int o = 0; o < dim; ++o) {
                if (d_raw[o] == 0.0) continue;
                double* row = grad.data() + n_text + static_cast<std::size_t>(o) * dim;
                for (int d = 0; d < dim; ++d) row[d] += d_raw[o] * feat[d];
                grad[n_text + n_imgw + o] += d_raw[o];
            }
        }

        const double t = step + 1;
        const double corr1 = 1.0 - std::pow(b1, t);
        const double corr2 = 1.0 - std::pow(b2, t);
        auto update = [&](double& w, std::size_t gi) {
            adam_m[gi] = b1 * adam_m[gi] + (1.0 - b1) * grad[gi];
            adam_v[gi] = b2 * adam_v[gi] + (1.0 - b2) * grad[gi] * grad[gi];
            w -= cfg.lr * (adam_m[gi] / corr1) / (std::sqrt(adam_v[gi] / corr2) + adam_eps);
        };
        for (std::size_t i = 0; i < n_text; ++i) update(e.text_emb[i], i);
        for (std::size_t i = 0; i < n_imgw; ++i) update(e.img_w[i], n_text + i);
        for (std::size_t i = 0; i < n_imgb; ++i) update(e.img_b[i], n_text + n_imgw + i);
        update(e.log_scale, total - 1);
        if (!std::isfinite(e.log_scale))
            throw TrainError("contrastive loss diverged at step " + std::to_string(step));
    }
    return e;
}

}  // namespace memcol::toy
