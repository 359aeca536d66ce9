#pragma once

// Straight-line reference implementations written with plain loops over
// std::vector, independent of the tensor ops they check. Shared by the unit
// tests and the acceptance driver.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "sadga/aggregation.hpp"
#include "sadga/decoder.hpp"
#include "sadga/encoder.hpp"
#include "sadga/rat.hpp"

namespace oracle {

using sadga::ad::Tensor;
using Vec = std::vector<double>;
using Mat = std::vector<Vec>;
using Adj = std::vector<std::vector<std::size_t>>;

inline Mat M(const Tensor& t) {
    Mat m(t.rows(), Vec(t.cols()));
    for (std::size_t r = 0; r < t.rows(); ++r)
        for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
    return m;
}
inline Vec V(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

// Row x times W.
inline Vec xw(const Vec& x, const Mat& W) {
    Vec out(W[0].size(), 0.0);
    for (std::size_t k = 0; k < x.size(); ++k)
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += x[k] * W[k][c];
    return out;
}
inline double dot(const Vec& a, const Vec& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}
inline Vec plus(const Vec& a, const Vec& b) {
    Vec o(a);
    for (std::size_t i = 0; i < a.size(); ++i) o[i] += b[i];
    return o;
}
inline Vec cat(const Vec& a, const Vec& b) {
    Vec o(a);
    o.insert(o.end(), b.begin(), b.end());
    return o;
}
inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline Vec softmax(const Vec& s) {
    double mx = s[0];
    for (double v : s) mx = std::max(mx, v);
    Vec e(s.size());
    double z = 0;
    for (std::size_t i = 0; i < s.size(); ++i) z += (e[i] = std::exp(s[i] - mx));
    for (auto& v : e) v /= z;
    return e;
}
inline Vec layer_norm(const Vec& x, const Vec& g, const Vec& b) {
    double mean = 0, var = 0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    Vec o(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) o[i] = (x[i] - mean) / std::sqrt(var + 1e-5) * g[i] + b[i];
    return o;
}

// One GGNN step over the typed edge list of a Levi graph.
inline Mat ggnn_step(const sadga::graph::LeviGraph& levi, const Mat& h, const sadga::model::GgnnParams& p) {
    const std::size_t n = h.size(), d = h[0].size();
    Mat f(n, Vec(d, 0.0));
    for (const auto& e : levi.typed_edges) {
        const auto t = static_cast<std::size_t>(e.type);
        auto msg = xw(h[e.src], M(p.W[t]));
        for (std::size_t c = 0; c < d; ++c) f[e.dst][c] += msg[c] + p.b[t].values()[c];
    }
    Mat out(n, Vec(d));
    for (std::size_t i = 0; i < n; ++i) {
        auto fz = xw(f[i], M(p.W_z)), hz = xw(h[i], M(p.U_z));
        auto fr = xw(f[i], M(p.W_r)), hr = xw(h[i], M(p.U_r));
        auto fn = xw(f[i], M(p.W_n)), hn = xw(h[i], M(p.U_n));
        for (std::size_t c = 0; c < d; ++c) {
            double z = sig(fz[c] + hz[c] + p.b_z.values()[c]);
            double r = sig(fr[c] + hr[c] + p.b_r.values()[c]);
            double cand = std::tanh(fn[c] + p.b_n.values()[c] + r * (hn[c] + p.b_hn.values()[c]));
            out[i][c] = (1 - z) * cand + z * h[i][c];
        }
    }
    return out;
}

// The pieces of one aggregation direction, query side q against key side k.
struct Aggregation {
    Mat W_g, W_qg, W_kg, W_q, W_nq, W_ng, W_gate, R;
    bool rel = true;
    explicit Aggregation(const sadga::model::AggregationParams& p)
        : W_g(M(p.W_g)), W_qg(M(p.W_qg)), W_kg(M(p.W_kg)), W_q(M(p.W_q)), W_nq(M(p.W_nq)),
          W_ng(M(p.W_ng)), W_gate(M(p.W_gate)), R(M(p.R_E)) {}

    Vec Re(const sadga::graph::CrossRelMatrix& c, std::size_t i, std::size_t j) const {
        if (!rel) return Vec(R[0].size(), 0.0);
        return R[sadga::graph::relation_index(c.at(i, j))];
    }

    Mat pool(const Mat& q, const Mat& k) const {
        Vec glob(q[0].size(), 0.0);
        for (const auto& row : q)
            for (std::size_t c = 0; c < row.size(); ++c) glob[c] += row[c];
        for (auto& v : glob) v /= static_cast<double>(q.size());
        Mat out;
        for (const auto& hj : k) {
            double e = sig(dot(xw(glob, W_g), hj));
            Vec a = xw(glob, W_qg), b = xw(hj, W_kg), o(hj.size());
            for (std::size_t c = 0; c < o.size(); ++c) o[c] = (1 - e) * a[c] + e * b[c];
            out.push_back(o);
        }
        return out;
    }

    Mat alpha(const Mat& q, const Mat& k, const sadga::graph::CrossRelMatrix& c) const {
        Mat a;
        for (std::size_t i = 0; i < q.size(); ++i) {
            Vec s;
            for (std::size_t j = 0; j < k.size(); ++j) s.push_back(std::tanh(dot(xw(q[i], W_q), plus(k[j], Re(c, i, j)))));
            a.push_back(softmax(s));
        }
        return a;
    }

    // beta[i][j][t] over the full key range, zero outside the neighbors of j
    std::vector<Mat> beta(const Mat& q, const Mat& k, const Adj& adj, const sadga::graph::CrossRelMatrix& c) const {
        std::vector<Mat> b(q.size(), Mat(k.size(), Vec(k.size(), 0.0)));
        for (std::size_t i = 0; i < q.size(); ++i)
            for (std::size_t j = 0; j < k.size(); ++j) {
                if (adj[j].empty()) continue;
                Vec o;
                for (std::size_t t : adj[j]) o.push_back(std::tanh(dot(xw(q[i], W_nq), plus(k[t], Re(c, i, t)))));
                Vec w = softmax(o);
                for (std::size_t u = 0; u < adj[j].size(); ++u) b[i][j][adj[j][u]] = w[u];
            }
        return b;
    }

    std::vector<Mat> hk(const Mat& k, const std::vector<Mat>& beta, bool half_gate = false) const {
        std::vector<Mat> out(beta.size(), Mat(k.size()));
        for (std::size_t i = 0; i < beta.size(); ++i)
            for (std::size_t j = 0; j < k.size(); ++j) {
                Vec neigh(k[0].size(), 0.0);
                for (std::size_t t = 0; t < k.size(); ++t)
                    for (std::size_t c = 0; c < neigh.size(); ++c) neigh[c] += beta[i][j][t] * k[t][c];
                Vec g = xw(cat(k[j], neigh), W_ng), o(neigh.size());
                for (std::size_t c = 0; c < o.size(); ++c) {
                    double gate = half_gate ? 0.5 : sig(g[c]);
                    o[c] = (1 - gate) * k[j][c] + gate * neigh[c];
                }
                out[i][j] = o;
            }
        return out;
    }

    Mat update(const Mat& q, const std::vector<Mat>& hk, const Mat& a, const sadga::graph::CrossRelMatrix& c) const {
        Mat out;
        for (std::size_t i = 0; i < q.size(); ++i) {
            Vec hn(q[0].size(), 0.0);
            for (std::size_t j = 0; j < a[i].size(); ++j) {
                Vec v = plus(hk[i][j], Re(c, i, j));
                for (std::size_t d = 0; d < hn.size(); ++d) hn[d] += a[i][j] * v[d];
            }
            Vec g = xw(cat(q[i], hn), W_gate), o(hn.size());
            for (std::size_t d = 0; d < o.size(); ++d) o[d] = (1 - sig(g[d])) * q[i][d] + sig(g[d]) * hn[d];
            out.push_back(o);
        }
        return out;
    }
};

inline Mat flatten(const std::vector<Mat>& b) {
    Mat out;
    for (const auto& x : b) out.insert(out.end(), x.begin(), x.end());
    return out;
}

// Transformer block with relation-aware attention.
inline Mat rat_block(const Mat& x, const sadga::model::RelationMatrix& rel, const sadga::model::RatLayerParams& p) {
    const std::size_t L = x.size(), d = x[0].size(), H = p.heads, dk = d / H;
    Mat WQ = M(p.W_Q), WK = M(p.W_K), WV = M(p.W_V), rK = M(p.r_K), rV = M(p.r_V);
    auto proj = [&](const Mat& W, std::size_t i, std::size_t h) {
        Vec o(dk, 0.0);
        for (std::size_t c = 0; c < dk; ++c)
            for (std::size_t k = 0; k < d; ++k) o[c] += x[i][k] * W[k][h * dk + c];
        return o;
    };
    Mat z(L, Vec(d, 0.0));
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t i = 0; i < L; ++i) {
            Vec qi = proj(WQ, i, h), e(L);
            for (std::size_t j = 0; j < L; ++j) {
                Vec kj = proj(WK, j, h);
                const Vec& r = rK[sadga::graph::relation_index(rel.at(i, j))];
                double s = 0;
                for (std::size_t c = 0; c < dk; ++c) s += qi[c] * (kj[c] + r[c]);
                e[j] = s / std::sqrt(static_cast<double>(dk));
            }
            Vec a = softmax(e);
            for (std::size_t j = 0; j < L; ++j) {
                Vec vj = proj(WV, j, h);
                const Vec& r = rV[sadga::graph::relation_index(rel.at(i, j))];
                for (std::size_t c = 0; c < dk; ++c) z[i][h * dk + c] += a[j] * (vj[c] + r[c]);
            }
        }
    Mat W1 = M(p.ff1_W), W2 = M(p.ff2_W);
    Vec b1 = V(p.ff1_b), b2 = V(p.ff2_b);
    Mat out;
    for (std::size_t i = 0; i < L; ++i) {
        Vec y = layer_norm(plus(x[i], z[i]), V(p.ln1_gain), V(p.ln1_bias));
        Vec hid = plus(xw(y, W1), b1);
        for (auto& v : hid) v = std::max(0.0, v);
        Vec y2 = plus(y, plus(xw(hid, W2), b2));
        out.push_back(layer_norm(y2, V(p.ln2_gain), V(p.ln2_bias)));
    }
    return out;
}

// Pointer alignment of every memory row against rows [offset, offset + count).
inline Mat pointer_alignment(const Mat& h, const sadga::model::RelationMatrix& rel,
                             const sadga::model::AlignmentParams& p, std::size_t offset, std::size_t count) {
    const Mat WQ = M(p.W_Q), WK = M(p.W_K), re = M(p.R_E);
    Mat out;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const Vec q = xw(h[i], WQ);
        Vec logit(count);
        for (std::size_t j = 0; j < count; ++j) {
            const Vec& r = re[static_cast<std::size_t>(rel.at(i, offset + j))];
            logit[j] = dot(q, plus(xw(h[offset + j], WK), r));
        }
        out.push_back(softmax(logit));
    }
    return out;
}

struct FirstStep {
    Vec H;          // LSTM output
    Vec log_probs;  // over productions, NaN where illegal
};

// First decoding step from the start vectors: the previous state is zero, so the
// context is the plain mean of the encoder rows and the forget gate drops out.
inline FirstStep first_decode_step(const Tensor& states, const sadga::grammar::Grammar& g,
                                   const sadga::model::DecoderParams& p) {
    const std::size_t H = p.config.hidden, L = states.rows();
    Vec in = V(p.start_rule);
    for (std::size_t d = 0; d < p.config.d; ++d) {
        double s = 0.0;
        for (std::size_t i = 0; i < L; ++i) s += states.at(i, d);
        in.push_back(s / static_cast<double>(L));
    }
    for (std::size_t k = 0; k < p.config.type_dim; ++k) in.push_back(p.type_embedding.at(g.root, k));
    in = cat(cat(in, V(p.start_rule)), V(p.start_hidden));
    const Vec gates = plus(xw(in, M(p.lstm_W_x)), V(p.lstm_b));
    FirstStep out;
    out.H.resize(H);
    for (std::size_t k = 0; k < H; ++k)
        out.H[k] = sig(gates[3 * H + k]) * std::tanh(sig(gates[k]) * std::tanh(gates[2 * H + k]));
    Vec hidden = plus(xw(out.H, M(p.mlp_W1)), V(p.mlp_b1));
    for (auto& v : hidden) v = std::tanh(v);
    const Vec logits = plus(xw(hidden, M(p.mlp_W2)), V(p.mlp_b2));
    const auto& legal = g.types[g.root].productions;
    double mx = -std::numeric_limits<double>::infinity(), z = 0.0;
    for (auto id : legal) mx = std::max(mx, logits[id]);
    for (auto id : legal) z += std::exp(logits[id] - mx);
    out.log_probs.assign(logits.size(), std::numeric_limits<double>::quiet_NaN());
    for (auto id : legal) out.log_probs[id] = logits[id] - mx - std::log(z);
    return out;
}

// Random inputs for the property checks.

inline sadga::graph::CrossRelMatrix random_cross(std::size_t m, std::size_t n, std::mt19937_64& rng) {
    sadga::graph::CrossRelMatrix c(m, n);
    std::uniform_int_distribution<int> pick(9, 14);  // cross relations and NoMatch
    for (auto& cell : c.cells) cell = static_cast<sadga::graph::RelationType>(pick(rng));
    return c;
}

inline Adj random_adjacency(std::size_t n, std::mt19937_64& rng, double density = 0.4) {
    std::bernoulli_distribution edge(density);
    Adj adj(n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (edge(rng)) {
                adj[a].push_back(b);
                adj[b].push_back(a);
            }
    return adj;
}

inline sadga::model::RelationMatrix random_relations(std::size_t L, std::mt19937_64& rng) {
    sadga::model::RelationMatrix rel(L);
    std::uniform_int_distribution<int> pick(0, sadga::graph::kNumRelationSlots - 1);
    for (auto& cell : rel.cells) cell = static_cast<sadga::graph::RelationType>(pick(rng));
    return rel;
}

}  // namespace oracle
