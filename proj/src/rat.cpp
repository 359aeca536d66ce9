#include "sadga/rat.hpp"

#include <cmath>

#include "sadga/errors.hpp"

namespace sadga::model {

using namespace sadga::ad;
using graph::RelationType;

std::vector<std::size_t> RelationMatrix::indices() const {
    std::vector<std::size_t> out;
    out.reserve(cells.size());
    for (auto r : cells) out.push_back(graph::relation_index(r));
    return out;
}

namespace {

int rank(RelationType r) {
    switch (r) {
        case RelationType::DepParse:
        case RelationType::PrimaryKeyColTab:
        case RelationType::ColColPKFK:
            return 3;
        case RelationType::ForeignKeyColTab:
            return 2;
        case RelationType::NoMatch:
            return 0;
        default:
            return 1;
    }
}

void put(RelationMatrix& m, std::size_t i, std::size_t j, RelationType r) {
    if (rank(r) > rank(m.at(i, j))) {
        m.at(i, j) = r;
        m.at(j, i) = r;
    }
}

}  // namespace

RelationMatrix build_relation_matrix(const graph::RelGraph& question, const graph::RelGraph& schema,
                                     const graph::CrossRelMatrix& cross) {
    const std::size_t m = question.node_count, n = schema.node_count;
    if (cross.rows != m || cross.cols != n) {
        throw ContractError("build_relation_matrix: cross relations " + std::to_string(cross.rows) + "x" +
                            std::to_string(cross.cols) + " for " + std::to_string(m) + " words and " +
                            std::to_string(n) + " schema nodes");
    }
    RelationMatrix out(m + n);
    for (const auto& e : question.edges) put(out, e.i, e.j, e.rel);
    for (const auto& e : schema.edges) put(out, m + e.i, m + e.j, e.rel);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (cross.at(i, j) == RelationType::NoMatch) continue;
            out.at(i, m + j) = cross.at(i, j);
            out.at(m + j, i) = cross.at(i, j);
        }
    return out;
}

RatLayerParams make_rat_layer_params(ParameterStore& store, const std::string& prefix, std::size_t d,
                                     std::size_t heads, std::size_t d_ff) {
    if (heads == 0 || d % heads != 0) {
        throw ContractError("rat: d=" + std::to_string(d) + " is not divisible by " + std::to_string(heads) + " heads");
    }
    const std::size_t dk = d / heads;
    RatLayerParams p;
    p.heads = heads;
    p.W_Q = store.create(prefix + "W_Q", {d, d}, InitScheme::GlorotUniform);
    p.W_K = store.create(prefix + "W_K", {d, d}, InitScheme::GlorotUniform);
    p.W_V = store.create(prefix + "W_V", {d, d}, InitScheme::GlorotUniform);
    p.r_K = store.create(prefix + "r_K", {graph::kNumRelationSlots, dk}, InitScheme::EmbeddingNormal);
    p.r_V = store.create(prefix + "r_V", {graph::kNumRelationSlots, dk}, InitScheme::EmbeddingNormal);
    auto ones = [&](const std::string& name) {
        Tensor t = store.create(prefix + name, {d}, InitScheme::Zeros);
        for (auto& v : t.mutable_values()) v = 1.0;
        return t;
    };
    p.ln1_gain = ones("ln1.gain");
    p.ln1_bias = store.create(prefix + "ln1.bias", {d}, InitScheme::Zeros);
    p.ln2_gain = ones("ln2.gain");
    p.ln2_bias = store.create(prefix + "ln2.bias", {d}, InitScheme::Zeros);
    p.ff1_W = store.create(prefix + "ff1.W", {d, d_ff}, InitScheme::GlorotUniform);
    p.ff1_b = store.create(prefix + "ff1.b", {d_ff}, InitScheme::Zeros);
    p.ff2_W = store.create(prefix + "ff2.W", {d_ff, d}, InitScheme::GlorotUniform);
    p.ff2_b = store.create(prefix + "ff2.b", {d}, InitScheme::Zeros);
    return p;
}

Tensor affine_layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    return add_row(mul_row(layer_norm_rows(x), gain), bias);
}

Tensor rat_layer(const Tensor& x, const RelationMatrix& rel, const RatLayerParams& p, const TrainContext& ctx,
                 double dropout, RatTrace* trace) {
    const std::size_t len = x.rows(), d = p.W_Q.rows(), dk = d / p.heads;
    if (x.shape().size() != 2 || x.cols() != d || rel.size != len) {
        throw ContractError("rat_layer: input " + shape_str(x.shape()) + " with relation grid " +
                            std::to_string(rel.size) + " and d=" + std::to_string(d));
    }
    const auto idx = rel.indices();
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dk));
    std::vector<Tensor> heads;
    for (std::size_t h = 0; h < p.heads; ++h) {
        Tensor q = matmul(x, slice_cols(p.W_Q, h * dk, dk));
        Tensor k = matmul(x, slice_cols(p.W_K, h * dk, dk));
        Tensor v = matmul(x, slice_cols(p.W_V, h * dk, dk));
        Tensor e = add(matmul_nt(q, k), gather_cols_per_row(matmul_nt(q, p.r_K), idx, len));
        Tensor alpha = softmax_rows(scale(e, inv_scale));
        if (trace != nullptr) trace->attention.push_back(alpha);
        alpha = ctx.drop(alpha, dropout);
        heads.push_back(add(matmul(alpha, v), matmul(scatter_cols_per_row(alpha, idx, graph::kNumRelationSlots), p.r_V)));
    }
    Tensor z = heads.size() == 1 ? heads[0] : concat_cols(heads);
    Tensor y1 = affine_layer_norm(add(x, z), p.ln1_gain, p.ln1_bias);
    Tensor ff = add_row(matmul(relu(add_row(matmul(y1, p.ff1_W), p.ff1_b)), p.ff2_W), p.ff2_b);
    return affine_layer_norm(add(y1, ctx.drop(ff, dropout)), p.ln2_gain, p.ln2_bias);
}

}  // namespace sadga::model
