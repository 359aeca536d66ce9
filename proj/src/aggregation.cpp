#include "sadga/aggregation.hpp"

#include <sstream>

#include "sadga/errors.hpp"

namespace sadga::model {

using namespace sadga::ad;
using graph::RelationType;

namespace {

struct FlagEntry {
    const char* name;
    bool AblationFlags::*field;
};

constexpr FlagEntry kFlags[] = {
    {"no_local_linking", &AblationFlags::no_local_linking},
    {"no_aggregation", &AblationFlags::no_aggregation},
    {"no_aggr_to_schema", &AblationFlags::no_aggr_to_schema},
    {"no_aggr_to_question", &AblationFlags::no_aggr_to_question},
    {"no_global_pooling", &AblationFlags::no_global_pooling},
    {"fixed_gate_half", &AblationFlags::fixed_gate_half},
    {"no_relation_feature", &AblationFlags::no_relation_feature},
    {"no_relation_node", &AblationFlags::no_relation_node},
};

void check_d(const Tensor& states, const AggregationParams& p, const char* where) {
    if (states.shape().size() != 2 || states.cols() != p.W_q.rows() || states.rows() == 0) {
        throw ContractError(std::string(where) + ": states " + shape_str(states.shape()) +
                            " do not match d=" + std::to_string(p.W_q.rows()));
    }
}

void check_cross(const graph::CrossRelMatrix& cross, std::size_t m, std::size_t n, const char* where) {
    if (cross.rows != m || cross.cols != n) {
        throw ContractError(std::string(where) + ": cross relations " + std::to_string(cross.rows) + "x" +
                            std::to_string(cross.cols) + " for " + std::to_string(m) + "x" + std::to_string(n) +
                            " nodes");
    }
}

// s[i,j] = x_i · (k_j + R_ij) for x = query · W
Tensor relation_scores(const Tensor& xq, const Tensor& key, const graph::CrossRelMatrix& cross,
                       const AggregationParams& p, const AblationFlags& flags) {
    Tensor s = matmul_nt(xq, key);
    if (flags.no_relation_feature) return s;
    return add(s, gather_cols_per_row(matmul_nt(xq, p.R_E), cross.indices(), cross.cols));
}

}  // namespace

bool AblationFlags::any() const {
    for (const auto& f : kFlags)
        if (this->*f.field) return true;
    return false;
}

std::vector<std::string> ablation_flag_names() {
    std::vector<std::string> out;
    for (const auto& f : kFlags) out.emplace_back(f.name);
    return out;
}

AblationFlags parse_ablation_flags(const std::string& text) {
    AblationFlags flags;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.pop_back();
        while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front()))) item.erase(item.begin());
        if (item.empty() || item == "none") continue;
        bool found = false;
        for (const auto& f : kFlags) {
            if (item == f.name) {
                flags.*f.field = true;
                found = true;
            }
        }
        if (!found) throw ArgumentError("unknown ablation flag '" + item + "'");
    }
    return flags;
}

std::string format_ablation_flags(const AblationFlags& flags) {
    std::string out;
    for (const auto& f : kFlags) {
        if (!(flags.*f.field)) continue;
        if (!out.empty()) out += ",";
        out += f.name;
    }
    return out.empty() ? "none" : out;
}

AggregationParams make_aggregation_params(ParameterStore& store, const std::string& prefix, std::size_t d) {
    AggregationParams p;
    p.W_g = store.create(prefix + "W_g", {d, d}, InitScheme::GlorotUniform);
    p.W_qg = store.create(prefix + "W_qg", {d, d}, InitScheme::GlorotUniform);
    p.W_kg = store.create(prefix + "W_kg", {d, d}, InitScheme::GlorotUniform);
    p.W_q = store.create(prefix + "W_q", {d, d}, InitScheme::GlorotUniform);
    p.W_nq = store.create(prefix + "W_nq", {d, d}, InitScheme::GlorotUniform);
    p.W_ng = store.create(prefix + "W_ng", {2 * d, d}, InitScheme::GlorotUniform);
    p.W_gate = store.create(prefix + "W_gate", {2 * d, d}, InitScheme::GlorotUniform);
    p.R_E = store.create(prefix + "R_E", {graph::kNumRelationSlots, d}, InitScheme::EmbeddingNormal);
    return p;
}

Tensor global_pool_update(const Tensor& query, const Tensor& key, const AggregationParams& p) {
    check_d(query, p, "global_pool_update");
    check_d(key, p, "global_pool_update");
    Tensor glob = mean_rows(query);                          // 1 × d
    Tensor e = sigmoid(matmul_nt(key, matmul(glob, p.W_g)));  // n × 1
    Tensor from_query = tile_rows(matmul(glob, p.W_qg), key.rows());
    return add(mul_col(from_query, one_minus(e)), mul_col(matmul(key, p.W_kg), e));
}

Tensor cross_relation_features(const graph::CrossRelMatrix& cross, const AggregationParams& p,
                               const AblationFlags& flags) {
    if (flags.no_relation_feature) return Tensor::zeros({cross.rows * cross.cols, p.R_E.cols()});
    return gather_rows(p.R_E, cross.indices());
}

Tensor global_linking(const Tensor& query, const Tensor& key, const graph::CrossRelMatrix& cross,
                      const AggregationParams& p, const AblationFlags& flags) {
    check_d(query, p, "global_linking");
    check_d(key, p, "global_linking");
    check_cross(cross, query.rows(), key.rows(), "global_linking");
    return softmax_rows(tanh(relation_scores(matmul(query, p.W_q), key, cross, p, flags)));
}

Tensor local_linking(const Tensor& query, const Tensor& key,
                     const std::vector<std::vector<std::size_t>>& key_adjacency,
                     const graph::CrossRelMatrix& cross, const AggregationParams& p,
                     const AblationFlags& flags) {
    check_d(query, p, "local_linking");
    check_d(key, p, "local_linking");
    const std::size_t m = query.rows(), n = key.rows();
    check_cross(cross, m, n, "local_linking");
    if (key_adjacency.size() != n) throw ContractError("local_linking: adjacency does not cover the key graph");
    // o[i,t] does not depend on j; the neighborhood mask selects t per (i, j)
    Tensor o = tanh(relation_scores(matmul(query, p.W_nq), key, cross, p, flags));
    std::vector<std::uint8_t> mask(m * n * n, 0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t t : key_adjacency[j]) {
                if (t >= n || t == j) throw ContractError("local_linking: bad neighbor index");
                mask[(i * n + j) * n + t] = 1;
            }
    return softmax_rows(repeat_rows(o, n), mask, true);
}

Tensor neighbor_aggregate(const Tensor& key, const Tensor& beta, std::size_t m, const AggregationParams& p,
                          const AblationFlags& flags, Tensor* gate_out) {
    Tensor self = tile_rows(key, m);
    if (flags.no_local_linking) return self;
    if (beta.rows() != m * key.rows() || beta.cols() != key.rows()) {
        throw ContractError("neighbor_aggregate: beta " + shape_str(beta.shape()) + " for m=" +
                            std::to_string(m) + ", n=" + std::to_string(key.rows()));
    }
    Tensor neigh = matmul(beta, key);
    Tensor gate = flags.fixed_gate_half ? Tensor::full(self.shape(), 0.5)
                                        : sigmoid(matmul(concat_cols({self, neigh}), p.W_ng));
    if (gate_out != nullptr) *gate_out = gate;
    return add(mul(one_minus(gate), self), mul(gate, neigh));
}

Tensor query_update(const Tensor& query, const Tensor& hk, const Tensor& alpha,
                    const graph::CrossRelMatrix& cross, const AggregationParams& p, const AblationFlags& flags,
                    const TrainContext& ctx, double dropout, Tensor* gate_out) {
    check_d(query, p, "query_update");
    check_cross(cross, alpha.rows(), alpha.cols(), "query_update");
    Tensor values = flags.no_relation_feature ? hk : add(hk, cross_relation_features(cross, p, flags));
    Tensor h_new = ctx.drop(block_weighted_sum(alpha, values), dropout);
    Tensor gate = sigmoid(matmul(concat_cols({query, h_new}), p.W_gate));
    if (gate_out != nullptr) *gate_out = gate;
    return add(mul(one_minus(gate), query), mul(gate, h_new));
}

Tensor graph_aggr(const Tensor& query, const Tensor& key,
                  const std::vector<std::vector<std::size_t>>& key_adjacency,
                  const graph::CrossRelMatrix& cross, const AggregationParams& p, const AblationFlags& flags,
                  const TrainContext& ctx, double dropout, AggregationTrace* trace) {
    if (flags.no_aggregation) return query;
    Tensor k = flags.no_global_pooling ? key : global_pool_update(query, key, p);
    Tensor alpha = global_linking(query, k, cross, p, flags);
    Tensor beta;
    if (!flags.no_local_linking) beta = local_linking(query, k, key_adjacency, cross, p, flags);
    Tensor neighbor_gate, update_gate;
    Tensor hk = neighbor_aggregate(k, beta, query.rows(), p, flags, &neighbor_gate);
    Tensor out = query_update(query, hk, alpha, cross, p, flags, ctx, dropout, &update_gate);
    if (trace != nullptr) *trace = {alpha, beta, neighbor_gate, update_gate};
    return out;
}

DualGraph build_dual_graph(const std::vector<graph::Token>& tokens,
                           const std::vector<std::pair<std::size_t, std::size_t>>& dep_edges,
                           const graph::SchemaDef& schema) {
    DualGraph g;
    g.question = graph::build_question_graph(tokens, dep_edges);
    g.schema = graph::build_schema_graph(schema);
    g.question_levi = graph::levi_transform(g.question);
    g.schema_levi = graph::levi_transform(g.schema);
    g.cross = graph::link_cross_graph(tokens, schema);
    g.cross_t = g.cross.transposed();
    return g;
}

SadgaLayerParams make_sadga_layer_params(ParameterStore& store, const std::string& prefix, std::size_t d,
                                         std::size_t ggnn_layers, const AblationFlags& flags) {
    SadgaLayerParams p;
    const bool levi = !flags.no_relation_node;
    p.question_ggnn = make_ggnn_params(store, prefix + "question_ggnn.", d, ggnn_layers, levi);
    p.schema_ggnn = make_ggnn_params(store, prefix + "schema_ggnn.", d, ggnn_layers, levi);
    if (!levi) {
        const RelationType q_rels[] = {RelationType::Dist1, RelationType::Dist2, RelationType::DepParse};
        const RelationType s_rels[] = {RelationType::SameTable,        RelationType::ColColPKFK,
                                       RelationType::ForeignKeyColTab, RelationType::PrimaryKeyColTab,
                                       RelationType::TableColumnMatch, RelationType::TabTabPKFK};
        p.question_edges = make_relation_edge_params(store, prefix + "question_ggnn.", d, q_rels);
        p.schema_edges = make_relation_edge_params(store, prefix + "schema_ggnn.", d, s_rels);
    }
    if (!flags.no_aggregation) {
        if (!flags.no_aggr_to_question) p.to_question = make_aggregation_params(store, prefix + "to_question.", d);
        if (!flags.no_aggr_to_schema) p.to_schema = make_aggregation_params(store, prefix + "to_schema.", d);
    }
    return p;
}

SadgaOutput sadga_stack(const DualGraph& graphs, const Tensor& question, const Tensor& schema,
                        const EmbeddingTables& tables, const std::vector<SadgaLayerParams>& layers,
                        const AblationFlags& flags, const TrainContext& ctx, double dropout, SadgaTrace* trace) {
    SadgaOutput out{question, schema};
    for (const auto& layer : layers) {
        Tensor q, s;
        if (flags.no_relation_node) {
            q = ggnn_encode_edge_types(graphs.question, out.question, layer.question_ggnn, layer.question_edges);
            s = ggnn_encode_edge_types(graphs.schema, out.schema, layer.schema_ggnn, layer.schema_edges);
        } else {
            q = ggnn_encode(graphs.question_levi, init_levi_states(out.question, graphs.question_levi, tables),
                            layer.question_ggnn);
            s = ggnn_encode(graphs.schema_levi, init_levi_states(out.schema, graphs.schema_levi, tables),
                            layer.schema_ggnn);
        }
        AggregationTrace tq, ts;
        out.question = q;
        out.schema = s;
        if (!flags.no_aggregation && !flags.no_aggr_to_question) {
            out.question = graph_aggr(q, s, graphs.schema_levi.base_adjacency, graphs.cross, layer.to_question,
                                      flags, ctx, dropout, &tq);
        }
        if (!flags.no_aggregation && !flags.no_aggr_to_schema) {
            out.schema = graph_aggr(s, q, graphs.question_levi.base_adjacency, graphs.cross_t, layer.to_schema,
                                    flags, ctx, dropout, &ts);
        }
        if (trace != nullptr) {
            trace->to_question.push_back(tq);
            trace->to_schema.push_back(ts);
        }
    }
    return out;
}

}  // namespace sadga::model
