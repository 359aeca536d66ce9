#pragma once

#include <string>
#include <vector>

#include "sadga/encoder.hpp"
#include "sadga/graph.hpp"

namespace sadga::model {

struct AblationFlags {
    bool no_local_linking = false;
    bool no_aggregation = false;
    bool no_aggr_to_schema = false;
    bool no_aggr_to_question = false;
    bool no_global_pooling = false;
    bool fixed_gate_half = false;
    bool no_relation_feature = false;
    // Encoder ablation: per-relation edge types instead of relation nodes.
    bool no_relation_node = false;

    bool any() const;
};

std::vector<std::string> ablation_flag_names();
// Comma-separated flag names; unknown names raise ArgumentError.
AblationFlags parse_ablation_flags(const std::string& text);
std::string format_ablation_flags(const AblationFlags& flags);

// One aggregation direction: the query graph receives from the key graph.
// Row-vector convention throughout, states are (nodes × d).
struct AggregationParams {
    Tensor W_g, W_qg, W_kg;  // global pooling
    Tensor W_q;              // global linking
    Tensor W_nq;             // local linking
    Tensor W_ng;             // 2d × d neighbor gate
    Tensor W_gate;           // 2d × d query gate
    Tensor R_E;              // 15 × d cross-relation features, NoMatch included
};

AggregationParams make_aggregation_params(ParameterStore& store, const std::string& prefix, std::size_t d);

// Key states after mixing in the pooled query graph (n × d).
Tensor global_pool_update(const Tensor& query, const Tensor& key, const AggregationParams& p);

// Row-major (m·n) × d lookup of R_E for every (query, key) pair; zeros when
// relation features are disabled.
Tensor cross_relation_features(const graph::CrossRelMatrix& cross, const AggregationParams& p,
                               const AblationFlags& flags);

// α (m × n), softmax over key nodes of tanh(h_i W_q (h_j + R_ij)ᵀ).
Tensor global_linking(const Tensor& query, const Tensor& key, const graph::CrossRelMatrix& cross,
                      const AggregationParams& p, const AblationFlags& flags);

// β as an (m·n) × n matrix: row i·n + j is the distribution over the neighbors
// of key node j as seen from query node i, zero outside the neighborhood and
// all zero for isolated key nodes.
Tensor local_linking(const Tensor& query, const Tensor& key,
                     const std::vector<std::vector<std::size_t>>& key_adjacency,
                     const graph::CrossRelMatrix& cross, const AggregationParams& p,
                     const AblationFlags& flags);

// H^k as (m·n) × d, row i·n + j. With no_local_linking every row i·n + j is h_j.
Tensor neighbor_aggregate(const Tensor& key, const Tensor& beta, std::size_t m, const AggregationParams& p,
                          const AblationFlags& flags, Tensor* gate_out = nullptr);

// Gated query update; h_new goes through dropout when training.
Tensor query_update(const Tensor& query, const Tensor& hk, const Tensor& alpha,
                    const graph::CrossRelMatrix& cross, const AggregationParams& p, const AblationFlags& flags,
                    const TrainContext& ctx = {}, double dropout = 0.0, Tensor* gate_out = nullptr);

struct AggregationTrace {
    Tensor alpha;          // m × n
    Tensor beta;           // (m·n) × n, undefined with no_local_linking
    Tensor neighbor_gate;  // (m·n) × d, undefined with no_local_linking
    Tensor update_gate;    // m × d
};

Tensor graph_aggr(const Tensor& query, const Tensor& key,
                  const std::vector<std::vector<std::size_t>>& key_adjacency,
                  const graph::CrossRelMatrix& cross, const AggregationParams& p, const AblationFlags& flags,
                  const TrainContext& ctx = {}, double dropout = 0.0, AggregationTrace* trace = nullptr);

// Question and schema graphs of one example together with their cross links.
struct DualGraph {
    graph::RelGraph question;
    graph::RelGraph schema;
    graph::LeviGraph question_levi;
    graph::LeviGraph schema_levi;
    graph::CrossRelMatrix cross;    // words × schema nodes
    graph::CrossRelMatrix cross_t;  // schema nodes × words
};

DualGraph build_dual_graph(const std::vector<graph::Token>& tokens,
                           const std::vector<std::pair<std::size_t, std::size_t>>& dep_edges,
                           const graph::SchemaDef& schema);

struct SadgaLayerParams {
    GgnnParams question_ggnn;
    GgnnParams schema_ggnn;
    RelationEdgeParams question_edges;  // only with no_relation_node
    RelationEdgeParams schema_edges;
    AggregationParams to_question;  // question graph queries the schema graph
    AggregationParams to_schema;
};

SadgaLayerParams make_sadga_layer_params(ParameterStore& store, const std::string& prefix, std::size_t d,
                                         std::size_t ggnn_layers, const AblationFlags& flags);

struct SadgaTrace {
    std::vector<AggregationTrace> to_question;
    std::vector<AggregationTrace> to_schema;
};

struct SadgaOutput {
    Tensor question;
    Tensor schema;
};

// Per layer: GGNN re-encodes both graphs, then both aggregation directions
// read the encoded states of that layer.
SadgaOutput sadga_stack(const DualGraph& graphs, const Tensor& question, const Tensor& schema,
                        const EmbeddingTables& tables, const std::vector<SadgaLayerParams>& layers,
                        const AblationFlags& flags, const TrainContext& ctx = {}, double dropout = 0.0,
                        SadgaTrace* trace = nullptr);

}  // namespace sadga::model
