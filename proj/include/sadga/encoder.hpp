#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sadga/graph.hpp"
#include "sadga/ops.hpp"
#include "sadga/parameters.hpp"

namespace sadga::model {

using ad::ParameterStore;
using ad::Tensor;

// Dropout switch threaded through forward passes. Without an rng or with
// train == false every dropout is the identity.
struct TrainContext {
    std::mt19937_64* rng = nullptr;
    bool train = false;

    Tensor drop(const Tensor& x, double p) const {
        if (!train || rng == nullptr) return x;
        return ad::dropout(x, p, *rng, true);
    }
};

class Vocabulary {
   public:
    static constexpr std::size_t kUnk = 0;

    Vocabulary();
    std::size_t add(const std::string& word);
    // Unknown words map to kUnk.
    std::size_t lookup(const std::string& word) const;
    std::size_t size() const { return words_.size(); }
    const std::vector<std::string>& words() const { return words_; }

   private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class NodeKind : std::size_t { Word = 0, Table = 1, Column = 2 };

struct EmbeddingTables {
    Tensor word;         // vocab × d_emb
    Tensor relation;     // 15 × d_emb, one row per RelationType incl. NoMatch
    Tensor kind;         // 3 × d_emb
    Tensor column_type;  // 5 × d_emb
    Tensor projection;   // d_emb × d
};

EmbeddingTables make_embedding_tables(ParameterStore& store, const std::string& prefix,
                                      std::size_t vocab_size, std::size_t d_emb, std::size_t d);

// Word rows look up the surface form, falling back to the lemma.
Tensor init_question_states(const std::vector<graph::Token>& tokens, const Vocabulary& vocab,
                            const EmbeddingTables& tables);
// Tables first, then columns; each node is the mean of its name-token
// embeddings plus the kind (and column type) embedding, projected to d.
Tensor init_schema_states(const graph::SchemaDef& schema, const Vocabulary& vocab,
                          const EmbeddingTables& tables);
Tensor init_relation_states(std::span<const graph::RelationType> relations,
                            const EmbeddingTables& tables);
// Base rows followed by one row per relation node.
Tensor init_levi_states(const Tensor& base_states, const graph::LeviGraph& levi,
                        const EmbeddingTables& tables);

struct GgnnParams {
    // Indexed by graph::EdgeType. Forward/Backward stay undefined in the
    // edge-type ablation, where per-relation sets take their place.
    std::array<Tensor, graph::kNumEdgeTypes> W;
    std::array<Tensor, graph::kNumEdgeTypes> b;
    Tensor W_z, U_z, b_z;
    Tensor W_r, U_r, b_r;
    Tensor W_n, U_n, b_n, b_hn;
    std::size_t layers = 2;
};

GgnnParams make_ggnn_params(ParameterStore& store, const std::string& prefix, std::size_t d,
                            std::size_t layers, bool levi_edges = true);

// Per-relation Forward/Backward weights for the "edge types instead of relation
// nodes" ablation. Entries for relations not requested stay undefined.
struct RelationEdgeParams {
    std::array<Tensor, graph::kNumRelations> forward_W, forward_b, backward_W, backward_b;
};

RelationEdgeParams make_relation_edge_params(ParameterStore& store, const std::string& prefix,
                                             std::size_t d,
                                             std::span<const graph::RelationType> relations);

struct GruGates {
    Tensor z, r;
};

// h' = (1 - z) ⊙ n + z ⊙ h
Tensor gru_cell(const Tensor& h, const Tensor& f, const GgnnParams& params, GruGates* gates = nullptr);

// One propagation over the relation-node graph; states cover every Levi node.
Tensor ggnn_step(const graph::LeviGraph& levi, const Tensor& states, const GgnnParams& params);
// params.layers steps; returns base rows only.
Tensor ggnn_encode(const graph::LeviGraph& levi, const Tensor& init, const GgnnParams& params);

// Ablation: message passing directly on the relation graph, low→high edges use
// the relation's Forward set, high→low its Backward set, plus the shared self loop.
Tensor ggnn_step_edge_types(const graph::RelGraph& graph, const Tensor& states,
                            const GgnnParams& shared, const RelationEdgeParams& rel);
Tensor ggnn_encode_edge_types(const graph::RelGraph& graph, const Tensor& init,
                              const GgnnParams& shared, const RelationEdgeParams& rel);

}  // namespace sadga::model
