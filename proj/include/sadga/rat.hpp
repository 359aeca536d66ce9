#pragma once

#include <string>
#include <vector>

#include "sadga/encoder.hpp"
#include "sadga/graph.hpp"

namespace sadga::model {

// Square relation grid over the joint sequence [words; tables; columns].
struct RelationMatrix {
    std::size_t size = 0;
    std::vector<graph::RelationType> cells;

    RelationMatrix() = default;
    explicit RelationMatrix(std::size_t n) : size(n), cells(n * n, graph::RelationType::NoMatch) {}
    graph::RelationType at(std::size_t i, std::size_t j) const { return cells[i * size + j]; }
    graph::RelationType& at(std::size_t i, std::size_t j) { return cells[i * size + j]; }
    std::vector<std::size_t> indices() const;
};

// When a pair carries several relations the more specific one wins:
// DepParse over distance, PrimaryKey over ForeignKey over TableColumnMatch,
// ColColPKFK over SameTable.
RelationMatrix build_relation_matrix(const graph::RelGraph& question, const graph::RelGraph& schema,
                                     const graph::CrossRelMatrix& cross);

struct RatLayerParams {
    Tensor W_Q, W_K, W_V;  // d × d, head h uses columns [h·dk, (h+1)·dk)
    Tensor r_K, r_V;       // 15 × dk, shared by all heads
    Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias;
    Tensor ff1_W, ff1_b, ff2_W, ff2_b;
    std::size_t heads = 8;
};

RatLayerParams make_rat_layer_params(ParameterStore& store, const std::string& prefix, std::size_t d,
                                     std::size_t heads, std::size_t d_ff);

struct RatTrace {
    std::vector<Tensor> attention;  // per head, L × L
};

// y~ = LN(x + z), y = LN(y~ + FF(y~)); dropout on attention weights and FF output.
Tensor rat_layer(const Tensor& x, const RelationMatrix& rel, const RatLayerParams& p, const TrainContext& ctx = {},
                 double dropout = 0.0, RatTrace* trace = nullptr);

// Affine layer norm used inside the transformer block.
Tensor affine_layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

}  // namespace sadga::model
