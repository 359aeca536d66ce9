#include "sadga/encoder.hpp"

#include "sadga/errors.hpp"

namespace sadga::model {

using namespace sadga::ad;
using graph::EdgeType;
using graph::RelationType;

Vocabulary::Vocabulary() { add("<unk>"); }

std::size_t Vocabulary::add(const std::string& word) {
    auto it = index_.find(word);
    if (it != index_.end()) return it->second;
    const std::size_t id = words_.size();
    words_.push_back(word);
    index_.emplace(word, id);
    return id;
}

std::size_t Vocabulary::lookup(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnk : it->second;
}

EmbeddingTables make_embedding_tables(ParameterStore& store, const std::string& prefix,
                                      std::size_t vocab_size, std::size_t d_emb, std::size_t d) {
    EmbeddingTables t;
    t.word = store.create(prefix + "word", {vocab_size, d_emb}, InitScheme::EmbeddingNormal);
    t.relation = store.create(prefix + "relation", {graph::kNumRelationSlots, d_emb},
                              InitScheme::EmbeddingNormal);
    t.kind = store.create(prefix + "kind", {3, d_emb}, InitScheme::EmbeddingNormal);
    t.column_type =
        store.create(prefix + "column_type", {graph::kNumColumnTypes, d_emb}, InitScheme::EmbeddingNormal);
    t.projection = store.create(prefix + "projection", {d_emb, d}, InitScheme::GlorotUniform);
    return t;
}

namespace {

std::size_t word_id(const graph::Token& tok, const Vocabulary& vocab) {
    std::size_t id = vocab.lookup(tok.surface);
    if (id == Vocabulary::kUnk) id = vocab.lookup(tok.lemma);
    return id;
}

// Rows of `avg` (nodes × ids) hold 1/k weights over each node's name tokens.
Tensor name_means(const std::vector<std::vector<std::size_t>>& names, const EmbeddingTables& tables) {
    Index flat;
    for (const auto& ids : names) flat.insert(flat.end(), ids.begin(), ids.end());
    const std::size_t de = tables.word.cols();
    if (flat.empty()) return Tensor::zeros({names.size(), de});
    Tensor avg = Tensor::zeros({names.size(), flat.size()});
    std::size_t col = 0;
    for (std::size_t r = 0; r < names.size(); ++r) {
        for (std::size_t k = 0; k < names[r].size(); ++k) {
            avg.at(r, col++) = 1.0 / static_cast<double>(names[r].size());
        }
    }
    return matmul(avg, gather_rows(tables.word, flat));
}

}  // namespace

Tensor init_question_states(const std::vector<graph::Token>& tokens, const Vocabulary& vocab,
                            const EmbeddingTables& tables) {
    if (tokens.empty()) throw ContractError("init_question_states: no tokens");
    Index ids, kinds(tokens.size(), static_cast<std::size_t>(NodeKind::Word));
    for (const auto& tok : tokens) ids.push_back(word_id(tok, vocab));
    Tensor x = add(gather_rows(tables.word, ids), gather_rows(tables.kind, kinds));
    return matmul(x, tables.projection);
}

Tensor init_schema_states(const graph::SchemaDef& schema, const Vocabulary& vocab,
                          const EmbeddingTables& tables) {
    std::vector<std::vector<std::size_t>> names;
    Index kinds;
    auto ids_of = [&](const std::vector<std::string>& toks) {
        std::vector<std::size_t> ids;
        for (const auto& t : toks) ids.push_back(vocab.lookup(t));
        return ids;
    };
    for (const auto& t : schema.tables) {
        names.push_back(ids_of(t.name_tokens));
        kinds.push_back(static_cast<std::size_t>(NodeKind::Table));
    }
    for (const auto& c : schema.columns) {
        names.push_back(ids_of(c.name_tokens));
        kinds.push_back(static_cast<std::size_t>(NodeKind::Column));
    }
    if (names.empty()) throw ContractError("init_schema_states: empty schema");
    Tensor x = add(name_means(names, tables), gather_rows(tables.kind, kinds));
    if (!schema.columns.empty()) {
        Index types;
        for (const auto& c : schema.columns) types.push_back(static_cast<std::size_t>(c.type));
        Tensor type_rows = gather_rows(tables.column_type, types);
        if (!schema.tables.empty()) {
            type_rows = concat_rows({Tensor::zeros({schema.tables.size(), tables.column_type.cols()}), type_rows});
        }
        x = add(x, type_rows);
    }
    return matmul(x, tables.projection);
}

Tensor init_relation_states(std::span<const RelationType> relations, const EmbeddingTables& tables) {
    Index ids;
    for (auto r : relations) ids.push_back(graph::relation_index(r));
    return matmul(gather_rows(tables.relation, ids), tables.projection);
}

Tensor init_levi_states(const Tensor& base_states, const graph::LeviGraph& levi,
                        const EmbeddingTables& tables) {
    if (base_states.rows() != levi.base_node_count) {
        throw ContractError("init_levi_states: " + std::to_string(base_states.rows()) + " rows for " +
                            std::to_string(levi.base_node_count) + " base nodes");
    }
    if (levi.relation_nodes.empty()) return base_states;
    return concat_rows({base_states, init_relation_states(levi.relation_nodes, tables)});
}

GgnnParams make_ggnn_params(ParameterStore& store, const std::string& prefix, std::size_t d,
                            std::size_t layers, bool levi_edges) {
    GgnnParams p;
    const char* names[] = {"forward", "backward", "self"};
    for (std::size_t t = 0; t < graph::kNumEdgeTypes; ++t) {
        if (!levi_edges && t != static_cast<std::size_t>(EdgeType::SelfLoop)) continue;
        p.W[t] = store.create(prefix + "edge_" + names[t] + ".W", {d, d}, InitScheme::GlorotUniform);
        p.b[t] = store.create(prefix + "edge_" + names[t] + ".b", {d}, InitScheme::Zeros);
    }
    p.W_z = store.create(prefix + "gru.W_z", {d, d}, InitScheme::GlorotUniform);
    p.U_z = store.create(prefix + "gru.U_z", {d, d}, InitScheme::GlorotUniform);
    p.b_z = store.create(prefix + "gru.b_z", {d}, InitScheme::Zeros);
    p.W_r = store.create(prefix + "gru.W_r", {d, d}, InitScheme::GlorotUniform);
    p.U_r = store.create(prefix + "gru.U_r", {d, d}, InitScheme::GlorotUniform);
    p.b_r = store.create(prefix + "gru.b_r", {d}, InitScheme::Zeros);
    p.W_n = store.create(prefix + "gru.W_n", {d, d}, InitScheme::GlorotUniform);
    p.U_n = store.create(prefix + "gru.U_n", {d, d}, InitScheme::GlorotUniform);
    p.b_n = store.create(prefix + "gru.b_n", {d}, InitScheme::Zeros);
    p.b_hn = store.create(prefix + "gru.b_hn", {d}, InitScheme::Zeros);
    p.layers = layers;
    return p;
}

RelationEdgeParams make_relation_edge_params(ParameterStore& store, const std::string& prefix,
                                             std::size_t d, std::span<const RelationType> relations) {
    RelationEdgeParams p;
    for (auto rel : relations) {
        const std::size_t k = graph::relation_index(rel);
        if (k >= graph::kNumRelations) throw ContractError("make_relation_edge_params: NoMatch has no edges");
        const std::string base = prefix + "rel_" + graph::relation_name(rel);
        p.forward_W[k] = store.create(base + ".forward.W", {d, d}, InitScheme::GlorotUniform);
        p.forward_b[k] = store.create(base + ".forward.b", {d}, InitScheme::Zeros);
        p.backward_W[k] = store.create(base + ".backward.W", {d, d}, InitScheme::GlorotUniform);
        p.backward_b[k] = store.create(base + ".backward.b", {d}, InitScheme::Zeros);
    }
    return p;
}

Tensor gru_cell(const Tensor& h, const Tensor& f, const GgnnParams& p, GruGates* gates) {
    Tensor z = sigmoid(add_row(add(matmul(f, p.W_z), matmul(h, p.U_z)), p.b_z));
    Tensor r = sigmoid(add_row(add(matmul(f, p.W_r), matmul(h, p.U_r)), p.b_r));
    if (gates != nullptr) *gates = {z, r};
    Tensor n = tanh(add(add_row(matmul(f, p.W_n), p.b_n), mul(r, add_row(matmul(h, p.U_n), p.b_hn))));
    return add(mul(one_minus(z), n), mul(z, h));
}

namespace {

struct MessageGroup {
    Tensor W, b;
    Index src, dst;
};

Tensor aggregate_messages(const Tensor& h, const std::vector<MessageGroup>& groups) {
    Tensor f;
    for (const auto& g : groups) {
        if (g.src.empty()) continue;
        Tensor msg = scatter_add_rows(gather_rows(add_row(matmul(h, g.W), g.b), g.src), g.dst, h.rows());
        f = f.defined() ? add(f, msg) : msg;
    }
    return f.defined() ? f : Tensor::zeros({h.rows(), h.cols()});
}

void check_states(const Tensor& states, std::size_t nodes, const GgnnParams& p, const char* where) {
    if (states.shape().size() != 2 || states.rows() != nodes || states.cols() != p.W_z.rows()) {
        throw ContractError(std::string(where) + ": states " + shape_str(states.shape()) + " for " +
                            std::to_string(nodes) + " nodes, d=" + std::to_string(p.W_z.rows()));
    }
}

}  // namespace

Tensor ggnn_step(const graph::LeviGraph& levi, const Tensor& states, const GgnnParams& params) {
    check_states(states, levi.node_count(), params, "ggnn_step");
    std::vector<MessageGroup> groups(graph::kNumEdgeTypes);
    for (std::size_t t = 0; t < graph::kNumEdgeTypes; ++t) {
        if (!params.W[t].defined()) throw ContractError("ggnn_step: missing edge-type parameters");
        groups[t].W = params.W[t];
        groups[t].b = params.b[t];
    }
    for (const auto& e : levi.typed_edges) {
        auto& g = groups[static_cast<std::size_t>(e.type)];
        g.src.push_back(e.src);
        g.dst.push_back(e.dst);
    }
    return gru_cell(states, aggregate_messages(states, groups), params);
}

Tensor ggnn_encode(const graph::LeviGraph& levi, const Tensor& init, const GgnnParams& params) {
    check_states(init, levi.node_count(), params, "ggnn_encode");
    Tensor h = init;
    for (std::size_t l = 0; l < params.layers; ++l) h = ggnn_step(levi, h, params);
    return slice_rows(h, 0, levi.base_node_count);
}

Tensor ggnn_step_edge_types(const graph::RelGraph& graph, const Tensor& states, const GgnnParams& shared,
                            const RelationEdgeParams& rel) {
    check_states(states, graph.node_count, shared, "ggnn_step_edge_types");
    const std::size_t self = static_cast<std::size_t>(EdgeType::SelfLoop);
    // a forward and a backward group per relation in order of first use, self loop last
    std::vector<MessageGroup> groups;
    std::array<std::size_t, graph::kNumRelations> fwd_slot{}, bwd_slot{};
    std::array<bool, graph::kNumRelations> seen{};
    for (const auto& e : graph.edges) {
        const std::size_t k = graph::relation_index(e.rel);
        if (k >= graph::kNumRelations || !rel.forward_W[k].defined()) {
            throw ContractError(std::string("ggnn_step_edge_types: no parameters for relation ") +
                                graph::relation_name(e.rel));
        }
        if (!seen[k]) {
            seen[k] = true;
            fwd_slot[k] = groups.size();
            groups.push_back({rel.forward_W[k], rel.forward_b[k], {}, {}});
            bwd_slot[k] = groups.size();
            groups.push_back({rel.backward_W[k], rel.backward_b[k], {}, {}});
        }
        const std::size_t lo = std::min(e.i, e.j), hi = std::max(e.i, e.j);
        groups[fwd_slot[k]].src.push_back(lo);
        groups[fwd_slot[k]].dst.push_back(hi);
        groups[bwd_slot[k]].src.push_back(hi);
        groups[bwd_slot[k]].dst.push_back(lo);
    }
    MessageGroup loops{shared.W[self], shared.b[self], {}, {}};
    for (std::size_t v = 0; v < graph.node_count; ++v) {
        loops.src.push_back(v);
        loops.dst.push_back(v);
    }
    groups.push_back(std::move(loops));
    return gru_cell(states, aggregate_messages(states, groups), shared);
}

Tensor ggnn_encode_edge_types(const graph::RelGraph& graph, const Tensor& init, const GgnnParams& shared,
                              const RelationEdgeParams& rel) {
    Tensor h = init;
    for (std::size_t l = 0; l < shared.layers; ++l) h = ggnn_step_edge_types(graph, h, shared, rel);
    return h;
}

}  // namespace sadga::model
