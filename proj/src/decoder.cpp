#include "sadga/decoder.hpp"

#include <cmath>
#include <limits>

#include "sadga/errors.hpp"
#include "sadga/ops.hpp"

namespace sadga::model {

using namespace ad;
using grammar::Action;
using grammar::ActionKind;
using grammar::TerminalKind;

namespace {

AlignmentParams make_alignment(ParameterStore& store, const std::string& prefix, std::size_t d) {
    return {store.create(prefix + "W_Q", {d, d}, InitScheme::GlorotUniform),
            store.create(prefix + "W_K", {d, d}, InitScheme::GlorotUniform),
            store.create(prefix + "R_E", {graph::kNumRelationSlots, d}, InitScheme::EmbeddingNormal)};
}

// softmax_j { h_i W_Q (e_j W_K + R^E_ij)ᵀ } over the entity block starting at row `offset`.
Tensor align(const Tensor& h, std::size_t offset, std::size_t count, const RelationMatrix& rel,
             const AlignmentParams& p) {
    const std::size_t L = h.rows();
    Tensor q = matmul(h, p.W_Q);
    Tensor k = matmul(slice_rows(h, offset, count), p.W_K);
    Index idx(L * count);
    for (std::size_t i = 0; i < L; ++i)
        for (std::size_t j = 0; j < count; ++j) idx[i * count + j] = static_cast<std::size_t>(rel.at(i, offset + j));
    Tensor logits = add(matmul_nt(q, k), gather_cols_per_row(matmul_nt(q, p.R_E), idx, count));
    return softmax_rows(logits);
}

}  // namespace

DecoderParams make_decoder_params(ParameterStore& store, const std::string& prefix, const grammar::Grammar& g,
                                  const DecoderConfig& c) {
    DecoderParams p;
    p.config = c;
    const std::size_t input = 2 * c.rule_dim + c.d + c.type_dim + c.hidden;
    p.rule_embedding = store.create(prefix + "rule_embedding", {g.productions.size(), c.rule_dim},
                                    InitScheme::EmbeddingNormal);
    p.type_embedding = store.create(prefix + "type_embedding", {g.types.size(), c.type_dim},
                                    InitScheme::EmbeddingNormal);
    p.pointer_projection = store.create(prefix + "pointer_projection", {c.d, c.rule_dim}, InitScheme::GlorotUniform);
    p.start_rule = store.create(prefix + "start_rule", {1, c.rule_dim}, InitScheme::EmbeddingNormal);
    p.start_hidden = store.create(prefix + "start_hidden", {1, c.hidden}, InitScheme::EmbeddingNormal);
    p.lstm_W_x = store.create(prefix + "lstm.W_x", {input, 4 * c.hidden}, InitScheme::GlorotUniform);
    p.lstm_W_h = store.create(prefix + "lstm.W_h", {c.hidden, 4 * c.hidden}, InitScheme::GlorotUniform);
    p.lstm_b = store.create(prefix + "lstm.b", {4 * c.hidden}, InitScheme::Zeros);
    p.attention_W = store.create(prefix + "attention.W", {c.hidden, c.d}, InitScheme::GlorotUniform);
    p.mlp_W1 = store.create(prefix + "rule_mlp.W1", {c.hidden, c.mlp_hidden}, InitScheme::GlorotUniform);
    p.mlp_b1 = store.create(prefix + "rule_mlp.b1", {c.mlp_hidden}, InitScheme::Zeros);
    p.mlp_W2 = store.create(prefix + "rule_mlp.W2", {c.mlp_hidden, g.productions.size()}, InitScheme::GlorotUniform);
    p.mlp_b2 = store.create(prefix + "rule_mlp.b2", {g.productions.size()}, InitScheme::Zeros);
    p.pointer_W_Q = store.create(prefix + "pointer.W_Q", {c.hidden, c.d}, InitScheme::GlorotUniform);
    p.pointer_W_K = store.create(prefix + "pointer.W_K", {c.d, c.d}, InitScheme::GlorotUniform);
    p.tables = make_alignment(store, prefix + "align_table.", c.d);
    p.columns = make_alignment(store, prefix + "align_column.", c.d);
    return p;
}

AlignmentMatrices pointer_alignments(const Tensor& states, std::size_t words, std::size_t tables,
                                     std::size_t columns, const RelationMatrix& rel, const DecoderParams& p) {
    const std::size_t L = words + tables + columns;
    if (states.rows() != L || rel.size != L) {
        throw ContractError("pointer_alignments: " + std::to_string(states.rows()) + " states and relation size " +
                            std::to_string(rel.size) + " for " + std::to_string(L) + " entities");
    }
    if (tables == 0 || columns == 0) throw ContractError("pointer_alignments: schema needs a table and a column");
    return {align(states, words, tables, rel, p.tables), align(states, words + tables, columns, rel, p.columns)};
}

DecoderMemory prepare_memory(const Tensor& states, std::size_t words, std::size_t tables, std::size_t columns,
                             const RelationMatrix& rel, const DecoderParams& p) {
    DecoderMemory m;
    m.states = states;
    m.words = words;
    m.tables = tables;
    m.columns = columns;
    m.align = pointer_alignments(states, words, tables, columns, rel, p);
    m.pointer_keys = matmul(states, p.pointer_W_K);
    return m;
}

DecoderState start_decoding(const grammar::Grammar& g, const DecoderMemory& memory, const DecoderParams& p) {
    DecoderState s{grammar::Derivation(g, memory.tables, memory.columns),
                   Tensor::zeros({1, p.config.hidden}),
                   Tensor::zeros({1, p.config.hidden}),
                   p.start_rule,
                   {},
                   {},
                   {}};
    return s;
}

std::optional<StepOutput> decode_step(const DecoderState& state, const DecoderMemory& memory,
                                      const grammar::Grammar& g, const DecoderParams& p, const TrainContext& ctx) {
    const auto& d = state.derivation;
    if (d.done()) return std::nullopt;
    const auto& top = d.top();
    const std::size_t H = p.config.hidden;

    StepOutput out;
    out.kind = g.types[top.type].terminal;
    out.legal = d.legal_ids();

    // z_t: attention keyed by the previous hidden state
    out.context_weights = softmax_rows(matmul_nt(matmul(state.H, p.attention_W), memory.states));
    Tensor z = matmul(out.context_weights, memory.states);
    Tensor e = gather_rows(p.type_embedding, {top.type});
    Tensor parent_rule = p.start_rule, parent_hidden = p.start_hidden;
    if (d.step() > 0) {
        parent_rule = state.step_rule.at(top.parent_step);
        parent_hidden = state.step_hidden.at(top.parent_step);
    }
    Tensor input = ctx.drop(concat_cols({state.prev_rule, z, e, parent_rule, parent_hidden}), p.config.dropout);

    Tensor gates = add_row(add(matmul(input, p.lstm_W_x), matmul(state.H, p.lstm_W_h)), p.lstm_b);
    Tensor i = sigmoid(slice_cols(gates, 0, H));
    Tensor f = sigmoid(slice_cols(gates, H, H));
    Tensor cand = tanh(slice_cols(gates, 2 * H, H));
    Tensor o = sigmoid(slice_cols(gates, 3 * H, H));
    out.C = add(mul(f, state.C), mul(i, cand));
    out.H = mul(o, tanh(out.C));

    if (out.kind == TerminalKind::None) {
        Tensor logits = add_row(matmul(tanh(add_row(matmul(out.H, p.mlp_W1), p.mlp_b1)), p.mlp_W2), p.mlp_b2);
        std::vector<std::uint8_t> mask(g.productions.size(), 0);
        for (auto id : out.legal) mask[id] = 1;
        out.log_probs = log_softmax_rows(logits, mask);
    } else {
        out.pointer_weights = softmax_rows(matmul_nt(matmul(out.H, p.pointer_W_Q), memory.pointer_keys));
        const Tensor& m = out.kind == TerminalKind::Table ? memory.align.tables : memory.align.columns;
        out.log_probs = log(matmul(out.pointer_weights, m));
    }
    return out;
}

std::size_t segment_index(const Action& a) { return a.index; }

std::vector<double> action_distribution(const StepOutput& out, const grammar::Grammar& g, std::size_t tables,
                                        std::size_t columns) {
    std::vector<double> probs(g.productions.size() + tables + columns, 0.0);
    const auto lp = out.log_probs.values();
    for (auto id : out.legal) {
        const Action a = grammar::action_from_id(g, id, tables);
        probs[id] = std::exp(lp[segment_index(a)]);
    }
    return probs;
}

void advance(DecoderState& state, const StepOutput& out, const Action& a, const DecoderMemory& memory,
             const DecoderParams& p) {
    state.derivation.apply(a);
    Tensor r;
    switch (a.kind) {
        case ActionKind::ApplyRule:
            r = gather_rows(p.rule_embedding, {a.index});
            break;
        case ActionKind::SelectTable:
            r = matmul(slice_rows(memory.states, memory.words + a.index, 1), p.pointer_projection);
            break;
        case ActionKind::SelectColumn:
            r = matmul(slice_rows(memory.states, memory.words + memory.tables + a.index, 1), p.pointer_projection);
            break;
    }
    state.H = out.H;
    state.C = out.C;
    state.prev_rule = r;
    state.step_hidden.push_back(out.H);
    state.step_rule.push_back(r);
    state.actions.push_back(a);
}

Tensor teacher_forced_loss(const std::vector<Action>& gold, const DecoderMemory& memory, const grammar::Grammar& g,
                           const DecoderParams& p, const TrainContext& ctx) {
    DecoderState state = start_decoding(g, memory, p);
    Tensor total;
    for (const auto& a : gold) {
        auto out = decode_step(state, memory, g, p, ctx);
        if (!out) {
            throw DataError("step " + std::to_string(state.derivation.step()) +
                            ": gold sequence continues after the derivation is complete");
        }
        advance(state, *out, a, memory, p);
        if (out->legal.size() > 1) {
            Tensor term = pick(out->log_probs, segment_index(a));
            total = total.defined() ? add(total, term) : term;
        }
    }
    if (!state.derivation.done()) {
        throw DataError("gold sequence ends after " + std::to_string(gold.size()) + " steps with " +
                        std::to_string(state.derivation.frontier().size()) + " open nodes");
    }
    return total.defined() ? scale(total, -1.0) : Tensor::scalar(0.0);
}

DecodeResult greedy_decode(const DecoderMemory& memory, const grammar::Grammar& g, const DecoderParams& p,
                           std::size_t max_steps) {
    if (max_steps == 0) throw ContractError("greedy_decode: max_steps must be at least 1");
    NoGradGuard guard;
    DecodeResult result;
    DecoderState state = start_decoding(g, memory, p);
    while (state.actions.size() < max_steps) {
        auto out = decode_step(state, memory, g, p);
        if (!out) break;
        const auto lp = out->log_probs.values();
        std::size_t best = out->legal.front();
        double best_score = -std::numeric_limits<double>::infinity();
        for (auto id : out->legal) {
            const double s = lp[segment_index(grammar::action_from_id(g, id, memory.tables))];
            if (s > best_score) {
                best_score = s;
                best = id;
            }
        }
        advance(state, *out, grammar::action_from_id(g, best, memory.tables), memory, p);
    }
    result.actions = state.actions;
    result.complete = state.derivation.done();
    if (result.complete) {
        result.ast = grammar::actions_to_ast(g, result.actions, memory.tables, memory.columns);
    } else {
        result.frontier = state.derivation.frontier();
        result.report = "truncated after " + std::to_string(result.actions.size()) + " steps; open:";
        for (auto it = result.frontier.rbegin(); it != result.frontier.rend(); ++it) {
            result.report += " " + g.types[it->type].name;
        }
    }
    return result;
}

}  // namespace sadga::model
