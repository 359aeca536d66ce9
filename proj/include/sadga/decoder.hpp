#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sadga/encoder.hpp"
#include "sadga/grammar.hpp"
#include "sadga/rat.hpp"

namespace sadga::model {

struct DecoderConfig {
    std::size_t d = 256;        // encoder width
    std::size_t hidden = 512;   // LSTM size
    std::size_t rule_dim = 128;
    std::size_t type_dim = 64;
    std::size_t mlp_hidden = 128;
    double dropout = 0.21;      // on the LSTM input
};

struct AlignmentParams {
    Tensor W_Q, W_K;  // d × d
    Tensor R_E;       // 15 × d
};

struct DecoderParams {
    DecoderConfig config;
    Tensor rule_embedding;      // productions × rule_dim
    Tensor type_embedding;      // node types × type_dim
    Tensor pointer_projection;  // d × rule_dim, embeds a chosen table/column
    Tensor start_rule;          // 1 × rule_dim
    Tensor start_hidden;        // 1 × hidden
    Tensor lstm_W_x, lstm_W_h, lstm_b;  // gates i, f, g, o side by side
    Tensor attention_W;                 // hidden × d
    Tensor mlp_W1, mlp_b1, mlp_W2, mlp_b2;
    Tensor pointer_W_Q;  // hidden × d
    Tensor pointer_W_K;  // d × d
    AlignmentParams tables, columns;
};

DecoderParams make_decoder_params(ParameterStore& store, const std::string& prefix, const grammar::Grammar& g,
                                  const DecoderConfig& config);

struct AlignmentMatrices {
    Tensor tables;   // L × |t|
    Tensor columns;  // L × |c|
};

// Encoder output rows are [words; tables; columns]; relation cells come from
// the same joint relation matrix the transformer uses.
AlignmentMatrices pointer_alignments(const Tensor& states, std::size_t words, std::size_t tables,
                                     std::size_t columns, const RelationMatrix& rel, const DecoderParams& p);

struct DecoderMemory {
    Tensor states;  // L × d
    std::size_t words = 0, tables = 0, columns = 0;
    AlignmentMatrices align;
    Tensor pointer_keys;  // states · pointer_W_K
};

DecoderMemory prepare_memory(const Tensor& states, std::size_t words, std::size_t tables, std::size_t columns,
                             const RelationMatrix& rel, const DecoderParams& p);

struct DecoderState {
    grammar::Derivation derivation;
    Tensor H, C;
    Tensor prev_rule;
    std::vector<Tensor> step_hidden;  // H_t after each completed step
    std::vector<Tensor> step_rule;    // embedding of the action taken at each step
    std::vector<grammar::Action> actions;
};

DecoderState start_decoding(const grammar::Grammar& g, const DecoderMemory& memory, const DecoderParams& p);

struct StepOutput {
    grammar::TerminalKind kind = grammar::TerminalKind::None;
    std::vector<std::size_t> legal;  // flat action ids, ascending
    // Rules: masked log-softmax over all productions (-inf when illegal).
    // Pointers: log probabilities over tables or columns.
    Tensor log_probs;
    Tensor H, C;
    Tensor context_weights;  // 1 × L attention behind z_t
    Tensor pointer_weights;  // 1 × L, pointer steps only
};

// Empty once the derivation is complete.
std::optional<StepOutput> decode_step(const DecoderState& state, const DecoderMemory& memory,
                                      const grammar::Grammar& g, const DecoderParams& p, const TrainContext& ctx = {});

// Probability of every flat action id; illegal ids get exactly 0.
std::vector<double> action_distribution(const StepOutput& out, const grammar::Grammar& g, std::size_t tables,
                                        std::size_t columns);

// Position of an action inside out.log_probs.
std::size_t segment_index(const grammar::Action& a);

// Throws DataError naming the step if the action is illegal.
void advance(DecoderState& state, const StepOutput& out, const grammar::Action& a, const DecoderMemory& memory,
             const DecoderParams& p);

// Sum of −log p(gold) over the steps. Steps with a single legal action add
// nothing since their probability is exactly one.
Tensor teacher_forced_loss(const std::vector<grammar::Action>& gold, const DecoderMemory& memory,
                           const grammar::Grammar& g, const DecoderParams& p, const TrainContext& ctx = {});

struct DecodeResult {
    bool complete = false;
    std::vector<grammar::Action> actions;
    std::optional<grammar::AstNode> ast;
    std::vector<grammar::FrontierItem> frontier;  // open nodes when truncated
    std::string report;
};

DecodeResult greedy_decode(const DecoderMemory& memory, const grammar::Grammar& g, const DecoderParams& p,
                           std::size_t max_steps = 128);

}  // namespace sadga::model
