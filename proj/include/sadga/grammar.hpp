#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace sadga::grammar {

enum class TerminalKind { None, Table, Column };

struct NodeType {
    std::string name;
    TerminalKind terminal = TerminalKind::None;
    std::vector<std::size_t> productions;
    // set for generated list types such as agg*5
    bool is_list = false;
    std::size_t element_type = 0;
};

struct Production {
    std::string name;
    std::size_t type = 0;
    std::vector<std::size_t> fields;  // node type ids, expanded left to right
};

struct Grammar {
    std::vector<NodeType> types;
    std::vector<Production> productions;
    std::size_t root = 0;
    std::size_t declared_productions = 0;  // written in the source, lists excluded

    // Throws CompileError for unknown names.
    std::size_t type_id(const std::string& name) const;
    std::size_t production_id(const std::string& type, const std::string& name) const;
    // List production with `length` elements for a list type.
    std::size_t list_production(std::size_t list_type, std::size_t length) const;
    std::size_t max_list_length(std::size_t list_type) const;
};

Grammar compile_grammar(const std::string& text);
Grammar load_grammar(const std::filesystem::path& path);
// The bundled mini-SQL grammar under grammar/ in the source tree.
std::filesystem::path bundled_grammar_path();
const Grammar& mini_sql_grammar();

enum class ActionKind { ApplyRule, SelectTable, SelectColumn };

struct Action {
    ActionKind kind = ActionKind::ApplyRule;
    std::size_t index = 0;

    bool operator==(const Action&) const = default;
};

std::string action_str(const Grammar& g, const Action& a);

// Flat action ids: productions, then tables, then columns of the schema.
std::size_t action_id(const Grammar& g, const Action& a, std::size_t num_tables);
Action action_from_id(const Grammar& g, std::size_t id, std::size_t num_tables);

struct FrontierItem {
    std::size_t type = 0;
    std::size_t parent_step = 0;
};

// Depth-first derivation bookkeeping shared by replay, teacher forcing and decoding.
class Derivation {
   public:
    Derivation(const Grammar& g, std::size_t num_tables, std::size_t num_columns);

    bool done() const { return frontier_.empty(); }
    std::size_t step() const { return step_; }
    const FrontierItem& top() const;
    const std::vector<FrontierItem>& frontier() const { return frontier_; }
    bool is_legal(const Action& a) const;
    // Legal flat action ids for the current frontier node, ascending.
    std::vector<std::size_t> legal_ids() const;
    // Throws DataError naming the step when the action is illegal.
    void apply(const Action& a);

   private:
    const Grammar* g_;
    std::size_t tables_, columns_;
    std::vector<FrontierItem> frontier_;
    std::size_t step_ = 0;
};

struct AstNode {
    Action action;
    std::vector<AstNode> children;
};

// Rebuilds the tree from a complete pre-order sequence.
AstNode actions_to_ast(const Grammar& g, const std::vector<Action>& actions, std::size_t num_tables,
                       std::size_t num_columns);
std::vector<Action> ast_to_actions(const AstNode& root);

}  // namespace sadga::grammar
