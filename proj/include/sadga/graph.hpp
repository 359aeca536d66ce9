#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sadga::graph {

// The 14 predefined relations plus the NoMatch sentinel (used only in cross
// matrices and the transformer's relation bias).
enum class RelationType : std::uint8_t {
    // question graph
    Dist1,
    Dist2,
    DepParse,
    // schema graph
    SameTable,
    ColColPKFK,
    ForeignKeyColTab,
    PrimaryKeyColTab,
    TableColumnMatch,
    TabTabPKFK,
    // cross graph
    ExactMatchWordTab,
    PartialMatchWordTab,
    ExactMatchWordCol,
    PartialMatchWordCol,
    ValueMatch,
    NoMatch,
};

inline constexpr std::size_t kNumRelations = 14;
inline constexpr std::size_t kNumRelationSlots = 15;  // including NoMatch

struct RelationInfo {
    RelationType type;
    const char* graph;   // "question" | "schema" | "cross"
    const char* node_a;  // Word | Column | Table
    const char* node_b;
    const char* description;
};

// One row per predefined relation, excluding NoMatch.
std::span<const RelationInfo> relation_inventory();
const char* relation_name(RelationType rel);
std::size_t relation_index(RelationType rel);
bool is_cross_relation(RelationType rel);

struct Token {
    std::string surface;
    std::string lemma;
    std::size_t position = 0;
};

std::string to_lower(std::string text);
// Crude suffix-stripping lemmatizer (plural forms).
std::string lemmatize(const std::string& word);
// Lowercased word/punctuation split for questions that arrive without tokens.
std::vector<std::string> tokenize_question(const std::string& text);
std::vector<Token> make_tokens(const std::vector<std::string>& words);
// "Has_Pet" -> {"has", "pet"}
std::vector<std::string> split_schema_name(const std::string& name);

enum class ColumnType : std::uint8_t { Text, Number, Time, Boolean, Others };
inline constexpr std::size_t kNumColumnTypes = 5;
ColumnType parse_column_type(const std::string& text);

struct TableDef {
    std::string original_name;
    std::vector<std::string> name_tokens;
};

struct ColumnDef {
    std::optional<std::size_t> table;  // none for the wildcard "*"
    std::string original_name;
    std::vector<std::string> name_tokens;
    ColumnType type = ColumnType::Text;
    std::vector<std::string> cell_values;
};

struct SchemaDef {
    std::string db_id;
    std::vector<TableDef> tables;
    std::vector<ColumnDef> columns;
    std::vector<std::size_t> primary_keys;
    std::vector<std::pair<std::size_t, std::size_t>> foreign_keys;  // (column, referenced column)

    std::size_t node_count() const { return tables.size() + columns.size(); }
    std::size_t table_node(std::size_t t) const { return t; }
    std::size_t column_node(std::size_t c) const { return tables.size() + c; }
    bool is_wildcard(std::size_t c) const { return !columns[c].table.has_value(); }
};

// Throws ValidationError on dangling or inconsistent keys.
void validate_schema(const SchemaDef& schema);

struct Edge {
    std::size_t i = 0;
    std::size_t j = 0;
    RelationType rel = RelationType::NoMatch;
};

struct RelGraph {
    std::size_t node_count = 0;
    std::vector<Edge> edges;

    // Adds an undirected edge unless the same unordered (i, j, rel) exists.
    bool add_edge(std::size_t i, std::size_t j, RelationType rel);
    bool has_edge(std::size_t i, std::size_t j, RelationType rel) const;
};

RelGraph build_question_graph(const std::vector<Token>& tokens,
                              const std::vector<std::pair<std::size_t, std::size_t>>& dep_edges);

// Nodes are ordered tables first, then columns.
RelGraph build_schema_graph(const SchemaDef& schema);

// rows × cols grid of relations; cells default to NoMatch.
struct CrossRelMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<RelationType> cells;

    CrossRelMatrix() = default;
    CrossRelMatrix(std::size_t r, std::size_t c)
        : rows(r), cols(c), cells(r * c, RelationType::NoMatch) {}
    RelationType at(std::size_t i, std::size_t j) const { return cells[i * cols + j]; }
    RelationType& at(std::size_t i, std::size_t j) { return cells[i * cols + j]; }
    CrossRelMatrix transposed() const;
    // Flat relation indices, row-major.
    std::vector<std::size_t> indices() const;
};

// Question words × schema nodes (tables then columns).
CrossRelMatrix link_cross_graph(const std::vector<Token>& tokens, const SchemaDef& schema);

enum class EdgeType : std::uint8_t { Forward, Backward, SelfLoop };
inline constexpr std::size_t kNumEdgeTypes = 3;

struct TypedEdge {
    std::size_t src = 0;
    std::size_t dst = 0;
    EdgeType type = EdgeType::SelfLoop;
};

// Relation-node transform: every relation edge becomes an extra node linked to
// both endpoints. Relation node k has index base_node_count + k.
struct LeviGraph {
    std::size_t base_node_count = 0;
    std::vector<RelationType> relation_nodes;
    std::vector<TypedEdge> typed_edges;
    std::vector<std::vector<std::size_t>> base_adjacency;

    std::size_t node_count() const { return base_node_count + relation_nodes.size(); }
};

LeviGraph levi_transform(const RelGraph& graph);

}  // namespace sadga::graph
