#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sadga/grammar.hpp"
#include "sadga/graph.hpp"

namespace sadga::sql {

enum class Agg { None, Max, Min, Count, Sum, Avg };

struct AggColumn {
    Agg agg = Agg::None;
    std::size_t column = 0;

    auto operator<=>(const AggColumn&) const = default;
};

enum class CmpOp { Eq, Gt, Lt, Ge, Le, Ne, Like, In, NotIn };

struct Query;

// And/Or nodes hold two children; comparisons hold lhs and, for In/NotIn or a
// subquery operand, one nested query. Literal values are not kept.
struct Condition {
    enum class Kind { And, Or, Compare } kind = Kind::Compare;
    std::vector<Condition> children;
    CmpOp op = CmpOp::Eq;
    AggColumn lhs;
    std::vector<Query> subquery;
};

enum class Order { None, Asc, Desc };

struct SelectCore {
    std::vector<AggColumn> select;
    std::vector<std::size_t> from;
    std::vector<Condition> where;  // 0 or 1
    std::vector<std::size_t> group_by;
    std::vector<Condition> having;  // 0 or 1, only with group_by
    Order order = Order::None;
    std::vector<AggColumn> order_by;
    bool limit = false;
};

enum class SetOp { None, Union, Intersect, Except };

struct Query {
    SelectCore core;
    SetOp op = SetOp::None;
    std::vector<SelectCore> right;  // 1 element iff op != None
};

// Parses the supported SQL subset and resolves names against the schema.
// Syntax problems raise ParseError, unknown names ResolutionError.
Query parse_sql(const std::string& text, const graph::SchemaDef& schema);

// Normalized lowercase text with qualified column names, explicit parentheses
// around conditions and subqueries, and 'value' for every literal.
std::string to_sql(const Query& q, const graph::SchemaDef& schema);

// Order-insensitive description of the clause components; two queries are an
// exact match iff their keys agree.
std::string canonical_key(const Query& q);
bool exact_match(const Query& a, const Query& b);

grammar::AstNode query_to_ast(const Query& q, const grammar::Grammar& g);
Query ast_to_query(const grammar::AstNode& root, const grammar::Grammar& g);

std::vector<grammar::Action> sql_to_actions(const std::string& sql, const grammar::Grammar& g,
                                            const graph::SchemaDef& schema);
std::string actions_to_sql(const std::vector<grammar::Action>& actions, const grammar::Grammar& g,
                           const graph::SchemaDef& schema);

}  // namespace sadga::sql
