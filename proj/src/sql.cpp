#include "sadga/sql.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>

#include "sadga/errors.hpp"

namespace sadga::sql {

using grammar::Action;
using grammar::ActionKind;
using grammar::AstNode;
using grammar::Grammar;

namespace {

// ---------------------------------------------------------------- lexing

enum class Tok { Ident, Number, String, Punct, End };

struct Token {
    Tok kind;
    std::string text;  // identifiers lowercased
    std::size_t offset;
};

std::vector<Token> lex(const std::string& s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const unsigned char c = static_cast<unsigned char>(s[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (std::isalpha(c) || c == '_') {
            std::size_t j = i;
            while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
            out.push_back({Tok::Ident, graph::to_lower(s.substr(i, j - i)), i});
            i = j;
        } else if (std::isdigit(c)) {
            std::size_t j = i;
            while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
            out.push_back({Tok::Number, s.substr(i, j - i), i});
            i = j;
        } else if (c == '\'' || c == '"' || c == '`') {
            std::size_t j = s.find(static_cast<char>(c), i + 1);
            if (j == std::string::npos) throw ParseError("unterminated string at offset " + std::to_string(i));
            if (c == '`') {
                out.push_back({Tok::Ident, graph::to_lower(s.substr(i + 1, j - i - 1)), i});
            } else {
                out.push_back({Tok::String, s.substr(i + 1, j - i - 1), i});
            }
            i = j + 1;
        } else {
            static const char* two[] = {">=", "<=", "!=", "<>"};
            std::string p(1, static_cast<char>(c));
            for (const char* t : two)
                if (s.compare(i, 2, t) == 0) p = t;
            if (std::string("(),*.;=<>-+/").find(static_cast<char>(c)) == std::string::npos && p.size() == 1) {
                throw ParseError("unexpected character '" + p + "' at offset " + std::to_string(i));
            }
            out.push_back({Tok::Punct, p, i});
            i += p.size();
        }
    }
    out.push_back({Tok::End, "", s.size()});
    return out;
}

// ---------------------------------------------------------------- raw tree

struct RawCol {
    std::string qualifier;  // table name or alias, may be empty
    std::string name;       // "*" for the wildcard
    Agg agg = Agg::None;
};

struct RawQuery;

struct RawCond {
    Condition::Kind kind = Condition::Kind::Compare;
    std::vector<RawCond> children;
    CmpOp op = CmpOp::Eq;
    RawCol lhs;
    std::vector<RawQuery> sub;
};

struct TableRef {
    std::string name;
    std::string alias;
};

struct RawCore {
    std::vector<RawCol> select;
    std::vector<TableRef> from;
    std::vector<RawCond> where;
    std::vector<RawCol> group_by;
    std::vector<RawCond> having;
    Order order = Order::None;
    std::vector<RawCol> order_by;
    bool limit = false;
};

struct RawQuery {
    RawCore core;
    SetOp op = SetOp::None;
    std::vector<RawCore> right;
};

bool is_agg(const std::string& s, Agg& out) {
    static const std::pair<const char*, Agg> aggs[] = {
        {"max", Agg::Max}, {"min", Agg::Min}, {"count", Agg::Count}, {"sum", Agg::Sum}, {"avg", Agg::Avg}};
    for (const auto& [name, a] : aggs)
        if (s == name) {
            out = a;
            return true;
        }
    return false;
}

const std::set<std::string>& keywords() {
    static const std::set<std::string> k{"select", "from",  "where", "group", "by",     "having", "order",
                                         "limit",  "union", "intersect", "except", "and", "or", "not",
                                         "in",     "like",  "between",   "asc",    "desc", "join", "on",
                                         "as",     "inner", "left",      "right",  "outer", "distinct"};
    return k;
}

class Parser {
   public:
    explicit Parser(const std::string& text) : text_(text), toks_(lex(text)) {}

    RawQuery parse() {
        RawQuery q = query();
        accept(";");
        if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "'");
        return q;
    }

   private:
    const std::string& text_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;

    const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
    bool at(const std::string& t) const {
        return (peek().kind == Tok::Ident || peek().kind == Tok::Punct) && peek().text == t;
    }
    bool accept(const std::string& t) {
        if (!at(t)) return false;
        ++pos_;
        return true;
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg + " at offset " + std::to_string(peek().offset) + " in: " + text_);
    }
    void expect(const std::string& t) {
        if (!accept(t)) fail("expected '" + t + "'");
    }
    std::string ident() {
        if (peek().kind != Tok::Ident || keywords().count(peek().text)) fail("expected a name");
        return toks_[pos_++].text;
    }

    RawQuery query() {
        RawQuery q;
        q.core = core();
        if (accept("union")) q.op = SetOp::Union;
        else if (accept("intersect")) q.op = SetOp::Intersect;
        else if (accept("except")) q.op = SetOp::Except;
        if (q.op != SetOp::None) {
            q.right.push_back(core());
            if (at("union") || at("intersect") || at("except")) fail("only one set operation is supported");
        }
        return q;
    }

    RawCol column_ref() {
        RawCol c;
        if (accept("*")) {
            c.name = "*";
            return c;
        }
        std::string first = ident();
        if (accept(".")) {
            c.qualifier = first;
            c.name = accept("*") ? "*" : ident();
        } else {
            c.name = first;
        }
        return c;
    }

    RawCol agg_column() {
        Agg a;
        if (peek().kind == Tok::Ident && is_agg(peek().text, a) && peek(1).text == "(") {
            pos_ += 2;
            accept("distinct");
            RawCol c = column_ref();
            if (!accept(")")) fail("only a single column may appear inside an aggregate");
            c.agg = a;
            return c;
        }
        RawCol c = column_ref();
        if (at("+") || at("-") || at("/") || (at("*") && false)) fail("arithmetic expressions are not supported");
        return c;
    }

    RawCore core() {
        RawCore c;
        expect("select");
        accept("distinct");
        do c.select.push_back(agg_column());
        while (accept(","));
        expect("from");
        from_clause(c);
        if (accept("where")) c.where.push_back(condition());
        if (accept("group")) {
            expect("by");
            do c.group_by.push_back(column_ref());
            while (accept(","));
            if (accept("having")) c.having.push_back(condition());
        }
        if (accept("order")) {
            expect("by");
            c.order = Order::Asc;
            do {
                c.order_by.push_back(agg_column());
                if (accept("desc")) c.order = Order::Desc;
                else if (accept("asc")) c.order = Order::Asc;
            } while (accept(","));
        }
        if (accept("limit")) {
            if (peek().kind != Tok::Number) fail("expected a number after limit");
            ++pos_;
            c.limit = true;
        }
        return c;
    }

    TableRef table_ref() {
        if (at("(")) fail("subqueries in FROM are not supported");
        TableRef t{ident(), ""};
        if (accept("as")) t.alias = ident();
        else if (peek().kind == Tok::Ident && !keywords().count(peek().text)) t.alias = ident();
        return t;
    }

    void from_clause(RawCore& c) {
        c.from.push_back(table_ref());
        while (true) {
            if (accept(",")) {
                c.from.push_back(table_ref());
                continue;
            }
            accept("inner");
            if (accept("left") || accept("right")) accept("outer");
            if (!accept("join")) break;
            c.from.push_back(table_ref());
            if (accept("on")) {
                // join conditions are implied by the table set
                do {
                    column_ref();
                    if (!accept("=")) fail("join conditions must be column equalities");
                    column_ref();
                } while (accept("and"));
            }
        }
    }

    RawCond condition() {
        RawCond left = conjunction();
        while (accept("or")) {
            RawCond node;
            node.kind = Condition::Kind::Or;
            node.children = {left, conjunction()};
            left = node;
        }
        return left;
    }

    RawCond conjunction() {
        RawCond left = atom();
        while (accept("and")) {
            RawCond node;
            node.kind = Condition::Kind::And;
            node.children = {left, atom()};
            left = node;
        }
        return left;
    }

    bool subquery_ahead() const { return peek().text == "(" && peek(1).text == "select"; }

    void literal() {
        accept("-");
        if (peek().kind == Tok::Number || peek().kind == Tok::String) {
            ++pos_;
            return;
        }
        if (peek().kind == Tok::Ident && !keywords().count(peek().text)) {
            fail("column-to-column comparisons are not supported");
        }
        fail("expected a value");
    }

    RawCond atom() {
        if (at("(") && !subquery_ahead()) {
            ++pos_;
            RawCond c = condition();
            expect(")");
            return c;
        }
        RawCond c;
        c.lhs = agg_column();
        if (accept("not")) {
            if (accept("in")) c.op = CmpOp::NotIn;
            else fail("only NOT IN is supported after NOT");
        } else if (accept("in")) {
            c.op = CmpOp::In;
        } else if (accept("between")) {
            fail("BETWEEN is not supported");
        } else if (accept("like")) {
            c.op = CmpOp::Like;
        } else if (accept("=")) {
            c.op = CmpOp::Eq;
        } else if (accept(">")) {
            c.op = CmpOp::Gt;
        } else if (accept("<")) {
            c.op = CmpOp::Lt;
        } else if (accept(">=")) {
            c.op = CmpOp::Ge;
        } else if (accept("<=")) {
            c.op = CmpOp::Le;
        } else if (accept("!=") || accept("<>")) {
            c.op = CmpOp::Ne;
        } else {
            fail("expected a comparison operator");
        }
        if (c.op == CmpOp::In || c.op == CmpOp::NotIn) {
            if (!subquery_ahead()) fail("IN requires a subquery");
        }
        if (subquery_ahead()) {
            if (c.op == CmpOp::Like) fail("LIKE takes a value");
            ++pos_;
            c.sub.push_back(query());
            expect(")");
        } else {
            literal();
        }
        return c;
    }
};

// ---------------------------------------------------------------- resolution

struct Scope {
    std::vector<std::pair<TableRef, std::size_t>> tables;
    const Scope* outer = nullptr;
};

std::string lower_name(const std::string& s) { return graph::to_lower(s); }

std::size_t find_table(const graph::SchemaDef& schema, const std::string& name) {
    for (std::size_t t = 0; t < schema.tables.size(); ++t)
        if (lower_name(schema.tables[t].original_name) == name) return t;
    std::string candidates;
    for (const auto& t : schema.tables) candidates += " " + lower_name(t.original_name);
    throw ResolutionError("unknown table '" + name + "' in " + schema.db_id + "; candidates:" + candidates);
}

std::optional<std::size_t> column_in(const graph::SchemaDef& schema, std::size_t table, const std::string& name) {
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        const auto& col = schema.columns[c];
        if (col.table == table && lower_name(col.original_name) == name) return c;
    }
    return std::nullopt;
}

std::size_t wildcard(const graph::SchemaDef& schema) {
    if (schema.columns.empty() || !schema.is_wildcard(0)) {
        throw ResolutionError("schema " + schema.db_id + " has no '*' column");
    }
    return 0;
}

std::size_t resolve_column(const graph::SchemaDef& schema, const Scope& scope, const RawCol& c) {
    if (c.name == "*") return wildcard(schema);
    for (const Scope* s = &scope; s != nullptr; s = s->outer) {
        for (const auto& [ref, t] : s->tables) {
            if (!c.qualifier.empty() && c.qualifier != ref.alias && c.qualifier != ref.name) continue;
            if (auto col = column_in(schema, t, c.name)) return *col;
        }
    }
    std::string candidates;
    for (const auto& [ref, t] : scope.tables)
        for (std::size_t k = 0; k < schema.columns.size(); ++k)
            if (schema.columns[k].table == t) candidates += " " + ref.name + "." + lower_name(schema.columns[k].original_name);
    const std::string shown = c.qualifier.empty() ? c.name : c.qualifier + "." + c.name;
    throw ResolutionError("unknown column '" + shown + "' in " + schema.db_id + "; candidates:" + candidates);
}

Query resolve_query(const graph::SchemaDef& schema, const RawQuery& raw, const Scope* outer);

SelectCore resolve_core(const graph::SchemaDef& schema, const RawCore& raw, const Scope* outer);

Condition resolve_cond(const graph::SchemaDef& schema, const Scope& scope, const RawCond& raw) {
    Condition c;
    c.kind = raw.kind;
    for (const auto& ch : raw.children) c.children.push_back(resolve_cond(schema, scope, ch));
    if (raw.kind == Condition::Kind::Compare) {
        c.op = raw.op;
        c.lhs = {raw.lhs.agg, resolve_column(schema, scope, raw.lhs)};
        for (const auto& s : raw.sub) c.subquery.push_back(resolve_query(schema, s, &scope));
    }
    return c;
}

SelectCore resolve_core(const graph::SchemaDef& schema, const RawCore& raw, const Scope* outer) {
    Scope scope;
    scope.outer = outer;
    SelectCore core;
    for (const auto& t : raw.from) {
        const std::size_t id = find_table(schema, t.name);
        scope.tables.emplace_back(t, id);
        if (std::find(core.from.begin(), core.from.end(), id) == core.from.end()) core.from.push_back(id);
    }
    for (const auto& c : raw.select) core.select.push_back({c.agg, resolve_column(schema, scope, c)});
    for (const auto& w : raw.where) core.where.push_back(resolve_cond(schema, scope, w));
    for (const auto& g : raw.group_by) core.group_by.push_back(resolve_column(schema, scope, g));
    for (const auto& h : raw.having) core.having.push_back(resolve_cond(schema, scope, h));
    core.order = raw.order;
    for (const auto& o : raw.order_by) core.order_by.push_back({o.agg, resolve_column(schema, scope, o)});
    core.limit = raw.limit;
    return core;
}

Query resolve_query(const graph::SchemaDef& schema, const RawQuery& raw, const Scope* outer) {
    Query q;
    q.core = resolve_core(schema, raw.core, outer);
    q.op = raw.op;
    for (const auto& r : raw.right) q.right.push_back(resolve_core(schema, r, outer));
    return q;
}

// ---------------------------------------------------------------- printing

const char* agg_name(Agg a) {
    switch (a) {
        case Agg::Max: return "max";
        case Agg::Min: return "min";
        case Agg::Count: return "count";
        case Agg::Sum: return "sum";
        case Agg::Avg: return "avg";
        case Agg::None: break;
    }
    return "";
}

const char* op_text(CmpOp op) {
    switch (op) {
        case CmpOp::Eq: return "=";
        case CmpOp::Gt: return ">";
        case CmpOp::Lt: return "<";
        case CmpOp::Ge: return ">=";
        case CmpOp::Le: return "<=";
        case CmpOp::Ne: return "!=";
        case CmpOp::Like: return "like";
        case CmpOp::In: return "in";
        case CmpOp::NotIn: return "not in";
    }
    return "?";
}

const char* set_op_text(SetOp op) {
    switch (op) {
        case SetOp::Union: return "union";
        case SetOp::Intersect: return "intersect";
        case SetOp::Except: return "except";
        case SetOp::None: break;
    }
    return "";
}

std::string column_text(const graph::SchemaDef& s, std::size_t c) {
    if (c >= s.columns.size()) throw ContractError("column index " + std::to_string(c) + " out of range");
    if (s.is_wildcard(c)) return "*";
    return lower_name(s.tables[*s.columns[c].table].original_name) + "." + lower_name(s.columns[c].original_name);
}

std::string agg_text(const graph::SchemaDef& s, const AggColumn& a) {
    if (a.agg == Agg::None) return column_text(s, a.column);
    return std::string(agg_name(a.agg)) + "(" + column_text(s, a.column) + ")";
}

std::string core_text(const SelectCore& c, const graph::SchemaDef& s);

std::string query_text(const Query& q, const graph::SchemaDef& s) {
    std::string out = core_text(q.core, s);
    if (q.op != SetOp::None) out += std::string(" ") + set_op_text(q.op) + " " + core_text(q.right.at(0), s);
    return out;
}

std::string cond_text(const Condition& c, const graph::SchemaDef& s) {
    if (c.kind != Condition::Kind::Compare) {
        const char* conj = c.kind == Condition::Kind::And ? " and " : " or ";
        return "(" + cond_text(c.children.at(0), s) + conj + cond_text(c.children.at(1), s) + ")";
    }
    std::string rhs = c.subquery.empty() ? "'value'" : "(" + query_text(c.subquery[0], s) + ")";
    return agg_text(s, c.lhs) + " " + op_text(c.op) + " " + rhs;
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& f) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + f(items[i]);
    return out;
}

std::string core_text(const SelectCore& c, const graph::SchemaDef& s) {
    std::string out = "select " + join(c.select, [&](const AggColumn& a) { return agg_text(s, a); });
    out += " from " + join(c.from, [&](std::size_t t) { return lower_name(s.tables.at(t).original_name); });
    if (!c.where.empty()) out += " where " + cond_text(c.where[0], s);
    if (!c.group_by.empty()) {
        out += " group by " + join(c.group_by, [&](std::size_t col) { return column_text(s, col); });
        if (!c.having.empty()) out += " having " + cond_text(c.having[0], s);
    }
    if (c.order != Order::None) {
        out += " order by " + join(c.order_by, [&](const AggColumn& a) { return agg_text(s, a); });
        out += c.order == Order::Asc ? " asc" : " desc";
    }
    if (c.limit) out += " limit 1";
    return out;
}

// ---------------------------------------------------------------- canonical keys

std::string agg_key(const AggColumn& a) {
    return std::to_string(static_cast<int>(a.agg)) + ":" + std::to_string(a.column);
}

void cond_parts(const Condition& c, std::vector<std::string>& units, std::vector<std::string>& conj) {
    if (c.kind != Condition::Kind::Compare) {
        conj.push_back(c.kind == Condition::Kind::And ? "and" : "or");
        for (const auto& ch : c.children) cond_parts(ch, units, conj);
        return;
    }
    std::string u = std::to_string(static_cast<int>(c.op)) + "|" + agg_key(c.lhs);
    if (!c.subquery.empty()) u += "|(" + canonical_key(c.subquery[0]) + ")";
    units.push_back(u);
}

std::string sorted_join(std::vector<std::string> v, bool unique) {
    std::sort(v.begin(), v.end());
    if (unique) v.erase(std::unique(v.begin(), v.end()), v.end());
    std::string out;
    for (const auto& x : v) out += x + ";";
    return out;
}

std::string cond_key(const std::vector<Condition>& c) {
    if (c.empty()) return "-";
    std::vector<std::string> units, conj;
    cond_parts(c[0], units, conj);
    return "{" + sorted_join(units, false) + "}{" + sorted_join(conj, false) + "}";
}

std::string core_key(const SelectCore& c) {
    std::vector<std::string> sel, from, group, order;
    for (const auto& a : c.select) sel.push_back(agg_key(a));
    for (auto t : c.from) from.push_back(std::to_string(t));
    for (auto g : c.group_by) group.push_back(std::to_string(g));
    for (const auto& a : c.order_by) order.push_back(agg_key(a));
    return "select{" + sorted_join(sel, false) + "}from{" + sorted_join(from, true) + "}where" + cond_key(c.where) +
           "group{" + sorted_join(group, true) + "}having" + cond_key(c.having) + "order" +
           std::to_string(static_cast<int>(c.order)) + "{" + sorted_join(order, false) + "}limit" +
           (c.limit ? "1" : "0");
}

// ---------------------------------------------------------------- AST conversion

struct AstBuilder {
    const Grammar& g;

    AstNode rule(const std::string& type, const std::string& name, std::vector<AstNode> children) const {
        const std::size_t p = g.production_id(type, name);
        if (g.productions[p].fields.size() != children.size()) {
            throw CompileError("production " + name + " expects " + std::to_string(g.productions[p].fields.size()) +
                               " fields");
        }
        return {{ActionKind::ApplyRule, p}, std::move(children)};
    }

    AstNode list(const std::string& type, const std::string& name, std::size_t field,
                 std::vector<AstNode> items) const {
        const std::size_t list_type = g.productions[g.production_id(type, name)].fields.at(field);
        if (items.empty() || items.size() > g.max_list_length(list_type)) {
            throw DataError(std::to_string(items.size()) + " items do not fit list " + g.types[list_type].name);
        }
        return {{ActionKind::ApplyRule, g.list_production(list_type, items.size())}, std::move(items)};
    }

    static AstNode column(std::size_t c) { return {{ActionKind::SelectColumn, c}, {}}; }
    static AstNode table(std::size_t t) { return {{ActionKind::SelectTable, t}, {}}; }

    AstNode agg(const AggColumn& a) const {
        static const char* names[] = {"NoAgg", "Max", "Min", "Count", "Sum", "Avg"};
        return rule("agg", names[static_cast<int>(a.agg)], {column(a.column)});
    }

    AstNode sql(const Query& q) const {
        if (q.op == SetOp::None) return rule("sql", "Single", {core(q.core)});
        static const char* names[] = {"", "Union", "Intersect", "Except"};
        return rule("sql", names[static_cast<int>(q.op)], {core(q.core), core(q.right.at(0))});
    }

    AstNode cond(const Condition& c) const {
        if (c.kind == Condition::Kind::And) return rule("cond", "And", {cond(c.children[0]), cond(c.children[1])});
        if (c.kind == Condition::Kind::Or) return rule("cond", "Or", {cond(c.children[0]), cond(c.children[1])});
        static const char* names[] = {"Eq", "Gt", "Lt", "Ge", "Le", "Ne", "Like", "In", "NotIn"};
        const char* name = names[static_cast<int>(c.op)];
        if (c.op == CmpOp::In || c.op == CmpOp::NotIn) return rule("cond", name, {agg(c.lhs), sql(c.subquery.at(0))});
        AstNode operand = c.subquery.empty() ? rule("operand", "Value", {})
                                             : rule("operand", "Subquery", {sql(c.subquery[0])});
        return rule("cond", name, {agg(c.lhs), operand});
    }

    AstNode core(const SelectCore& c) const {
        std::vector<AstNode> sel, from;
        for (const auto& a : c.select) sel.push_back(agg(a));
        for (auto t : c.from) from.push_back(table(t));
        AstNode where = c.where.empty() ? rule("where", "NoWhere", {}) : rule("where", "Where", {cond(c.where[0])});
        AstNode group = rule("group", "NoGroup", {});
        if (!c.group_by.empty()) {
            std::vector<AstNode> cols;
            for (auto col : c.group_by) cols.push_back(column(col));
            AstNode having =
                c.having.empty() ? rule("having", "NoHaving", {}) : rule("having", "Having", {cond(c.having[0])});
            group = rule("group", "GroupBy", {list("group", "GroupBy", 0, cols), having});
        } else if (!c.having.empty()) {
            throw DataError("HAVING without GROUP BY is not representable");
        }
        AstNode order = rule("order", "NoOrder", {});
        if (c.order != Order::None) {
            std::vector<AstNode> items;
            for (const auto& a : c.order_by) items.push_back(agg(a));
            const char* dir = c.order == Order::Asc ? "Asc" : "Desc";
            order = rule("order", dir, {list("order", dir, 0, items)});
        }
        AstNode limit = c.limit ? rule("limit", "Limit", {}) : rule("limit", "NoLimit", {});
        return rule("query", "Query",
                    {rule("select", "Select", {list("select", "Select", 0, sel)}),
                     rule("from", "From", {list("from", "From", 0, from)}), where, group, order, limit});
    }
};

struct AstReader {
    const Grammar& g;

    const std::string& name(const AstNode& n) const {
        if (n.action.kind != ActionKind::ApplyRule) throw DataError("expected a rule node");
        return g.productions.at(n.action.index).name;
    }

    static std::size_t terminal(const AstNode& n, ActionKind kind) {
        if (n.action.kind != kind) throw DataError("unexpected terminal kind");
        return n.action.index;
    }

    AggColumn agg(const AstNode& n) const {
        static const std::pair<const char*, Agg> aggs[] = {{"NoAgg", Agg::None}, {"Max", Agg::Max},
                                                           {"Min", Agg::Min},     {"Count", Agg::Count},
                                                           {"Sum", Agg::Sum},     {"Avg", Agg::Avg}};
        for (const auto& [nm, a] : aggs)
            if (name(n) == nm) return {a, terminal(n.children.at(0), ActionKind::SelectColumn)};
        throw DataError("unknown aggregate " + name(n));
    }

    Query sql(const AstNode& n) const {
        Query q;
        q.core = core(n.children.at(0));
        const std::string& nm = name(n);
        if (nm == "Single") return q;
        q.op = nm == "Union" ? SetOp::Union : nm == "Intersect" ? SetOp::Intersect : SetOp::Except;
        q.right.push_back(core(n.children.at(1)));
        return q;
    }

    Condition cond(const AstNode& n) const {
        Condition c;
        const std::string& nm = name(n);
        if (nm == "And" || nm == "Or") {
            c.kind = nm == "And" ? Condition::Kind::And : Condition::Kind::Or;
            c.children = {cond(n.children.at(0)), cond(n.children.at(1))};
            return c;
        }
        static const std::pair<const char*, CmpOp> ops[] = {
            {"Eq", CmpOp::Eq}, {"Gt", CmpOp::Gt}, {"Lt", CmpOp::Lt},     {"Ge", CmpOp::Ge},      {"Le", CmpOp::Le},
            {"Ne", CmpOp::Ne}, {"Like", CmpOp::Like}, {"In", CmpOp::In}, {"NotIn", CmpOp::NotIn}};
        bool found = false;
        for (const auto& [o, op] : ops)
            if (nm == o) {
                c.op = op;
                found = true;
            }
        if (!found) throw DataError("unknown condition " + nm);
        c.lhs = agg(n.children.at(0));
        const AstNode& rhs = n.children.at(1);
        if (c.op == CmpOp::In || c.op == CmpOp::NotIn) {
            c.subquery.push_back(sql(rhs));
        } else if (name(rhs) == "Subquery") {
            c.subquery.push_back(sql(rhs.children.at(0)));
        }
        return c;
    }

    SelectCore core(const AstNode& n) const {
        SelectCore c;
        for (const auto& item : n.children.at(0).children.at(0).children) c.select.push_back(agg(item));
        for (const auto& item : n.children.at(1).children.at(0).children)
            c.from.push_back(terminal(item, ActionKind::SelectTable));
        if (name(n.children.at(2)) == "Where") c.where.push_back(cond(n.children[2].children.at(0)));
        const AstNode& group = n.children.at(3);
        if (name(group) == "GroupBy") {
            for (const auto& item : group.children.at(0).children)
                c.group_by.push_back(terminal(item, ActionKind::SelectColumn));
            if (name(group.children.at(1)) == "Having") c.having.push_back(cond(group.children[1].children.at(0)));
        }
        const AstNode& order = n.children.at(4);
        if (name(order) != "NoOrder") {
            c.order = name(order) == "Asc" ? Order::Asc : Order::Desc;
            for (const auto& item : order.children.at(0).children) c.order_by.push_back(agg(item));
        }
        c.limit = name(n.children.at(5)) == "Limit";
        return c;
    }
};

}  // namespace

Query parse_sql(const std::string& text, const graph::SchemaDef& schema) {
    RawQuery raw = Parser(text).parse();
    return resolve_query(schema, raw, nullptr);
}

std::string to_sql(const Query& q, const graph::SchemaDef& schema) { return query_text(q, schema); }

std::string canonical_key(const Query& q) {
    std::string out = core_key(q.core);
    if (q.op != SetOp::None) out += std::string("|") + set_op_text(q.op) + "|" + core_key(q.right.at(0));
    return out;
}

bool exact_match(const Query& a, const Query& b) { return canonical_key(a) == canonical_key(b); }

AstNode query_to_ast(const Query& q, const Grammar& g) { return AstBuilder{g}.sql(q); }

Query ast_to_query(const AstNode& root, const Grammar& g) { return AstReader{g}.sql(root); }

std::vector<Action> sql_to_actions(const std::string& text, const Grammar& g, const graph::SchemaDef& schema) {
    auto actions = grammar::ast_to_actions(query_to_ast(parse_sql(text, schema), g));
    // replay guards against grammar/converter drift
    grammar::actions_to_ast(g, actions, schema.tables.size(), schema.columns.size());
    return actions;
}

std::string actions_to_sql(const std::vector<Action>& actions, const Grammar& g, const graph::SchemaDef& schema) {
    return to_sql(ast_to_query(grammar::actions_to_ast(g, actions, schema.tables.size(), schema.columns.size()), g),
                  schema);
}

}  // namespace sadga::sql
