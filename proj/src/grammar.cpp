#include "sadga/grammar.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sadga/errors.hpp"

namespace sadga::grammar {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool is_ident(const std::string& s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    return true;
}

struct RawAlt {
    std::string name;
    std::vector<std::string> fields;
    int line;
};

struct RawDef {
    std::string type;
    std::vector<RawAlt> alts;
    int line;
};

std::vector<RawAlt> parse_alternatives(const std::string& body, int line) {
    std::vector<RawAlt> out;
    std::size_t pos = 0;
    while (pos < body.size()) {
        std::size_t open = body.find('(', pos);
        if (open == std::string::npos) throw CompileError("line " + std::to_string(line) + ": expected '(' in '" + body + "'");
        std::size_t close = body.find(')', open);
        if (close == std::string::npos) throw CompileError("line " + std::to_string(line) + ": unbalanced '('");
        std::string name = trim(body.substr(pos, open - pos));
        if (!name.empty() && name[0] == '|') name = trim(name.substr(1));
        if (!is_ident(name)) throw CompileError("line " + std::to_string(line) + ": bad production name '" + name + "'");
        RawAlt alt{name, {}, line};
        std::stringstream fields(body.substr(open + 1, close - open - 1));
        std::string f;
        while (std::getline(fields, f, ',')) {
            f = trim(f);
            if (f.empty()) continue;
            alt.fields.push_back(f);
        }
        out.push_back(alt);
        pos = close + 1;
        while (pos < body.size() && std::isspace(static_cast<unsigned char>(body[pos]))) ++pos;
        if (pos < body.size()) {
            if (body[pos] != '|') throw CompileError("line " + std::to_string(line) + ": expected '|' between productions");
            ++pos;
        }
    }
    if (out.empty()) throw CompileError("line " + std::to_string(line) + ": no productions");
    return out;
}

}  // namespace

std::size_t Grammar::type_id(const std::string& name) const {
    for (std::size_t i = 0; i < types.size(); ++i)
        if (types[i].name == name) return i;
    throw CompileError("unknown node type '" + name + "'");
}

std::size_t Grammar::production_id(const std::string& type, const std::string& name) const {
    for (std::size_t p : types[type_id(type)].productions)
        if (productions[p].name == name) return p;
    throw CompileError("type '" + type + "' has no production '" + name + "'");
}

std::size_t Grammar::list_production(std::size_t list_type, std::size_t length) const {
    const auto& t = types.at(list_type);
    if (!t.is_list || length == 0 || length > t.productions.size()) {
        throw ContractError("list " + t.name + " cannot hold " + std::to_string(length) + " elements");
    }
    return t.productions[length - 1];
}

std::size_t Grammar::max_list_length(std::size_t list_type) const { return types.at(list_type).productions.size(); }

Grammar compile_grammar(const std::string& text) {
    std::vector<RawDef> defs;
    std::string root_name;
    std::stringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        std::string line = trim(raw);
        if (line.empty()) continue;
        if (line.rfind("root ", 0) == 0) {
            root_name = trim(line.substr(5));
            continue;
        }
        if (line[0] == '|') {
            if (defs.empty()) throw CompileError("line " + std::to_string(line_no) + ": continuation without a definition");
            auto more = parse_alternatives(line, line_no);
            defs.back().alts.insert(defs.back().alts.end(), more.begin(), more.end());
            continue;
        }
        auto arrow = line.find("->");
        if (arrow == std::string::npos) throw CompileError("line " + std::to_string(line_no) + ": expected '->'");
        RawDef def{trim(line.substr(0, arrow)), parse_alternatives(trim(line.substr(arrow + 2)), line_no), line_no};
        if (!is_ident(def.type)) throw CompileError("line " + std::to_string(line_no) + ": bad type name '" + def.type + "'");
        defs.push_back(def);
    }
    if (root_name.empty()) throw CompileError("grammar declares no root type");

    Grammar g;
    std::map<std::string, std::size_t> ids;
    auto add_type = [&](const std::string& name, TerminalKind term) {
        if (ids.count(name)) throw CompileError("type '" + name + "' defined twice");
        ids[name] = g.types.size();
        g.types.push_back({name, term, {}, false, 0});
    };
    add_type("table", TerminalKind::Table);
    add_type("column", TerminalKind::Column);
    for (const auto& d : defs) add_type(d.type, TerminalKind::None);

    std::vector<std::string> unknown;
    auto resolve_field = [&](const std::string& f, int line) -> std::size_t {
        auto star = f.find('*');
        std::string base = trim(f.substr(0, star));
        if (!ids.count(base)) {
            unknown.push_back(base + " (line " + std::to_string(line) + ")");
            return 0;
        }
        if (star == std::string::npos) return ids[base];
        std::size_t max = 0;
        try {
            max = std::stoul(trim(f.substr(star + 1)));
        } catch (const std::exception&) {
            throw CompileError("line " + std::to_string(line) + ": bad list bound in '" + f + "'");
        }
        if (max == 0) throw CompileError("line " + std::to_string(line) + ": list bound must be positive");
        const std::string name = base + "*" + std::to_string(max);
        if (ids.count(name)) return ids[name];
        add_type(name, TerminalKind::None);
        const std::size_t list = ids[name];
        g.types[list].is_list = true;
        g.types[list].element_type = ids[base];
        for (std::size_t k = 1; k <= max; ++k) {
            g.types[list].productions.push_back(g.productions.size());
            g.productions.push_back({name + "#" + std::to_string(k), list, std::vector<std::size_t>(k, ids[base])});
        }
        return list;
    };

    for (const auto& d : defs) {
        const std::size_t t = ids[d.type];
        std::set<std::string> seen;
        for (const auto& alt : d.alts) {
            if (!seen.insert(alt.name).second) {
                throw CompileError("type '" + d.type + "' repeats production '" + alt.name + "'");
            }
            Production p{alt.name, t, {}};
            for (const auto& f : alt.fields) p.fields.push_back(resolve_field(f, alt.line));
            g.types[t].productions.push_back(g.productions.size());
            g.productions.push_back(p);
            ++g.declared_productions;
        }
    }
    if (!unknown.empty()) {
        std::string msg = "undefined field types:";
        for (const auto& u : unknown) msg += " " + u;
        throw CompileError(msg);
    }
    if (!ids.count(root_name)) throw CompileError("root type '" + root_name + "' is not defined");
    g.root = ids[root_name];

    // every type must derive a finite tree
    std::vector<bool> productive(g.types.size(), false);
    for (std::size_t t = 0; t < g.types.size(); ++t) productive[t] = g.types[t].terminal != TerminalKind::None;
    for (bool changed = true; changed;) {
        changed = false;
        for (const auto& p : g.productions) {
            if (productive[p.type]) continue;
            bool ok = true;
            for (auto f : p.fields) ok = ok && productive[f];
            if (ok) productive[p.type] = changed = true;
        }
    }
    // and be reachable from the root
    std::vector<bool> reachable(g.types.size(), false);
    std::vector<std::size_t> todo{g.root};
    reachable[g.root] = true;
    while (!todo.empty()) {
        std::size_t t = todo.back();
        todo.pop_back();
        for (auto p : g.types[t].productions)
            for (auto f : g.productions[p].fields)
                if (!reachable[f]) {
                    reachable[f] = true;
                    todo.push_back(f);
                }
    }
    for (std::size_t t = 0; t < g.types.size(); ++t) {
        if (!productive[t]) throw CompileError("type '" + g.types[t].name + "' cannot derive a finite tree");
        if (!reachable[t] && g.types[t].terminal == TerminalKind::None) {
            throw CompileError("type '" + g.types[t].name + "' is unreachable from root '" + root_name + "'");
        }
    }
    return g;
}

Grammar load_grammar(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CompileError("cannot open grammar file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return compile_grammar(ss.str());
}

std::filesystem::path bundled_grammar_path() {
    return std::filesystem::path(SADGA_SOURCE_DIR) / "grammar" / "mini_sql.grammar";
}

const Grammar& mini_sql_grammar() {
    static const Grammar g = load_grammar(bundled_grammar_path());
    return g;
}

std::string action_str(const Grammar& g, const Action& a) {
    switch (a.kind) {
        case ActionKind::ApplyRule: {
            const auto& p = g.productions.at(a.index);
            return g.types[p.type].name + " -> " + p.name;
        }
        case ActionKind::SelectTable:
            return "table[" + std::to_string(a.index) + "]";
        case ActionKind::SelectColumn:
            return "column[" + std::to_string(a.index) + "]";
    }
    return "?";
}

std::size_t action_id(const Grammar& g, const Action& a, std::size_t num_tables) {
    switch (a.kind) {
        case ActionKind::ApplyRule:
            return a.index;
        case ActionKind::SelectTable:
            return g.productions.size() + a.index;
        case ActionKind::SelectColumn:
            return g.productions.size() + num_tables + a.index;
    }
    return 0;
}

Action action_from_id(const Grammar& g, std::size_t id, std::size_t num_tables) {
    const std::size_t P = g.productions.size();
    if (id < P) return {ActionKind::ApplyRule, id};
    if (id < P + num_tables) return {ActionKind::SelectTable, id - P};
    return {ActionKind::SelectColumn, id - P - num_tables};
}

Derivation::Derivation(const Grammar& g, std::size_t num_tables, std::size_t num_columns)
    : g_(&g), tables_(num_tables), columns_(num_columns) {
    frontier_.push_back({g.root, 0});
}

const FrontierItem& Derivation::top() const {
    if (frontier_.empty()) throw ContractError("derivation is complete");
    return frontier_.back();
}

bool Derivation::is_legal(const Action& a) const {
    if (frontier_.empty()) return false;
    const auto& t = g_->types[frontier_.back().type];
    switch (a.kind) {
        case ActionKind::ApplyRule:
            return t.terminal == TerminalKind::None && a.index < g_->productions.size() &&
                   g_->productions[a.index].type == frontier_.back().type;
        case ActionKind::SelectTable:
            return t.terminal == TerminalKind::Table && a.index < tables_;
        case ActionKind::SelectColumn:
            return t.terminal == TerminalKind::Column && a.index < columns_;
    }
    return false;
}

std::vector<std::size_t> Derivation::legal_ids() const {
    std::vector<std::size_t> out;
    if (frontier_.empty()) return out;
    const auto& t = g_->types[frontier_.back().type];
    const std::size_t P = g_->productions.size();
    switch (t.terminal) {
        case TerminalKind::None:
            out = t.productions;
            break;
        case TerminalKind::Table:
            for (std::size_t j = 0; j < tables_; ++j) out.push_back(P + j);
            break;
        case TerminalKind::Column:
            for (std::size_t j = 0; j < columns_; ++j) out.push_back(P + tables_ + j);
            break;
    }
    return out;
}

void Derivation::apply(const Action& a) {
    if (!is_legal(a)) {
        std::string expected = frontier_.empty() ? "end of derivation" : g_->types[frontier_.back().type].name;
        throw DataError("step " + std::to_string(step_) + ": action " + action_str(*g_, a) +
                        " is illegal, expected " + expected);
    }
    frontier_.pop_back();
    if (a.kind == ActionKind::ApplyRule) {
        const auto& fields = g_->productions[a.index].fields;
        for (auto it = fields.rbegin(); it != fields.rend(); ++it) frontier_.push_back({*it, step_});
    }
    ++step_;
}

namespace {

AstNode build(const Grammar& g, const std::vector<Action>& actions, std::size_t& pos) {
    AstNode node{actions.at(pos++), {}};
    if (node.action.kind == ActionKind::ApplyRule) {
        for (std::size_t k = 0; k < g.productions[node.action.index].fields.size(); ++k) {
            node.children.push_back(build(g, actions, pos));
        }
    }
    return node;
}

void flatten(const AstNode& n, std::vector<Action>& out) {
    out.push_back(n.action);
    for (const auto& c : n.children) flatten(c, out);
}

}  // namespace

AstNode actions_to_ast(const Grammar& g, const std::vector<Action>& actions, std::size_t num_tables,
                       std::size_t num_columns) {
    Derivation d(g, num_tables, num_columns);
    for (const auto& a : actions) d.apply(a);
    if (!d.done()) {
        throw DataError("action sequence ends after " + std::to_string(actions.size()) + " steps with " +
                        std::to_string(d.frontier().size()) + " open nodes");
    }
    std::size_t pos = 0;
    return build(g, actions, pos);
}

std::vector<Action> ast_to_actions(const AstNode& root) {
    std::vector<Action> out;
    flatten(root, out);
    return out;
}

}  // namespace sadga::grammar
