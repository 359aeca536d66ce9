#include "sadga/graph.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "sadga/errors.hpp"

namespace sadga::graph {

namespace {

constexpr std::array<RelationInfo, kNumRelations> kInventory{{
    {RelationType::Dist1, "question", "Word", "Word", "1-order Word Distance"},
    {RelationType::Dist2, "question", "Word", "Word", "2-order Word Distance"},
    {RelationType::DepParse, "question", "Word", "Word", "Parsing-based Dependency"},
    {RelationType::SameTable, "schema", "Column", "Column", "Same Table Match"},
    {RelationType::ColColPKFK, "schema", "Column", "Column", "Primary-Foreign Key"},
    {RelationType::ForeignKeyColTab, "schema", "Column", "Table", "Foreign Key"},
    {RelationType::PrimaryKeyColTab, "schema", "Column", "Table", "Primary Key"},
    {RelationType::TableColumnMatch, "schema", "Column", "Table", "Table-Column Match"},
    {RelationType::TabTabPKFK, "schema", "Table", "Table", "Primary-Foreign Key"},
    {RelationType::ExactMatchWordTab, "cross", "Word", "Table", "Exact String Match"},
    {RelationType::PartialMatchWordTab, "cross", "Word", "Table", "Partial String Match"},
    {RelationType::ExactMatchWordCol, "cross", "Word", "Column", "Exact String Match"},
    {RelationType::PartialMatchWordCol, "cross", "Word", "Column", "Partial String Match"},
    {RelationType::ValueMatch, "cross", "Word", "Column", "Value Match"},
}};

bool token_matches(const Token& word, const std::string& name_token) {
    return word.surface == name_token || word.lemma == name_token || word.lemma == lemmatize(name_token);
}

bool contains_name(const std::vector<Token>& tokens, const std::vector<std::string>& name) {
    if (name.empty() || name.size() > tokens.size()) return false;
    for (std::size_t start = 0; start + name.size() <= tokens.size(); ++start) {
        bool all = true;
        for (std::size_t k = 0; k < name.size() && all; ++k) all = token_matches(tokens[start + k], name[k]);
        if (all) return true;
    }
    return false;
}

bool part_of_name(const Token& word, const std::vector<std::string>& name) {
    return std::any_of(name.begin(), name.end(), [&](const std::string& n) { return token_matches(word, n); });
}

bool value_match(const Token& word, const std::vector<std::string>& values) {
    for (const auto& value : values) {
        const std::string v = to_lower(value);
        if (v == word.surface || v == word.lemma) return true;
        for (const auto& piece : tokenize_question(v)) {
            if (piece == word.surface || piece == word.lemma) return true;
        }
    }
    return false;
}

}  // namespace

std::span<const RelationInfo> relation_inventory() { return kInventory; }

const char* relation_name(RelationType rel) {
    switch (rel) {
        case RelationType::Dist1: return "Dist1";
        case RelationType::Dist2: return "Dist2";
        case RelationType::DepParse: return "DepParse";
        case RelationType::SameTable: return "SameTable";
        case RelationType::ColColPKFK: return "ColColPKFK";
        case RelationType::ForeignKeyColTab: return "ForeignKeyColTab";
        case RelationType::PrimaryKeyColTab: return "PrimaryKeyColTab";
        case RelationType::TableColumnMatch: return "TableColumnMatch";
        case RelationType::TabTabPKFK: return "TabTabPKFK";
        case RelationType::ExactMatchWordTab: return "ExactMatchWordTab";
        case RelationType::PartialMatchWordTab: return "PartialMatchWordTab";
        case RelationType::ExactMatchWordCol: return "ExactMatchWordCol";
        case RelationType::PartialMatchWordCol: return "PartialMatchWordCol";
        case RelationType::ValueMatch: return "ValueMatch";
        case RelationType::NoMatch: return "NoMatch";
    }
    return "?";
}

std::size_t relation_index(RelationType rel) { return static_cast<std::size_t>(rel); }

bool is_cross_relation(RelationType rel) {
    return rel >= RelationType::ExactMatchWordTab && rel <= RelationType::ValueMatch;
}

std::string to_lower(std::string text) {
    for (auto& ch : text) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return text;
}

std::string lemmatize(const std::string& word) {
    const std::string w = to_lower(word);
    auto ends_with = [&](const char* suffix) {
        const std::string s(suffix);
        return w.size() > s.size() + 1 && w.compare(w.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with("ies")) return w.substr(0, w.size() - 3) + "y";
    if (ends_with("sses") || ends_with("xes") || ends_with("ches") || ends_with("shes")) {
        return w.substr(0, w.size() - 2);
    }
    if (ends_with("s") && !ends_with("ss") && !ends_with("us") && !ends_with("is")) {
        return w.substr(0, w.size() - 1);
    }
    return w;
}

std::vector<std::string> tokenize_question(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(to_lower(cur));
        cur.clear();
    };
    for (char ch : text) {
        const auto uch = static_cast<unsigned char>(ch);
        if (std::isalnum(uch) || ch == '_' || ch == '-' || ch == '.' || uch >= 0x80) {
            // keeps decimals like 3.5 together; trailing periods are stripped below
            cur.push_back(ch);
        } else if (std::isspace(uch)) {
            flush();
        } else {
            flush();
            out.emplace_back(1, ch);
        }
    }
    flush();
    std::vector<std::string> cleaned;
    for (auto& tok : out) {
        while (tok.size() > 1 && (tok.back() == '.' || tok.back() == '-')) {
            tok.pop_back();
        }
        if (!tok.empty()) cleaned.push_back(tok);
    }
    return cleaned;
}

std::vector<Token> make_tokens(const std::vector<std::string>& words) {
    std::vector<Token> tokens;
    tokens.reserve(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (words[i].empty()) throw ValidationError("empty token at position " + std::to_string(i));
        const std::string lower = to_lower(words[i]);
        tokens.push_back({lower, lemmatize(lower), i});
    }
    return tokens;
}

std::vector<std::string> split_schema_name(const std::string& name) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : name) {
        if (ch == '_' || ch == ' ') {
            if (!cur.empty()) out.push_back(to_lower(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) out.push_back(to_lower(cur));
    return out;
}

ColumnType parse_column_type(const std::string& text) {
    const std::string t = to_lower(text);
    if (t == "text") return ColumnType::Text;
    if (t == "number") return ColumnType::Number;
    if (t == "time") return ColumnType::Time;
    if (t == "boolean") return ColumnType::Boolean;
    return ColumnType::Others;
}

void validate_schema(const SchemaDef& schema) {
    const std::size_t nc = schema.columns.size();
    for (std::size_t c = 0; c < nc; ++c) {
        const auto& t = schema.columns[c].table;
        if (t && *t >= schema.tables.size()) {
            throw ValidationError(schema.db_id + ": column " + std::to_string(c) + " references table " +
                                  std::to_string(*t) + " which does not exist");
        }
    }
    for (std::size_t pk : schema.primary_keys) {
        if (pk >= nc) throw ValidationError(schema.db_id + ": dangling primary key " + std::to_string(pk));
        if (schema.is_wildcard(pk)) throw ValidationError(schema.db_id + ": wildcard column cannot be a key");
    }
    for (auto [col, ref] : schema.foreign_keys) {
        if (col >= nc || ref >= nc) {
            throw ValidationError(schema.db_id + ": dangling foreign key (" + std::to_string(col) + ", " +
                                  std::to_string(ref) + ")");
        }
        if (schema.is_wildcard(col) || schema.is_wildcard(ref)) {
            throw ValidationError(schema.db_id + ": foreign key touches the wildcard column");
        }
        if (*schema.columns[col].table == *schema.columns[ref].table) {
            throw ValidationError(schema.db_id + ": foreign key (" + std::to_string(col) + ", " +
                                  std::to_string(ref) + ") stays within one table");
        }
    }
}

bool RelGraph::has_edge(std::size_t i, std::size_t j, RelationType rel) const {
    return std::any_of(edges.begin(), edges.end(), [&](const Edge& e) {
        return e.rel == rel && ((e.i == i && e.j == j) || (e.i == j && e.j == i));
    });
}

bool RelGraph::add_edge(std::size_t i, std::size_t j, RelationType rel) {
    if (i == j) throw ValidationError("self-relation on node " + std::to_string(i));
    if (i >= node_count || j >= node_count) throw ValidationError("edge endpoint out of range");
    if (has_edge(i, j, rel)) return false;
    edges.push_back({i, j, rel});
    return true;
}

RelGraph build_question_graph(const std::vector<Token>& tokens,
                              const std::vector<std::pair<std::size_t, std::size_t>>& dep_edges) {
    if (tokens.empty()) throw ValidationError("question has no tokens");
    RelGraph g;
    g.node_count = tokens.size();
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) g.add_edge(i, i + 1, RelationType::Dist1);
    for (std::size_t i = 0; i + 2 < tokens.size(); ++i) g.add_edge(i, i + 2, RelationType::Dist2);
    for (auto [head, dep] : dep_edges) {
        if (head >= tokens.size() || dep >= tokens.size()) {
            throw ValidationError("dependency edge (" + std::to_string(head) + ", " + std::to_string(dep) +
                                  ") out of range for " + std::to_string(tokens.size()) + " tokens");
        }
        if (head == dep) continue;
        g.add_edge(head, dep, RelationType::DepParse);
    }
    return g;
}

RelGraph build_schema_graph(const SchemaDef& schema) {
    validate_schema(schema);
    RelGraph g;
    g.node_count = schema.node_count();
    const std::size_t nc = schema.columns.size();
    auto col = [&](std::size_t c) { return schema.column_node(c); };
    auto tab = [&](std::size_t t) { return schema.table_node(t); };

    for (std::size_t a = 0; a < nc; ++a) {
        if (schema.is_wildcard(a)) continue;
        for (std::size_t b = a + 1; b < nc; ++b) {
            if (schema.is_wildcard(b)) continue;
            if (*schema.columns[a].table == *schema.columns[b].table) {
                g.add_edge(col(a), col(b), RelationType::SameTable);
            }
        }
    }
    for (auto [c, ref] : schema.foreign_keys) {
        g.add_edge(col(c), col(ref), RelationType::ColColPKFK);
        g.add_edge(col(c), tab(*schema.columns[c].table), RelationType::ForeignKeyColTab);
        g.add_edge(tab(*schema.columns[c].table), tab(*schema.columns[ref].table), RelationType::TabTabPKFK);
    }
    for (std::size_t pk : schema.primary_keys) {
        g.add_edge(col(pk), tab(*schema.columns[pk].table), RelationType::PrimaryKeyColTab);
    }
    for (std::size_t c = 0; c < nc; ++c) {
        if (schema.is_wildcard(c)) {
            for (std::size_t t = 0; t < schema.tables.size(); ++t) {
                g.add_edge(col(c), tab(t), RelationType::TableColumnMatch);
            }
        } else {
            g.add_edge(col(c), tab(*schema.columns[c].table), RelationType::TableColumnMatch);
        }
    }
    return g;
}

CrossRelMatrix CrossRelMatrix::transposed() const {
    CrossRelMatrix t(cols, rows);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) t.at(j, i) = at(i, j);
    return t;
}

std::vector<std::size_t> CrossRelMatrix::indices() const {
    std::vector<std::size_t> out(cells.size());
    for (std::size_t k = 0; k < cells.size(); ++k) out[k] = relation_index(cells[k]);
    return out;
}

CrossRelMatrix link_cross_graph(const std::vector<Token>& tokens, const SchemaDef& schema) {
    CrossRelMatrix m(tokens.size(), schema.node_count());
    std::vector<bool> table_named(schema.tables.size());
    for (std::size_t t = 0; t < schema.tables.size(); ++t) {
        table_named[t] = contains_name(tokens, schema.tables[t].name_tokens);
    }
    std::vector<bool> column_named(schema.columns.size());
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        column_named[c] = !schema.is_wildcard(c) && contains_name(tokens, schema.columns[c].name_tokens);
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        for (std::size_t t = 0; t < schema.tables.size(); ++t) {
            if (part_of_name(tokens[i], schema.tables[t].name_tokens)) {
                m.at(i, schema.table_node(t)) =
                    table_named[t] ? RelationType::ExactMatchWordTab : RelationType::PartialMatchWordTab;
            }
        }
        for (std::size_t c = 0; c < schema.columns.size(); ++c) {
            if (schema.is_wildcard(c)) continue;
            const auto& column = schema.columns[c];
            RelationType rel = RelationType::NoMatch;
            if (part_of_name(tokens[i], column.name_tokens)) {
                rel = column_named[c] ? RelationType::ExactMatchWordCol : RelationType::PartialMatchWordCol;
            } else if (value_match(tokens[i], column.cell_values)) {
                rel = RelationType::ValueMatch;
            }
            m.at(i, schema.column_node(c)) = rel;
        }
    }
    return m;
}

LeviGraph levi_transform(const RelGraph& graph) {
    LeviGraph levi;
    levi.base_node_count = graph.node_count;
    levi.base_adjacency.assign(graph.node_count, {});
    std::vector<std::set<std::size_t>> neighbors(graph.node_count);
    for (const auto& e : graph.edges) {
        const std::size_t lo = std::min(e.i, e.j), hi = std::max(e.i, e.j);
        const std::size_t r = graph.node_count + levi.relation_nodes.size();
        levi.relation_nodes.push_back(e.rel);
        levi.typed_edges.push_back({lo, r, EdgeType::Forward});
        levi.typed_edges.push_back({r, hi, EdgeType::Forward});
        levi.typed_edges.push_back({r, lo, EdgeType::Backward});
        levi.typed_edges.push_back({hi, r, EdgeType::Backward});
        neighbors[lo].insert(hi);
        neighbors[hi].insert(lo);
    }
    for (std::size_t v = 0; v < levi.node_count(); ++v) {
        levi.typed_edges.push_back({v, v, EdgeType::SelfLoop});
    }
    for (std::size_t v = 0; v < graph.node_count; ++v) {
        levi.base_adjacency[v].assign(neighbors[v].begin(), neighbors[v].end());
    }
    return levi;
}

}  // namespace sadga::graph
