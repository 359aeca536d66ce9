#include "sadga/data.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sadga/errors.hpp"

namespace sadga::data {

using nlohmann::json;

const char* hardness_name(Hardness h) {
    switch (h) {
        case Hardness::Easy: return "easy";
        case Hardness::Medium: return "medium";
        case Hardness::Hard: return "hard";
        case Hardness::Extra: return "extra";
    }
    return "?";
}

Hardness parse_hardness(const std::string& text) {
    const std::string t = graph::to_lower(text);
    if (t == "easy") return Hardness::Easy;
    if (t == "medium") return Hardness::Medium;
    if (t == "hard") return Hardness::Hard;
    if (t == "extra" || t == "extra hard" || t == "extra_hard") return Hardness::Extra;
    throw ParseError("unknown hardness label '" + text + "'");
}

const graph::SchemaDef& Dataset::schema(const std::string& db_id) const {
    auto it = schemas.find(db_id);
    if (it == schemas.end()) throw ReferenceError("unknown db_id '" + db_id + "'");
    return it->second;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json(const std::string& text, const std::string& where) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // byte offset -> line number
        const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
        throw ParseError(where + ":" + std::to_string(line) + ": " + e.what());
    }
}

std::vector<std::string> natural_tokens(const json& names, std::size_t i, std::size_t field,
                                        const std::string& original) {
    if (names.is_array() && i < names.size()) {
        const json& entry = field == 0 ? names[i] : names[i][field];
        if (entry.is_string()) {
            auto toks = graph::split_schema_name(entry.get<std::string>());
            if (!toks.empty()) return toks;
        }
    }
    return graph::split_schema_name(original);
}

graph::SchemaDef parse_schema(const json& j) {
    graph::SchemaDef s;
    s.db_id = j.at("db_id").get<std::string>();
    const json& tables = j.at("table_names_original");
    for (std::size_t t = 0; t < tables.size(); ++t) {
        const std::string name = tables[t].get<std::string>();
        s.tables.push_back({name, natural_tokens(j.value("table_names", json()), t, 0, name)});
    }
    const json& cols = j.at("column_names_original");
    const json& types = j.at("column_types");
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const int table = cols[c][0].get<int>();
        const std::string name = cols[c][1].get<std::string>();
        graph::ColumnDef col;
        if (table >= 0) col.table = static_cast<std::size_t>(table);
        col.original_name = name;
        col.name_tokens = name == "*" ? std::vector<std::string>{"*"}
                                      : natural_tokens(j.value("column_names", json()), c, 1, name);
        col.type = graph::parse_column_type(c < types.size() ? types[c].get<std::string>() : "text");
        s.columns.push_back(col);
    }
    for (const json& pk : j.value("primary_keys", json::array())) {
        if (pk.is_array()) {
            for (const json& x : pk) s.primary_keys.push_back(x.get<std::size_t>());
        } else {
            s.primary_keys.push_back(pk.get<std::size_t>());
        }
    }
    for (const json& fk : j.value("foreign_keys", json::array())) {
        const auto col = fk[0].get<std::size_t>(), ref = fk[1].get<std::size_t>();
        if (col < s.columns.size() && ref < s.columns.size() && s.columns[col].table && s.columns[ref].table &&
            *s.columns[col].table == *s.columns[ref].table) {
            std::cerr << "warning: " << s.db_id << ": dropping same-table foreign key (" << col << ", " << ref
                      << ")\n";
            continue;
        }
        s.foreign_keys.emplace_back(col, ref);
    }
    graph::validate_schema(s);
    return s;
}

Example parse_example(const json& j, const std::string& fallback_id) {
    Example e;
    e.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump()) : fallback_id;
    e.db_id = j.at("db_id").get<std::string>();
    e.question = j.value("question", std::string());
    std::vector<std::string> words;
    if (j.contains("tokens")) {
        words = j["tokens"].get<std::vector<std::string>>();
    } else if (j.contains("question_toks")) {
        words = j["question_toks"].get<std::vector<std::string>>();
    } else {
        words = graph::tokenize_question(e.question);
    }
    e.tokens = graph::make_tokens(words);
    if (e.tokens.empty()) throw DataError("example " + e.id + " has an empty question");
    if (j.contains("deps")) {
        for (const json& d : j["deps"]) e.dep_edges.emplace_back(d[0].get<std::size_t>(), d[1].get<std::size_t>());
    }
    if (j.contains("query")) e.sql = j["query"].get<std::string>();
    else e.sql = j.at("sql").get<std::string>();
    if (j.contains("hardness") && !j["hardness"].is_null()) e.hardness = parse_hardness(j["hardness"].get<std::string>());
    return e;
}

void check_references(const std::map<std::string, graph::SchemaDef>& schemas, const std::vector<Example>& examples) {
    for (const auto& e : examples) {
        if (!schemas.count(e.db_id)) {
            throw ReferenceError("example " + e.id + " refers to unknown db_id '" + e.db_id + "'");
        }
    }
}

}  // namespace

std::vector<graph::SchemaDef> load_spider_tables(const std::filesystem::path& path) {
    const json j = parse_json(read_file(path), path.string());
    if (!j.is_array()) throw ParseError(path.string() + ": expected a JSON array of schemas");
    std::vector<graph::SchemaDef> out;
    for (const json& entry : j) {
        try {
            out.push_back(parse_schema(entry));
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ": schema " + entry.value("db_id", std::string("?")) + ": " + e.what());
        }
    }
    return out;
}

void attach_values(std::map<std::string, graph::SchemaDef>& schemas, const std::filesystem::path& path) {
    const json j = parse_json(read_file(path), path.string());
    for (const auto& [db_id, cols] : j.items()) {
        auto it = schemas.find(db_id);
        if (it == schemas.end()) throw ReferenceError(path.string() + ": values for unknown db_id '" + db_id + "'");
        auto& s = it->second;
        for (const auto& [key, values] : cols.items()) {
            const auto dot = key.find('.');
            const std::string table = graph::to_lower(dot == std::string::npos ? "" : key.substr(0, dot));
            const std::string column = graph::to_lower(dot == std::string::npos ? key : key.substr(dot + 1));
            bool found = false;
            for (auto& c : s.columns) {
                if (!c.table || graph::to_lower(c.original_name) != column) continue;
                if (!table.empty() && graph::to_lower(s.tables[*c.table].original_name) != table) continue;
                for (const json& v : values) c.cell_values.push_back(graph::to_lower(v.is_string() ? v.get<std::string>() : v.dump()));
                found = true;
            }
            if (!found) throw ReferenceError(path.string() + ": " + db_id + " has no column '" + key + "'");
        }
    }
}

std::vector<Example> load_examples(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    const std::string stem = path.stem().string();
    std::vector<Example> out;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return out;
    if (text[first] == '[') {
        const json j = parse_json(text, path.string());
        for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_example(j[i], stem + "-" + std::to_string(i)));
        return out;
    }
    std::stringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(where + ": " + e.what());
        }
        try {
            out.push_back(parse_example(j, stem + "-" + std::to_string(out.size())));
        } catch (const json::exception& e) {
            throw ParseError(where + ": " + e.what());
        }
    }
    return out;
}

Dataset load_dataset(const std::filesystem::path& tables, const std::filesystem::path& examples,
                     const std::optional<std::filesystem::path>& values,
                     const std::optional<std::filesystem::path>& dev) {
    Dataset d;
    for (auto& s : load_spider_tables(tables)) {
        const std::string id = s.db_id;
        if (!d.schemas.emplace(id, std::move(s)).second) throw DataError("duplicate db_id '" + id + "'");
    }
    if (values) attach_values(d.schemas, *values);
    d.train = load_examples(examples);
    check_references(d.schemas, d.train);
    if (dev) {
        d.dev = load_examples(*dev);
        check_references(d.schemas, d.dev);
    }
    return d;
}

Dataset load_dataset_dir(const std::filesystem::path& dir) {
    auto optional_file = [&](const char* name) -> std::optional<std::filesystem::path> {
        const auto p = dir / name;
        if (std::filesystem::exists(p)) return p;
        return std::nullopt;
    };
    return load_dataset(dir / "tables.json", dir / "examples.jsonl", optional_file("values.json"),
                        optional_file("dev.jsonl"));
}

namespace {

std::string join_tokens(const std::vector<std::string>& toks) {
    std::string out;
    for (const auto& t : toks) out += (out.empty() ? "" : " ") + t;
    return out;
}

json example_json(const Example& e) {
    json j;
    j["id"] = e.id;
    j["db_id"] = e.db_id;
    j["question"] = e.question;
    std::vector<std::string> toks;
    for (const auto& t : e.tokens) toks.push_back(t.surface);
    j["tokens"] = toks;
    if (!e.dep_edges.empty()) {
        json deps = json::array();
        for (auto [h, d] : e.dep_edges) deps.push_back({h, d});
        j["deps"] = deps;
    }
    j["query"] = e.sql;
    if (e.hardness) j["hardness"] = hardness_name(*e.hardness);
    return j;
}

void write_jsonl(const std::vector<Example>& examples, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& e : examples) out << example_json(e).dump() << "\n";
}

}  // namespace

void write_dataset_dir(const Dataset& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json tables = json::array();
    json values = json::object();
    for (const auto& [db_id, s] : data.schemas) {
        json j;
        j["db_id"] = db_id;
        json tnames = json::array(), tnat = json::array(), cnames = json::array(), cnat = json::array(),
             types = json::array();
        for (const auto& t : s.tables) {
            tnames.push_back(t.original_name);
            tnat.push_back(join_tokens(t.name_tokens));
        }
        static const char* type_names[] = {"text", "number", "time", "boolean", "others"};
        for (const auto& c : s.columns) {
            const int table = c.table ? static_cast<int>(*c.table) : -1;
            cnames.push_back({table, c.original_name});
            cnat.push_back({table, join_tokens(c.name_tokens)});
            types.push_back(type_names[static_cast<int>(c.type)]);
            if (!c.cell_values.empty()) {
                values[db_id][s.tables[*c.table].original_name + "." + c.original_name] = c.cell_values;
            }
        }
        j["table_names_original"] = tnames;
        j["table_names"] = tnat;
        j["column_names_original"] = cnames;
        j["column_names"] = cnat;
        j["column_types"] = types;
        j["primary_keys"] = s.primary_keys;
        json fks = json::array();
        for (auto [c, r] : s.foreign_keys) fks.push_back({c, r});
        j["foreign_keys"] = fks;
        tables.push_back(j);
    }
    std::ofstream(dir / "tables.json") << tables.dump(1) << "\n";
    std::ofstream(dir / "values.json") << values.dump(1) << "\n";
    write_jsonl(data.train, dir / "examples.jsonl");
    if (!data.dev.empty()) write_jsonl(data.dev, dir / "dev.jsonl");
}

std::string summarize(const Dataset& data) {
    std::size_t tables = 0, columns = 0;
    for (const auto& [id, s] : data.schemas) {
        tables += s.tables.size();
        columns += s.columns.size();
    }
    std::ostringstream out;
    out << data.schemas.size() << " schemas (" << tables << " tables, " << columns << " columns), "
        << data.train.size() << " train examples, " << data.dev.size() << " dev examples";
    return out.str();
}

// ---------------------------------------------------------------- synthetic corpus

namespace {

struct Attribute {
    const char* name;
    graph::ColumnType type;
    std::vector<const char*> values;
};

const std::vector<const char*>& table_pool() {
    static const std::vector<const char*> pool = {"singer", "album",  "concert", "stadium", "student", "course",
                                                  "teacher", "airport", "flight", "museum", "painter", "hotel",
                                                  "player",  "team",    "ship",   "river",  "book",    "author"};
    return pool;
}

const std::vector<Attribute>& attribute_pool() {
    using graph::ColumnType;
    static const std::vector<Attribute> pool = {
        {"name", ColumnType::Text, {"alice", "bob", "carol", "dave", "erin", "frank"}},
        {"city", ColumnType::Text, {"paris", "rome", "tokyo", "lima", "oslo", "cairo"}},
        {"country", ColumnType::Text, {"france", "italy", "japan", "peru", "norway", "egypt"}},
        {"genre", ColumnType::Text, {"rock", "jazz", "pop", "folk", "blues"}},
        {"color", ColumnType::Text, {"red", "green", "blue", "black", "white"}},
        {"title", ColumnType::Text, {"dawn", "echo", "summit", "harbor", "meadow"}},
        {"age", ColumnType::Number, {}},
        {"year", ColumnType::Number, {}},
        {"price", ColumnType::Number, {}},
        {"rating", ColumnType::Number, {}},
        {"capacity", ColumnType::Number, {}},
        {"salary", ColumnType::Number, {}},
        {"height", ColumnType::Number, {}},
        {"budget", ColumnType::Number, {}},
    };
    return pool;
}

class Synth {
   public:
    explicit Synth(std::uint64_t seed) : rng_(seed) {}

    std::size_t uniform(std::size_t lo, std::size_t hi) {  // inclusive
        return lo + static_cast<std::size_t>(rng_() % (hi - lo + 1));
    }
    template <typename T>
    const T& choose(const std::vector<T>& v) {
        return v[uniform(0, v.size() - 1)];
    }
    bool coin() { return (rng_() & 1) != 0; }

    graph::SchemaDef schema(const std::string& db_id) {
        using graph::ColumnType;
        graph::SchemaDef s;
        s.db_id = db_id;
        std::vector<const char*> names = table_pool();
        shuffle(names);
        const std::size_t T = uniform(2, 4);
        s.columns.push_back({std::nullopt, "*", {"*"}, ColumnType::Text, {}});
        std::vector<std::size_t> pk(T);
        // parent of each table for the 1-2 foreign keys
        std::vector<std::optional<std::size_t>> parent(T);
        parent[1] = 0;
        if (T >= 3 && coin()) parent[2] = uniform(0, 1);
        for (std::size_t t = 0; t < T; ++t) {
            const std::string tname = names[t];
            s.tables.push_back({tname, graph::split_schema_name(tname)});
            pk[t] = add_column(s, t, tname + "_id", ColumnType::Number, {});
            s.primary_keys.push_back(pk[t]);
            if (parent[t]) {
                const std::size_t fk = add_column(s, t, s.tables[*parent[t]].original_name + "_id", ColumnType::Number, {});
                s.foreign_keys.emplace_back(fk, pk[*parent[t]]);
            }
            // at least one text and one numeric attribute, plus an optional extra
            std::vector<const Attribute*> text, num;
            for (const auto& a : attribute_pool()) (a.type == ColumnType::Text ? text : num).push_back(&a);
            shuffle(text);
            shuffle(num);
            std::vector<const Attribute*> attrs = {text[0], num[0]};
            if (s.columns.size() - pk[t] < 3 && coin()) attrs.push_back(coin() ? text[1] : num[1]);
            for (const Attribute* a : attrs) {
                std::vector<std::string> values;
                if (!a->values.empty()) {
                    std::vector<const char*> v = a->values;
                    shuffle(v);
                    values.assign(v.begin(), v.begin() + 3);
                }
                add_column(s, t, a->name, a->type, values);
            }
        }
        graph::validate_schema(s);
        return s;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform(0, i - 1)]);
    }

    std::mt19937_64 rng_;

   private:
    static std::size_t add_column(graph::SchemaDef& s, std::size_t table, const std::string& name,
                                  graph::ColumnType type, std::vector<std::string> values) {
        s.columns.push_back({table, name, graph::split_schema_name(name), type, std::move(values)});
        return s.columns.size() - 1;
    }
};

struct Picked {
    std::string question;
    std::string sql;
    Hardness hardness;
};

std::vector<std::size_t> columns_of(const graph::SchemaDef& s, std::size_t t, bool numeric_attr, bool text_attr) {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < s.columns.size(); ++c) {
        const auto& col = s.columns[c];
        if (!col.table || *col.table != t) continue;
        const bool is_key = col.original_name.size() > 3 &&
                            col.original_name.compare(col.original_name.size() - 3, 3, "_id") == 0;
        if (is_key) continue;
        if (numeric_attr && col.type != graph::ColumnType::Number) continue;
        if (text_attr && col.type != graph::ColumnType::Text) continue;
        out.push_back(c);
    }
    return out;
}

std::optional<Picked> make_question(Synth& r, const graph::SchemaDef& s, std::size_t template_id) {
    const std::size_t t = r.uniform(0, s.tables.size() - 1);
    const std::string table = s.tables[t].original_name;
    auto name = [&](std::size_t c) { return s.columns[c].original_name; };
    const auto attrs = columns_of(s, t, false, false);
    const auto nums = columns_of(s, t, true, false);
    const auto texts = columns_of(s, t, false, true);
    switch (template_id) {
        case 0: {
            const std::size_t c = r.choose(attrs);
            return Picked{"list the " + name(c) + " of all " + table + "s", "select " + name(c) + " from " + table,
                          Hardness::Easy};
        }
        case 1:
            return Picked{"how many " + table + "s are there", "select count(*) from " + table, Hardness::Easy};
        case 2: {
            static const std::vector<std::pair<const char*, const char*>> aggs = {
                {"maximum", "max"}, {"minimum", "min"}, {"average", "avg"}, {"total", "sum"}};
            const auto& [word, fn] = r.choose(aggs);
            const std::size_t c = r.choose(nums);
            return Picked{"what is the " + std::string(word) + " " + name(c) + " of " + table + "s",
                          "select " + std::string(fn) + "(" + name(c) + ") from " + table, Hardness::Easy};
        }
        case 3: {
            const std::size_t c = r.choose(attrs), f = r.choose(texts);
            if (c == f) return std::nullopt;
            const std::string v = r.choose(s.columns[f].cell_values);
            return Picked{"show the " + name(c) + " of " + table + "s whose " + name(f) + " is " + v,
                          "select " + name(c) + " from " + table + " where " + name(f) + " = '" + v + "'",
                          Hardness::Easy};
        }
        case 4: {
            const std::size_t c = r.choose(attrs), f = r.choose(nums);
            if (c == f) return std::nullopt;
            const std::string k = std::to_string(r.uniform(2, 99));
            return Picked{"show the " + name(c) + " of " + table + "s with " + name(f) + " greater than " + k,
                          "select " + name(c) + " from " + table + " where " + name(f) + " > " + k, Hardness::Easy};
        }
        case 5: {
            // child table joined with the table its foreign key points to
            for (auto [fk, pk] : s.foreign_keys) {
                if (*s.columns[fk].table != t) continue;
                const std::size_t p = *s.columns[pk].table;
                const std::size_t a = r.choose(attrs), b = r.choose(columns_of(s, p, false, false));
                const std::string parent = s.tables[p].original_name;
                return Picked{"show the " + name(a) + " of each " + table + " and the " + name(b) + " of its " + parent,
                              "select T1." + name(a) + ", T2." + name(b) + " from " + table + " as T1 join " + parent +
                                  " as T2 on T1." + name(fk) + " = T2." + name(pk),
                              Hardness::Medium};
            }
            return std::nullopt;
        }
        case 6: {
            const std::size_t c = r.choose(attrs), o = r.choose(nums);
            const bool desc = r.coin();
            return Picked{"list the " + name(c) + " of " + table + "s ordered by " + name(o) +
                              (desc ? " descending" : " ascending"),
                          "select " + name(c) + " from " + table + " order by " + name(o) + (desc ? " desc" : " asc"),
                          Hardness::Medium};
        }
        case 7: {
            const std::size_t g = r.choose(texts);
            return Picked{"how many " + table + "s are there for each " + name(g),
                          "select " + name(g) + ", count(*) from " + table + " group by " + name(g), Hardness::Medium};
        }
        case 8: {
            const std::size_t c = r.choose(attrs), o = r.choose(nums);
            if (c == o) return std::nullopt;
            return Picked{"which " + table + " has the highest " + name(o) + " ? give its " + name(c),
                          "select " + name(c) + " from " + table + " order by " + name(o) + " desc limit 1",
                          Hardness::Medium};
        }
    }
    return std::nullopt;
}

constexpr std::size_t kTemplates = 9;

}  // namespace

Dataset gen_synthetic(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ArgumentError("gen_synthetic: n must be at least 1");
    Synth r(seed);
    Dataset d;
    const std::size_t num_schemas = std::max<std::size_t>(1, (n + 9) / 10);
    std::vector<std::string> ids;
    for (std::size_t k = 0; k < num_schemas; ++k) {
        const std::string id = "synth_" + std::to_string(k);
        d.schemas.emplace(id, r.schema(id));
        ids.push_back(id);
    }
    std::set<std::pair<std::string, std::string>> seen;
    std::size_t attempts = 0;
    while (d.train.size() < n) {
        if (++attempts > 1000 * n) throw DataError("gen_synthetic: could not produce enough distinct examples");
        const std::string& db = ids[d.train.size() % ids.size()];
        const std::size_t tpl = r.uniform(0, kTemplates - 1);
        auto q = make_question(r, d.schemas.at(db), tpl);
        // distinct questions per schema keep the corpus learnable
        if (!q || !seen.emplace(db, q->question).second) continue;
        Example e;
        e.id = "synth-" + std::to_string(d.train.size());
        e.db_id = db;
        e.question = q->question;
        e.tokens = graph::make_tokens(graph::tokenize_question(q->question));
        e.sql = q->sql;
        e.hardness = q->hardness;
        d.train.push_back(std::move(e));
    }
    return d;
}

}  // namespace sadga::data
