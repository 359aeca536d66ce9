#include <random>

#include "sadga/errors.hpp"
#include "sadga/model.hpp"
#include "sadga/ops.hpp"

namespace sadga::model {

using namespace ad;

namespace {

Tensor uniform_tensor(const Shape& shape, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = d(rng);
    return Tensor::from(shape, v);
}

// Fixed random weighting so every output element reaches the scalar.
Tensor probe(const Tensor& y, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sum(mul(y, uniform_tensor(y.shape(), rng)));
}

// Biases start at zero; random values exercise every path.
void randomize(ParameterStore& store, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-0.5, 0.5);
    for (const auto& [name, t] : store.all()) {
        Tensor handle = t;
        for (auto& x : handle.mutable_values()) x = d(rng);
    }
}

GradcheckReport check_ggnn() {
    ParameterStore store(13);
    const auto p = make_ggnn_params(store, "ggnn.", 8, 2);
    randomize(store, 5);
    graph::RelGraph g;
    g.node_count = 6;
    for (std::size_t i = 0; i + 1 < 6; ++i) g.add_edge(i, i + 1, graph::RelationType::Dist1);
    g.add_edge(0, 3, graph::RelationType::SameTable);
    g.add_edge(2, 5, graph::RelationType::ColColPKFK);
    const auto levi = graph::levi_transform(g);
    std::mt19937_64 rng(6);
    const Tensor h = uniform_tensor({levi.node_count(), 8}, rng);
    return gradcheck([&] { return probe(ggnn_encode(levi, h, p), 77); }, store);
}

// Five question words against seven schema nodes (two tables, five columns).
graph::SchemaDef owner_pet_schema() {
    using graph::ColumnType;
    graph::SchemaDef s;
    s.db_id = "owner_pet";
    s.tables = {{"owner", {"owner"}}, {"pet", {"pet"}}};
    s.columns = {{std::nullopt, "*", {"*"}, ColumnType::Text, {}},
                 {0, "owner_id", {"owner", "id"}, ColumnType::Number, {}},
                 {0, "name", {"name"}, ColumnType::Text, {"bob", "ann"}},
                 {1, "owner_id", {"owner", "id"}, ColumnType::Number, {}},
                 {1, "type", {"type"}, ColumnType::Text, {"dog"}}};
    s.primary_keys = {1};
    s.foreign_keys = {{3, 1}};
    return s;
}

GradcheckReport check_sadga() {
    const auto schema = owner_pet_schema();
    const auto tokens = graph::make_tokens({"which", "pet", "type", "bob", "owns"});
    const auto graphs = build_dual_graph(tokens, {{4, 3}}, schema);
    ParameterStore store(41);
    Vocabulary vocab;
    for (const auto& t : tokens) vocab.add(t.surface);
    const auto tables = make_embedding_tables(store, "emb.", vocab.size(), 8, 8);
    const std::vector<SadgaLayerParams> layers{make_sadga_layer_params(store, "sadga0.", 8, 2, {})};
    randomize(store, 17);
    std::mt19937_64 rng(3);
    const Tensor q = uniform_tensor({5, 8}, rng), s = uniform_tensor({7, 8}, rng);
    return gradcheck(
        [&] {
            auto out = sadga_stack(graphs, q, s, tables, layers, {});
            return add(probe(out.question, 1), probe(out.schema, 2));
        },
        store);
}

RelationMatrix random_relations(std::size_t L, std::mt19937_64& rng) {
    RelationMatrix rel(L);
    std::uniform_int_distribution<int> pick(0, graph::kNumRelationSlots - 1);
    for (auto& cell : rel.cells) cell = static_cast<graph::RelationType>(pick(rng));
    return rel;
}

GradcheckReport check_rat() {
    ParameterStore store(9);
    const auto p = make_rat_layer_params(store, "rat.", 8, 2, 32);
    randomize(store, 4);
    std::mt19937_64 rng(2);
    const Tensor x = uniform_tensor({5, 8}, rng);
    const auto rel = random_relations(5, rng);
    return gradcheck([&] { return probe(rat_layer(x, rel, p), 3); }, store);
}

// Pair, Tab, table, table, column.
const char* kPairGrammar = R"(root a
a -> Pair(b, column) | Single(column)
b -> Tab(table, table) | Col(column)
)";

GradcheckReport check_decoder() {
    using grammar::Action;
    using grammar::ActionKind;
    const auto g = grammar::compile_grammar(kPairGrammar);
    DecoderConfig c;
    c.d = 8;
    c.hidden = 6;
    c.rule_dim = 4;
    c.type_dim = 3;
    c.mlp_hidden = 5;
    ParameterStore store(7);
    const auto p = make_decoder_params(store, "dec.", g, c);
    randomize(store, 12);
    const std::size_t words = 3, tables = 2, columns = 3, L = words + tables + columns;
    std::mt19937_64 rng(11);
    const Tensor states = uniform_tensor({L, c.d}, rng);
    const auto rel = random_relations(L, rng);
    const std::vector<Action> gold = {{ActionKind::ApplyRule, g.production_id("a", "Pair")},
                                      {ActionKind::ApplyRule, g.production_id("b", "Tab")},
                                      {ActionKind::SelectTable, 1},
                                      {ActionKind::SelectTable, 0},
                                      {ActionKind::SelectColumn, 2}};
    return gradcheck(
        [&] {
            const auto memory = prepare_memory(states, words, tables, columns, rel, p);
            return teacher_forced_loss(gold, memory, g, p);
        },
        store);
}

}  // namespace

std::vector<std::string> gradcheck_modules() { return {"ggnn", "sadga", "rat", "decoder"}; }

GradcheckReport gradcheck_module(const std::string& name) {
    if (name == "ggnn") return check_ggnn();
    if (name == "sadga") return check_sadga();
    if (name == "rat") return check_rat();
    if (name == "decoder") return check_decoder();
    throw ArgumentError("unknown gradcheck module '" + name + "' (expected ggnn, sadga, rat or decoder)");
}

}  // namespace sadga::model
