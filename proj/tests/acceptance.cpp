// Acceptance driver: one PASS/FAIL line per criterion. Pass criterion numbers
// (1-8) to run a subset; exit status is non-zero when any selected one fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <unistd.h>

#include "oracles.hpp"
#include "sadga/data.hpp"
#include "sadga/model.hpp"
#include "test_fixtures.hpp"
#include "test_util.hpp"

using namespace sadga;
using namespace sadga::model;
using ad::ParameterStore;
using ad::Tensor;
using oracle::Mat;
using testing_util::random_tensor;

namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects failures; the first few are kept for the report line.
struct Checker {
    std::size_t checks = 0, failures = 0;
    std::vector<std::string> notes;

    void expect(bool ok, const std::string& what) {
        ++checks;
        if (ok) return;
        ++failures;
        if (notes.size() < 3) notes.push_back(what);
    }
    Outcome outcome(const std::string& summary) const {
        std::string d = summary;
        if (failures > 0) {
            d += "; " + std::to_string(failures) + " failed:";
            for (const auto& n : notes) d += " [" + n + "]";
        }
        return {failures == 0, d};
    }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("sadga_acceptance_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double max_diff(const Tensor& t, const Mat& m) {
    if (t.rows() != m.size() || (m.size() > 0 && t.cols() != m[0].size())) return INFINITY;
    double worst = 0.0;
    for (std::size_t r = 0; r < m.size(); ++r)
        for (std::size_t c = 0; c < m[r].size(); ++c) worst = std::max(worst, std::abs(t.at(r, c) - m[r][c]));
    return worst;
}

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

struct AggInstance {
    ParameterStore store;
    AggregationParams p;
    Tensor q, k;
    graph::CrossRelMatrix cross;
    oracle::Adj adj;

    AggInstance(std::size_t m, std::size_t n, std::size_t d, std::uint64_t seed, double scale = 0.5) : store(seed) {
        p = make_aggregation_params(store, "a.", d);
        testing_util::randomize(store, seed + 1, -scale, scale);
        std::mt19937_64 rng(seed + 2);
        q = random_tensor({m, d}, rng);
        k = random_tensor({n, d}, rng);
        cross = oracle::random_cross(m, n, rng);
        adj = oracle::random_adjacency(n, rng);
    }
};

DecoderConfig tiny_decoder(std::size_t d) {
    DecoderConfig c;
    c.d = d;
    c.hidden = 6;
    c.rule_dim = 4;
    c.type_dim = 3;
    c.mlp_hidden = 5;
    return c;
}

const char* kPairGrammar = R"(root a
a -> Pair(b, column) | Single(column)
b -> Tab(table, table) | Col(column)
)";

// ---------------------------------------------------------------------------

Outcome gradient_integrity() {
    const auto start = std::chrono::steady_clock::now();
    Checker ck;
    double worst = 0.0;
    for (const auto& name : gradcheck_modules()) {
        const auto r = gradcheck_module(name);
        worst = std::max(worst, r.max_rel_error);
        ck.expect(r.passed && r.max_rel_error < 1e-4, name + " max rel " + fmt("%.2e", r.max_rel_error));
        ck.expect(r.checked_elements > 0, name + " checked nothing");
    }
    const double secs = seconds_since(start);
    ck.expect(secs < 300.0, "took " + fmt("%.0fs", secs));
    return ck.outcome("ggnn, sadga layer, rat layer, 5-step decode; max rel error " + fmt("%.2e", worst) + " in " +
                      fmt("%.1fs", secs));
}

Outcome formula_oracles() {
    Checker ck;
    double worst = 0.0;
    auto compare = [&](const std::string& what, double diff) {
        worst = std::max(worst, diff);
        ck.expect(diff <= 1e-12, what + " off by " + fmt("%.2e", diff));
    };
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::string tag = " seed " + std::to_string(seed);

        // GGNN step over the schema Levi graph
        {
            ParameterStore store(seed + 1);
            const auto p = make_ggnn_params(store, "g.", 5, 1);
            testing_util::randomize(store, seed + 2);
            const auto levi = graph::levi_transform(graph::build_schema_graph(testing_fixtures::pets_schema()));
            std::mt19937_64 rng(seed + 3);
            const Tensor h = random_tensor({levi.node_count(), 5}, rng);
            compare("ggnn" + tag, max_diff(ggnn_step(levi, h, p), oracle::ggnn_step(levi, oracle::M(h), p)));
        }

        // aggregation pieces and their composition
        {
            AggInstance inst(2 + seed % 4, 3 + seed % 5, 6, 100 + seed);
            oracle::Aggregation s(inst.p);
            const Mat q = oracle::M(inst.q), k0 = oracle::M(inst.k);
            compare("pool" + tag, max_diff(global_pool_update(inst.q, inst.k, inst.p), s.pool(q, k0)));
            compare("alpha" + tag, max_diff(global_linking(inst.q, inst.k, inst.cross, inst.p, {}), s.alpha(q, k0, inst.cross)));
            const Tensor beta = local_linking(inst.q, inst.k, inst.adj, inst.cross, inst.p, {});
            const auto obeta = s.beta(q, k0, inst.adj, inst.cross);
            compare("beta" + tag, max_diff(beta, oracle::flatten(obeta)));
            const Tensor hk = neighbor_aggregate(inst.k, beta, q.size(), inst.p, {});
            const auto ohk = s.hk(k0, obeta);
            compare("neighbor" + tag, max_diff(hk, oracle::flatten(ohk)));
            const Tensor alpha = global_linking(inst.q, inst.k, inst.cross, inst.p, {});
            compare("update" + tag, max_diff(query_update(inst.q, hk, alpha, inst.cross, inst.p, {}),
                                             s.update(q, ohk, s.alpha(q, k0, inst.cross), inst.cross)));
            const Mat k = s.pool(q, k0);
            compare("graph_aggr" + tag,
                    max_diff(graph_aggr(inst.q, inst.k, inst.adj, inst.cross, inst.p, {}),
                             s.update(q, s.hk(k, s.beta(q, k, inst.adj, inst.cross)), s.alpha(q, k, inst.cross),
                                      inst.cross)));
        }

        // transformer block
        {
            ParameterStore store(200 + seed);
            const auto p = make_rat_layer_params(store, "rat.", 8, seed % 2 == 0 ? 2 : 4, 16);
            testing_util::randomize(store, seed + 7);
            std::mt19937_64 rng(seed + 3);
            const Tensor x = random_tensor({5, 8}, rng);
            const auto rel = oracle::random_relations(5, rng);
            compare("rat" + tag, max_diff(rat_layer(x, rel, p), oracle::rat_block(oracle::M(x), rel, p)));
        }

        // pointer alignments and the first decoder step
        {
            const auto& g = grammar::mini_sql_grammar();
            ParameterStore store(300 + seed);
            const auto p = make_decoder_params(store, "dec.", g, tiny_decoder(8));
            testing_util::randomize(store, seed + 11);
            const std::size_t words = 3, tables = 2, columns = 3, L = words + tables + columns;
            std::mt19937_64 rng(seed + 5);
            const Tensor states = random_tensor({L, 8}, rng);
            const auto rel = oracle::random_relations(L, rng);
            const auto h = oracle::M(states);
            const auto m = pointer_alignments(states, words, tables, columns, rel, p);
            compare("table pointer" + tag, max_diff(m.tables, oracle::pointer_alignment(h, rel, p.tables, words, tables)));
            compare("column pointer" + tag,
                    max_diff(m.columns, oracle::pointer_alignment(h, rel, p.columns, words + tables, columns)));

            const auto memory = prepare_memory(states, words, tables, columns, rel, p);
            const auto out = decode_step(start_decoding(g, memory, p), memory, g, p);
            const auto expected = oracle::first_decode_step(states, g, p);
            double d = 0.0;
            for (std::size_t c = 0; c < expected.H.size(); ++c) d = std::max(d, std::abs(out->H.values()[c] - expected.H[c]));
            for (auto id : g.types[g.root].productions)
                d = std::max(d, std::abs(out->log_probs.values()[id] - expected.log_probs[id]));
            compare("decoder step" + tag, d);
        }
    }
    return ck.outcome(std::to_string(ck.checks) + " comparisons, max abs difference " + fmt("%.2e", worst));
}

Outcome relation_inventory_and_linker() {
    using graph::RelationType;
    Checker ck;
    const auto inv = graph::relation_inventory();
    ck.expect(inv.size() == 14, "inventory has " + std::to_string(inv.size()) + " rows");
    std::set<RelationType> seen;
    for (std::size_t k = 0; k < inv.size(); ++k) {
        ck.expect(graph::relation_index(inv[k].type) == k, std::string("row order at ") + inv[k].description);
        ck.expect(inv[k].type != RelationType::NoMatch, "NoMatch listed");
        seen.insert(inv[k].type);
    }
    ck.expect(seen.size() == inv.size(), "duplicate rows");
    const std::size_t per_graph[3] = {3, 6, 5};
    const char* graphs[3] = {"question", "schema", "cross"};
    for (int gi = 0; gi < 3; ++gi) {
        std::size_t n = 0;
        for (const auto& r : inv) n += std::string(r.graph) == graphs[gi];
        ck.expect(n == per_graph[gi], std::string(graphs[gi]) + " rows " + std::to_string(n));
    }

    const auto sp = testing_fixtures::student_professor_schema();
    const auto age_tokens = graph::make_tokens(graph::tokenize_question("What is the age of the student named Bob?"));
    const auto age_links = graph::link_cross_graph(age_tokens, sp);
    for (std::size_t c : testing_fixtures::columns_named(sp, "age"))
        ck.expect(age_links.at(3, sp.column_node(c)) == RelationType::ExactMatchWordCol, "age -> age not exact");

    const auto pets = testing_fixtures::pets_schema();
    const auto tokens = graph::make_tokens(graph::tokenize_question("What is the name of every student who has a dog?"));
    const auto links = graph::link_cross_graph(tokens, pets);
    const std::size_t fname = testing_fixtures::columns_named(pets, "first_name").at(0);
    ck.expect(tokens[3].surface == "name" && links.at(3, pets.column_node(fname)) == RelationType::PartialMatchWordCol,
              "name -> first_name not partial");
    const std::size_t pet_type = testing_fixtures::columns_named(pets, "pet_type").at(0);
    std::size_t dog = 0;
    while (dog < tokens.size() && tokens[dog].surface != "dog") ++dog;
    ck.expect(dog < tokens.size() && links.at(dog, pets.column_node(pet_type)) == RelationType::ValueMatch,
              "dog -> pet_type not a value match");
    return ck.outcome("14 relations; age->age exact, name->first_name partial, dog->pet_type value");
}

Outcome ablation_equivalences() {
    Checker ck;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::mt19937_64 sizes(seed);
        std::uniform_int_distribution<std::size_t> size(1, 7);
        const std::size_t m = size(sizes), n = size(sizes), d = 5;
        AggInstance inst(m, n, d, 500 + seed);
        const std::string tag = " seed " + std::to_string(seed);

        // local linking removed: every neighbor context becomes the pooled key state
        AblationFlags nl;
        nl.no_local_linking = true;
        const Tensor k = global_pool_update(inst.q, inst.k, inst.p);
        const Tensor alpha = global_linking(inst.q, k, inst.cross, inst.p, nl);
        Tensor h_new = Tensor::zeros({m, d});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const std::size_t r = graph::relation_index(inst.cross.at(i, j));
                for (std::size_t c = 0; c < d; ++c) h_new.at(i, c) += alpha.at(i, j) * (k.at(j, c) + inst.p.R_E.at(r, c));
            }
        const Tensor gate = ad::sigmoid(ad::matmul(ad::concat_cols({inst.q, h_new}), inst.p.W_gate));
        const Tensor ref = ad::add(ad::mul(ad::one_minus(gate), inst.q), ad::mul(gate, h_new));
        ck.expect(vals(graph_aggr(inst.q, inst.k, inst.adj, inst.cross, inst.p, nl)) == vals(ref),
                  "no_local_linking" + tag);

        AblationFlags half;
        half.fixed_gate_half = true;
        AggregationTrace tr;
        graph_aggr(inst.q, inst.k, inst.adj, inst.cross, inst.p, half, {}, 0.0, &tr);
        bool all_half = tr.neighbor_gate.numel() == m * n * d;
        for (double g : tr.neighbor_gate.values()) all_half = all_half && g == 0.5;
        ck.expect(all_half, "fixed_gate_half" + tag);

        AblationFlags none;
        none.no_aggregation = true;
        ck.expect(vals(graph_aggr(inst.q, inst.k, inst.adj, inst.cross, inst.p, none)) == vals(inst.q),
                  "no_aggregation" + tag);
    }

    // every flag trains on a synthetic corpus
    auto data = data::gen_synthetic(10, 3);
    const auto train_set = prepare_all(data.train, data);
    const auto flags = ablation_flag_names();
    for (const auto& flag : flags) {
        RunConfig c;
        c.hidden = 16;
        c.embedding_dim = 8;
        c.rat_heads = 4;
        c.rat_ff = 16;
        c.decoder_size = 16;
        c.rule_dim = 8;
        c.type_dim = 4;
        c.mlp_hidden = 8;
        c.batch_size = 5;
        c.base_lr = 5e-3;
        c.warmup_steps = 2;
        c.max_steps = 30;
        c.ablation = parse_ablation_flags(flag);
        Model model(c, build_vocabulary(data));
        std::vector<double> losses;
        try {
            const auto dir = scratch("ablation_" + flag);
            train(model, train_set, {}, {dir, [&](std::int64_t, double l) { losses.push_back(l); }, true});
            ck.expect(fs::exists(dir / "model.ckpt"), flag + " wrote no checkpoint");
        } catch (const std::exception& e) {
            ck.expect(false, flag + ": " + e.what());
            continue;
        }
        bool finite = losses.size() == 30;
        for (double l : losses) finite = finite && std::isfinite(l);
        ck.expect(finite, flag + " non-finite loss");
        double first = 0, last = 0;
        for (std::size_t i = 0; i < 5; ++i) {
            first += losses[i];
            last += losses[losses.size() - 1 - i];
        }
        ck.expect(last < first, flag + " loss did not decrease");
    }
    return ck.outcome("substitution reference bit-equal, gate 0.5 exact, bypass bit-exact over 50 draws; " +
                      std::to_string(flags.size()) + " flags train with falling loss");
}

RunConfig desk_config() { return load_config(fs::path(SADGA_SOURCE_DIR) / "configs" / "desk.cfg"); }

Outcome overfit() {
    Checker ck;
    // 50 examples, desk config as shipped
    const auto data = data::gen_synthetic(50, 1);
    const auto train_set = prepare_all(data.train, data);
    RunConfig c = desk_config();
    Model model(c, build_vocabulary(data));
    auto start = std::chrono::steady_clock::now();
    const auto r = train(model, train_set, {}, {scratch("overfit50"), nullptr, true});
    const double secs50 = seconds_since(start);
    const double em = evaluate_exact_match(model, train_set).accuracy();
    ck.expect(em == 1.0, "50-example train exact match " + fmt("%.3f", em));
    ck.expect(r.steps <= 2000, "50-example run took " + std::to_string(r.steps) + " steps");
    ck.expect(secs50 < 1800.0, "50-example run took " + fmt("%.0fs", secs50));

    // single examples, one run each, dropout off
    const auto singles = data::gen_synthetic(5, 2);
    std::int64_t worst_step = 0;
    double worst_secs = 0.0;
    for (const auto& e : singles.train) {
        data::Dataset one = singles;
        one.train = {e};
        const auto set = prepare_all(one.train, one);
        RunConfig s = desk_config();
        s.max_steps = 500;
        s.batch_size = 1;
        s.train_eval_every = 0;
        s.sadga_dropout = s.rat_dropout = s.decoder_dropout = 0.0;
        Model m(s, build_vocabulary(one));
        std::int64_t reached = -1;
        start = std::chrono::steady_clock::now();
        train(m, set, {}, {scratch("overfit1"), [&](std::int64_t step, double loss) {
                               if (reached < 0 && loss < 0.01) reached = step;
                           }, true});
        const double secs = seconds_since(start);
        worst_secs = std::max(worst_secs, secs);
        ck.expect(reached > 0, e.id + " never reached loss 0.01");
        ck.expect(secs < 120.0, e.id + " took " + fmt("%.0fs", secs));
        worst_step = std::max(worst_step, reached);
    }
    return ck.outcome("50 examples: EM " + fmt("%.2f", em) + " at step " + std::to_string(r.steps) + " in " +
                      fmt("%.0fs", secs50) + "; 5 single examples: loss < 0.01 by step " + std::to_string(worst_step) +
                      ", slowest run " + fmt("%.0fs", worst_secs));
}

Outcome structure() {
    Checker ck;
    const RunConfig c;
    ck.expect(c.hidden == 256 && c.sadga_layers == 3 && c.ggnn_layers == 2 && c.rat_layers == 4 && c.rat_heads == 8,
              "layer defaults");
    ck.expect(c.batch_size == 20 && c.base_lr == 7.44e-4 && c.warmup_steps == 2000, "optimizer defaults");
    ck.expect(c.sadga_dropout == 0.5 && c.rat_dropout == 0.1 && c.decoder_dropout == 0.21, "dropout defaults");
    ck.expect(c.decoder_size == 512, "decoder size default");
    ck.expect(!c.ablation.any(), "ablation flags on by default");

    const auto data = data::gen_synthetic(3, 1);
    const Model m(c, build_vocabulary(data));
    const auto s = m.layers();
    ck.expect(s.sadga_layers == 3 && s.ggnn_layers == 2 && s.rat_layers == 4 && s.rat_heads == 8, "assembled layers");
    ck.expect(s.hidden == 256 && s.decoder_size == 512, "assembled widths");
    std::size_t sadga = 0, rat = 0;
    for (const auto& name : m.store().names()) {
        if (name.rfind("sadga", 0) == 0 && name.ends_with(".to_question.W_q")) ++sadga;
        if (name.rfind("rat", 0) == 0 && name.ends_with(".W_Q")) ++rat;
    }
    ck.expect(sadga == 3 && rat == 4, "parameter sets " + std::to_string(sadga) + "/" + std::to_string(rat));
    return ck.outcome("3 SADGA x 2 GGNN steps, 4 RAT x 8 heads, hidden 256, decoder 512, " +
                      std::to_string(s.parameters) + " parameters");
}

Outcome determinism() {
    Checker ck;
    const auto data = data::gen_synthetic(25, 4);
    data::Dataset split = data;
    split.dev.assign(split.train.begin() + 20, split.train.end());
    split.train.resize(20);
    const auto train_set = prepare_all(split.train, split);
    const auto dev_set = prepare_all(split.dev, split);
    RunConfig c = desk_config();
    c.max_steps = 60;
    c.eval_every = 30;
    c.train_eval_every = 20;
    std::string logs[2], ckpts[2];
    for (int run = 0; run < 2; ++run) {
        Model m(c, build_vocabulary(split));
        const auto dir = scratch("determinism" + std::to_string(run));
        train(m, train_set, dev_set, {dir, nullptr, true});
        logs[run] = slurp(dir / "metrics.jsonl");
        ckpts[run] = slurp(dir / "model.ckpt");
    }
    ck.expect(!logs[0].empty() && !ckpts[0].empty(), "empty outputs");
    ck.expect(logs[0] == logs[1], "metrics logs differ");
    ck.expect(ckpts[0] == ckpts[1], "checkpoints differ");
    return ck.outcome("two 60-step desk runs: " + std::to_string(logs[0].size()) + " log bytes and " +
                      std::to_string(ckpts[0].size()) + " checkpoint bytes identical");
}

Outcome normalization() {
    Checker ck;
    const auto g = grammar::compile_grammar(kPairGrammar);
    std::size_t rows = 0, gates = 0;
    double worst = 0.0;
    auto row_sums = [&](const Tensor& t, const std::string& what, const std::vector<bool>* skip = nullptr) {
        for (std::size_t i = 0; i < t.rows(); ++i) {
            if (skip && (*skip)[i]) continue;
            double s = 0.0;
            for (std::size_t j = 0; j < t.cols(); ++j) s += t.at(i, j);
            worst = std::max(worst, std::abs(s - 1.0));
            ck.expect(std::abs(s - 1.0) <= 1e-9, what + " row sum " + fmt("%.17g", s));
            ++rows;
        }
    };
    auto open_unit = [&](const Tensor& t, const std::string& what) {
        for (double v : t.values()) {
            ck.expect(v > 0.0 && v < 1.0, what + " gate " + fmt("%.17g", v));
            ++gates;
        }
    };
    const double scales[] = {0.1, 0.5, 1.0, 2.0};
    std::mt19937_64 rng(2024);
    for (std::uint64_t trial = 0; trial < 10000; ++trial) {
        std::uniform_int_distribution<std::size_t> pick(1, 8), pick_t(1, 3), pick_c(1, 5);
        const std::size_t m = pick(rng), n = pick(rng), d = 4;
        const double scale = scales[trial % 4];
        AggInstance inst(m, n, d, trial, scale);
        AggregationTrace tr;
        graph_aggr(inst.q, inst.k, inst.adj, inst.cross, inst.p, {}, {}, 0.0, &tr);
        row_sums(tr.alpha, "alpha");
        std::vector<bool> isolated(m * n);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) isolated[i * n + j] = inst.adj[j].empty();
        row_sums(tr.beta, "beta", &isolated);
        open_unit(tr.neighbor_gate, "neighbor");
        open_unit(tr.update_gate, "update");

        // GRU gates inside the graph encoder
        {
            ParameterStore store(trial + 1);
            const auto gp = make_ggnn_params(store, "g.", d, 1);
            testing_util::randomize(store, trial + 2, -scale, scale);
            GruGates gg;
            gru_cell(random_tensor({m, d}, rng), random_tensor({m, d}, rng), gp, &gg);
            open_unit(gg.z, "gru z");
            open_unit(gg.r, "gru r");
        }

        // transformer heads over [words; tables; columns]
        const std::size_t tables = pick_t(rng), columns = pick_c(rng), L = m + tables + columns;
        const Tensor states = random_tensor({L, d}, rng, -2.0, 2.0);
        const auto rel = oracle::random_relations(L, rng);
        {
            ParameterStore store(trial + 3);
            const auto p = make_rat_layer_params(store, "rat.", d, 2, 8);
            testing_util::randomize(store, trial + 4, -scale, scale);
            RatTrace rt;
            rat_layer(states, rel, p, {}, 0.0, &rt);
            for (const auto& a : rt.attention) row_sums(a, "rat head");
        }

        // pointer matrices and a random legal walk through the decoder
        ParameterStore store(trial + 5);
        const auto p = make_decoder_params(store, "dec.", g, tiny_decoder(d));
        testing_util::randomize(store, trial + 6, -scale, scale);
        const auto pm = pointer_alignments(states, m, tables, columns, rel, p);
        row_sums(pm.tables, "table pointer");
        row_sums(pm.columns, "column pointer");
        const auto memory = prepare_memory(states, m, tables, columns, rel, p);
        auto state = start_decoding(g, memory, p);
        while (auto out = decode_step(state, memory, g, p)) {
            row_sums(out->context_weights, "decoder context");
            if (out->pointer_weights.defined()) row_sums(out->pointer_weights, "decoder pointer");
            const auto dist = action_distribution(*out, g, tables, columns);
            double total = 0.0;
            for (double x : dist) total += x;
            ck.expect(std::abs(total - 1.0) <= 1e-9, "action distribution " + fmt("%.17g", total));
            std::uniform_int_distribution<std::size_t> choose(0, out->legal.size() - 1);
            advance(state, *out, grammar::action_from_id(g, out->legal[choose(rng)], tables), memory, p);
        }
    }
    return ck.outcome("10000 cases: " + std::to_string(rows) + " attention rows (max deviation " + fmt("%.1e", worst) +
                      "), " + std::to_string(gates) + " gate values");
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"gradient integrity", gradient_integrity},
        {"formula oracles", formula_oracles},
        {"relation inventory and linker", relation_inventory_and_linker},
        {"ablation equivalences", ablation_equivalences},
        {"overfit", overfit},
        {"structural conformance", structure},
        {"determinism", determinism},
        {"normalization", normalization},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int number = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(number)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", number, criteria[i].first,
                    o.detail.c_str(), seconds_since(start));
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
