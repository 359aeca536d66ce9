#include "sadga/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sadga/errors.hpp"
#include "sadga/ops.hpp"
#include "sadga/optim.hpp"

namespace sadga::model {

using namespace ad;
using nlohmann::json;

// ---------------------------------------------------------------- config

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string fmt_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    T out{};
    if constexpr (std::is_unsigned_v<T>) {
        if (!value.empty() && value[0] == '-') throw ArgumentError("config key '" + key + "' must be positive");
    }
    in >> out;
    if (in.fail() || !in.eof()) throw ArgumentError("config key '" + key + "': cannot parse '" + value + "'");
    return out;
}

}  // namespace

void RunConfig::validate() const {
    const std::pair<const char*, std::size_t> sizes[] = {
        {"hidden", hidden},         {"embedding_dim", embedding_dim}, {"sadga_layers", sadga_layers},
        {"ggnn_layers", ggnn_layers}, {"rat_layers", rat_layers},     {"rat_heads", rat_heads},
        {"rat_ff", rat_ff},         {"decoder_size", decoder_size},   {"rule_dim", rule_dim},
        {"type_dim", type_dim},     {"mlp_hidden", mlp_hidden},       {"batch_size", batch_size},
        {"max_decode_steps", max_decode_steps}};
    for (const auto& [name, v] : sizes) {
        if (v == 0) throw ArgumentError(std::string("config: ") + name + " must be positive");
    }
    if (hidden % rat_heads != 0) {
        throw ArgumentError("config: hidden " + std::to_string(hidden) + " is not divisible by rat_heads " +
                            std::to_string(rat_heads));
    }
    if (!(base_lr > 0)) throw ArgumentError("config: base_lr must be positive");
    if (max_steps <= 0) throw ArgumentError("config: max_steps must be positive");
    if (warmup_steps < 0) throw ArgumentError("config: warmup_steps must be >= 0");
    for (double p : {sadga_dropout, rat_dropout, decoder_dropout}) {
        if (p < 0 || p >= 1) throw ArgumentError("config: dropout rates must lie in [0, 1)");
    }
    if (eval_every < 0 || train_eval_every < 0) throw ArgumentError("config: evaluation intervals must be >= 0");
}

RunConfig parse_config(const std::string& text, RunConfig c) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ArgumentError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        auto size = [&](std::size_t& f) { f = parse_number<std::size_t>(key, value); };
        auto real = [&](double& f) { f = parse_number<double>(key, value); };
        auto steps = [&](std::int64_t& f) { f = parse_number<std::int64_t>(key, value); };
        if (key == "hidden") size(c.hidden);
        else if (key == "embedding_dim") size(c.embedding_dim);
        else if (key == "sadga_layers") size(c.sadga_layers);
        else if (key == "ggnn_layers") size(c.ggnn_layers);
        else if (key == "rat_layers") size(c.rat_layers);
        else if (key == "rat_heads") size(c.rat_heads);
        else if (key == "rat_ff") size(c.rat_ff);
        else if (key == "decoder_size") size(c.decoder_size);
        else if (key == "rule_dim") size(c.rule_dim);
        else if (key == "type_dim") size(c.type_dim);
        else if (key == "mlp_hidden") size(c.mlp_hidden);
        else if (key == "batch_size") size(c.batch_size);
        else if (key == "base_lr") real(c.base_lr);
        else if (key == "warmup_steps") steps(c.warmup_steps);
        else if (key == "max_steps") steps(c.max_steps);
        else if (key == "sadga_dropout") real(c.sadga_dropout);
        else if (key == "rat_dropout") real(c.rat_dropout);
        else if (key == "decoder_dropout") real(c.decoder_dropout);
        else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
        else if (key == "ablation") c.ablation = parse_ablation_flags(value);
        else if (key == "eval_every") steps(c.eval_every);
        else if (key == "train_eval_every") steps(c.train_eval_every);
        else if (key == "stop_at_train_em") real(c.stop_at_train_em);
        else if (key == "max_decode_steps") size(c.max_decode_steps);
        else throw ArgumentError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), base);
}

std::string format_config(const RunConfig& c) {
    std::ostringstream out;
    out << "hidden = " << c.hidden << "\n"
        << "embedding_dim = " << c.embedding_dim << "\n"
        << "sadga_layers = " << c.sadga_layers << "\n"
        << "ggnn_layers = " << c.ggnn_layers << "\n"
        << "rat_layers = " << c.rat_layers << "\n"
        << "rat_heads = " << c.rat_heads << "\n"
        << "rat_ff = " << c.rat_ff << "\n"
        << "decoder_size = " << c.decoder_size << "\n"
        << "rule_dim = " << c.rule_dim << "\n"
        << "type_dim = " << c.type_dim << "\n"
        << "mlp_hidden = " << c.mlp_hidden << "\n"
        << "batch_size = " << c.batch_size << "\n"
        << "base_lr = " << fmt_double(c.base_lr) << "\n"
        << "warmup_steps = " << c.warmup_steps << "\n"
        << "max_steps = " << c.max_steps << "\n"
        << "sadga_dropout = " << fmt_double(c.sadga_dropout) << "\n"
        << "rat_dropout = " << fmt_double(c.rat_dropout) << "\n"
        << "decoder_dropout = " << fmt_double(c.decoder_dropout) << "\n"
        << "seed = " << c.seed << "\n"
        << "ablation = " << format_ablation_flags(c.ablation) << "\n"
        << "eval_every = " << c.eval_every << "\n"
        << "train_eval_every = " << c.train_eval_every << "\n"
        << "stop_at_train_em = " << fmt_double(c.stop_at_train_em) << "\n"
        << "max_decode_steps = " << c.max_decode_steps << "\n";
    return out.str();
}

// ---------------------------------------------------------------- data preparation

Vocabulary build_vocabulary(const data::Dataset& data) {
    std::set<std::string> words;
    for (const auto& e : data.train) {
        for (const auto& t : e.tokens) {
            words.insert(t.surface);
            words.insert(t.lemma);
        }
    }
    for (const auto& [id, s] : data.schemas) {
        for (const auto& t : s.tables) words.insert(t.name_tokens.begin(), t.name_tokens.end());
        for (const auto& c : s.columns) words.insert(c.name_tokens.begin(), c.name_tokens.end());
    }
    Vocabulary v;
    for (const auto& w : words) v.add(w);
    return v;
}

PreparedExample prepare_example(const data::Example& e, const graph::SchemaDef& schema) {
    PreparedExample p;
    p.example = &e;
    p.schema = &schema;
    try {
        p.graphs = build_dual_graph(e.tokens, e.dep_edges, schema);
        p.relations = build_relation_matrix(p.graphs.question, p.graphs.schema, p.graphs.cross);
        p.gold_query = sql::parse_sql(e.sql, schema);
        p.gold = sql::sql_to_actions(e.sql, grammar::mini_sql_grammar(), schema);
    } catch (const Error& err) {
        throw DataError("example " + e.id + ": " + err.what());
    }
    return p;
}

std::vector<PreparedExample> prepare_all(const std::vector<data::Example>& examples, const data::Dataset& data) {
    std::vector<PreparedExample> out;
    out.reserve(examples.size());
    for (const auto& e : examples) out.push_back(prepare_example(e, data.schema(e.db_id)));
    return out;
}

// ---------------------------------------------------------------- model

Model::Model(const RunConfig& config, Vocabulary vocab)
    : config_(config), vocab_(std::move(vocab)), store_(config.seed) {
    config_.validate();
    const std::size_t d = config_.hidden;
    embeddings_ = make_embedding_tables(store_, "emb.", vocab_.size(), config_.embedding_dim, d);
    for (std::size_t l = 0; l < config_.sadga_layers; ++l) {
        sadga_.push_back(make_sadga_layer_params(store_, "sadga" + std::to_string(l) + ".", d, config_.ggnn_layers,
                                                 config_.ablation));
    }
    for (std::size_t l = 0; l < config_.rat_layers; ++l) {
        rat_.push_back(make_rat_layer_params(store_, "rat" + std::to_string(l) + ".", d, config_.rat_heads,
                                             config_.rat_ff));
    }
    DecoderConfig dc;
    dc.d = d;
    dc.hidden = config_.decoder_size;
    dc.rule_dim = config_.rule_dim;
    dc.type_dim = config_.type_dim;
    dc.mlp_hidden = config_.mlp_hidden;
    dc.dropout = config_.decoder_dropout;
    decoder_ = make_decoder_params(store_, "dec.", grammar::mini_sql_grammar(), dc);
}

Structure Model::layers() const {
    Structure s;
    s.sadga_layers = sadga_.size();
    s.ggnn_layers = sadga_.empty() ? 0 : sadga_.front().question_ggnn.layers;
    s.rat_layers = rat_.size();
    s.rat_heads = rat_.empty() ? 0 : rat_.front().heads;
    s.hidden = embeddings_.projection.cols();
    s.decoder_size = decoder_.lstm_W_h.rows();
    s.parameters = store_.total_elements();
    return s;
}

Encoded Model::encode(const PreparedExample& ex, const TrainContext& ctx, SadgaTrace* trace) const {
    const auto& schema = *ex.schema;
    Tensor q0 = init_question_states(ex.example->tokens, vocab_, embeddings_);
    Tensor s0 = init_schema_states(schema, vocab_, embeddings_);
    auto out = sadga_stack(ex.graphs, q0, s0, embeddings_, sadga_, config_.ablation, ctx, config_.sadga_dropout, trace);
    Tensor x = concat_rows({out.question, out.schema});
    for (const auto& layer : rat_) x = rat_layer(x, ex.relations, layer, ctx, config_.rat_dropout);
    Encoded e;
    e.states = x;
    e.memory = prepare_memory(x, ex.example->tokens.size(), schema.tables.size(), schema.columns.size(),
                              ex.relations, decoder_);
    return e;
}

Tensor Model::loss(const PreparedExample& ex, const TrainContext& ctx) const {
    const auto enc = encode(ex, ctx);
    return teacher_forced_loss(ex.gold, enc.memory, grammar::mini_sql_grammar(), decoder_, ctx);
}

DecodeResult Model::predict(const PreparedExample& ex) const {
    NoGradGuard guard;
    const auto enc = encode(ex);
    return greedy_decode(enc.memory, grammar::mini_sql_grammar(), decoder_, config_.max_decode_steps);
}

std::string Model::predict_sql(const PreparedExample& ex) const {
    const auto r = predict(ex);
    if (!r.complete) return "";
    return sql::to_sql(sql::ast_to_query(*r.ast, grammar::mini_sql_grammar()), *ex.schema);
}

void Model::save(const std::filesystem::path& path) const {
    json meta;
    meta["config"] = format_config(config_);
    meta["vocab"] = vocab_.words();
    save_checkpoint(path, store_, meta.dump());
}

Model Model::load(const std::filesystem::path& path) {
    json meta;
    try {
        meta = json::parse(read_checkpoint_metadata(path));
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": checkpoint metadata is not valid JSON: " + e.what());
    }
    const RunConfig config = parse_config(meta.at("config").get<std::string>());
    Vocabulary vocab;
    const auto words = meta.at("vocab").get<std::vector<std::string>>();
    for (std::size_t i = 1; i < words.size(); ++i) vocab.add(words[i]);
    Model m(config, std::move(vocab));
    load_checkpoint(path, m.store_);
    return m;
}

// ---------------------------------------------------------------- evaluation

EvalReport evaluate_exact_match(const Model& model, const std::vector<PreparedExample>& examples) {
    EvalReport r;
    const auto& g = grammar::mini_sql_grammar();
    for (const auto& ex : examples) {
        const auto pred = model.predict(ex);
        bool hit = false;
        if (!pred.complete) {
            ++r.truncated;
        } else {
            try {
                hit = sql::exact_match(sql::ast_to_query(*pred.ast, g), ex.gold_query);
            } catch (const Error&) {
                hit = false;
            }
        }
        ++r.total;
        if (hit) ++r.correct;
        if (ex.example->hardness) {
            auto& bucket = r.by_hardness[data::hardness_name(*ex.example->hardness)];
            bucket.first += hit ? 1 : 0;
            bucket.second += 1;
        }
    }
    return r;
}

std::string format_report(const EvalReport& r) {
    std::ostringstream out;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", r.accuracy());
    out << "exact match " << buf << " (" << r.correct << "/" << r.total << ")";
    if (r.truncated) out << ", " << r.truncated << " truncated";
    out << "\n";
    for (const char* level : {"easy", "medium", "hard", "extra"}) {
        auto it = r.by_hardness.find(level);
        if (it == r.by_hardness.end()) continue;
        const auto [c, t] = it->second;
        std::snprintf(buf, sizeof buf, "%.4f", static_cast<double>(c) / static_cast<double>(t));
        out << "  " << level << " " << buf << " (" << c << "/" << t << ")\n";
    }
    return out.str();
}

// ---------------------------------------------------------------- training

TrainResult train(Model& model, const std::vector<PreparedExample>& train_set,
                  const std::vector<PreparedExample>& dev_set, const TrainOptions& options) {
    if (train_set.empty()) throw ArgumentError("train: empty training set");
    const RunConfig& c = model.config();
    std::filesystem::create_directories(options.out_dir);
    const auto ckpt = options.out_dir / "model.ckpt";
    std::ofstream metrics(options.out_dir / "metrics.jsonl");
    if (!metrics) throw DataError("cannot write " + (options.out_dir / "metrics.jsonl").string());

    std::mt19937_64 rng(c.seed * 0x9E3779B97F4A7C15ULL + 1);
    const TrainContext ctx{&rng, true};
    OptimizerState opt;
    auto& store = model.store();

    std::vector<std::size_t> order(train_set.size());
    std::size_t cursor = order.size();
    auto next_index = [&] {
        if (cursor == order.size()) {
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
            cursor = 0;
        }
        return order[cursor++];
    };

    TrainResult result;
    result.checkpoint = ckpt;
    const std::size_t B = std::min(c.batch_size, train_set.size());
    // A warmup longer than the run keeps ramping until training stops.
    const std::int64_t horizon = std::max(c.max_steps, c.warmup_steps + 1);
    bool saved = false;
    for (std::int64_t step = 1; step <= c.max_steps; ++step) {
        double batch_loss = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
            const auto& ex = train_set[next_index()];
            Tensor loss = model.loss(ex, ctx);
            const double value = loss.item();
            if (!std::isfinite(value)) {
                model.save(options.out_dir / "last_good.ckpt");
                throw DivergenceError("loss became " + fmt_double(value) + " at step " + std::to_string(step) +
                                      " on example " + ex.example->id + "; parameters saved to last_good.ckpt");
            }
            batch_loss += value / static_cast<double>(B);
            backward(scale(loss, 1.0 / static_cast<double>(B)), &store);
        }
        const double lr = lr_schedule(step - 1, c.base_lr, c.warmup_steps, horizon);
        adam_step(store, opt, lr);
        result.steps = step;
        result.final_loss = batch_loss;

        json line;
        line["step"] = step;
        line["lr"] = lr;
        line["loss"] = batch_loss;
        bool stop = false;
        if (c.eval_every > 0 && !dev_set.empty() && (step % c.eval_every == 0 || step == c.max_steps)) {
            const double acc = evaluate_exact_match(model, dev_set).accuracy();
            line["dev_acc"] = acc;
            if (!result.best_dev || acc > *result.best_dev) {
                result.best_dev = acc;
                model.save(ckpt);
                saved = true;
            }
        }
        if (c.train_eval_every > 0 && (step % c.train_eval_every == 0 || step == c.max_steps)) {
            const double acc = evaluate_exact_match(model, train_set).accuracy();
            line["train_acc"] = acc;
            result.last_train_em = acc;
            stop = acc >= c.stop_at_train_em;
        }
        // nlohmann prints doubles with round-trip precision, so the log is exact
        metrics << line.dump() << "\n";
        metrics.flush();
        if (options.on_step) options.on_step(step, batch_loss);
        if (stop) break;
    }
    if (!saved) model.save(ckpt);
    return result;
}

// ---------------------------------------------------------------- alignment export

namespace {

std::vector<std::string> schema_labels(const graph::SchemaDef& s) {
    std::vector<std::string> out;
    for (const auto& t : s.tables) out.push_back("table:" + t.original_name);
    for (const auto& c : s.columns) {
        out.push_back(c.table ? "column:" + s.tables[*c.table].original_name + "." + c.original_name : "column:*");
    }
    return out;
}

json matrix_json(const Tensor& t) {
    json rows = json::array();
    for (std::size_t i = 0; i < t.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < t.cols(); ++j) row.push_back(t.at(i, j));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

std::string export_alignment(const Model& model, const PreparedExample& ex, std::size_t beta_query,
                             std::size_t beta_key, int layer) {
    NoGradGuard guard;
    SadgaTrace trace;
    model.encode(ex, {}, &trace);
    const std::size_t m = ex.example->tokens.size(), n = ex.schema->node_count();
    if (trace.to_question.empty()) {
        throw ArgumentError("export_alignment: the model has no question-side aggregation to export");
    }
    const int L = static_cast<int>(trace.to_question.size());
    if (layer < 0) layer += L;
    if (layer < 0 || layer >= L) throw ArgumentError("export_alignment: layer out of range");
    if (beta_query >= m) {
        throw ArgumentError("export_alignment: query word " + std::to_string(beta_query) + " out of range (" +
                            std::to_string(m) + " words)");
    }
    if (beta_key >= n) {
        throw ArgumentError("export_alignment: key node " + std::to_string(beta_key) + " out of range (" +
                            std::to_string(n) + " schema nodes)");
    }

    std::vector<std::string> words;
    for (const auto& t : ex.example->tokens) words.push_back(t.surface);
    const auto nodes = schema_labels(*ex.schema);

    json out;
    out["example"] = ex.example->id;
    out["db_id"] = ex.schema->db_id;
    out["words"] = words;
    out["schema_nodes"] = nodes;
    json layers = json::array();
    for (std::size_t l = 0; l < trace.to_question.size(); ++l) {
        json entry;
        entry["layer"] = l;
        entry["question_to_schema"] = matrix_json(trace.to_question[l].alpha);
        if (l < trace.to_schema.size() && trace.to_schema[l].alpha.defined()) {
            entry["schema_to_question"] = matrix_json(trace.to_schema[l].alpha);
        }
        layers.push_back(entry);
    }
    out["alpha"] = layers;

    const auto& t = trace.to_question[static_cast<std::size_t>(layer)];
    json beta;
    beta["layer"] = layer;
    beta["query"] = words[beta_query];
    beta["key"] = nodes[beta_key];
    json neighbors = json::array();
    if (t.beta.defined()) {
        const std::size_t row = beta_query * n + beta_key;
        for (std::size_t k : ex.graphs.schema_levi.base_adjacency[beta_key]) {
            neighbors.push_back({{"node", nodes[k]}, {"weight", t.beta.at(row, k)}});
        }
    }
    beta["neighbors"] = neighbors;
    out["beta"] = beta;
    return out.dump(1);
}

}  // namespace sadga::model
