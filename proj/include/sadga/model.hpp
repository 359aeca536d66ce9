#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sadga/aggregation.hpp"
#include "sadga/data.hpp"
#include "sadga/decoder.hpp"
#include "sadga/gradcheck.hpp"
#include "sadga/grammar.hpp"
#include "sadga/rat.hpp"
#include "sadga/sql.hpp"

namespace sadga::model {

struct RunConfig {
    std::size_t hidden = 256;
    std::size_t embedding_dim = 128;
    std::size_t sadga_layers = 3;
    std::size_t ggnn_layers = 2;
    std::size_t rat_layers = 4;
    std::size_t rat_heads = 8;
    std::size_t rat_ff = 1024;
    std::size_t decoder_size = 512;
    std::size_t rule_dim = 128;
    std::size_t type_dim = 64;
    std::size_t mlp_hidden = 128;
    std::size_t batch_size = 20;
    double base_lr = 7.44e-4;
    std::int64_t warmup_steps = 2000;
    std::int64_t max_steps = 2000;
    double sadga_dropout = 0.5;
    double rat_dropout = 0.1;
    double decoder_dropout = 0.21;
    std::uint64_t seed = 1;
    AblationFlags ablation;
    // 0 disables the periodic evaluations.
    std::int64_t eval_every = 0;
    std::int64_t train_eval_every = 0;
    // Stop once training exact match reaches this value (checked at train
    // evaluations only; > 1 never stops).
    double stop_at_train_em = 2.0;
    std::size_t max_decode_steps = 128;

    // Throws ArgumentError on non-positive sizes or hidden % rat_heads != 0.
    void validate() const;
};

// Flat key=value lines, '#' starts a comment. Unknown keys raise ArgumentError.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
std::string format_config(const RunConfig& c);

// Sorted words from the training questions plus every schema name token.
Vocabulary build_vocabulary(const data::Dataset& data);

struct PreparedExample {
    const data::Example* example = nullptr;
    const graph::SchemaDef* schema = nullptr;
    DualGraph graphs;
    RelationMatrix relations;
    sql::Query gold_query;
    std::vector<grammar::Action> gold;
};

// Builds the graphs and compiles the gold query; DataError names the example.
PreparedExample prepare_example(const data::Example& e, const graph::SchemaDef& schema);
std::vector<PreparedExample> prepare_all(const std::vector<data::Example>& examples, const data::Dataset& data);

struct Encoded {
    Tensor states;  // [words; tables; columns] × hidden
    DecoderMemory memory;
};

// Layer counts and widths as actually instantiated.
struct Structure {
    std::size_t sadga_layers = 0;
    std::size_t ggnn_layers = 0;
    std::size_t rat_layers = 0;
    std::size_t rat_heads = 0;
    std::size_t hidden = 0;
    std::size_t decoder_size = 0;
    std::size_t parameters = 0;
};

class Model {
   public:
    Model(const RunConfig& config, Vocabulary vocab);

    const RunConfig& config() const { return config_; }
    const Vocabulary& vocab() const { return vocab_; }
    ParameterStore& store() { return store_; }
    const ParameterStore& store() const { return store_; }
    const DecoderParams& decoder() const { return decoder_; }
    Structure layers() const;

    Encoded encode(const PreparedExample& ex, const TrainContext& ctx = {}, SadgaTrace* trace = nullptr) const;
    Tensor loss(const PreparedExample& ex, const TrainContext& ctx = {}) const;
    DecodeResult predict(const PreparedExample& ex) const;
    // Predicted SQL text; empty when decoding was truncated.
    std::string predict_sql(const PreparedExample& ex) const;

    // Metadata holds the config and the vocabulary so a checkpoint is self-contained.
    void save(const std::filesystem::path& path) const;
    static Model load(const std::filesystem::path& path);

   private:
    RunConfig config_;
    Vocabulary vocab_;
    ParameterStore store_;
    EmbeddingTables embeddings_;
    std::vector<SadgaLayerParams> sadga_;
    std::vector<RatLayerParams> rat_;
    DecoderParams decoder_;
};

struct EvalReport {
    std::size_t total = 0;
    std::size_t correct = 0;
    std::size_t truncated = 0;
    // label -> (correct, total); only labelled examples appear.
    std::map<std::string, std::pair<std::size_t, std::size_t>> by_hardness;

    double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

// Truncated decodes count as misses and are also tallied separately.
EvalReport evaluate_exact_match(const Model& model, const std::vector<PreparedExample>& examples);
std::string format_report(const EvalReport& r);

struct TrainResult {
    std::int64_t steps = 0;
    double final_loss = 0.0;
    std::optional<double> best_dev;
    std::optional<double> last_train_em;
    std::filesystem::path checkpoint;
};

struct TrainOptions {
    std::filesystem::path out_dir;
    // Called after every optimizer step with (step, mean batch loss).
    std::function<void(std::int64_t, double)> on_step;
    bool quiet = false;
};

// Writes metrics.jsonl and model.ckpt under out_dir. A NaN loss saves
// last_good.ckpt (the parameters before the failing step) and throws
// DivergenceError.
TrainResult train(Model& model, const std::vector<PreparedExample>& train_set,
                  const std::vector<PreparedExample>& dev_set, const TrainOptions& options);

// Alignment report for one example: α in both directions for every SADGA
// layer plus β for one (query word, key schema node) pair in the
// question-receives direction.
std::string export_alignment(const Model& model, const PreparedExample& ex, std::size_t beta_query,
                             std::size_t beta_key, int layer = -1);

// Finite-difference checks of the module gradients on small random inputs.
std::vector<std::string> gradcheck_modules();
ad::GradcheckReport gradcheck_module(const std::string& name);

}  // namespace sadga::model
