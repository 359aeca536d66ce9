// Command-line front end: train, eval, synth, align, gradcheck.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "sadga/data.hpp"
#include "sadga/errors.hpp"
#include "sadga/model.hpp"

using namespace sadga;
namespace fs = std::filesystem;

namespace {

const std::vector<data::Example>& eval_split(const data::Dataset& d, const std::string& split) {
    if (split == "train") return d.train;
    if (split == "dev") return d.dev;
    if (split == "auto") return d.dev.empty() ? d.train : d.dev;
    throw ArgumentError("--split must be train, dev or auto");
}

int run_train(const std::string& config_path, const std::string& ablation, const std::string& data_dir,
              const std::string& out_dir, bool quiet) {
    auto config = model::load_config(config_path);
    if (!ablation.empty()) config.ablation = model::parse_ablation_flags(ablation);
    const auto d = data::load_dataset_dir(data_dir);
    std::cout << data::summarize(d) << "\n";
    const auto train_set = model::prepare_all(d.train, d);
    const auto dev_set = model::prepare_all(d.dev, d);
    model::Model m(config, model::build_vocabulary(d));
    const auto s = m.layers();
    std::cout << "model: " << s.parameters << " parameters, ablation " << model::format_ablation_flags(config.ablation)
              << "\n";
    fs::create_directories(out_dir);
    std::ofstream(fs::path(out_dir) / "config.cfg") << model::format_config(config);

    const auto start = std::chrono::steady_clock::now();
    model::TrainOptions opts;
    opts.out_dir = out_dir;
    if (!quiet) {
        opts.on_step = [&](std::int64_t step, double loss) {
            if (step % 50 != 0) return;
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::printf("step %lld  loss %.6f  %.1fs\n", static_cast<long long>(step), loss, secs);
            std::fflush(stdout);
        };
    }
    const auto r = model::train(m, train_set, dev_set, opts);
    std::printf("finished after %lld steps, final loss %.6f\n", static_cast<long long>(r.steps), r.final_loss);
    if (r.last_train_em) std::printf("train exact match %.4f\n", *r.last_train_em);
    if (r.best_dev) std::printf("best dev exact match %.4f\n", *r.best_dev);
    std::cout << "checkpoint: " << r.checkpoint.string() << "\n";
    return 0;
}

int run_eval(const std::string& ckpt, const std::string& data_dir, const std::string& split, bool show) {
    const auto d = data::load_dataset_dir(data_dir);
    const auto m = model::Model::load(ckpt);
    const auto examples = model::prepare_all(eval_split(d, split), d);
    if (show) {
        for (const auto& ex : examples) {
            const std::string pred = m.predict_sql(ex);
            std::cout << ex.example->id << "\t" << (pred.empty() ? "<truncated>" : pred) << "\n";
        }
    }
    std::cout << model::format_report(model::evaluate_exact_match(m, examples));
    return 0;
}

int run_synth(std::size_t n, std::uint64_t seed, const std::string& out_dir, std::size_t dev) {
    auto d = data::gen_synthetic(n + dev, seed);
    d.dev.assign(d.train.begin() + static_cast<std::ptrdiff_t>(n), d.train.end());
    d.train.resize(n);
    data::write_dataset_dir(d, out_dir);
    std::cout << data::summarize(d) << "\n";
    return 0;
}

int run_align(const std::string& ckpt, const std::string& data_dir, const std::string& example_id,
              const std::string& out, std::size_t query, std::size_t key, int layer) {
    const auto d = data::load_dataset_dir(data_dir);
    const auto m = model::Model::load(ckpt);
    const data::Example* found = nullptr;
    for (const auto* split : {&d.train, &d.dev})
        for (const auto& e : *split)
            if (e.id == example_id) found = &e;
    if (!found) throw ArgumentError("no example with id '" + example_id + "'");
    const auto ex = model::prepare_example(*found, d.schema(found->db_id));
    const std::string report = model::export_alignment(m, ex, query, key, layer);
    if (out.empty() || out == "-") {
        std::cout << report << "\n";
    } else {
        std::ofstream(out) << report << "\n";
        std::cout << "wrote " << out << "\n";
    }
    return 0;
}

int run_gradcheck(const std::string& module) {
    std::vector<std::string> names = module == "all" ? model::gradcheck_modules() : std::vector<std::string>{module};
    bool ok = true;
    for (const auto& name : names) {
        const auto start = std::chrono::steady_clock::now();
        const auto r = model::gradcheck_module(name);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%-8s %s  max rel error %.3e over %zu elements (%.1fs)\n", name.c_str(),
                    r.passed ? "ok  " : "FAIL", r.max_rel_error, r.checked_elements, secs);
        if (!r.passed) {
            for (const auto& e : r.entries)
                if (!e.passed)
                    std::printf("    %s: %.3e (analytic %.6g, numeric %.6g)\n", e.name.c_str(), e.max_rel_error,
                                e.analytic, e.numeric);
        }
        ok = ok && r.passed;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Text-to-SQL parser with dual-graph aggregation"};
    app.require_subcommand(1);

    std::string config, ablation, data_dir, out, ckpt, split = "auto", example, module = "all", pair;
    std::size_t n = 50, dev = 0;
    std::uint64_t seed = 1;
    int layer = -1;
    bool quiet = false, show = false;

    auto* train = app.add_subcommand("train", "Train a model");
    train->add_option("--config", config, "key = value config file")->required()->check(CLI::ExistingFile);
    train->add_option("--ablation", ablation, "comma-separated ablation flags");
    train->add_option("--data", data_dir, "dataset directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--out", out, "output directory")->required();
    train->add_flag("--quiet", quiet, "no per-step progress");

    auto* eval = app.add_subcommand("eval", "Exact-match evaluation of a checkpoint");
    eval->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
    eval->add_option("--data", data_dir)->required()->check(CLI::ExistingDirectory);
    eval->add_option("--split", split, "train, dev or auto (dev when present)");
    eval->add_flag("--show", show, "print every prediction");

    auto* synth = app.add_subcommand("synth", "Write a synthetic corpus");
    synth->add_option("--n", n, "training examples")->check(CLI::PositiveNumber);
    synth->add_option("--dev", dev, "extra held-out examples");
    synth->add_option("--seed", seed);
    synth->add_option("--out", out)->required();

    auto* align = app.add_subcommand("align", "Export alignment matrices for one example");
    align->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
    align->add_option("--data", data_dir)->required()->check(CLI::ExistingDirectory);
    align->add_option("--example", example)->required();
    align->add_option("--out", out, "output file, - for stdout");
    align->add_option("--pair", pair, "query word and schema node for the neighbor attention, e.g. 2,5");
    align->add_option("--layer", layer, "layer of the neighbor attention, negative counts from the end");

    auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
    grad->add_option("--module", module, "ggnn, sadga, rat, decoder or all");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) return run_train(config, ablation, data_dir, out, quiet);
        if (*eval) return run_eval(ckpt, data_dir, split, show);
        if (*synth) return run_synth(n, seed, out, dev);
        if (*align) {
            std::size_t q = 0, k = 0;
            if (!pair.empty()) {
                if (std::sscanf(pair.c_str(), "%zu,%zu", &q, &k) != 2) throw ArgumentError("--pair expects i,j");
            }
            return run_align(ckpt, data_dir, example, out, q, k, layer);
        }
        if (*grad) return run_gradcheck(module);
    } catch (const sadga::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
