#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sadga/graph.hpp"

namespace sadga::data {

enum class Hardness { Easy, Medium, Hard, Extra };

const char* hardness_name(Hardness h);
// Accepts easy, medium, hard, extra (also "extra hard"); ParseError otherwise.
Hardness parse_hardness(const std::string& text);

struct Example {
    std::string id;
    std::string db_id;
    std::string question;
    std::vector<graph::Token> tokens;
    std::vector<std::pair<std::size_t, std::size_t>> dep_edges;
    std::string sql;
    std::optional<Hardness> hardness;
};

struct Dataset {
    std::map<std::string, graph::SchemaDef> schemas;
    std::vector<Example> train;
    std::vector<Example> dev;

    const graph::SchemaDef& schema(const std::string& db_id) const;
};

// Spider tables.json: a JSON array of database descriptions.
std::vector<graph::SchemaDef> load_spider_tables(const std::filesystem::path& path);
// {db_id: {"table.column": [values]}}; values are lowercased.
void attach_values(std::map<std::string, graph::SchemaDef>& schemas, const std::filesystem::path& path);
// JSON lines, or a Spider-style JSON array. Malformed input raises ParseError
// with the line number.
std::vector<Example> load_examples(const std::filesystem::path& path);

// Raises ReferenceError for an example whose db_id has no schema.
Dataset load_dataset(const std::filesystem::path& tables, const std::filesystem::path& examples,
                     const std::optional<std::filesystem::path>& values = std::nullopt,
                     const std::optional<std::filesystem::path>& dev = std::nullopt);
// Directory layout: tables.json, examples.jsonl, optional dev.jsonl and values.json.
Dataset load_dataset_dir(const std::filesystem::path& dir);
void write_dataset_dir(const Dataset& data, const std::filesystem::path& dir);

std::string summarize(const Dataset& data);

// Small random schemas with templated questions; every gold query lies inside
// the mini grammar. Deterministic per seed.
Dataset gen_synthetic(std::size_t n, std::uint64_t seed);

}  // namespace sadga::data
