#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sadga/tensor.hpp"

namespace sadga::ad {

enum class InitScheme { Zeros, GlorotUniform, EmbeddingNormal };

// Deterministic initialization. Glorot bounds use fan_in = rows, fan_out = cols
// for matrices and fan_in = fan_out = n for vectors. Embeddings draw from
// N(0, (1/sqrt(cols))^2).
Tensor tensor_init(const Shape& shape, InitScheme scheme, std::uint64_t seed);

// Named parameters, iterated in lexicographic name order.
class ParameterStore {
   public:
    explicit ParameterStore(std::uint64_t seed = 0) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    // Registers a new parameter; the per-parameter seed mixes the store seed
    // with the name so creation order does not affect the values.
    Tensor create(const std::string& name, const Shape& shape, InitScheme scheme);
    Tensor get(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) != 0; }
    std::size_t size() const { return params_.size(); }
    std::size_t total_elements() const;

    const std::map<std::string, Tensor>& all() const { return params_; }
    std::vector<std::string> names() const;

    void ensure_grads();
    void clear_grads();
    bool all_have_grads() const;

    // Copies values from another store with identical names and shapes.
    void copy_values_from(const ParameterStore& other);

   private:
    std::uint64_t seed_;
    std::map<std::string, Tensor> params_;
};

std::uint64_t fnv1a(const std::string& text);

// Binary checkpoint: magic line, metadata blob, then every parameter as
// name / shape / little-endian float64 values.
inline constexpr const char* kCheckpointMagic = "SADGA-CKPT v1\n";

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store,
                     const std::string& metadata);
// Fills an existing store (names and shapes must match); returns the metadata.
std::string load_checkpoint(const std::filesystem::path& path, ParameterStore& store);
std::string read_checkpoint_metadata(const std::filesystem::path& path);

}  // namespace sadga::ad
