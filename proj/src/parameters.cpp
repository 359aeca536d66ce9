#include "sadga/parameters.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "sadga/errors.hpp"

namespace sadga::ad {

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

Tensor tensor_init(const Shape& shape, InitScheme scheme, std::uint64_t seed) {
    if (shape.empty()) throw InvalidShapeError("tensor_init: empty shape");
    for (std::size_t d : shape) {
        if (d == 0) throw InvalidShapeError("tensor_init: zero dimension in " + shape_str(shape));
    }
    const std::size_t n = shape_numel(shape);
    std::vector<double> values(n, 0.0);
    std::mt19937_64 rng(seed);
    switch (scheme) {
        case InitScheme::Zeros:
            break;
        case InitScheme::GlorotUniform: {
            const double fan_in = shape.size() >= 2 ? static_cast<double>(n / shape.back())
                                                    : static_cast<double>(n);
            const double fan_out = static_cast<double>(shape.back());
            const double bound = std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (auto& v : values) v = dist(rng);
            break;
        }
        case InitScheme::EmbeddingNormal: {
            std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(shape.back())));
            for (auto& v : values) v = dist(rng);
            break;
        }
    }
    return Tensor::from(shape, std::move(values));
}

Tensor ParameterStore::create(const std::string& name, const Shape& shape, InitScheme scheme) {
    if (params_.count(name)) throw ContractError("duplicate parameter name: " + name);
    Tensor t = tensor_init(shape, scheme, seed_ ^ fnv1a(name));
    t.set_requires_grad(true);
    params_.emplace(name, t);
    return t;
}

Tensor ParameterStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
}

std::size_t ParameterStore::total_elements() const {
    std::size_t n = 0;
    for (const auto& [_, t] : params_) n += t.numel();
    return n;
}

std::vector<std::string> ParameterStore::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, _] : params_) out.push_back(name);
    return out;
}

void ParameterStore::ensure_grads() {
    for (auto& [_, t] : params_) t.mutable_grad();
}

void ParameterStore::clear_grads() {
    for (auto& [_, t] : params_) t.clear_grad();
}

bool ParameterStore::all_have_grads() const {
    for (const auto& [_, t] : params_) {
        if (!t.has_grad()) return false;
    }
    return true;
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
    for (auto& [name, t] : params_) {
        Tensor src = other.get(name);
        if (src.shape() != t.shape()) throw ContractError("shape mismatch copying " + name);
        std::copy(src.values().begin(), src.values().end(), t.mutable_values().begin());
    }
}

namespace {

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char buf[8];
    if (!is.read(reinterpret_cast<char*>(buf), 8)) throw ParseError("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    const std::uint64_t n = read_u64(is);
    if (n > (1ULL << 32)) throw ParseError("checkpoint string length implausible");
    std::string s(n, '\0');
    if (n && !is.read(s.data(), static_cast<std::streamsize>(n))) throw ParseError("checkpoint truncated");
    return s;
}

std::ifstream open_checked(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open checkpoint " + path.string());
    std::string magic(std::strlen(kCheckpointMagic), '\0');
    if (!is.read(magic.data(), static_cast<std::streamsize>(magic.size())) || magic != kCheckpointMagic) {
        throw ParseError("not a checkpoint (bad magic): " + path.string());
    }
    return is;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store,
                     const std::string& metadata) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ArgumentError("cannot write checkpoint " + path.string());
    os.write(kCheckpointMagic, static_cast<std::streamsize>(std::strlen(kCheckpointMagic)));
    write_string(os, metadata);
    write_u64(os, store.size());
    for (const auto& [name, t] : store.all()) {
        write_string(os, name);
        write_u64(os, t.shape().size());
        for (std::size_t d : t.shape()) write_u64(os, d);
        for (double v : t.values()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            write_u64(os, bits);
        }
    }
}

std::string read_checkpoint_metadata(const std::filesystem::path& path) {
    auto is = open_checked(path);
    return read_string(is);
}

std::string load_checkpoint(const std::filesystem::path& path, ParameterStore& store) {
    auto is = open_checked(path);
    std::string metadata = read_string(is);
    const std::uint64_t count = read_u64(is);
    if (count != store.size()) {
        throw ParseError("checkpoint has " + std::to_string(count) + " parameters, model expects " +
                         std::to_string(store.size()));
    }
    for (std::uint64_t k = 0; k < count; ++k) {
        const std::string name = read_string(is);
        Tensor t = store.get(name);
        const std::uint64_t rank = read_u64(is);
        Shape shape(rank);
        for (auto& d : shape) d = read_u64(is);
        if (shape != t.shape()) {
            throw ParseError("checkpoint shape mismatch for " + name + ": " + shape_str(shape) + " vs " +
                             shape_str(t.shape()));
        }
        for (double& v : t.mutable_values()) {
            std::uint64_t bits = read_u64(is);
            std::memcpy(&v, &bits, sizeof v);
        }
    }
    return metadata;
}

}  // namespace sadga::ad
