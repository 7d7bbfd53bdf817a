#ifndef G2HF_PARAMS_HPP
#define G2HF_PARAMS_HPP

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "g2hf/rng.hpp"
#include "g2hf/tape.hpp"
#include "g2hf/tensor.hpp"

namespace g2hf {

enum class WeightError {
    BadMagic,
    VersionMismatch,
    Truncated,
    ShapeMismatch,
    UnknownParam,
    Io,
};

class weight_file_error : public std::runtime_error {
public:
    weight_file_error(WeightError code, const std::string& msg)
        : std::runtime_error(msg), code_(code) {}
    WeightError code() const { return code_; }

private:
    WeightError code_;
};

// Named parameter tensors keyed by dotted path (e.g. "mde1.branch3.convA.weight").
// When an Rng is attached, missing parameters are created on first fetch:
// conv weights uniform(-b, b) with b = 1/sqrt(fan_in), biases zero. The
// creation order is the forward traversal order, so a fixed seed fully
// determines the weights.
class ParamStore {
public:
    std::map<std::string, Tensor> tensors;

    void attach_init_rng(Rng* rng) { init_rng_ = rng; }
    bool initializing() const { return init_rng_ != nullptr; }

    const Tensor& fetch(const std::string& name, const std::vector<int>& shape, int fan_in,
                        double gain = 1.0) {
        auto it = tensors.find(name);
        if (it == tensors.end()) {
            if (!init_rng_)
                throw weight_file_error(WeightError::UnknownParam,
                                        "missing parameter '" + name + "'");
            Tensor t = fan_in > 0 ? Tensor::uniform(shape, *init_rng_, gain / std::sqrt(fan_in))
                                  : Tensor::zeros(shape);
            it = tensors.emplace(name, std::move(t)).first;
        } else if (it->second.shape() != shape) {
            throw weight_file_error(WeightError::ShapeMismatch,
                                    "parameter '" + name + "' has shape " +
                                        Tensor::shape_str(it->second.shape()) + ", expected " +
                                        Tensor::shape_str(shape));
        }
        return it->second;
    }

private:
    Rng* init_rng_ = nullptr;
};

// Binds ParamStore tensors onto a tape as trainable leaves and remembers
// name -> var so gradients can be collected by name after backward.
struct Ctx {
    Tape& tape;
    ParamStore& weights;
    std::string prefix;
    std::map<std::string, Var>* bound = nullptr;

    Ctx sub(const std::string& s) const { return Ctx{tape, weights, prefix + s + ".", bound}; }

    Var param(const std::string& name, const std::vector<int>& shape, int fan_in,
              double gain = 1.0) {
        const std::string full = prefix + name;
        if (bound) {
            auto it = bound->find(full);
            // cached vars may have been scope-freed on a gradient-free tape
            if (it != bound->end() && tape.grad_enabled) return it->second;
        }
        Var v = tape.leaf(weights.fetch(full, shape, fan_in, gain));
        if (bound) (*bound)[full] = v;
        return v;
    }

    // shape-preserving k x k conv parameters; returns (weight, bias).
    // gain scales the init bound above the 1/sqrt(fan_in) baseline
    // (sqrt(6) keeps variance through a ReLU conv, sqrt(3) through a linear one).
    std::pair<Var, Var> conv(const std::string& name, int c_out, int c_in, int k,
                             double gain = 1.0) {
        Var w = param(name + ".weight", {c_out, c_in, k, k}, c_in * k * k, gain);
        Var b = param(name + ".bias", {c_out}, 0);
        return {w, b};
    }
};

// ---------------------------------------------------------------------------
// Weight file format (little-endian):
//   magic "G2HF" | u32 version=1 | u32 tensor count
//   per tensor: u32 name length | name bytes | u32 ndim | u32 dims[ndim]
//               | f32 data (row-major)
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw weight_file_error(WeightError::Truncated, "truncated weight file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& os, float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put_u32(os, u);
}

inline float get_f32(std::istream& is) {
    std::uint32_t u = get_u32(is);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

} // namespace detail

inline void save_weights(const ParamStore& w, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw weight_file_error(WeightError::Io, "cannot open '" + path + "' for writing");
    os.write("G2HF", 4);
    detail::put_u32(os, 1);
    detail::put_u32(os, static_cast<std::uint32_t>(w.tensors.size()));
    for (const auto& [name, t] : w.tensors) {
        detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::put_u32(os, static_cast<std::uint32_t>(t.ndim()));
        for (int i = 0; i < t.ndim(); ++i) detail::put_u32(os, static_cast<std::uint32_t>(t.size(i)));
        for (long long i = 0; i < t.numel(); ++i) detail::put_f32(os, static_cast<float>(t[i]));
    }
    if (!os) throw weight_file_error(WeightError::Io, "write failure on '" + path + "'");
}

inline ParamStore load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw weight_file_error(WeightError::Io, "cannot open '" + path + "'");
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "G2HF", 4) != 0)
        throw weight_file_error(WeightError::BadMagic, "bad magic in '" + path + "'");
    const std::uint32_t version = detail::get_u32(is);
    if (version != 1)
        throw weight_file_error(WeightError::VersionMismatch,
                                "unsupported weight file version " + std::to_string(version));
    const std::uint32_t count = detail::get_u32(is);
    ParamStore w;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t nlen = detail::get_u32(is);
        std::string name(nlen, '\0');
        if (!is.read(name.data(), nlen))
            throw weight_file_error(WeightError::Truncated, "truncated weight file");
        const std::uint32_t ndim = detail::get_u32(is);
        std::vector<int> shape;
        for (std::uint32_t d = 0; d < ndim; ++d)
            shape.push_back(static_cast<int>(detail::get_u32(is)));
        Tensor t(shape);
        for (long long j = 0; j < t.numel(); ++j) t[j] = detail::get_f32(is);
        w.tensors.emplace(std::move(name), std::move(t));
    }
    return w;
}

// Checks that the file held exactly the parameters the model consumed.
inline void check_all_bound(const ParamStore& w, const std::map<std::string, Var>& bound) {
    for (const auto& [name, t] : w.tensors)
        if (!bound.count(name))
            throw weight_file_error(WeightError::UnknownParam,
                                    "unknown parameter name '" + name + "'");
}

} // namespace g2hf

#endif
