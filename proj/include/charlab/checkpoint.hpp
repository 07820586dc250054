#pragma once

#include <cstdint>
#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "charlab/errors.hpp"

namespace charlab::ckpt {

// Binary checkpoint: header (version, config identity, step, is_ema) plus
// ordered named tensors (name, dtype, shape, raw little-endian values).
// Save -> load round-trips bitwise.
struct NamedTensor {
    std::string name;
    uint8_t dtype = 4;  // bytes per value: 4 = f32, 8 = f64
    std::vector<int64_t> shape;
    std::vector<char> raw;
};

struct Checkpoint {
    uint64_t step = 0;
    uint64_t opt_step = 0;
    bool is_ema = false;
    std::map<std::string, std::string> identity;
    std::vector<NamedTensor> tensors;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    const NamedTensor* find(const std::string& name) const;

    template <typename Real>
    void add(const std::string& name, const std::vector<Real>& values, std::vector<int64_t> shape) {
        NamedTensor t;
        t.name = name;
        t.dtype = sizeof(Real);
        t.shape = std::move(shape);
        t.raw.resize(values.size() * sizeof(Real));
        std::memcpy(t.raw.data(), values.data(), t.raw.size());
        tensors.push_back(std::move(t));
    }

    template <typename Real>
    std::vector<Real> get(const std::string& name) const {
        const NamedTensor* t = find(name);
        if (!t) throw DataError("checkpoint: missing tensor '" + name + "'");
        if (t->dtype != sizeof(Real))
            throw DataError("checkpoint: tensor '" + name + "' has dtype width " + std::to_string(t->dtype) +
                            ", expected " + std::to_string(sizeof(Real)));
        std::vector<Real> out(t->raw.size() / sizeof(Real));
        std::memcpy(out.data(), t->raw.data(), t->raw.size());
        return out;
    }
};

// Structured mismatch error naming the first differing identity field.
void check_identity(const std::map<std::string, std::string>& expected,
                    const std::map<std::string, std::string>& found);

}  // namespace charlab::ckpt
