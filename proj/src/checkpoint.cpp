#include "charlab/checkpoint.hpp"

#include <fstream>
#include <sstream>

namespace charlab::ckpt {

namespace {

constexpr char kMagic[8] = {'C', 'L', 'A', 'B', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& what) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw DataError("checkpoint: truncated while reading " + what);
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_pod<uint32_t>(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const std::string& what) {
    const uint32_t len = read_pod<uint32_t>(in, what);
    std::string s(len, '\0');
    if (len && !in.read(s.data(), len)) throw DataError("checkpoint: truncated while reading " + what);
    return s;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("checkpoint: cannot write " + path);
    out.write(kMagic, sizeof(kMagic));
    write_pod<uint32_t>(out, kVersion);
    write_pod<uint64_t>(out, step);
    write_pod<uint64_t>(out, opt_step);
    write_pod<uint8_t>(out, is_ema ? 1 : 0);
    std::ostringstream id;
    for (const auto& [k, v] : identity) id << k << '=' << v << '\n';
    write_string(out, id.str());
    write_pod<uint32_t>(out, static_cast<uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        write_string(out, t.name);
        write_pod<uint8_t>(out, t.dtype);
        write_pod<uint8_t>(out, static_cast<uint8_t>(t.shape.size()));
        for (const int64_t d : t.shape) write_pod<int64_t>(out, d);
        write_pod<uint64_t>(out, static_cast<uint64_t>(t.raw.size()));
        out.write(t.raw.data(), static_cast<std::streamsize>(t.raw.size()));
    }
    if (!out) throw DataError("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open " + path);
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("checkpoint: " + path + " is not a checkpoint file");
    const uint32_t version = read_pod<uint32_t>(in, "version");
    if (version != kVersion)
        throw DataError("checkpoint: unsupported format version " + std::to_string(version));
    Checkpoint c;
    c.step = read_pod<uint64_t>(in, "step");
    c.opt_step = read_pod<uint64_t>(in, "opt_step");
    c.is_ema = read_pod<uint8_t>(in, "is_ema") != 0;
    const std::string id = read_string(in, "identity");
    std::istringstream iss(id);
    std::string line;
    while (std::getline(iss, line)) {
        const size_t eq = line.find('=');
        if (eq != std::string::npos) c.identity[line.substr(0, eq)] = line.substr(eq + 1);
    }
    const uint32_t count = read_pod<uint32_t>(in, "tensor count");
    c.tensors.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        t.name = read_string(in, "tensor name");
        t.dtype = read_pod<uint8_t>(in, "dtype");
        const uint8_t rank = read_pod<uint8_t>(in, "rank");
        for (uint8_t r = 0; r < rank; ++r) t.shape.push_back(read_pod<int64_t>(in, "shape"));
        const uint64_t bytes = read_pod<uint64_t>(in, "byte length");
        t.raw.resize(bytes);
        if (bytes && !in.read(t.raw.data(), static_cast<std::streamsize>(bytes)))
            throw DataError("checkpoint: truncated tensor data in " + path);
        c.tensors.push_back(std::move(t));
    }
    return c;
}

const NamedTensor* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

void check_identity(const std::map<std::string, std::string>& expected,
                    const std::map<std::string, std::string>& found) {
    for (const auto& [k, v] : expected) {
        const auto it = found.find(k);
        const std::string got = it == found.end() ? "<missing>" : it->second;
        if (got != v)
            throw DataError("checkpoint: config mismatch on field '" + k + "': checkpoint has '" + got +
                            "', run config needs '" + v + "'");
    }
    for (const auto& [k, v] : found) {
        if (!expected.count(k))
            throw DataError("checkpoint: config mismatch on field '" + k + "': checkpoint has '" + v +
                            "', run config does not define it");
    }
}

}  // namespace charlab::ckpt
