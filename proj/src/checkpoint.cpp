#include "lobster/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace lobster {

namespace {

constexpr char kMagic[4] = {'L', 'O', 'B', 'S'};
constexpr std::uint32_t kVersion = 1;

struct Writer {
    std::FILE* f;
    void bytes(const void* p, std::size_t n) {
        if (std::fwrite(p, 1, n, f) != n) throw std::runtime_error("checkpoint: write failed");
    }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void f64(double v) { bytes(&v, 8); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
};

struct Reader {
    std::FILE* f;
    std::string path;
    void bytes(void* p, std::size_t n) {
        if (std::fread(p, 1, n, f) != n)
            throw std::runtime_error("checkpoint: truncated file " + path);
    }
    std::uint8_t u8() { std::uint8_t v; bytes(&v, 1); return v; }
    std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
    std::uint64_t u64() { std::uint64_t v; bytes(&v, 8); return v; }
    double f64() { double v; bytes(&v, 8); return v; }
    std::string str() {
        std::string s(u32(), '\0');
        bytes(s.data(), s.size());
        return s;
    }
};

bool nonzero_bits(double v) {
    std::uint64_t b;
    std::memcpy(&b, &v, 8);
    return b != 0;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path, const std::string& config_text,
                     bool sparse) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    Writer w{f};
    try {
        w.bytes(kMagic, 4);
        w.u32(kVersion);
        w.u8(sparse ? 1 : 0);
        w.u32(static_cast<std::uint32_t>(model.input_shape.size()));
        for (std::size_t d : model.input_shape) w.u64(d);
        w.u32(static_cast<std::uint32_t>(model.layers.size()));
        for (const LayerSpec& l : model.layers) {
            w.u8(static_cast<std::uint8_t>(l.kind));
            w.str(l.name);
            w.u64(l.in); w.u64(l.out); w.u64(l.filters); w.u64(l.ksize); w.u64(l.channels);
        }
        w.u32(static_cast<std::uint32_t>(model.params.size()));
        for (const Param& p : model.params) {
            w.str(p.name);
            w.u32(static_cast<std::uint32_t>(p.value.rank()));
            for (std::size_t d : p.value.shape) w.u64(d);
            const std::size_t n = p.value.size();
            std::vector<std::uint8_t> packed((n + 7) / 8, 0);
            for (std::size_t i = 0; i < n; ++i)
                if (p.mask.alive(i)) packed[i / 8] |= std::uint8_t(1u << (i % 8));
            w.bytes(packed.data(), packed.size());
            if (!sparse) {
                w.bytes(p.value.data.data(), n * 8);
            } else {
                std::uint64_t nnz = 0;
                for (double v : p.value.data)
                    if (nonzero_bits(v)) ++nnz;
                w.u64(nnz);
                for (std::size_t i = 0; i < n; ++i)
                    if (nonzero_bits(p.value.data[i])) {
                        w.u64(i);
                        w.f64(p.value.data[i]);
                    }
            }
        }
        w.str(config_text);
    } catch (...) {
        std::fclose(f);
        throw;
    }
    if (std::fclose(f) != 0) throw std::runtime_error("save_checkpoint: close failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    struct Closer { std::FILE* f; ~Closer() { std::fclose(f); } } closer{f};
    Reader r{f, path};

    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version) +
                                 " in " + path);
    const bool sparse = r.u8() != 0;

    LoadedCheckpoint out;
    Model& m = out.model;
    const std::uint32_t irank = r.u32();
    m.input_shape.resize(irank);
    for (auto& d : m.input_shape) d = r.u64();
    const std::uint32_t nlayers = r.u32();
    m.layers.resize(nlayers);
    for (LayerSpec& l : m.layers) {
        const std::uint8_t kind = r.u8();
        if (kind > static_cast<std::uint8_t>(LayerKind::Flatten))
            throw std::runtime_error("load_checkpoint: corrupt layer kind in " + path);
        l.kind = static_cast<LayerKind>(kind);
        l.name = r.str();
        l.in = r.u64(); l.out = r.u64(); l.filters = r.u64(); l.ksize = r.u64(); l.channels = r.u64();
    }
    const std::uint32_t nparams = r.u32();
    m.params.resize(nparams);
    for (Param& p : m.params) {
        p.name = r.str();
        std::vector<std::size_t> shape(r.u32());
        for (auto& d : shape) d = r.u64();
        p.value = Tensor::zeros(shape);
        const std::size_t n = p.value.size();
        std::vector<std::uint8_t> packed((n + 7) / 8);
        r.bytes(packed.data(), packed.size());
        p.mask = Mask(n);
        for (std::size_t i = 0; i < n; ++i)
            if (!(packed[i / 8] & (1u << (i % 8)))) p.mask.prune(i);
        if (!sparse) {
            r.bytes(p.value.data.data(), n * 8);
        } else {
            const std::uint64_t nnz = r.u64();
            for (std::uint64_t k = 0; k < nnz; ++k) {
                const std::uint64_t idx = r.u64();
                if (idx >= n)
                    throw std::runtime_error("load_checkpoint: corrupt sparse index in " + path);
                p.value.data[idx] = r.f64();
            }
        }
    }
    out.config_text = r.str();
    return out;
}

}  // namespace lobster
