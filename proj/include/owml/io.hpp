#pragma once

// On-disk formats. All integers and floats are little-endian and written
// byte-by-byte, so files are identical across platforms.
//
//   "OTHL" v1  game transcripts: n_games u32, then per game len u8 + tiles u8
//   "OACT" v1  activation dumps: layer u16, n_rows u64, n_cols u32,
//              row-major f32 payload, then n_rows (game u32, timestep u16)
//   "OCKP" v1  checkpoints: section count u32, then per section
//              name-len u16 + name, rank u8, dims u32 each, f32 payload

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "owml/othello.hpp"
#include "owml/tensor.hpp"

namespace owml {

struct IOFailure : std::runtime_error {
    explicit IOFailure(const std::string& what) : std::runtime_error(what) {}
};
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};
struct TruncatedFile : std::runtime_error {
    explicit TruncatedFile(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), std::streamsize(n));
}

template <typename U>
inline void put_le(std::ostream& os, U v) {
    unsigned char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i)
        buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    put_bytes(os, buf, sizeof(U));
}

inline void put_f32(std::ostream& os, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_le(os, bits);
}

inline void get_bytes(std::istream& is, void* p, std::size_t n, const char* ctx) {
    is.read(static_cast<char*>(p), std::streamsize(n));
    if (std::size_t(is.gcount()) != n) throw TruncatedFile(ctx);
}

template <typename U>
inline U get_le(std::istream& is, const char* ctx) {
    unsigned char buf[sizeof(U)];
    get_bytes(is, buf, sizeof(U), ctx);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
        v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
}

inline float get_f32(std::istream& is, const char* ctx) {
    std::uint32_t bits = get_le<std::uint32_t>(is, ctx);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

inline void check_magic(std::istream& is, const char* magic, const char* ctx) {
    char buf[4];
    get_bytes(is, buf, 4, ctx);
    if (std::memcmp(buf, magic, 4) != 0)
        throw FormatError(std::string(ctx) + ": bad magic");
}

inline void check_version(std::istream& is, std::uint32_t want, const char* ctx) {
    const auto got = get_le<std::uint32_t>(is, ctx);
    if (got != want)
        throw FormatError(std::string(ctx) + ": unsupported version " +
                          std::to_string(got));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Transcripts
// ---------------------------------------------------------------------------

inline void write_transcripts(const std::string& path,
                              const std::vector<std::vector<Tile>>& games) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IOFailure("cannot open " + path + " for writing");
    detail::put_bytes(os, "OTHL", 4);
    detail::put_le<std::uint32_t>(os, 1);
    detail::put_le<std::uint32_t>(os, std::uint32_t(games.size()));
    for (const auto& g : games) {
        if (g.size() > 60) throw IOFailure("transcript longer than 60 moves");
        detail::put_le<std::uint8_t>(os, std::uint8_t(g.size()));
        for (Tile t : g) detail::put_le<std::uint8_t>(os, t);
    }
    if (!os) throw IOFailure("write failed: " + path);
}

inline std::vector<std::vector<Tile>> read_transcripts(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IOFailure("cannot open " + path);
    detail::check_magic(is, "OTHL", "transcript");
    detail::check_version(is, 1, "transcript");
    const auto n = detail::get_le<std::uint32_t>(is, "transcript count");
    std::vector<std::vector<Tile>> games(n);
    for (auto& g : games) {
        const auto len = detail::get_le<std::uint8_t>(is, "transcript game");
        g.resize(len);
        for (auto& t : g) t = detail::get_le<std::uint8_t>(is, "transcript move");
    }
    return games;
}

// ---------------------------------------------------------------------------
// Activation dumps
// ---------------------------------------------------------------------------

// Residual-stream rows for one layer, aligned back to (game, timestep).
struct ActivationSet {
    int layer = 0;
    Tensor2D vectors;
    std::vector<std::pair<std::uint32_t, std::uint16_t>> alignment;
};

inline void write_activations(const ActivationSet& set, const std::string& path) {
    if (set.alignment.size() != std::size_t(set.vectors.rows))
        throw IOFailure("activation alignment length != row count");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IOFailure("cannot open " + path + " for writing");
    detail::put_bytes(os, "OACT", 4);
    detail::put_le<std::uint32_t>(os, 1);
    detail::put_le<std::uint16_t>(os, std::uint16_t(set.layer));
    detail::put_le<std::uint64_t>(os, std::uint64_t(set.vectors.rows));
    detail::put_le<std::uint32_t>(os, std::uint32_t(set.vectors.cols));
    for (float v : set.vectors.data) detail::put_f32(os, v);
    for (auto [game, step] : set.alignment) {
        detail::put_le<std::uint32_t>(os, game);
        detail::put_le<std::uint16_t>(os, step);
    }
    if (!os) throw IOFailure("write failed: " + path);
}

inline ActivationSet read_activations(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IOFailure("cannot open " + path);
    detail::check_magic(is, "OACT", "activations");
    detail::check_version(is, 1, "activations");
    ActivationSet set;
    set.layer = detail::get_le<std::uint16_t>(is, "activations layer");
    const auto rows = detail::get_le<std::uint64_t>(is, "activations rows");
    const auto cols = detail::get_le<std::uint32_t>(is, "activations cols");
    set.vectors = Tensor2D(int(rows), int(cols));
    for (auto& v : set.vectors.data) v = detail::get_f32(is, "activations payload");
    set.alignment.resize(rows);
    for (auto& [game, step] : set.alignment) {
        game = detail::get_le<std::uint32_t>(is, "activations alignment");
        step = detail::get_le<std::uint16_t>(is, "activations alignment");
    }
    return set;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

struct CheckpointSection {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
};

inline void write_checkpoint_sections(const std::string& path,
                                      const std::vector<CheckpointSection>& sections) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IOFailure("cannot open " + path + " for writing");
    detail::put_bytes(os, "OCKP", 4);
    detail::put_le<std::uint32_t>(os, 1);
    detail::put_le<std::uint32_t>(os, std::uint32_t(sections.size()));
    for (const auto& s : sections) {
        detail::put_le<std::uint16_t>(os, std::uint16_t(s.name.size()));
        detail::put_bytes(os, s.name.data(), s.name.size());
        detail::put_le<std::uint8_t>(os, std::uint8_t(s.dims.size()));
        std::size_t expect = 1;
        for (auto d : s.dims) {
            detail::put_le<std::uint32_t>(os, d);
            expect *= d;
        }
        if (expect != s.data.size())
            throw IOFailure("checkpoint section " + s.name + ": dims/payload mismatch");
        for (float v : s.data) detail::put_f32(os, v);
    }
    if (!os) throw IOFailure("write failed: " + path);
}

inline std::vector<CheckpointSection> read_checkpoint_sections(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IOFailure("cannot open " + path);
    detail::check_magic(is, "OCKP", "checkpoint");
    detail::check_version(is, 1, "checkpoint");
    const auto count = detail::get_le<std::uint32_t>(is, "checkpoint count");
    std::vector<CheckpointSection> out(count);
    for (auto& s : out) {
        const auto name_len = detail::get_le<std::uint16_t>(is, "checkpoint name");
        s.name.resize(name_len);
        detail::get_bytes(is, s.name.data(), name_len, "checkpoint name");
        const auto rank = detail::get_le<std::uint8_t>(is, "checkpoint rank");
        s.dims.resize(rank);
        std::size_t n = 1;
        for (auto& d : s.dims) {
            d = detail::get_le<std::uint32_t>(is, "checkpoint dims");
            n *= d;
        }
        s.data.resize(n);
        for (auto& v : s.data) v = detail::get_f32(is, "checkpoint payload");
    }
    return out;
}

inline void save_param_store(const std::string& path, const ParamStore& store,
                             std::vector<CheckpointSection> extra = {}) {
    std::vector<CheckpointSection> sections;
    sections.reserve(store.params.size() + extra.size());
    for (const auto& p : store.params) {
        CheckpointSection s;
        s.name = p.name;
        s.dims = {std::uint32_t(p.value.rows), std::uint32_t(p.value.cols)};
        s.data = p.value.data;
        sections.push_back(std::move(s));
    }
    for (auto& s : extra) sections.push_back(std::move(s));
    write_checkpoint_sections(path, sections);
}

// Loads values into an existing store whose shapes must already match.
inline void load_param_store(const std::string& path, ParamStore& store) {
    for (const auto& s : read_checkpoint_sections(path)) {
        if (!store.has(s.name)) continue;  // metadata sections are not params
        auto& p = store.get(s.name);
        if (s.dims.size() != 2 || int(s.dims[0]) != p.value.rows ||
            int(s.dims[1]) != p.value.cols)
            throw FormatError("checkpoint section " + s.name + ": shape mismatch");
        p.value.data = s.data;
    }
}

}  // namespace owml
