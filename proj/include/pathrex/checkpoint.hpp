#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pathrex/corpus.hpp"
#include "pathrex/errors.hpp"
#include "pathrex/model.hpp"
#include "pathrex/util.hpp"

namespace pathrex::joint {

// Magic "PNRE", u32 version, dims block (d_w, d_p, d_c, k, n_r, d_R, |V|,
// pos_clip), parameter tensors as 32-bit little-endian reals in declared
// order, then a 64-bit hash of the vocabulary + relation tables.
inline constexpr char kCheckpointMagic[4] = {'P', 'N', 'R', 'E'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Covers both the token vocabulary and the relation inventory, in index
// order, so a checkpoint can refuse mismatched tables on load.
inline std::uint64_t table_fingerprint(const corpus::Vocabulary& vocab,
                                       const corpus::StringTable& relations) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::int32_t i = 0; i < vocab.size(); ++i) {
        h = fnv1a(vocab.token(i), h);
        h = fnv1a("\x1f", h);
    }
    h = fnv1a("\x1e", h);
    for (std::int32_t i = 0; i < relations.size(); ++i) {
        h = fnv1a(relations.name(i), h);
        h = fnv1a("\x1f", h);
    }
    return h;
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    std::uint32_t u32() {
        if (pos + 4 > buf.size()) throw CorruptError("checkpoint truncated");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)])) << (8 * i);
        pos += 4;
        return v;
    }

    std::uint64_t u64() {
        if (pos + 8 > buf.size()) throw CorruptError("checkpoint truncated");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)])) << (8 * i);
        pos += 8;
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }
};

}  // namespace detail

template <typename T>
void save_checkpoint(const ModelT<T>& model, const std::string& path) {
    std::string out;
    out.append(kCheckpointMagic, 4);
    detail::put_u32(out, kCheckpointVersion);
    const EncoderConfig& e = model.enc;
    for (int dim : {e.d_w, e.d_p, e.d_c, e.window, e.n_r, model.d_r,
                    static_cast<int>(model.vocab_size), e.pos_clip})
        detail::put_u32(out, static_cast<std::uint32_t>(dim));
    for (const char* name : param::kOrder) {
        const TensorT<T>& t = model.params.value(name);
        for (T x : t.v) detail::put_f32(out, static_cast<float>(x));
    }
    detail::put_u64(out, model.vocab_hash);

    // temp-then-rename so an interrupted save never leaves a partial file
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write checkpoint: " + tmp);
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw IoError("failed writing checkpoint: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place: " + path + " (" + ec.message() + ")");
}

// Dims come from the file; when a config is supplied its dimensions must
// agree. Truncated or oversized files are rejected without constructing a
// partial model.
inline ModelT<float> load_checkpoint(const std::string& path, const RunConfig* expect = nullptr) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    detail::Reader r{buf};
    if (buf.size() < 4 || std::memcmp(buf.data(), kCheckpointMagic, 4) != 0)
        throw FormatError("not a checkpoint file (bad magic): " + path);
    r.pos = 4;
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));

    ModelT<float> m;
    m.enc.d_w = static_cast<int>(r.u32());
    m.enc.d_p = static_cast<int>(r.u32());
    m.enc.d_c = static_cast<int>(r.u32());
    m.enc.window = static_cast<int>(r.u32());
    m.enc.n_r = static_cast<int>(r.u32());
    m.d_r = static_cast<int>(r.u32());
    m.vocab_size = static_cast<std::int64_t>(r.u32());
    m.enc.pos_clip = static_cast<int>(r.u32());
    m.enc.max_len = expect != nullptr ? expect->max_len : m.enc.max_len;
    m.enc.validate();

    if (expect != nullptr) {
        auto mismatch = [](const char* what, int got, int want) {
            throw DimError(std::string("checkpoint dimension ") + what + "=" + std::to_string(got) +
                           " does not match configured " + std::to_string(want));
        };
        if (m.enc.d_w != expect->d_w) mismatch("d_w", m.enc.d_w, expect->d_w);
        if (m.enc.d_p != expect->d_p) mismatch("d_p", m.enc.d_p, expect->d_p);
        if (m.enc.d_c != expect->d_c) mismatch("d_c", m.enc.d_c, expect->d_c);
        if (m.enc.window != expect->window) mismatch("window", m.enc.window, expect->window);
        if (m.d_r != expect->d_r) mismatch("d_r", m.d_r, expect->d_r);
        if (m.enc.pos_clip != expect->pos_clip) mismatch("pos_clip", m.enc.pos_clip, expect->pos_clip);
    }

    const int d = m.enc.input_dim();
    const std::vector<std::pair<const char*, std::vector<std::int64_t>>> shapes = {
        {param::kWordEmb, {m.vocab_size, m.enc.d_w}},
        {param::kPosHead, {m.enc.pos_rows(), m.enc.d_p}},
        {param::kPosTail, {m.enc.pos_rows(), m.enc.d_p}},
        {param::kConvW, {m.enc.d_c, static_cast<std::int64_t>(m.enc.window) * d}},
        {param::kConvB, {m.enc.d_c}},
        {param::kClsW, {m.enc.n_r, m.enc.d_c}},
        {param::kClsB, {m.enc.n_r}},
        {param::kRelEmb, {m.enc.n_r, m.d_r}},
    };
    std::int64_t f32_count = 0;
    for (const auto& [name, shape] : shapes) f32_count += TensorT<float>::numel_of(shape);
    const std::size_t expected_size = 4 + 4 + 8 * 4 + static_cast<std::size_t>(f32_count) * 4 + 8;
    if (buf.size() < expected_size) throw CorruptError("checkpoint truncated: " + path);
    if (buf.size() > expected_size) throw CorruptError("checkpoint has trailing bytes: " + path);

    for (const auto& [name, shape] : shapes) {
        TensorT<float> t(shape);
        for (auto& x : t.v) x = r.f32();
        m.params.add(name, std::move(t));
    }
    m.vocab_hash = r.u64();
    return m;
}

}  // namespace pathrex::joint
