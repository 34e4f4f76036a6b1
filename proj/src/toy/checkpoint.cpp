#include "memcol/toy/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "memcol/errors.hpp"

namespace memcol::toy {

namespace {

constexpr char kMagic[] = "memory-colors-toy-checkpoint/1\n";

void put_u64(std::ostream& out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 8);
}

void put_i32(std::ostream& out, std::int32_t v) {
    put_u64(out, static_cast<std::uint64_t>(static_cast<std::uint32_t>(v)));
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

void put_string(std::ostream& out, const std::string& s) {
    put_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
    put_u64(out, v.size());
    for (double x : v) put_f64(out, x);
}

struct Reader {
    std::istream& in;
    const std::string& path;

    std::uint64_t u64() {
        char buf[8];
        in.read(buf, 8);
        if (in.gcount() != 8) throw FormatError(path + ": truncated checkpoint");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
        return v;
    }
    std::int32_t i32() {
        const std::uint64_t v = u64();
        if (v > 0xffffffffULL) throw FormatError(path + ": corrupt integer field");
        return static_cast<std::int32_t>(static_cast<std::uint32_t>(v));
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const std::uint64_t len = u64();
        if (len > (1ULL << 20)) throw FormatError(path + ": unreasonable string length");
        std::string s(len, '\0');
        in.read(s.data(), static_cast<std::streamsize>(len));
        if (static_cast<std::uint64_t>(in.gcount()) != len)
            throw FormatError(path + ": truncated checkpoint");
        return s;
    }
    std::vector<double> doubles(std::uint64_t limit = 1ULL << 28) {
        const std::uint64_t n = u64();
        if (n > limit) throw FormatError(path + ": unreasonable tensor size");
        std::vector<double> v(n);
        for (auto& x : v) x = f64();
        return v;
    }
};

void put_mlm_config(std::ostream& out, const MlmConfig& cfg) {
    put_i32(out, cfg.vocab);
    put_i32(out, cfg.dim);
    put_i32(out, cfg.visual_dim);
    put_i32(out, cfg.layers);
    put_i32(out, cfg.heads);
    put_i32(out, cfg.max_len);
    put_i32(out, cfg.ff_mult);
    put_f64(out, cfg.mask_ratio);
    put_f64(out, cfg.mask_split.mask);
    put_f64(out, cfg.mask_split.random);
    put_f64(out, cfg.mask_split.keep);
    put_f64(out, cfg.lr);
    put_i32(out, cfg.steps);
    put_i32(out, cfg.batch);
    put_f64(out, cfg.heldout_fraction);
    put_u64(out, cfg.seed);
}

MlmConfig read_mlm_config(Reader& r) {
    MlmConfig cfg;
    cfg.vocab = r.i32();
    cfg.dim = r.i32();
    cfg.visual_dim = r.i32();
    cfg.layers = r.i32();
    cfg.heads = r.i32();
    cfg.max_len = r.i32();
    cfg.ff_mult = r.i32();
    cfg.mask_ratio = r.f64();
    cfg.mask_split.mask = r.f64();
    cfg.mask_split.random = r.f64();
    cfg.mask_split.keep = r.f64();
    cfg.lr = r.f64();
    cfg.steps = r.i32();
    cfg.batch = r.i32();
    cfg.heldout_fraction = r.f64();
    cfg.seed = r.u64();
    return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path, const ToyCheckpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError(path + ": cannot open for writing");
    out.write(kMagic, sizeof(kMagic) - 1);

    put_u64(out, ckpt.vocab.tokens.size());
    for (const auto& t : ckpt.vocab.tokens) put_string(out, t);

    put_mlm_config(out, ckpt.params.cfg);
    put_doubles(out, ckpt.params.w);

    put_u64(out, ckpt.embedder.has_value() ? 1 : 0);
    if (ckpt.embedder) {
        const JointEmbedder& e = *ckpt.embedder;
        put_i32(out, e.cfg.vocab);
        put_i32(out, e.cfg.dim);
        put_f64(out, e.cfg.lr);
        put_i32(out, e.cfg.steps);
        put_i32(out, e.cfg.batch);
        put_u64(out, e.cfg.seed);
        put_doubles(out, e.text_emb);
        put_doubles(out, e.img_w);
        put_doubles(out, e.img_b);
        put_f64(out, e.log_scale);
    }
    out.flush();
    if (!out) throw FormatError(path + ": write failed");
}

ToyCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path + ": cannot open");
    std::string magic(sizeof(kMagic) - 1, '\0');
    in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
    if (static_cast<std::size_t>(in.gcount()) != magic.size() || magic != kMagic)
        throw FormatError(path + ": not a toy checkpoint (bad format tag)");

    Reader r{in, path};
    ToyCheckpoint ckpt;

    const std::uint64_t n_tokens = r.u64();
    if (n_tokens > (1ULL << 24)) throw FormatError(path + ": unreasonable vocabulary size");
    std::vector<std::string> tokens;
    tokens.reserve(n_tokens);
    for (std::uint64_t i = 0; i < n_tokens; ++i) tokens.push_back(r.str());
    try {
        ckpt.vocab = vocab_from_tokens(tokens);
    } catch (const ConfigError& e) {
        throw FormatError(path + ": invalid vocabulary: " + e.what());
    }

    ckpt.params.cfg = read_mlm_config(r);
    try {
        ckpt.params.layout = make_layout(ckpt.params.cfg);
    } catch (const ConfigError& e) {
        throw FormatError(path + ": invalid model config: " + e.what());
    }
    if (ckpt.params.cfg.vocab != ckpt.vocab.size())
        throw FormatError(path + ": config vocab size disagrees with the token list");
    ckpt.params.w = r.doubles();
    if (ckpt.params.w.size() != ckpt.params.layout.total)
        throw FormatError(path + ": parameter count disagrees with the config");

    const std::uint64_t has_embedder = r.u64();
    if (has_embedder > 1) throw FormatError(path + ": corrupt embedder flag");
    if (has_embedder == 1) {
        JointEmbedder e;
        e.cfg.vocab = r.i32();
        e.cfg.dim = r.i32();
        e.cfg.lr = r.f64();
        e.cfg.steps = r.i32();
        e.cfg.batch = r.i32();
        e.cfg.seed = r.u64();
        if (e.cfg.vocab <= 0 || e.cfg.dim <= 0)
            throw FormatError(path + ": invalid embedder config");
        e.text_emb = r.doubles();
        e.img_w = r.doubles();
        e.img_b = r.doubles();
        e.log_scale = r.f64();
        if (e.text_emb.size() !=
            static_cast<std::size_t>(e.cfg.vocab) * static_cast<std::size_t>(e.cfg.dim))
            throw FormatError(path + ": embedder text tensor size disagrees with the config");
        if (e.img_w.size() !=
            static_cast<std::size_t>(e.cfg.dim) * static_cast<std::size_t>(e.cfg.dim))
            throw FormatError(path + ": embedder image tensor size disagrees with the config");
        if (e.img_b.size() != static_cast<std::size_t>(e.cfg.dim))
            throw FormatError(path + ": embedder bias size disagrees with the config");
        ckpt.embedder = std::move(e);
    }

    in.peek();
    if (!in.eof()) throw FormatError(path + ": trailing bytes after checkpoint");
    return ckpt;
}

}  // namespace memcol::toy
