#include "rsflow/toyspeech.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "rsflow/binary_io.hpp"
#include "rsflow/ltnt.hpp"
#include "tagged_fields.hpp"

namespace rsflow {

namespace {

constexpr std::uint8_t kCodebookVersion = 1;
constexpr int kMaxAttemptsPerPattern = 1000;

double pattern_distance(const Matrix<float>& a, const Matrix<float>& b) {
    return (a.cast<double>() - b.cast<double>()).squaredNorm() / static_cast<double>(a.size());
}

}  // namespace

Codebook make_codebook(SeededRng rng, int vocab_size, int channels, int frames_per_token, double min_dist,
                       double frame_rate) {
    if (vocab_size < 2) throw GenerationError("make_codebook: need at least 2 tokens, got " + std::to_string(vocab_size));
    if (channels < 1 || frames_per_token < 1) throw GenerationError("make_codebook: channels and frames per token must be >= 1");

    Codebook cb;
    cb.vocab_size = vocab_size;
    cb.channels = channels;
    cb.frames_per_token = frames_per_token;
    cb.frame_rate = frame_rate;
    cb.min_dist_requested = min_dist;
    const Matrix<float> silence = Matrix<float>::Zero(channels, frames_per_token);

    for (int k = 0; k < vocab_size; ++k) {
        bool accepted = false;
        for (int attempt = 0; attempt < kMaxAttemptsPerPattern && !accepted; ++attempt) {
            Matrix<float> candidate(channels, frames_per_token);
            for (Eigen::Index i = 0; i < candidate.size(); ++i) candidate.data()[i] = static_cast<float>(rng.normal());
            accepted = pattern_distance(candidate, silence) >= min_dist;
            for (const auto& p : cb.patterns) accepted = accepted && pattern_distance(candidate, p) >= min_dist;
            if (accepted) cb.patterns.push_back(std::move(candidate));
        }
        if (!accepted)
            throw GenerationError("make_codebook: could not place pattern " + std::to_string(k) + " at distance " +
                                  std::to_string(min_dist) + "; use a smaller vocabulary or larger C*F");
    }
    cb.patterns.push_back(silence);

    double closest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cb.patterns.size(); ++i)
        for (std::size_t j = i + 1; j < cb.patterns.size(); ++j)
            closest = std::min(closest, pattern_distance(cb.patterns[i], cb.patterns[j]));
    cb.min_pairwise_distance = closest;
    return cb;
}

LatentSequence encode(std::span<const int> tokens, const Codebook& codebook, double noise_sigma, SeededRng& rng) {
    if (tokens.empty()) throw ConditionError("encode: empty token sequence");
    const int F = codebook.frames_per_token;
    LatentSequence out(codebook.channels, static_cast<Eigen::Index>(tokens.size()) * F, codebook.frame_rate);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const int tok = tokens[i];
        if (tok < 0 || tok >= codebook.vocab_size)
            throw ConditionError("encode: token id " + std::to_string(tok) + " outside vocabulary of " +
                                 std::to_string(codebook.vocab_size));
        out.values().middleCols(static_cast<Eigen::Index>(i) * F, F) = codebook.pattern(tok);
    }
    if (noise_sigma > 0.0)
        for (Eigen::Index i = 0; i < out.values().size(); ++i)
            out.data()[i] += static_cast<float>(noise_sigma * rng.normal());
    return out;
}

Tokens oracle_decode(const LatentSequence& latent, const Codebook& codebook) {
    if (latent.channels() != codebook.channels)
        throw ShapeError("oracle_decode: latent has " + std::to_string(latent.channels()) + " channels, codebook " +
                         std::to_string(codebook.channels));
    const int F = codebook.frames_per_token;
    const Eigen::Index groups = latent.frames() / F;
    Tokens out;
    for (Eigen::Index g = 0; g < groups; ++g) {
        const Matrix<double> block = latent.values().middleCols(g * F, F).cast<double>();
        int best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (int k = 0; k <= codebook.vocab_size; ++k) {
            const double d = (block - codebook.pattern(k).cast<double>()).squaredNorm();
            if (d < best_dist) {
                best_dist = d;
                best = k;
            }
        }
        if (best != codebook.silence_token()) out.push_back(best);
    }
    return out;
}

LatentSequence silence_latent(const Codebook& codebook, Eigen::Index frames) {
    if (frames < 1) throw RangeError("silence_latent: need at least one frame");
    const auto& pattern = codebook.pattern(codebook.silence_token());
    LatentSequence out(codebook.channels, frames, codebook.frame_rate);
    for (Eigen::Index j = 0; j < frames; ++j) out.frame(j) = pattern.col(j % codebook.frames_per_token);
    return out;
}

std::string token_name(int token) {
    std::string name;
    long n = token;
    do {
        name.insert(name.begin(), static_cast<char>('a' + n % 26));
        n = n / 26 - 1;
    } while (n >= 0);
    return name;
}

std::string render_text(std::span<const int> tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += token_name(tokens[i]);
    }
    return out;
}

void DatasetConfig::validate() const {
    auto positive = [](long v, const char* name) {
        if (v < 1) throw ConfigError(std::string("data.") + name + ": must be >= 1, got " + std::to_string(v));
    };
    positive(vocab_size, "vocab_size");
    if (vocab_size < 2) throw ConfigError("data.vocab_size: must be >= 2");
    positive(channels, "channels");
    positive(frames_per_token, "frames_per_token");
    positive(seq_len, "seq_len");
    if (train_size < 0 || eval_size < 0) throw ConfigError("data.train_size/eval_size: must be >= 0");
    if (!(frame_rate > 0.0)) throw ConfigError("data.frame_rate: must be positive");
    if (!(noise_sigma >= 0.0)) throw ConfigError("data.noise_sigma: must be >= 0");
    if (frames() < 2) throw ConfigError("data: seq_len * frames_per_token must be >= 2");
    // Eval sequences must be unique, with room left for train sequences.
    const double space = std::pow(static_cast<double>(vocab_size), seq_len);
    if (static_cast<double>(eval_size) >= space)
        throw ConfigError("data.eval_size: " + std::to_string(eval_size) + " unique sequences requested from a space of " +
                          std::to_string(space));
}

Dataset gen_dataset(const DatasetConfig& cfg, const Codebook& codebook, SeededRng rng) {
    cfg.validate();
    if (codebook.vocab_size != cfg.vocab_size || codebook.channels != cfg.channels ||
        codebook.frames_per_token != cfg.frames_per_token)
        throw ConfigError("data: codebook shape does not match the dataset configuration");

    auto draw_tokens = [&](SeededRng& r) {
        Tokens t(static_cast<std::size_t>(cfg.seq_len));
        for (auto& v : t) v = static_cast<int>(r.uniform_int(0, static_cast<std::uint64_t>(cfg.vocab_size - 1)));
        return t;
    };
    auto make_utterance = [&](Tokens tokens, SeededRng& r) {
        ToyUtterance u;
        u.latent = encode(tokens, codebook, cfg.noise_sigma, r);
        u.text = render_text(tokens);
        u.tokens = std::move(tokens);
        return u;
    };

    Dataset ds;
    std::set<Tokens> eval_set;
    const SeededRng eval_rng = rng.substream("eval");
    for (int i = 0; i < cfg.eval_size; ++i) {
        const SeededRng item = eval_rng.substream(static_cast<std::uint64_t>(i));
        for (std::uint64_t attempt = 0;; ++attempt) {
            SeededRng r = item.substream(attempt);
            Tokens t = draw_tokens(r);
            if (eval_set.insert(t).second) {
                ds.eval.push_back(make_utterance(std::move(t), r));
                break;
            }
        }
    }
    const SeededRng train_rng = rng.substream("train");
    for (int i = 0; i < cfg.train_size; ++i) {
        const SeededRng item = train_rng.substream(static_cast<std::uint64_t>(i));
        for (std::uint64_t attempt = 0;; ++attempt) {
            SeededRng r = item.substream(attempt);
            Tokens t = draw_tokens(r);
            if (!eval_set.contains(t)) {
                ds.train.push_back(make_utterance(std::move(t), r));
                break;
            }
        }
    }
    return ds;
}

void write_dataset_file(const std::filesystem::path& path, std::span<const ToyUtterance> utterances) {
    std::string text;
    for (const auto& u : utterances) {
        for (std::size_t i = 0; i < u.tokens.size(); ++i) {
            if (i) text.push_back(',');
            text += std::to_string(u.tokens[i]);
        }
        text.push_back('\t');
        text += to_hex(encode_ltnt(u.latent));
        text.push_back('\n');
    }
    write_file_atomic(path, std::span<const char>(text.data(), text.size()));
}

std::vector<ToyUtterance> read_dataset_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<ToyUtterance> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": missing tab separator");
        ToyUtterance u;
        std::stringstream ids(line.substr(0, tab));
        std::string id;
        while (std::getline(ids, id, ',')) {
            try {
                u.tokens.push_back(std::stoi(id));
            } catch (const std::exception&) {
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad token id '" + id + "'");
            }
        }
        if (u.tokens.empty()) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": no token ids");
        u.latent = decode_ltnt(from_hex(std::string_view(line).substr(tab + 1)));
        u.text = render_text(u.tokens);
        out.push_back(std::move(u));
    }
    return out;
}

std::vector<char> encode_codebook(const Codebook& cb) {
    ByteWriter w;
    w.bytes("CBOK");
    w.u8(kCodebookVersion);
    tagged::put_u32(w, 1, static_cast<std::uint32_t>(cb.vocab_size));
    tagged::put_u32(w, 2, static_cast<std::uint32_t>(cb.channels));
    tagged::put_u32(w, 3, static_cast<std::uint32_t>(cb.frames_per_token));
    tagged::put_f64(w, 4, cb.frame_rate);
    tagged::put_f64(w, 5, cb.min_dist_requested);
    tagged::put_f64(w, 6, cb.min_pairwise_distance);
    tagged::end(w);
    for (const auto& p : cb.patterns)
        for (Eigen::Index i = 0; i < p.size(); ++i) w.f32(p.data()[i]);
    w.u32(crc32_of(w.buffer()));
    return w.take();
}

Codebook decode_codebook(std::span<const char> bytes) {
    if (bytes.size() < 4) throw FormatError("CBOK: file too short");
    const auto body = bytes.first(bytes.size() - 4);
    ByteReader tail(bytes.last(4), "CBOK");
    if (tail.u32() != crc32_of(body)) throw FormatError("CBOK: checksum mismatch");

    ByteReader r(body, "CBOK");
    if (r.bytes(4) != "CBOK") throw FormatError("CBOK: bad magic");
    if (const auto v = r.u8(); v != kCodebookVersion) throw FormatError("CBOK: unsupported version " + std::to_string(v));
    Codebook cb;
    tagged::read_fields(r, "CBOK", [&](std::uint8_t tag, const tagged::Value& v) {
        switch (tag) {
            case 1: cb.vocab_size = static_cast<int>(v.as_u32()); break;
            case 2: cb.channels = static_cast<int>(v.as_u32()); break;
            case 3: cb.frames_per_token = static_cast<int>(v.as_u32()); break;
            case 4: cb.frame_rate = v.as_f64(); break;
            case 5: cb.min_dist_requested = v.as_f64(); break;
            case 6: cb.min_pairwise_distance = v.as_f64(); break;
            default: throw FormatError("CBOK: unknown field tag " + std::to_string(tag));
        }
    });
    if (cb.vocab_size < 2 || cb.channels < 1 || cb.frames_per_token < 1) throw FormatError("CBOK: invalid shape");
    for (int k = 0; k <= cb.vocab_size; ++k) {
        Matrix<float> p(cb.channels, cb.frames_per_token);
        for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = r.f32();
        cb.patterns.push_back(std::move(p));
    }
    r.expect_end();
    return cb;
}

void write_codebook(const std::filesystem::path& path, const Codebook& codebook) {
    write_file_atomic(path, encode_codebook(codebook));
}

Codebook read_codebook(const std::filesystem::path& path) { return decode_codebook(read_file(path)); }

}  // namespace rsflow
