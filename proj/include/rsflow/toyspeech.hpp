#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rsflow/latent.hpp"
#include "rsflow/rng.hpp"
#include "rsflow/tokens.hpp"

namespace rsflow {

/// Token patterns standing in for a speech codec. Pattern index vocab_size
/// is silence and is all zeros.
struct Codebook {
    int vocab_size = 0;
    int channels = 0;
    int frames_per_token = 0;
    double frame_rate = 20.0;
    double min_dist_requested = 0.0;
    double min_pairwise_distance = 0.0;
    std::vector<Matrix<float>> patterns;  // vocab_size + 1 matrices, C x F

    int silence_token() const { return vocab_size; }
    const Matrix<float>& pattern(int token) const { return patterns.at(static_cast<std::size_t>(token)); }

    friend bool operator==(const Codebook&, const Codebook&) = default;
};

/// Rejection-samples N(0, 1) patterns until every pair (silence included)
/// is at least min_dist apart in mean squared distance.
Codebook make_codebook(SeededRng rng, int vocab_size, int channels, int frames_per_token, double min_dist,
                       double frame_rate = 20.0);

/// Concatenates token patterns along frames and adds N(0, sigma^2) noise.
LatentSequence encode(std::span<const int> tokens, const Codebook& codebook, double noise_sigma, SeededRng& rng);

/// Nearest pattern per F-frame group; silence groups are dropped and a
/// trailing partial group is ignored.
Tokens oracle_decode(const LatentSequence& latent, const Codebook& codebook);

/// Silence pattern tiled to the requested frame count.
LatentSequence silence_latent(const Codebook& codebook, Eigen::Index frames);

/// Bijective base-26 lowercase names: 0 -> "a", 25 -> "z", 26 -> "aa".
std::string token_name(int token);
std::string render_text(std::span<const int> tokens);

struct ToyUtterance {
    Tokens tokens;
    std::string text;
    LatentSequence latent;
};

struct DatasetConfig {
    int vocab_size = 16;
    int channels = 8;
    int frames_per_token = 4;
    double frame_rate = 20.0;
    int seq_len = 12;
    int train_size = 5000;
    int eval_size = 200;
    double noise_sigma = 0.05;
    double min_dist = 0.5;

    void validate() const;
    Eigen::Index frames() const { return static_cast<Eigen::Index>(seq_len) * frames_per_token; }
};

struct Dataset {
    std::vector<ToyUtterance> train;
    std::vector<ToyUtterance> eval;
};

/// Uniform random token sequences; eval sequences are unique and no train
/// sequence equals any eval sequence.
Dataset gen_dataset(const DatasetConfig& cfg, const Codebook& codebook, SeededRng rng);

// Dataset files hold one utterance per line: comma-separated token ids, a
// tab, then the hex-encoded LTNT bytes of the latent.
void write_dataset_file(const std::filesystem::path& path, std::span<const ToyUtterance> utterances);
std::vector<ToyUtterance> read_dataset_file(const std::filesystem::path& path);

// CBOK: "CBOK", u8 version, tagged header fields, patterns as f32 LE,
// CRC-32 of all preceding bytes.
std::vector<char> encode_codebook(const Codebook& codebook);
Codebook decode_codebook(std::span<const char> bytes);
void write_codebook(const std::filesystem::path& path, const Codebook& codebook);
Codebook read_codebook(const std::filesystem::path& path);

}  // namespace rsflow
