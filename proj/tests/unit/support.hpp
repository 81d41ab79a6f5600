#pragma once

// Helpers and independent reference implementations shared by the unit and
// acceptance tests. Nothing here calls into the code it is used to check.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "rsflow/latent.hpp"

namespace testsupport {

inline rsflow::LatentSequence row_latent(const std::vector<float>& v, double rate = 20.0) {
    rsflow::Matrix<float> m(1, static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
    return {m, rate};
}

inline std::vector<float> row_values(const rsflow::LatentSequence& x, Eigen::Index channel = 0) {
    std::vector<float> out;
    for (Eigen::Index j = 0; j < x.frames(); ++j) out.push_back(x.values()(channel, j));
    return out;
}

inline std::vector<float> iota_row(int n) {
    std::vector<float> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = static_cast<float>(i);
    return v;
}

/// Fills a C x T latent from std::mt19937_64, independent of SeededRng.
inline rsflow::LatentSequence random_latent(Eigen::Index c, Eigen::Index t, std::mt19937_64& gen, double rate = 20.0) {
    std::normal_distribution<float> nd;
    rsflow::Matrix<float> m(c, t);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(gen);
    return {m, rate};
}

/// A fresh directory removed on scope exit.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("rsflow_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

/// Levenshtein distance by memoized recursion over suffixes; deliberately a
/// different formulation from the bottom-up table in the library.
template <typename T>
std::size_t levenshtein_oracle(const std::vector<T>& a, const std::vector<T>& b) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
    std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
        if (i == a.size()) return b.size() - j;
        if (j == b.size()) return a.size() - i;
        const auto key = std::make_pair(i, j);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        std::size_t best = go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
        best = std::min(best, go(i + 1, j) + 1);
        best = std::min(best, go(i, j + 1) + 1);
        memo[key] = best;
        return best;
    };
    return go(0, 0);
}

/// repeat overwrite from an explicit copy of the source frames.
inline rsflow::LatentSequence snapshot_copy(const rsflow::LatentSequence& x, Eigen::Index s, Eigen::Index len,
                                            Eigen::Index k) {
    std::vector<std::vector<float>> snapshot;
    for (Eigen::Index j = s; j < s + len; ++j) {
        std::vector<float> frame;
        for (Eigen::Index c = 0; c < x.channels(); ++c) frame.push_back(x.values()(c, j));
        snapshot.push_back(frame);
    }
    rsflow::LatentSequence out = x;
    for (Eigen::Index d = 0; d < len; ++d)
        for (Eigen::Index c = 0; c < x.channels(); ++c)
            out.values()(c, k + d) = snapshot[static_cast<std::size_t>(d)][static_cast<std::size_t>(c)];
    return out;
}

}  // namespace testsupport
