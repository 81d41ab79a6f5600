#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>

#include "rsflow/error.hpp"

namespace rsflow {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// A C x T grid of latent frames sampled at a fixed frame rate.
///
/// Storage is a column-major C x T Eigen matrix, so column j is frame j and the
/// flat buffer is frame-major: value (c, j) lives at j * C + c.
template <typename Scalar>
class Latent {
public:
    using Storage = Matrix<Scalar>;

    Latent() = default;

    Latent(Eigen::Index channels, Eigen::Index frames, double frame_rate)
        : values_(Storage::Zero(channels, frames)), frame_rate_(frame_rate) {
        validate();
    }

    Latent(Storage values, double frame_rate) : values_(std::move(values)), frame_rate_(frame_rate) {
        validate();
    }

    static Latent zeros(Eigen::Index channels, Eigen::Index frames, double frame_rate) {
        return Latent(channels, frames, frame_rate);
    }

    Eigen::Index channels() const { return values_.rows(); }
    Eigen::Index frames() const { return values_.cols(); }
    double frame_rate() const { return frame_rate_; }
    bool empty() const { return values_.size() == 0; }

    const Storage& values() const { return values_; }
    Storage& values() { return values_; }

    auto frame(Eigen::Index j) const { return values_.col(j); }
    auto frame(Eigen::Index j) { return values_.col(j); }

    Scalar* data() { return values_.data(); }
    const Scalar* data() const { return values_.data(); }

    bool all_finite() const { return values_.allFinite(); }

    template <typename Other>
    Latent<Other> cast() const {
        return Latent<Other>(values_.template cast<Other>(), frame_rate_);
    }

    bool same_shape(const Latent& other) const {
        return channels() == other.channels() && frames() == other.frames();
    }

    friend bool operator==(const Latent& a, const Latent& b) {
        return a.same_shape(b) && a.frame_rate_ == b.frame_rate_ && a.values_ == b.values_;
    }

private:
    void validate() const {
        if (values_.rows() < 1 || values_.cols() < 1)
            throw ShapeError("latent needs at least one channel and one frame");
        if (!(frame_rate_ > 0.0) || !std::isfinite(frame_rate_))
            throw ShapeError("latent frame rate must be positive and finite");
    }

    Storage values_;
    double frame_rate_ = 1.0;
};

using LatentSequence = Latent<float>;

inline std::string shape_string(Eigen::Index c, Eigen::Index t) {
    return std::to_string(c) + "x" + std::to_string(t);
}

template <typename Scalar>
void require_same_shape(const Latent<Scalar>& a, const Latent<Scalar>& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " +
                         shape_string(a.channels(), a.frames()) + " vs " +
                         shape_string(b.channels(), b.frames()));
}

/// round(seconds * frame_rate), never below 1 frame for a positive duration.
inline std::size_t frames_for_seconds(double seconds, double frame_rate) {
    if (seconds <= 0.0) return 0;
    const auto n = static_cast<std::size_t>(std::llround(seconds * frame_rate));
    return n == 0 ? 1 : n;
}

/// Mean squared difference over all C*T entries, accumulated in double.
template <typename Scalar>
double mse(const Latent<Scalar>& a, const Latent<Scalar>& b) {
    require_same_shape(a, b, "mse");
    return (a.values().template cast<double>() - b.values().template cast<double>())
               .squaredNorm() /
           static_cast<double>(a.values().size());
}

/// Copy of dst with frames [dst_start, dst_start + len) taken from
/// src frames [src_start, src_start + len).
template <typename Scalar>
Latent<Scalar> overwrite_span(const Latent<Scalar>& dst, Eigen::Index dst_start,
                              const Latent<Scalar>& src, Eigen::Index src_start,
                              Eigen::Index len) {
    if (dst.channels() != src.channels())
        throw ShapeError("overwrite_span: channel mismatch " + std::to_string(dst.channels()) +
                         " vs " + std::to_string(src.channels()));
    if (len < 1 || dst_start < 0 || src_start < 0 || dst_start + len > dst.frames() ||
        src_start + len > src.frames())
        throw RangeError("overwrite_span: span [" + std::to_string(dst_start) + ", +" +
                         std::to_string(len) + ") from [" + std::to_string(src_start) +
                         ", +" + std::to_string(len) + ") out of range");
    Latent<Scalar> out = dst;
    out.values().middleCols(dst_start, len) = src.values().middleCols(src_start, len);
    return out;
}

}  // namespace rsflow
