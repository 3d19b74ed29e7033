#ifndef CTDS_FOURIER_HPP
#define CTDS_FOURIER_HPP

#include <cstdint>

#include "ctds/common.hpp"
#include "ctds/rng.hpp"

namespace ctds {

// Gaussian Fourier feature map. The embedding of v is [v, cos(Wv), sin(Wv)]
// where W has i.i.d. N(0, frequency_scale^2) entries drawn once at
// construction from a recorded seed. Frequencies are immutable afterwards.
class FourierMap {
   public:
    FourierMap() = default;

    static FourierMap create(Index input_dim, Index num_features, double frequency_scale,
                             std::uint64_t seed) {
        require(input_dim >= 1, "FourierMap: input_dim must be >= 1");
        require(num_features >= 0, "FourierMap: num_features must be >= 0");
        require(frequency_scale > 0.0 || num_features == 0,
                "FourierMap: frequency_scale must be positive");
        FourierMap m;
        m.input_dim_ = input_dim;
        m.num_features_ = num_features;
        m.frequency_scale_ = frequency_scale;
        m.seed_ = seed;
        m.frequencies_.resize(num_features, input_dim);
        Rng rng(seed);
        for (Index i = 0; i < num_features; ++i)
            for (Index j = 0; j < input_dim; ++j) m.frequencies_(i, j) = frequency_scale * rng.gaussian();
        return m;
    }

    // For deserialization: frequencies restored verbatim.
    static FourierMap restore(Index input_dim, Index num_features, double frequency_scale,
                              std::uint64_t seed, Mat frequencies) {
        FourierMap m;
        m.input_dim_ = input_dim;
        m.num_features_ = num_features;
        m.frequency_scale_ = frequency_scale;
        m.seed_ = seed;
        require(frequencies.rows() == num_features && frequencies.cols() == input_dim,
                "FourierMap::restore: frequency matrix shape mismatch");
        m.frequencies_ = std::move(frequencies);
        return m;
    }

    Index input_dim() const { return input_dim_; }
    Index num_features() const { return num_features_; }
    double frequency_scale() const { return frequency_scale_; }
    std::uint64_t seed() const { return seed_; }
    const Mat& frequencies() const { return frequencies_; }
    Index embed_dim() const { return input_dim_ + 2 * num_features_; }

    // out = [v, cos(Wv), sin(Wv)]
    void embed(const Vec& v, Eigen::Ref<Vec> out) const {
        require(v.size() == input_dim_, "fourier_embed: input dimension mismatch");
        out.head(input_dim_) = v;
        if (num_features_ == 0) return;
        const Vec phase = frequencies_ * v;
        out.segment(input_dim_, num_features_) = phase.array().cos();
        out.segment(input_dim_ + num_features_, num_features_) = phase.array().sin();
    }

    // Embedding plus its exact Jacobian d(embed)/dv (embed_dim x input_dim).
    void embed_jacobian(const Vec& v, Eigen::Ref<Vec> out, Eigen::Ref<Mat> jac) const {
        require(v.size() == input_dim_, "fourier_embed: input dimension mismatch");
        out.head(input_dim_) = v;
        jac.setZero();
        jac.topLeftCorner(input_dim_, input_dim_).setIdentity();
        if (num_features_ == 0) return;
        const Vec phase = frequencies_ * v;
        const Vec c = phase.array().cos();
        const Vec s = phase.array().sin();
        out.segment(input_dim_, num_features_) = c;
        out.segment(input_dim_ + num_features_, num_features_) = s;
        jac.block(input_dim_, 0, num_features_, input_dim_) = (-s).asDiagonal() * frequencies_;
        jac.block(input_dim_ + num_features_, 0, num_features_, input_dim_) =
            c.asDiagonal() * frequencies_;
    }

   private:
    Index input_dim_ = 0;
    Index num_features_ = 0;
    double frequency_scale_ = 0.0;
    std::uint64_t seed_ = 0;
    Mat frequencies_;
};

}  // namespace ctds

#endif  // CTDS_FOURIER_HPP
