#ifndef CTDS_NET_HPP
#define CTDS_NET_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ctds/common.hpp"
#include "ctds/fourier.hpp"
#include "ctds/rng.hpp"

namespace ctds {

// ---------------------------------------------------------------------------
// Activations (closed-form first and second derivatives; the training loss
// contains input derivatives of the networks, so phi must be C^2)
// ---------------------------------------------------------------------------

enum class Activation { Silu, Tanh };

inline double act_value(Activation a, double u) {
    switch (a) {
        case Activation::Silu: return u / (1.0 + std::exp(-u));
        case Activation::Tanh: return std::tanh(u);
    }
    return 0.0;
}

inline double act_d1(Activation a, double u) {
    switch (a) {
        case Activation::Silu: {
            const double s = 1.0 / (1.0 + std::exp(-u));
            return s + u * s * (1.0 - s);
        }
        case Activation::Tanh: {
            const double th = std::tanh(u);
            return 1.0 - th * th;
        }
    }
    return 0.0;
}

inline double act_d2(Activation a, double u) {
    switch (a) {
        case Activation::Silu: {
            const double s = 1.0 / (1.0 + std::exp(-u));
            return s * (1.0 - s) * (2.0 + u * (1.0 - 2.0 * s));
        }
        case Activation::Tanh: {
            const double th = std::tanh(u);
            return -2.0 * th * (1.0 - th * th);
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Network specification
// ---------------------------------------------------------------------------

struct InputGroupSpec {
    enum class Kind { Position, Time, Temperature };
    Kind kind = Kind::Position;
    Index dim = 1;
    Index fourier_features = 0;
    double fourier_scale = 1.0;
};

struct NetSpec {
    std::vector<InputGroupSpec> groups;
    Index hidden_width = 64;
    Index depth = 2;  // number of hidden layers
    Index output_dim = 1;
    Activation activation = Activation::Silu;

    Index raw_input_dim() const {
        Index n = 0;
        for (const auto& g : groups) n += g.dim;
        return n;
    }

    // depth 0 degenerates to a single linear layer; production nets use >= 1
    void validate() const {
        require(depth >= 0, "NetSpec: depth must be >= 0");
        require(hidden_width >= 1 && output_dim >= 1, "NetSpec: dims must be >= 1");
        require(!groups.empty(), "NetSpec: at least one input group");
        bool seen[3] = {false, false, false};
        for (const auto& g : groups) {
            require(g.dim >= 1, "NetSpec: group dim must be >= 1");
            const int k = static_cast<int>(g.kind);
            require(!seen[k], "NetSpec: duplicate input group kind");
            seen[k] = true;
            if (g.kind != InputGroupSpec::Kind::Position)
                require(g.dim == 1, "NetSpec: time/temperature groups are scalar");
        }
    }
};

// ---------------------------------------------------------------------------
// Augmented evaluation
//
// Alongside values, the forward pass carries exact directional derivatives of
// every activation with respect to the network inputs: the d position
// directions, time, and (in continuum mode) the temperature coordinate xi.
// A layer matrix therefore has B*(1+k) columns arranged as
//   [ values | dir_0 | dir_1 | ... | dir_{k-1} ]
// with B columns per block. Linear layers act uniformly on all blocks;
// activations scale derivative blocks by phi'(a).
// ---------------------------------------------------------------------------

struct BatchInput {
    const Mat* x = nullptr;       // d x B, required iff the net has a position group
    const Vec* t = nullptr;       // B, required iff the net has a time group
    const Vec* temp = nullptr;    // B, temperature-group input values (beta)
    const Vec* dtemp = nullptr;   // B, d(input)/d(xi) chain seed (beta')
};

// One particle-sized view of BatchInput.
struct PointInput {
    const Vec* x = nullptr;
    double t = 0.0;
    double temp = 0.0;
    double dtemp = 0.0;
};

struct AugmentedActivation {
    Vec value;      // output_dim
    Mat jac_x;      // output_dim x d (empty when the net has no position group)
    double div_x = 0.0;
    bool has_div = false;  // tracked only when output_dim equals the position dim
    Vec d_dt;       // output_dim (zero when no time group)
    Vec d_dxi;      // output_dim (zero when no temperature group)
};

// Recorded augmented forward pass over one batch. Reusable across calls of the
// same shape without reallocation; a tape can back exactly one reverse pass.
struct Tape {
    Index batch = 0;
    std::vector<Mat> z;     // z[0] = embedded input, z[l] = post-activation, z[L] = output
    std::vector<Mat> a;     // a[l] = pre-activation of hidden layer l (1..L-1)
    std::vector<Mat> phi1;  // phi'(a[l]) on the value block
    Mat scratch0, scratch1;
    Mat embed_jac;          // per-point embedding jacobian scratch
    bool consumed = false;

    const Mat& output() const { return z.back(); }
};

class Network {
   public:
    Network() = default;

    static Network create(NetSpec spec, std::uint64_t fourier_seed_base) {
        spec.validate();
        Network n;
        n.spec_ = std::move(spec);
        for (std::size_t g = 0; g < n.spec_.groups.size(); ++g) {
            const auto& gs = n.spec_.groups[g];
            n.maps_.push_back(FourierMap::create(gs.dim, gs.fourier_features, gs.fourier_scale,
                                                 derive_seed(fourier_seed_base, g)));
        }
        n.finish_build();
        return n;
    }

    static Network restore(NetSpec spec, std::vector<FourierMap> maps) {
        spec.validate();
        Network n;
        n.spec_ = std::move(spec);
        n.maps_ = std::move(maps);
        require(n.maps_.size() == n.spec_.groups.size(), "Network::restore: group count mismatch");
        n.finish_build();
        return n;
    }

    const NetSpec& spec() const { return spec_; }
    const std::vector<FourierMap>& fourier_maps() const { return maps_; }
    Index output_dim() const { return spec_.output_dim; }
    Index position_dim() const { return pos_dim_; }
    bool has_position() const { return pos_dim_ > 0; }
    bool has_time() const { return has_time_; }
    bool has_temperature() const { return has_temp_; }
    Index num_dirs() const { return num_dirs_; }
    Index dir_t() const { return dir_t_; }
    Index dir_xi() const { return dir_xi_; }
    Index num_layers() const { return static_cast<Index>(layer_in_.size()); }
    Index param_count() const { return param_count_; }

    // Fan-in-scaled uniform init; the output layer may be zeroed so the
    // network starts as the constant-zero map.
    Vec init_params(std::uint64_t seed, bool zero_output_layer = false) const {
        Vec p(param_count_);
        Rng rng(seed);
        const Index L = num_layers();
        for (Index l = 0; l < L; ++l) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(layer_in_[l]));
            const Index n = layer_out_[l] * layer_in_[l] + layer_out_[l];
            if (zero_output_layer && l == L - 1) {
                p.segment(w_offset_[l], n).setZero();
            } else {
                for (Index i = 0; i < n; ++i) p[w_offset_[l] + i] = (2.0 * rng.uniform() - 1.0) * bound;
            }
        }
        return p;
    }

    Eigen::Map<const Mat> weights(Eigen::Ref<const Vec> params, Index l) const {
        return {params.data() + w_offset_[l], layer_out_[l], layer_in_[l]};
    }
    Eigen::Map<const Vec> bias(Eigen::Ref<const Vec> params, Index l) const {
        return {params.data() + b_offset_[l], layer_out_[l]};
    }

    // Augmented forward over a batch; records everything reverse needs.
    void forward(Eigen::Ref<const Vec> params, const BatchInput& in, Tape& tape) const {
        require(params.size() == param_count_, "Network: parameter vector size mismatch");
        const Index B = input_batch_size(in);
        prepare_tape(tape, B);
        embed_batch(in, tape);
        const Index L = num_layers();
        for (Index l = 0; l < L; ++l) {
            Mat& a = (l == L - 1) ? tape.z[L] : tape.a[l + 1];
            a.noalias() = weights(params, l) * tape.z[l];
            a.leftCols(B).colwise() += bias(params, l);
            if (!a.leftCols(B).allFinite())
                throw numerical_error("forward_augmented: non-finite value in layer " +
                                      std::to_string(l));
            if (l < L - 1) apply_activation(a, tape.z[l + 1], tape.phi1[l + 1], B);
        }
        tape.consumed = false;
    }

    // Reverse accumulation through the recorded augmented pass. out_adjoint has
    // the output-layer shape (output_dim x B*(1+k)); grad is accumulated +=.
    void backward(Eigen::Ref<const Vec> params, Tape& tape, const Mat& out_adjoint,
                  Eigen::Ref<Vec> grad) const {
        require(!tape.consumed, "backward_params: tape already consumed");
        require(grad.size() == param_count_, "backward_params: gradient size mismatch");
        const Index B = tape.batch;
        const Index blocks = 1 + num_dirs_;
        const Index L = num_layers();
        require(out_adjoint.rows() == spec_.output_dim && out_adjoint.cols() == B * blocks,
                "backward_params: adjoint shape mismatch");
        tape.scratch0.resize(max_width_, B * blocks);
        tape.scratch1.resize(max_width_, B * blocks);
        // zbar holds the adjoint of the current layer's (post-activation) output
        auto zbar = tape.scratch0.topRows(spec_.output_dim);
        zbar = out_adjoint;
        for (Index l = L - 1; l >= 0; --l) {
            auto abar = tape.scratch0.topRows(layer_out_[l]);
            if (l < L - 1) {
                // activation adjoint, in place: value block picks up the
                // phi'' term from the derivative blocks
                const Mat& a = tape.a[l + 1];
                const Mat& p1 = tape.phi1[l + 1];
                auto av = a.leftCols(B).array();
                Mat dirsum = Mat::Zero(layer_out_[l], B);
                for (Index j = 0; j < num_dirs_; ++j)
                    dirsum.array() += a.middleCols(B * (1 + j), B).array() *
                                      abar.middleCols(B * (1 + j), B).array();
                Mat p2(layer_out_[l], B);
                if (spec_.activation == Activation::Silu) {
                    auto s = 1.0 / (1.0 + (-av).exp());
                    p2.array() = s * (1.0 - s) * (2.0 + av * (1.0 - 2.0 * s));
                } else {
                    auto th = av.tanh();
                    p2.array() = -2.0 * th * (1.0 - th * th);
                }
                for (Index j = 0; j < num_dirs_; ++j) {
                    auto blk = abar.middleCols(B * (1 + j), B);
                    blk.array() *= p1.array();
                }
                auto vblk = abar.leftCols(B);
                vblk.array() = vblk.array() * p1.array() + p2.array() * dirsum.array();
            }
            // parameter gradients
            Eigen::Map<Mat> gw(grad.data() + w_offset_[l], layer_out_[l], layer_in_[l]);
            gw.noalias() += abar * tape.z[l].transpose();
            Eigen::Map<Vec> gb(grad.data() + b_offset_[l], layer_out_[l]);
            gb.noalias() += abar.leftCols(B).rowwise().sum();
            if (l > 0) {
                auto prev = tape.scratch1.topRows(layer_in_[l]);
                prev.noalias() = weights(params, l).transpose() * abar;
                tape.scratch0.topRows(layer_in_[l]) = prev;
            }
        }
        tape.consumed = true;
    }

    // Convenience single-point evaluation (no reverse pass). The tape doubles
    // as a workspace so repeated calls do not allocate.
    void forward_point(Eigen::Ref<const Vec> params, const PointInput& in, Tape& ws,
                       AugmentedActivation& out) const {
        Mat xmat;
        Vec tvec, tempvec, dtempvec;
        BatchInput bi;
        if (has_position()) {
            require(in.x != nullptr, "forward_augmented: missing position input");
            xmat = *in.x;
            bi.x = &xmat;
        }
        if (has_time_) {
            tvec = Vec::Constant(1, in.t);
            bi.t = &tvec;
        }
        if (has_temp_) {
            tempvec = Vec::Constant(1, in.temp);
            dtempvec = Vec::Constant(1, in.dtemp);
            bi.temp = &tempvec;
            bi.dtemp = &dtempvec;
        }
        forward(params, bi, ws);
        extract_point(ws, out);
    }

    void extract_point(const Tape& tape, AugmentedActivation& out) const {
        const Mat& y = tape.output();
        const Index m = spec_.output_dim;
        out.value = y.col(0);
        if (pos_dim_ > 0) {
            out.jac_x.resize(m, pos_dim_);
            for (Index i = 0; i < pos_dim_; ++i) out.jac_x.col(i) = y.col(1 + i);
        } else {
            out.jac_x.resize(m, 0);
        }
        out.has_div = (pos_dim_ > 0 && m == pos_dim_);
        out.div_x = out.has_div ? out.jac_x.trace() : 0.0;
        out.d_dt = has_time_ ? Vec(y.col(1 + dir_t_)) : Vec(Vec::Zero(m));
        out.d_dxi = has_temp_ ? Vec(y.col(1 + dir_xi_)) : Vec(Vec::Zero(m));
    }

   private:
    void finish_build() {
        pos_dim_ = 0;
        has_time_ = has_temp_ = false;
        for (std::size_t g = 0; g < spec_.groups.size(); ++g) {
            switch (spec_.groups[g].kind) {
                case InputGroupSpec::Kind::Position: pos_dim_ = spec_.groups[g].dim; break;
                case InputGroupSpec::Kind::Time: has_time_ = true; break;
                case InputGroupSpec::Kind::Temperature: has_temp_ = true; break;
            }
        }
        num_dirs_ = pos_dim_ + (has_time_ ? 1 : 0) + (has_temp_ ? 1 : 0);
        dir_t_ = pos_dim_;
        dir_xi_ = pos_dim_ + (has_time_ ? 1 : 0);
        embed_dim_ = 0;
        for (const auto& m : maps_) embed_dim_ += m.embed_dim();

        const Index L = spec_.depth + 1;
        layer_in_.assign(L, spec_.hidden_width);
        layer_out_.assign(L, spec_.hidden_width);
        layer_in_[0] = embed_dim_;
        layer_out_[L - 1] = spec_.output_dim;
        w_offset_.resize(L);
        b_offset_.resize(L);
        Index off = 0;
        for (Index l = 0; l < L; ++l) {
            w_offset_[l] = off;
            off += layer_out_[l] * layer_in_[l];
            b_offset_[l] = off;
            off += layer_out_[l];
        }
        param_count_ = off;
        max_width_ = embed_dim_;
        for (Index l = 0; l < L; ++l) max_width_ = std::max(max_width_, layer_out_[l]);
    }

    Index input_batch_size(const BatchInput& in) const {
        Index B = -1;
        auto take = [&](Index n) {
            if (B < 0) B = n;
            require(B == n, "Network: inconsistent batch sizes across input groups");
        };
        if (has_position()) {
            require(in.x != nullptr, "Network: missing position input");
            require(in.x->rows() == pos_dim_, "Network: position dimension mismatch");
            take(in.x->cols());
        }
        if (has_time_) {
            require(in.t != nullptr, "Network: missing time input");
            take(in.t->size());
        }
        if (has_temp_) {
            require(in.temp != nullptr && in.dtemp != nullptr,
                    "Network: missing temperature input");
            take(in.temp->size());
            take(in.dtemp->size());
        }
        require(B >= 1, "Network: empty batch");
        return B;
    }

    void prepare_tape(Tape& tape, Index B) const {
        const Index L = num_layers();
        const Index blocks = 1 + num_dirs_;
        tape.batch = B;
        tape.z.resize(L + 1);
        tape.a.resize(L);      // a[1..L-1] used
        tape.phi1.resize(L);   // phi1[1..L-1] used
        tape.z[0].resize(embed_dim_, B * blocks);
        for (Index l = 0; l < L - 1; ++l) {
            tape.a[l + 1].resize(layer_out_[l], B * blocks);
            tape.phi1[l + 1].resize(layer_out_[l], B);
            tape.z[l + 1].resize(layer_out_[l], B * blocks);
        }
        tape.z[L].resize(spec_.output_dim, B * blocks);
    }

    void apply_activation(const Mat& a, Mat& z, Mat& phi1, Index B) const {
        auto av = a.leftCols(B).array();
        if (spec_.activation == Activation::Silu) {
            auto s = 1.0 / (1.0 + (-av).exp());
            z.leftCols(B).array() = av * s;
            phi1.array() = s + av * s * (1.0 - s);
        } else {
            auto th = av.tanh();
            z.leftCols(B).array() = th;
            phi1.array() = 1.0 - th * th;
        }
        for (Index j = 0; j < num_dirs_; ++j)
            z.middleCols(B * (1 + j), B).array() =
                phi1.array() * a.middleCols(B * (1 + j), B).array();
    }

    void embed_batch(const BatchInput& in, Tape& tape) const {
        const Index B = tape.batch;
        Mat& z0 = tape.z[0];
        z0.setZero();
        Index row = 0;
        for (std::size_t g = 0; g < spec_.groups.size(); ++g) {
            const auto& gs = spec_.groups[g];
            const auto& map = maps_[g];
            const Index ed = map.embed_dim();
            tape.embed_jac.resize(ed, gs.dim);
            Vec gin(gs.dim);
            for (Index j = 0; j < B; ++j) {
                switch (gs.kind) {
                    case InputGroupSpec::Kind::Position: gin = in.x->col(j); break;
                    case InputGroupSpec::Kind::Time: gin[0] = (*in.t)[j]; break;
                    case InputGroupSpec::Kind::Temperature: gin[0] = (*in.temp)[j]; break;
                }
                map.embed_jacobian(gin, z0.col(j).segment(row, ed), tape.embed_jac);
                switch (gs.kind) {
                    case InputGroupSpec::Kind::Position:
                        for (Index i = 0; i < gs.dim; ++i)
                            z0.col(B * (1 + i) + j).segment(row, ed) = tape.embed_jac.col(i);
                        break;
                    case InputGroupSpec::Kind::Time:
                        z0.col(B * (1 + dir_t_) + j).segment(row, ed) = tape.embed_jac.col(0);
                        break;
                    case InputGroupSpec::Kind::Temperature:
                        z0.col(B * (1 + dir_xi_) + j).segment(row, ed) =
                            tape.embed_jac.col(0) * (*in.dtemp)[j];
                        break;
                }
            }
            row += ed;
        }
    }

    NetSpec spec_;
    std::vector<FourierMap> maps_;
    Index pos_dim_ = 0;
    bool has_time_ = false, has_temp_ = false;
    Index num_dirs_ = 0, dir_t_ = 0, dir_xi_ = 0;
    Index embed_dim_ = 0, param_count_ = 0, max_width_ = 0;
    std::vector<Index> layer_in_, layer_out_, w_offset_, b_offset_;
};

}  // namespace ctds

#endif  // CTDS_NET_HPP
