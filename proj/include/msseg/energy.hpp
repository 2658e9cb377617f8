#pragma once

// Terms of the relaxed Mumford-Shah energy with threshold-dynamics length
// penalty, entropy smoothing and a pluggable regularity operator L.

#include <cstddef>
#include <memory>
#include <string>

#include "msseg/ops.hpp"
#include "msseg/tensor.hpp"

namespace msseg {

struct EnergyParams {
    double lambda = 0.1;   ///< smoothness weight
    double alpha = 1.0;    ///< boundary-length weight
    double epsilon = 0.1;  ///< entropy weight (softmax temperature)
    double sigma = 2.0;    ///< Gaussian width in pixels
    double gamma = 0.0;    ///< edge-weight slope
    double dt = 0.0;       ///< time step; 0 selects 0.9 / ||A|| per step

    void validate() const;
};

/// Sampled 2D Gaussian truncated at radius ceil(3 sigma), normalised to sum 1.
class GaussianKernel {
public:
    explicit GaussianKernel(double sigma);

    double sigma() const noexcept { return sigma_; }
    std::size_t radius() const noexcept { return radius_; }
    const Tensor& values() const noexcept { return values_; }

    /// k * x channelwise, replicate padding.
    Tensor apply(const Tensor& x) const;

private:
    double sigma_;
    std::size_t radius_;
    Tensor values_;
};

GaussianKernel make_gaussian_kernel(double sigma);

/// N x H x W field whose pixels lie on the probability simplex.
class LabelField {
public:
    static constexpr double kTolerance = 1e-9;

    /// Throws std::invalid_argument unless every pixel is on the simplex.
    explicit LabelField(Tensor values);

    static LabelField uniform(std::size_t classes, std::size_t h, std::size_t w);
    static LabelField from_logits(const Tensor& logits) { return LabelField(channel_softmax(logits)); }
    /// One-hot field from per-pixel class indices.
    static LabelField one_hot(const std::vector<int>& labels, std::size_t classes, std::size_t h, std::size_t w);
    /// Clamps to [0,1] and divides by the channel sum.
    static LabelField renormalized(const Tensor& values);

    static bool is_simplex(const Tensor& values, double tol = kTolerance);

    const Tensor& values() const noexcept { return values_; }
    std::size_t classes() const { return values_.channels(); }
    std::size_t height() const { return values_.height(); }
    std::size_t width() const { return values_.width(); }

private:
    struct Unchecked {};
    LabelField(Tensor values, Unchecked) : values_(std::move(values)) {}
    Tensor values_;
};

/// The operator L in the smoothness term and its companion L*.
///
/// forward maps C channels to groups()*C channels; channel g*C + c holds
/// component g of channel c.
class RegularityOperator {
public:
    virtual ~RegularityOperator() = default;
    virtual Tensor forward(const Tensor& u) const = 0;
    virtual Tensor adjoint(const Tensor& y) const = 0;
    virtual std::size_t groups() const = 0;
    virtual bool is_linear() const = 0;
    virtual std::string name() const = 0;
};

using RegularityOperatorPtr = std::shared_ptr<const RegularityOperator>;

/// L = 0.
class ZeroOp final : public RegularityOperator {
public:
    Tensor forward(const Tensor& u) const override;
    Tensor adjoint(const Tensor& y) const override;
    std::size_t groups() const override { return 1; }
    bool is_linear() const override { return true; }
    std::string name() const override { return "zero"; }
};

/// Forward differences divided by `spacing`; last row/column difference is 0.
/// The adjoint is the exact transpose (a negative divergence).
class GradOp final : public RegularityOperator {
public:
    explicit GradOp(double spacing = 1.0);
    Tensor forward(const Tensor& u) const override;
    Tensor adjoint(const Tensor& y) const override;
    std::size_t groups() const override { return 2; }
    bool is_linear() const override { return true; }
    std::string name() const override { return "grad"; }
    double spacing() const noexcept { return spacing_; }

private:
    double spacing_;
};

/// L = conv -> relu -> conv, L* = transpose conv -> relu -> transpose conv
/// with tied weights. L* is the architectural transpose, not an adjoint.
class LearnedOp final : public RegularityOperator {
public:
    LearnedOp(ConvKernel first, ConvKernel second);
    Tensor forward(const Tensor& u) const override;
    Tensor adjoint(const Tensor& y) const override;
    std::size_t groups() const override;
    bool is_linear() const override { return false; }
    std::string name() const override { return "learned"; }

private:
    ConvKernel first_, second_;
};

/// Tiles a C-channel tensor `groups` times along the channel axis.
Tensor broadcast_groups(const Tensor& v, std::size_t groups);
/// sum over groups of squares: (groups*C) x H x W -> C x H x W.
Tensor group_square_norm(const Tensor& y, std::size_t groups);

/// alpha * sum_n <e v_n, k*(1 - v_n)>.
double td_regularizer(const LabelField& v, const GaussianKernel& k, const Tensor& edge, double alpha);

/// alpha * k*(1 - 2 v_anchor), channelwise (the e = 1 supporting hyperplane).
Tensor subgradient_p(const LabelField& v_anchor, const GaussianKernel& k, double alpha);

inline constexpr double kEntropyClamp = 1e-12;
/// epsilon * sum v ln v with v clamped below at 1e-12 inside the log.
double entropy_term(const LabelField& v, double epsilon);

/// 1 / (1 + gamma |grad f|) for a single-channel image.
Tensor edge_weight(const Tensor& f, double gamma);

struct EnergyTerms {
    double fidelity = 0.0;    ///< 1/2 <(f - u)^2, v>
    double smoothness = 0.0;  ///< lambda/2 <v, |L u|^2>
    double linearized = 0.0;  ///< alpha <k*(1 - 2 v_anchor), v - v_anchor>
    double entropy = 0.0;     ///< epsilon <v, ln v>
    double anchor = 0.0;      ///< alpha <v_anchor, k*(1 - v_anchor)>
    double total() const { return fidelity + smoothness + linearized + entropy + anchor; }
};

/// Energy of (u, v) linearised at v_anchor. u and f_hat have C = I*N
/// channels; v and v_anchor have N. The fidelity and smoothness terms use v
/// expanded over the I features, the other three are per class.
EnergyTerms energy_terms(const Tensor& u, const LabelField& v, const Tensor& f_hat, const LabelField& v_anchor,
                         const RegularityOperator& op, const EnergyParams& params, const GaussianKernel& k);

double total_energy(const Tensor& u, const LabelField& v, const Tensor& f_hat, const LabelField& v_anchor,
                    const RegularityOperator& op, const EnergyParams& params);

}  // namespace msseg
