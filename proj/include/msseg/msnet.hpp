#pragma once

// Unrolled multigrid segmentation network. Every level owns a down-pass and
// an up-pass feature extractor (one explicit u-step plus one softmax v-step
// with learned L and k), and a stride-2 restriction conv. The coarsest level
// runs only its down-pass extractor; its up-pass extractor and restriction
// are stored but never evaluated.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "msseg/autodiff.hpp"
#include "msseg/energy.hpp"

namespace msseg {

struct FemParams {
    ConvKernel L1, L2;  ///< L = L2 . relu . L1 (C -> C -> C, 3x3, no bias)
    ConvKernel k;       ///< N -> N 3x3 kernel of the length term
    Tensor lambda, alpha, log_inv_eps, dt;  ///< one-element tensors
};

struct LevelParams {
    FemParams down, up;
    ConvKernel restriction;  ///< C -> C, 3x3, applied with stride 2
};

struct MsnetHyper {
    std::size_t features = 8;  ///< I
    std::size_t classes = 2;   ///< N
    std::size_t grids = 5;     ///< H
    bool tail_relu = true;

    std::size_t channels() const { return features * classes; }
};

struct ParamRef {
    std::string name;
    Tensor* tensor;
    bool active;  ///< false for stored parameters the forward pass never reads
};

struct ConstParamRef {
    std::string name;
    const Tensor* tensor;
    bool active;
};

struct MsnetParams {
    MsnetHyper hyper;
    ConvKernel head;  ///< 1 -> I, with bias
    std::vector<LevelParams> levels;
    ConvKernel tail1;  ///< C -> C, with bias
    ConvKernel tail2;  ///< C -> N, with bias

    /// Every parameter tensor in a fixed order (the order of GradientSet,
    /// the optimiser state and the weights file).
    std::vector<ParamRef> tensors();
    std::vector<ConstParamRef> tensors() const;

    std::size_t parameter_count() const;
    std::size_t active_parameter_count() const;
};

/// One gradient per entry of MsnetParams::tensors(), same shapes.
using GradientSet = std::vector<Tensor>;

MsnetParams init_params(std::uint64_t seed, const MsnetHyper& hyper);
MsnetParams init_params(std::uint64_t seed, std::size_t features, std::size_t classes, std::size_t grids);

/// Head conv followed by N-fold class replication: 1 x H x W -> C x H x W.
Tensor head_forward(const Tensor& f, const MsnetParams& params);

/// One extractor step; returns (u_next, v_next).
std::pair<Tensor, LabelField> fem_forward(const Tensor& u, const LabelField& v, const Tensor& f_hat,
                                          const FemParams& fem);

struct ForwardTrace {
    ad::Tape tape;
    std::vector<ad::NodeId> params;  ///< aligned with MsnetParams::tensors()
    ad::NodeId input = 0;
    ad::NodeId logits = 0;  ///< tail output before the final softmax
    ad::NodeId output = 0;
    std::vector<ad::NodeId> labels;  ///< every v produced by a softmax or transfer

    const Tensor& output_value() const { return tape.value(output); }
    /// Re-evaluates the tape and checks every node is reproduced bit for bit.
    bool replay_matches() const;
};

ForwardTrace msnet_forward(const Tensor& f, const MsnetParams& params);
/// Output labels only.
Tensor msnet_predict(const Tensor& f, const MsnetParams& params);

GradientSet msnet_backward(const ForwardTrace& trace, const Tensor& loss_grad);
GradientSet zero_gradients(const MsnetParams& params);

void save_params(const MsnetParams& params, const std::filesystem::path& path);
MsnetParams load_params(const std::filesystem::path& path);

namespace detail {

struct FemNodes {
    ad::NodeId L1, L2, k, lambda, alpha, log_inv_eps, dt;
};

/// Records one extractor step on `tape`; returns (u_next, v_next).
std::pair<ad::NodeId, ad::NodeId> record_fem(ad::Tape& tape, ad::NodeId u, ad::NodeId v, ad::NodeId f_hat,
                                             const FemNodes& fem, std::size_t features, std::size_t classes);

}  // namespace detail

}  // namespace msseg
