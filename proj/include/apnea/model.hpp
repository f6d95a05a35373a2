#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "apnea/autograd.hpp"
#include "apnea/rng.hpp"
#include "apnea/tensor.hpp"

namespace apnea::model {

struct ResNetConfig {
    std::size_t stem_filters = 32;
    std::vector<std::size_t> stage_filters{32, 64, 128, 256};
    std::vector<std::size_t> stage_blocks{2, 2, 3, 3};
    std::size_t head_units = 256;
    double dropout_rate = 0.5;
    std::size_t input_h = 128;
    std::size_t input_w = 128;
    std::size_t input_c = 1;

    void validate() const;  // throws ConfigError
};

struct Conv {
    ag::Var<float> weight;  // [F,C,kh,kw]
    ag::Var<float> bias;    // [F]
    std::size_t stride = 1;
    ag::Padding padding = ag::Padding::same;
};

struct BatchNorm {
    ag::Var<float> gamma;
    ag::Var<float> beta;
    std::vector<float> running_mean;
    std::vector<float> running_var;
    float momentum = 0.1f;
    float eps = 1e-5f;
};

struct Dense {
    ag::Var<float> weight;  // [D,U]
    ag::Var<float> bias;    // [U]
};

// Conv-BN-ReLU-Conv-BN with the block input added before the final ReLU.
// The first block of a downsampling stage uses stride 2 and a 1x1 stride-2
// projection (with its own BN) on the shortcut.
struct ResidualBlock {
    Conv conv1, conv2;
    BatchNorm bn1, bn2;
    bool has_projection = false;
    Conv proj;
    BatchNorm proj_bn;
};

class ResNetModel {
public:
    ResNetConfig config;
    Conv stem_conv;
    BatchNorm stem_bn;
    std::vector<std::vector<ResidualBlock>> stages;
    Dense fc1, fc2;

    // probabilities [N]; train mode uses batch statistics and dropout (rng
    // required when dropout_rate > 0)
    ag::Var<float> forward(const Tensor<float>& batch, bool train, ag::Tape<float>* tape,
                           RngStream* dropout_rng);

    // (layer name, output shape as {C,H,W} or {units}) computed symbolically
    std::vector<std::pair<std::string, std::vector<std::size_t>>> shape_trace() const;

    // (layer name, element count) in registration order, plus the total
    std::vector<std::pair<std::string, std::size_t>> parameter_counts() const;
    std::size_t count_parameters() const;

    // registration order is fixed and defines the weight-file manifest order
    std::vector<std::pair<std::string, ag::Var<float>>> named_parameters() const;
    std::vector<std::pair<std::string, std::vector<float>*>> named_buffers();
    std::vector<std::pair<std::string, const std::vector<float>*>> named_buffers() const;

    void zero_grad() const;

    // deep copies of all learnable state, for best-epoch restore
    struct Snapshot {
        std::vector<std::vector<float>> params;
        std::vector<std::vector<float>> buffers;
    };
    Snapshot snapshot() const;
    void restore(const Snapshot& snap);
};

ResNetModel build_model(const ResNetConfig& config, RngStream& rng);

}  // namespace apnea::model
