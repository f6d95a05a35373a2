#include "apnea/model.hpp"

#include <cmath>
#include <numeric>

#include "apnea/errors.hpp"

namespace apnea::model {

namespace {

ag::Var<float> he_normal(const std::vector<std::size_t>& shape, std::size_t fan_in,
                         RngStream& rng) {
    Tensor<float> t(shape);
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : t.values) v = static_cast<float>(std_dev * rng.normal());
    return ag::make_var(std::move(t), true);
}

ag::Var<float> filled(const std::vector<std::size_t>& shape, float value) {
    return ag::make_var(Tensor<float>(shape, value), true);
}

Conv make_conv(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t stride,
               RngStream& rng) {
    Conv c;
    c.weight = he_normal({out_ch, in_ch, k, k}, in_ch * k * k, rng);
    c.bias = filled({out_ch}, 0.0f);
    c.stride = stride;
    c.padding = ag::Padding::same;
    return c;
}

BatchNorm make_bn(std::size_t channels) {
    BatchNorm bn;
    bn.gamma = filled({channels}, 1.0f);
    bn.beta = filled({channels}, 0.0f);
    bn.running_mean.assign(channels, 0.0f);
    bn.running_var.assign(channels, 1.0f);
    return bn;
}

Dense make_dense(std::size_t in, std::size_t out, RngStream& rng) {
    Dense d;
    d.weight = he_normal({in, out}, in, rng);
    d.bias = filled({out}, 0.0f);
    return d;
}

ag::Var<float> apply_bn(ag::Tape<float>* tape, const ag::Var<float>& x, BatchNorm& bn,
                        bool train) {
    return ag::batchnorm2d(tape, x, bn.gamma, bn.beta, bn.running_mean, bn.running_var, train,
                           bn.momentum, bn.eps);
}

template <typename Fn>
void for_each_named_param(const ResNetModel& m, Fn&& fn) {
    fn("stem.conv.weight", m.stem_conv.weight);
    fn("stem.conv.bias", m.stem_conv.bias);
    fn("stem.bn.gamma", m.stem_bn.gamma);
    fn("stem.bn.beta", m.stem_bn.beta);
    for (std::size_t s = 0; s < m.stages.size(); ++s) {
        for (std::size_t b = 0; b < m.stages[s].size(); ++b) {
            const auto& block = m.stages[s][b];
            const std::string prefix =
                "stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1) + ".";
            fn(prefix + "conv1.weight", block.conv1.weight);
            fn(prefix + "conv1.bias", block.conv1.bias);
            fn(prefix + "bn1.gamma", block.bn1.gamma);
            fn(prefix + "bn1.beta", block.bn1.beta);
            fn(prefix + "conv2.weight", block.conv2.weight);
            fn(prefix + "conv2.bias", block.conv2.bias);
            fn(prefix + "bn2.gamma", block.bn2.gamma);
            fn(prefix + "bn2.beta", block.bn2.beta);
            if (block.has_projection) {
                fn(prefix + "proj.weight", block.proj.weight);
                fn(prefix + "proj.bias", block.proj.bias);
                fn(prefix + "proj_bn.gamma", block.proj_bn.gamma);
                fn(prefix + "proj_bn.beta", block.proj_bn.beta);
            }
        }
    }
    fn("head.fc1.weight", m.fc1.weight);
    fn("head.fc1.bias", m.fc1.bias);
    fn("head.fc2.weight", m.fc2.weight);
    fn("head.fc2.bias", m.fc2.bias);
}

template <typename Model, typename Fn>
void for_each_named_buffer(Model& m, Fn&& fn) {
    fn("stem.bn.running_mean", m.stem_bn.running_mean);
    fn("stem.bn.running_var", m.stem_bn.running_var);
    for (std::size_t s = 0; s < m.stages.size(); ++s) {
        for (std::size_t b = 0; b < m.stages[s].size(); ++b) {
            auto& block = m.stages[s][b];
            const std::string prefix =
                "stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1) + ".";
            fn(prefix + "bn1.running_mean", block.bn1.running_mean);
            fn(prefix + "bn1.running_var", block.bn1.running_var);
            fn(prefix + "bn2.running_mean", block.bn2.running_mean);
            fn(prefix + "bn2.running_var", block.bn2.running_var);
            if (block.has_projection) {
                fn(prefix + "proj_bn.running_mean", block.proj_bn.running_mean);
                fn(prefix + "proj_bn.running_var", block.proj_bn.running_var);
            }
        }
    }
}

}  // namespace

void ResNetConfig::validate() const {
    if (stage_filters.empty() || stage_filters.size() != stage_blocks.size())
        throw ConfigError("model: stage_filters and stage_blocks must have equal, nonzero length");
    for (const auto b : stage_blocks)
        if (b == 0) throw ConfigError("model: every stage needs at least one block");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw ConfigError("model: dropout_rate must be in [0, 1)");
    if (stem_filters == 0 || head_units == 0) throw ConfigError("model: zero-width layer");
    // stem conv (stride 2) + pool halve twice; each later stage halves once
    const std::size_t required = std::size_t{4} << (stage_filters.size() - 1);
    if (input_h % required != 0 || input_w % required != 0)
        throw ConfigError("model: input size must be divisible by " + std::to_string(required));
}

ResNetModel build_model(const ResNetConfig& config, RngStream& rng) {
    config.validate();
    ResNetModel m;
    m.config = config;

    m.stem_conv = make_conv(config.input_c, config.stem_filters, 3, 2, rng);
    m.stem_bn = make_bn(config.stem_filters);

    std::size_t in_ch = config.stem_filters;
    m.stages.resize(config.stage_filters.size());
    for (std::size_t s = 0; s < config.stage_filters.size(); ++s) {
        const std::size_t out_ch = config.stage_filters[s];
        for (std::size_t b = 0; b < config.stage_blocks[s]; ++b) {
            // first block of stages after the first downsamples
            const std::size_t stride = (b == 0 && s > 0) ? 2 : 1;
            ResidualBlock block;
            block.conv1 = make_conv(in_ch, out_ch, 3, stride, rng);
            block.bn1 = make_bn(out_ch);
            block.conv2 = make_conv(out_ch, out_ch, 3, 1, rng);
            block.bn2 = make_bn(out_ch);
            block.has_projection = stride != 1 || in_ch != out_ch;
            if (block.has_projection) {
                block.proj = make_conv(in_ch, out_ch, 1, stride, rng);
                block.proj_bn = make_bn(out_ch);
            }
            m.stages[s].push_back(std::move(block));
            in_ch = out_ch;
        }
    }

    m.fc1 = make_dense(config.stage_filters.back(), config.head_units, rng);
    m.fc2 = make_dense(config.head_units, 1, rng);
    return m;
}

ag::Var<float> ResNetModel::forward(const Tensor<float>& batch, bool train,
                                    ag::Tape<float>* tape, RngStream* dropout_rng) {
    if (batch.rank() != 4 || batch.dim(1) != config.input_c || batch.dim(2) != config.input_h ||
        batch.dim(3) != config.input_w)
        throw ConfigError("forward: expected input [N," + std::to_string(config.input_c) + "," +
                          std::to_string(config.input_h) + "," + std::to_string(config.input_w) +
                          "]");
    if (train && config.dropout_rate > 0.0 && dropout_rng == nullptr)
        throw ConfigError("forward: train mode with dropout needs an rng");

    auto x = ag::make_var(batch, false);
    x = ag::conv2d(tape, x, stem_conv.weight, stem_conv.bias, stem_conv.stride, stem_conv.padding);
    x = apply_bn(tape, x, stem_bn, train);
    x = ag::relu(tape, x);
    x = ag::maxpool2d(tape, x);

    for (auto& stage : stages) {
        for (auto& block : stage) {
            auto shortcut = x;
            if (block.has_projection) {
                shortcut = ag::conv2d(tape, x, block.proj.weight, block.proj.bias,
                                      block.proj.stride, block.proj.padding);
                shortcut = apply_bn(tape, shortcut, block.proj_bn, train);
            }
            auto y = ag::conv2d(tape, x, block.conv1.weight, block.conv1.bias, block.conv1.stride,
                                block.conv1.padding);
            y = apply_bn(tape, y, block.bn1, train);
            y = ag::relu(tape, y);
            y = ag::conv2d(tape, y, block.conv2.weight, block.conv2.bias, block.conv2.stride,
                           block.conv2.padding);
            y = apply_bn(tape, y, block.bn2, train);
            x = ag::relu(tape, ag::add(tape, y, shortcut));
        }
    }

    x = ag::global_avg_pool(tape, x);
    x = ag::dense(tape, x, fc1.weight, fc1.bias);
    x = ag::relu(tape, x);
    if (train && config.dropout_rate > 0.0)
        x = ag::dropout(tape, x, static_cast<float>(config.dropout_rate), true, *dropout_rng);
    x = ag::dense(tape, x, fc2.weight, fc2.bias);
    x = ag::sigmoid(tape, x);
    return ag::reshape(tape, x, {batch.dim(0)});
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> ResNetModel::shape_trace() const {
    std::vector<std::pair<std::string, std::vector<std::size_t>>> trace;
    std::size_t h = config.input_h, w = config.input_w;

    h = (h + 1) / 2;
    w = (w + 1) / 2;
    trace.emplace_back("stem.conv", std::vector<std::size_t>{config.stem_filters, h, w});
    h /= 2;
    w /= 2;
    trace.emplace_back("stem.pool", std::vector<std::size_t>{config.stem_filters, h, w});

    for (std::size_t s = 0; s < config.stage_filters.size(); ++s) {
        if (s > 0) {
            h = (h + 1) / 2;
            w = (w + 1) / 2;
        }
        trace.emplace_back("stage" + std::to_string(s + 1),
                           std::vector<std::size_t>{config.stage_filters[s], h, w});
    }

    trace.emplace_back("gap", std::vector<std::size_t>{config.stage_filters.back()});
    trace.emplace_back("head.fc1", std::vector<std::size_t>{config.head_units});
    trace.emplace_back("head.fc2", std::vector<std::size_t>{1});
    trace.emplace_back("output", std::vector<std::size_t>{1});
    return trace;
}

std::vector<std::pair<std::string, std::size_t>> ResNetModel::parameter_counts() const {
    std::vector<std::pair<std::string, std::size_t>> counts;
    for_each_named_param(*this, [&](const std::string& name, const ag::Var<float>& p) {
        counts.emplace_back(name, p->numel());
    });
    return counts;
}

std::size_t ResNetModel::count_parameters() const {
    const auto counts = parameter_counts();
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0},
                           [](std::size_t acc, const auto& e) { return acc + e.second; });
}

std::vector<std::pair<std::string, ag::Var<float>>> ResNetModel::named_parameters() const {
    std::vector<std::pair<std::string, ag::Var<float>>> out;
    for_each_named_param(*this, [&](const std::string& name, const ag::Var<float>& p) {
        out.emplace_back(name, p);
    });
    return out;
}

std::vector<std::pair<std::string, std::vector<float>*>> ResNetModel::named_buffers() {
    std::vector<std::pair<std::string, std::vector<float>*>> out;
    for_each_named_buffer(*this, [&](const std::string& name, std::vector<float>& b) {
        out.emplace_back(name, &b);
    });
    return out;
}

std::vector<std::pair<std::string, const std::vector<float>*>> ResNetModel::named_buffers() const {
    std::vector<std::pair<std::string, const std::vector<float>*>> out;
    for_each_named_buffer(*this, [&](const std::string& name, const std::vector<float>& b) {
        out.emplace_back(name, &b);
    });
    return out;
}

void ResNetModel::zero_grad() const {
    for_each_named_param(*this,
                         [](const std::string&, const ag::Var<float>& p) { p->zero_grad(); });
}

ResNetModel::Snapshot ResNetModel::snapshot() const {
    Snapshot snap;
    for_each_named_param(*this, [&](const std::string&, const ag::Var<float>& p) {
        snap.params.push_back(p->values);
    });
    for_each_named_buffer(*this, [&](const std::string&, const std::vector<float>& b) {
        snap.buffers.push_back(b);
    });
    return snap;
}

void ResNetModel::restore(const Snapshot& snap) {
    std::size_t pi = 0, bi = 0;
    for_each_named_param(*this, [&](const std::string&, const ag::Var<float>& p) {
        p->values = snap.params.at(pi++);
    });
    for_each_named_buffer(*this, [&](const std::string&, std::vector<float>& b) {
        b = snap.buffers.at(bi++);
    });
}

}  // namespace apnea::model
