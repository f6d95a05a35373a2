#pragma once

#include <string>
#include <vector>

#include "apnea/cache.hpp"
#include "apnea/metrics.hpp"
#include "apnea/model.hpp"
#include "apnea/train.hpp"

namespace apnea::metrics {

// One training/evaluation cycle per configuration, all derived from the same
// base setup: "full", "no_class_weighting" (class weighting off),
// "no_oversampling" (oversampling off), "no_regularization" (early stopping,
// plateau schedule and dropout off). Each run gets a seed derived from
// (base seed, run name).
struct AblationRow {
    std::string name;
    MetricsReport report;
    std::size_t train_pos = 0;  // pre-oversampling training counts
    std::size_t train_neg = 0;
    std::size_t pool_size = 0;  // training pool after (optional) oversampling
    double w_pos = 1.0;
    double w_neg = 1.0;
};

std::vector<AblationRow> ablation_run(const train::TrainConfig& base_config,
                                      const model::ResNetConfig& model_config,
                                      const dsp::SpectrogramCache& train_cache,
                                      const dsp::SpectrogramCache& test_cache,
                                      const std::vector<std::string>& runs,
                                      double eval_threshold);

}  // namespace apnea::metrics
