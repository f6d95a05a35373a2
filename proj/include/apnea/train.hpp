#pragma once

#include <cstdint>
#include <vector>

#include "apnea/cache.hpp"
#include "apnea/losses.hpp"
#include "apnea/model.hpp"
#include "apnea/optim.hpp"

namespace apnea::train {

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t epochs = 80;
    double learning_rate = 1e-3;
    LossSpec loss;
    bool oversample = true;
    bool class_weighting = true;
    bool early_stopping = true;
    EarlyStopConfig early_stop;
    bool plateau = true;
    PlateauConfig plateau_cfg;
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochLog {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_pr_auc = 0.0;
    double val_recall = 0.0;  // at threshold 0.5
    double lr = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> history;
    int best_epoch = 0;
    std::size_t train_pos = 0;  // pre-oversampling counts of the training portion
    std::size_t train_neg = 0;
    double w_pos = 1.0;  // effective class scales (1 when weighting is off)
    double w_neg = 1.0;
    std::vector<std::size_t> val_indices;  // into dataset.entries
    std::vector<std::size_t> train_pool;   // after oversampling, pre-shuffle order
};

// Stratified validation split (pre-oversampling) feeds PR-AUC to the plateau
// schedule and early stopping; oversampling applies to the training portion
// only; class weights come from the pre-oversampling counts. Returns with the
// best-epoch weights restored when early stopping is enabled.
TrainResult train(const dsp::SpectrogramCache& dataset, model::ResNetModel& net,
                  const TrainConfig& config);

// Eval-mode scores over a cache, in entry order.
std::vector<double> predict(const dsp::SpectrogramCache& dataset, model::ResNetModel& net,
                            std::size_t batch_size = 32);

std::vector<std::uint8_t> labels_of(const dsp::SpectrogramCache& dataset);

}  // namespace apnea::train
