#include "apnea/ablation.hpp"

#include "apnea/errors.hpp"
#include "apnea/rng.hpp"

namespace apnea::metrics {

std::vector<AblationRow> ablation_run(const train::TrainConfig& base_config,
                                      const model::ResNetConfig& model_config,
                                      const dsp::SpectrogramCache& train_cache,
                                      const dsp::SpectrogramCache& test_cache,
                                      const std::vector<std::string>& runs,
                                      double eval_threshold) {
    std::vector<AblationRow> rows;
    for (const auto& name : runs) {
        train::TrainConfig cfg = base_config;
        model::ResNetConfig mcfg = model_config;
        if (name == "full") {
            // base configuration as-is
        } else if (name == "no_class_weighting") {
            cfg.class_weighting = false;
        } else if (name == "no_oversampling") {
            cfg.oversample = false;
        } else if (name == "no_regularization") {
            cfg.early_stopping = false;
            cfg.plateau = false;
            mcfg.dropout_rate = 0.0;
        } else {
            throw ConfigError("ablation: unknown run '" + name + "'");
        }
        cfg.seed = derive_seed(base_config.seed, name);

        RngStream init_rng(derive_seed(cfg.seed, "init"));
        auto net = model::build_model(mcfg, init_rng);
        const auto result = train::train(train_cache, net, cfg);

        const auto scores = train::predict(test_cache, net, cfg.batch_size);
        const auto labels = train::labels_of(test_cache);
        auto report =
            derive_metrics(confusion_at_threshold(scores, labels, eval_threshold), eval_threshold);
        report.pr_auc = pr_auc_of(scores, labels);

        AblationRow row;
        row.name = name;
        row.report = report;
        row.train_pos = result.train_pos;
        row.train_neg = result.train_neg;
        row.pool_size = result.train_pool.size();
        row.w_pos = result.w_pos;
        row.w_neg = result.w_neg;
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace apnea::metrics
