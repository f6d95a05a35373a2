#include <exception>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "apnea/errors.hpp"
#include "apnea/pipeline.hpp"
#include "apnea/runconfig.hpp"

namespace {

using apnea::cli::RunConfig;

struct CommandContext {
    std::string config_file;
    std::vector<std::pair<std::string, std::string>> overrides;  // in flag order

    RunConfig build() const {
        RunConfig config;
        if (!config_file.empty()) config.load_file(config_file);
        for (const auto& [key, value] : overrides) config.set(key, value);
        return config;
    }
};

// Maps a flag onto a RunConfig key; values go through the same parser as the
// config file, so flags and file entries behave identically.
void add_keyed(CLI::App* cmd, CommandContext& ctx, const std::string& flag,
               const std::string& key, const std::string& desc) {
    cmd->add_option_function<std::string>(
        flag, [&ctx, key](const std::string& value) { ctx.overrides.emplace_back(key, value); },
        desc);
}

void add_common(CLI::App* cmd, CommandContext& ctx) {
    cmd->add_option("--config", ctx.config_file, "key = value configuration file");
    add_keyed(cmd, ctx, "--seed", "run.seed", "base random seed");
    add_keyed(cmd, ctx, "--out", "paths.out_dir", "output directory");
    add_keyed(cmd, ctx, "--threads", "run.threads", "OpenMP thread count (0 = default)");
}

void add_train_flags(CLI::App* cmd, CommandContext& ctx) {
    add_keyed(cmd, ctx, "--data", "paths.data_dir", "directory with train.apne/test.apne");
    add_keyed(cmd, ctx, "--loss", "train.loss", "bce, weighted_bce or focal");
    add_keyed(cmd, ctx, "--alpha", "train.alpha", "focal balance factor");
    add_keyed(cmd, ctx, "--gamma", "train.gamma", "focal exponent");
    add_keyed(cmd, ctx, "--w-pos", "train.w_pos", "explicit positive-class weight");
    add_keyed(cmd, ctx, "--w-neg", "train.w_neg", "explicit negative-class weight");
    add_keyed(cmd, ctx, "--epochs", "train.epochs", "training epochs");
    add_keyed(cmd, ctx, "--batch-size", "train.batch_size", "batch size");
    add_keyed(cmd, ctx, "--lr", "train.learning_rate", "Adam learning rate");
    add_keyed(cmd, ctx, "--oversample", "train.oversample", "true/false");
    add_keyed(cmd, ctx, "--class-weights", "train.class_weighting", "true/false");
    add_keyed(cmd, ctx, "--early-stopping", "train.early_stopping", "true/false");
    add_keyed(cmd, ctx, "--plateau", "train.plateau", "true/false");
    add_keyed(cmd, ctx, "--val-fraction", "train.validation_fraction", "validation fraction");
    add_keyed(cmd, ctx, "--stage-blocks", "model.stage_blocks", "blocks per stage, e.g. 1,1,1,1");
    add_keyed(cmd, ctx, "--stage-filters", "model.stage_filters", "filters per stage");
    add_keyed(cmd, ctx, "--dropout", "model.dropout_rate", "head dropout rate");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"respiratory-audio apnea screening pipeline"};
    app.require_subcommand(1);

    CommandContext synth_ctx, preprocess_ctx, train_ctx, evaluate_ctx, ablate_ctx;

    auto* synth = app.add_subcommand("synth", "generate a synthetic breathing dataset");
    add_common(synth, synth_ctx);
    add_keyed(synth, synth_ctx, "--records", "synth.records", "number of records (>= 2)");
    add_keyed(synth, synth_ctx, "--duration", "synth.duration_s", "record length in seconds");
    add_keyed(synth, synth_ctx, "--apnea-rate", "synth.apnea_rate_per_min", "events per minute");
    add_keyed(synth, synth_ctx, "--suppression", "synth.suppression",
              "residual amplitude inside events");
    add_keyed(synth, synth_ctx, "--noise-snr", "synth.noise_snr_db", "sensor noise SNR in dB");
    add_keyed(synth, synth_ctx, "--breath-rate", "synth.breath_rate_hz", "breathing rate in Hz");

    auto* preprocess =
        app.add_subcommand("preprocess", "resample, chunk, label and convert to spectrograms");
    add_common(preprocess, preprocess_ctx);
    add_keyed(preprocess, preprocess_ctx, "--data", "paths.data_dir",
              "directory with WAVs, annotations.csv and split.csv");
    add_keyed(preprocess, preprocess_ctx, "--labels", "data.apnea_labels",
              "annotation labels counted as apnea");
    add_keyed(preprocess, preprocess_ctx, "--n-fft", "dsp.n_fft", "FFT size");
    add_keyed(preprocess, preprocess_ctx, "--win-length", "dsp.win_length", "window length");
    add_keyed(preprocess, preprocess_ctx, "--hop-length", "dsp.hop_length", "hop length");
    add_keyed(preprocess, preprocess_ctx, "--n-mels", "dsp.n_mels", "mel bins");

    auto* train = app.add_subcommand("train", "train the model on a spectrogram cache");
    add_common(train, train_ctx);
    add_train_flags(train, train_ctx);

    auto* evaluate = app.add_subcommand("evaluate", "run eval-mode inference on the test cache");
    add_common(evaluate, evaluate_ctx);
    add_keyed(evaluate, evaluate_ctx, "--data", "paths.data_dir",
              "directory with test.apne (and model.apnw unless --weights)");
    add_keyed(evaluate, evaluate_ctx, "--weights", "paths.weights", "weight file");
    add_keyed(evaluate, evaluate_ctx, "--threshold", "eval.threshold",
              "fixed threshold, or 'sweep'");
    add_keyed(evaluate, evaluate_ctx, "--objective", "eval.objective",
              "sweep objective: recall_floor, precision_floor or max_f1");
    add_keyed(evaluate, evaluate_ctx, "--floor", "eval.floor", "floor value for *_floor objectives");
    add_keyed(evaluate, evaluate_ctx, "--batch-size", "train.batch_size", "inference batch size");
    add_keyed(evaluate, evaluate_ctx, "--stage-blocks", "model.stage_blocks",
              "must match the trained model");
    add_keyed(evaluate, evaluate_ctx, "--stage-filters", "model.stage_filters",
              "must match the trained model");

    auto* ablate = app.add_subcommand("ablate", "train and evaluate the ablation grid");
    add_common(ablate, ablate_ctx);
    add_train_flags(ablate, ablate_ctx);
    add_keyed(ablate, ablate_ctx, "--runs", "ablate.runs", "subset of ablation configurations");
    add_keyed(ablate, ablate_ctx, "--threshold", "ablate.threshold", "evaluation threshold");

    auto* report = app.add_subcommand("report", "tabulate metrics JSON files side by side");
    std::vector<std::string> report_files, report_names;
    std::string report_out;
    bool report_reference = false;
    report->add_option("files", report_files, "metrics JSON files")->required();
    report->add_option("--names", report_names, "row names (one per file)");
    report->add_option("--out", report_out, "output CSV path");
    report->add_flag("--reference", report_reference,
                     "append the bundled MIT-BIH reference row");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) apnea::cli::cmd_synth(synth_ctx.build());
        if (preprocess->parsed()) apnea::cli::cmd_preprocess(preprocess_ctx.build());
        if (train->parsed()) apnea::cli::cmd_train(train_ctx.build());
        if (evaluate->parsed()) apnea::cli::cmd_evaluate(evaluate_ctx.build());
        if (ablate->parsed()) apnea::cli::cmd_ablate(ablate_ctx.build());
        if (report->parsed())
            apnea::cli::cmd_report(report_files, report_names, report_reference, report_out);
    } catch (const apnea::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const apnea::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const apnea::ArtifactError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
