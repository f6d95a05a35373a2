#include "apnea/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "apnea/ablation.hpp"
#include "apnea/cache.hpp"
#include "apnea/dsp.hpp"
#include "apnea/errors.hpp"
#include "apnea/ingest.hpp"
#include "apnea/metrics.hpp"
#include "apnea/model.hpp"
#include "apnea/rng.hpp"
#include "apnea/synth.hpp"
#include "apnea/train.hpp"
#include "apnea/weights_io.hpp"

namespace apnea::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kEffectiveConfigName = "effective_config.txt";
constexpr const char* kTrainCacheName = "train.apne";
constexpr const char* kTestCacheName = "test.apne";
constexpr const char* kWeightsName = "model.apnw";

void apply_threads(const RunConfig& config) {
    if (config.threads > 0) omp_set_num_threads(config.threads);
}

fs::path prepare_out_dir(const RunConfig& config) {
    if (config.out_dir.empty()) throw ConfigError("output directory must not be empty");
    fs::path out(config.out_dir);
    fs::create_directories(out);
    config.save(out / kEffectiveConfigName);
    return out;
}

fs::path resolve_weights(const RunConfig& config) {
    if (!config.weights_path.empty()) return config.weights_path;
    return fs::path(config.data_dir) / kWeightsName;
}

std::string pct(double fraction) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << fraction * 100.0;
    return out.str();
}

json report_to_json(const metrics::MetricsReport& r) {
    return json{{"threshold", r.threshold},
                {"tp", r.confusion.tp},
                {"fn", r.confusion.fn},
                {"fp", r.confusion.fp},
                {"tn", r.confusion.tn},
                {"accuracy", r.accuracy},
                {"precision", r.precision},
                {"recall", r.recall},
                {"f1", r.f1},
                {"pr_auc", r.pr_auc}};
}

model::ResNetConfig model_config_for_cache(const RunConfig& config,
                                           const dsp::SpectrogramCache& cache) {
    model::ResNetConfig mcfg = config.model;
    mcfg.input_c = 1;
    mcfg.input_h = cache.n_mels;
    mcfg.input_w = cache.n_frames;
    if (cache.n_mels != config.spectrogram.n_mels ||
        cache.n_frames != config.spectrogram.target_frames)
        throw DataError("cache shape " + std::to_string(cache.n_mels) + "x" +
                        std::to_string(cache.n_frames) + " does not match the configured " +
                        std::to_string(config.spectrogram.n_mels) + "x" +
                        std::to_string(config.spectrogram.target_frames));
    return mcfg;
}

train::TrainConfig train_config_of(const RunConfig& config) {
    train::TrainConfig tcfg = config.training;
    tcfg.seed = config.seed;
    return tcfg;
}

}  // namespace

void cmd_synth(const RunConfig& config) {
    apply_threads(config);
    synth::SynthConfig tpl = config.synth;
    tpl.sample_rate_hz = config.sample_rate_hz;
    const auto dataset = synth::generate_dataset(config.synth_records, tpl, config.seed);
    const auto out = prepare_out_dir(config);

    std::ofstream annotations(out / "annotations.csv");
    if (!annotations) throw DataError("cannot write annotations.csv");
    annotations << "record_id,onset_s,duration_s,label\n";
    annotations << std::fixed << std::setprecision(6);
    std::size_t n_events = 0;
    for (const auto& [id, rec] : dataset.records) {
        ingest::save_wav_pcm16(out / (id + ".wav"), rec.signal);
        for (const auto& ev : rec.events) {
            annotations << ev.record_id << "," << ev.onset_s << "," << ev.duration_s << ","
                        << ev.label << "\n";
            ++n_events;
        }
    }

    std::ofstream split(out / "split.csv");
    if (!split) throw DataError("cannot write split.csv");
    split << "record_id,role\n";
    for (const auto& id : dataset.split.train_record_ids) split << id << ",train\n";
    for (const auto& id : dataset.split.test_record_ids) split << id << ",test\n";

    std::cout << "synth: wrote " << dataset.records.size() << " records ("
              << dataset.split.train_record_ids.size() << " train / "
              << dataset.split.test_record_ids.size() << " test), " << n_events
              << " apnea events to " << out.string() << "\n";
}

void cmd_preprocess(const RunConfig& config) {
    apply_threads(config);
    config.spectrogram.validate();
    if (config.data_dir.empty()) throw ConfigError("preprocess: --data directory required");
    const fs::path data(config.data_dir);

    const auto split = ingest::parse_split(data / "split.csv");
    if (split.train_record_ids.empty() && split.test_record_ids.empty())
        throw DataError("split file lists no records");
    const auto annotations = ingest::parse_annotations(data / "annotations.csv");

    std::map<std::string, ingest::Signal> records;
    auto load_role = [&](const std::vector<std::string>& ids) {
        for (const auto& id : ids) {
            auto signal = ingest::load_wav(data / (id + ".wav"));
            records[id] = ingest::resample(signal, config.sample_rate_hz);
        }
    };
    load_role(split.train_record_ids);
    load_role(split.test_record_ids);

    const auto dataset = ingest::build_dataset(records, annotations, split, config.chunk_seconds,
                                               config.apnea_label_set());

    const auto out = prepare_out_dir(config);
    auto to_cache = [&](const std::vector<ingest::LabeledChunk>& chunks) {
        dsp::SpectrogramCache cache;
        cache.n_mels = static_cast<std::uint32_t>(config.spectrogram.n_mels);
        cache.n_frames = static_cast<std::uint32_t>(config.spectrogram.target_frames);
        cache.entries.resize(chunks.size());
        const auto total = static_cast<std::int64_t>(chunks.size());
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t i = 0; i < total; ++i) {
            const auto& chunk = chunks[i];
            auto spec = dsp::to_mel_spectrogram(chunk.samples, config.spectrogram,
                                                chunk.record_id,
                                                static_cast<std::uint32_t>(chunk.index));
            auto& e = cache.entries[i];
            e.record_id = chunk.record_id;
            e.chunk_index = static_cast<std::uint32_t>(chunk.index);
            e.label = chunk.label;
            e.values = std::move(spec.values);
        }
        return cache;
    };

    const auto train_cache = to_cache(dataset.train);
    const auto test_cache = to_cache(dataset.test);
    dsp::write_cache(out / kTrainCacheName, train_cache);
    dsp::write_cache(out / kTestCacheName, test_cache);

    std::cout << "preprocess: train " << train_cache.entries.size() << " chunks ("
              << train_cache.count_label(1) << " apnea / " << train_cache.count_label(0)
              << " non-apnea), test " << test_cache.entries.size() << " chunks ("
              << test_cache.count_label(1) << " apnea / " << test_cache.count_label(0)
              << " non-apnea)\n";
}

void cmd_train(const RunConfig& config) {
    apply_threads(config);
    if (config.data_dir.empty()) throw ConfigError("train: --data directory required");
    const auto cache = dsp::read_cache(fs::path(config.data_dir) / kTrainCacheName);
    if (cache.entries.empty()) throw DataError("train: cache is empty");
    if (cache.count_label(0) == 0 || cache.count_label(1) == 0)
        throw DataError("train: cache holds a single class");

    const auto mcfg = model_config_for_cache(config, cache);
    RngStream init_rng(derive_seed(config.seed, "init"));
    auto net = model::build_model(mcfg, init_rng);

    const auto tcfg = train_config_of(config);
    const auto result = train::train(cache, net, tcfg);

    const auto out = prepare_out_dir(config);
    save_weights(out / kWeightsName, net);

    std::ofstream history(out / "history.jsonl");
    if (!history) throw DataError("cannot write history.jsonl");
    for (const auto& log : result.history) {
        history << json{{"epoch", log.epoch},
                        {"train_loss", log.train_loss},
                        {"val_pr_auc", log.val_pr_auc},
                        {"val_recall", log.val_recall},
                        {"lr", log.lr},
                        {"seconds", log.seconds}}
                       .dump()
                << "\n";
    }

    std::cout << "train: " << result.history.size() << " epochs, best epoch "
              << result.best_epoch << ", class counts " << result.train_pos << "/"
              << result.train_neg << " (pos/neg), weights " << result.w_pos << "/" << result.w_neg
              << ", saved " << (out / kWeightsName).string() << "\n";
}

void cmd_evaluate(const RunConfig& config) {
    apply_threads(config);
    if (config.data_dir.empty()) throw ConfigError("evaluate: --data directory required");
    const auto cache = dsp::read_cache(fs::path(config.data_dir) / kTestCacheName);
    if (cache.entries.empty()) throw DataError("evaluate: cache is empty");

    const auto mcfg = model_config_for_cache(config, cache);
    RngStream init_rng(derive_seed(config.seed, "init"));
    auto net = model::build_model(mcfg, init_rng);
    load_weights(resolve_weights(config), net);

    const auto scores = train::predict(cache, net, config.training.batch_size);
    const auto labels = train::labels_of(cache);

    metrics::MetricsReport report;
    if (config.eval_has_threshold) {
        report = metrics::derive_metrics(
            metrics::confusion_at_threshold(scores, labels, config.eval_threshold),
            config.eval_threshold);
    } else {
        const auto objective = metrics::objective_from_string(config.eval_objective);
        auto sweep = metrics::threshold_sweep(scores, labels, objective, config.eval_floor);
        if (!sweep.feasible)
            sweep = metrics::threshold_sweep(scores, labels, metrics::Objective::max_f1, 0.0);
        if (!sweep.feasible) throw DataError("evaluate: no feasible threshold");
        report = sweep.report;
    }
    report.pr_auc = metrics::pr_auc_of(scores, labels);

    const auto out = prepare_out_dir(config);
    {
        std::ofstream mj(out / "metrics.json");
        if (!mj) throw DataError("cannot write metrics.json");
        mj << report_to_json(report).dump(2) << "\n";
    }
    {
        const auto curve = metrics::pr_curve(scores, labels);
        std::ofstream pc(out / "pr_curve.csv");
        if (!pc) throw DataError("cannot write pr_curve.csv");
        pc << "threshold,recall,precision\n";
        pc << std::setprecision(17);
        for (const auto& p : curve.points) {
            if (!std::isfinite(p.threshold)) continue;  // skip the recall-0 anchor
            pc << p.threshold << "," << p.recall << "," << p.precision << "\n";
        }
    }
    {
        std::ofstream cc(out / "confusion.csv");
        if (!cc) throw DataError("cannot write confusion.csv");
        cc << "tp,fn,fp,tn\n";
        cc << report.confusion.tp << "," << report.confusion.fn << "," << report.confusion.fp
           << "," << report.confusion.tn << "\n";
    }

    std::cout << "evaluate: threshold " << report.threshold << ", recall " << pct(report.recall)
              << "%, precision " << pct(report.precision) << "%, accuracy "
              << pct(report.accuracy) << "%, f1 " << pct(report.f1) << "%, pr_auc "
              << report.pr_auc << "\n";
}

void cmd_ablate(const RunConfig& config) {
    apply_threads(config);
    if (config.data_dir.empty()) throw ConfigError("ablate: --data directory required");
    const auto train_cache = dsp::read_cache(fs::path(config.data_dir) / kTrainCacheName);
    const auto test_cache = dsp::read_cache(fs::path(config.data_dir) / kTestCacheName);
    if (train_cache.entries.empty() || test_cache.entries.empty())
        throw DataError("ablate: empty cache");

    const auto mcfg = model_config_for_cache(config, train_cache);
    const auto rows = metrics::ablation_run(train_config_of(config), mcfg, train_cache,
                                            test_cache, config.ablate_runs,
                                            config.ablate_threshold);

    const auto out = prepare_out_dir(config);
    std::ofstream csv(out / "ablation.csv");
    if (!csv) throw DataError("cannot write ablation.csv");
    csv << "configuration,accuracy_pct,precision_pct,recall_pct,f1_pct\n";
    json meta = json::array();
    for (const auto& row : rows) {
        csv << row.name << "," << pct(row.report.accuracy) << "," << pct(row.report.precision)
            << "," << pct(row.report.recall) << "," << pct(row.report.f1) << "\n";
        meta.push_back(json{{"configuration", row.name},
                            {"train_pos", row.train_pos},
                            {"train_neg", row.train_neg},
                            {"pool_size", row.pool_size},
                            {"w_pos", row.w_pos},
                            {"w_neg", row.w_neg},
                            {"threshold", row.report.threshold},
                            {"recall", row.report.recall},
                            {"pr_auc", row.report.pr_auc}});
        std::cout << "ablate[" << row.name << "]: recall " << pct(row.report.recall)
                  << "%, accuracy " << pct(row.report.accuracy) << "%\n";
    }
    std::ofstream mj(out / "ablation_meta.json");
    if (!mj) throw DataError("cannot write ablation_meta.json");
    mj << meta.dump(2) << "\n";
}

void cmd_report(const std::vector<std::string>& metric_files,
                const std::vector<std::string>& names, bool with_reference,
                const std::filesystem::path& out_csv) {
    if (metric_files.empty()) throw ConfigError("report: at least one metrics JSON required");
    if (!names.empty() && names.size() != metric_files.size())
        throw ConfigError("report: --names must match the number of files");

    std::ostringstream table;
    table << "name,threshold,accuracy_pct,precision_pct,recall_pct,f1_pct,pr_auc\n";
    for (std::size_t i = 0; i < metric_files.size(); ++i) {
        std::ifstream in(metric_files[i]);
        if (!in) throw DataError("report: cannot open " + metric_files[i]);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw DataError("report: " + metric_files[i] + ": " + e.what());
        }
        const std::string name =
            !names.empty() ? names[i] : fs::path(metric_files[i]).stem().string();
        table << name << "," << j.at("threshold").get<double>() << ","
              << pct(j.at("accuracy").get<double>()) << "," << pct(j.at("precision").get<double>())
              << "," << pct(j.at("recall").get<double>()) << "," << pct(j.at("f1").get<double>())
              << "," << j.at("pr_auc").get<double>() << "\n";
    }
    if (with_reference) {
        // MIT-BIH full-model reference results shipped with this project
        table << "reference,0.635,36.42,7.95,90.55,14.61,\n";
    }

    if (!out_csv.empty()) {
        if (out_csv.has_parent_path()) fs::create_directories(out_csv.parent_path());
        std::ofstream out(out_csv);
        if (!out) throw DataError("report: cannot write " + out_csv.string());
        out << table.str();
    }
    std::cout << table.str();
}

}  // namespace apnea::cli
