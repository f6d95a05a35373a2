#include "apnea/runconfig.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "apnea/errors.hpp"

namespace apnea::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& value) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        throw ConfigError("config: " + key + ": expected a number, got '" + value + "'");
    return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        throw ConfigError("config: " + key + ": expected a non-negative integer, got '" + value +
                          "'");
    return v;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config: " + key + ": expected true/false, got '" + value + "'");
}

std::vector<std::string> to_list(const std::string& value) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(value);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<std::size_t> to_size_list(const std::string& key, const std::string& value) {
    std::vector<std::size_t> out;
    for (const auto& item : to_list(value)) out.push_back(to_u64(key, item));
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += items[i];
    }
    return out;
}

std::string join_sizes(const std::vector<std::size_t>& items) {
    std::vector<std::string> s;
    s.reserve(items.size());
    for (const auto v : items) s.push_back(std::to_string(v));
    return join(s);
}

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "data.sample_rate_hz") sample_rate_hz = to_double(key, value);
    else if (key == "data.chunk_seconds") chunk_seconds = to_double(key, value);
    else if (key == "data.apnea_labels") apnea_labels = to_list(value);
    else if (key == "dsp.n_fft") spectrogram.n_fft = to_u64(key, value);
    else if (key == "dsp.win_length") spectrogram.win_length = to_u64(key, value);
    else if (key == "dsp.hop_length") spectrogram.hop_length = to_u64(key, value);
    else if (key == "dsp.n_mels") spectrogram.n_mels = to_u64(key, value);
    else if (key == "dsp.f_min_hz") spectrogram.f_min_hz = to_double(key, value);
    else if (key == "dsp.f_max_hz") spectrogram.f_max_hz = to_double(key, value);
    else if (key == "dsp.target_frames") spectrogram.target_frames = to_u64(key, value);
    else if (key == "dsp.eps") spectrogram.eps = to_double(key, value);
    else if (key == "model.stem_filters") model.stem_filters = to_u64(key, value);
    else if (key == "model.stage_filters") model.stage_filters = to_size_list(key, value);
    else if (key == "model.stage_blocks") model.stage_blocks = to_size_list(key, value);
    else if (key == "model.head_units") model.head_units = to_u64(key, value);
    else if (key == "model.dropout_rate") model.dropout_rate = to_double(key, value);
    else if (key == "train.batch_size") training.batch_size = to_u64(key, value);
    else if (key == "train.epochs") training.epochs = to_u64(key, value);
    else if (key == "train.learning_rate") training.learning_rate = to_double(key, value);
    else if (key == "train.loss") training.loss.kind = train::loss_kind_from_string(value);
    else if (key == "train.w_pos") training.loss.w_pos = to_double(key, value);
    else if (key == "train.w_neg") training.loss.w_neg = to_double(key, value);
    else if (key == "train.alpha") training.loss.alpha = to_double(key, value);
    else if (key == "train.gamma") training.loss.gamma = to_double(key, value);
    else if (key == "train.oversample") training.oversample = to_bool(key, value);
    else if (key == "train.class_weighting") training.class_weighting = to_bool(key, value);
    else if (key == "train.early_stopping") training.early_stopping = to_bool(key, value);
    else if (key == "train.es_patience") training.early_stop.patience = static_cast<int>(to_u64(key, value));
    else if (key == "train.es_min_delta") training.early_stop.min_delta = to_double(key, value);
    else if (key == "train.plateau") training.plateau = to_bool(key, value);
    else if (key == "train.plateau_factor") training.plateau_cfg.factor = to_double(key, value);
    else if (key == "train.plateau_patience") training.plateau_cfg.patience = static_cast<int>(to_u64(key, value));
    else if (key == "train.plateau_min_delta") training.plateau_cfg.min_delta = to_double(key, value);
    else if (key == "train.plateau_min_lr") training.plateau_cfg.min_lr = to_double(key, value);
    else if (key == "train.validation_fraction") training.validation_fraction = to_double(key, value);
    else if (key == "synth.records") synth_records = to_u64(key, value);
    else if (key == "synth.duration_s") synth.duration_s = to_double(key, value);
    else if (key == "synth.breath_rate_hz") synth.breath_rate_hz = to_double(key, value);
    else if (key == "synth.apnea_rate_per_min") synth.apnea_event_rate_per_min = to_double(key, value);
    else if (key == "synth.apnea_min_s") synth.apnea_min_s = to_double(key, value);
    else if (key == "synth.apnea_max_s") synth.apnea_max_s = to_double(key, value);
    else if (key == "synth.suppression") synth.apnea_suppression = to_double(key, value);
    else if (key == "synth.noise_snr_db") synth.noise_snr_db = to_double(key, value);
    else if (key == "eval.objective") eval_objective = value;
    else if (key == "eval.floor") eval_floor = to_double(key, value);
    else if (key == "eval.threshold") {
        if (value == "sweep") {
            eval_has_threshold = false;
        } else {
            eval_threshold = to_double(key, value);
            eval_has_threshold = true;
        }
    }
    else if (key == "ablate.runs") ablate_runs = to_list(value);
    else if (key == "ablate.threshold") ablate_threshold = to_double(key, value);
    else if (key == "run.seed") seed = to_u64(key, value);
    else if (key == "run.threads") threads = static_cast<int>(to_u64(key, value));
    else if (key == "paths.data_dir") data_dir = value;
    else if (key == "paths.out_dir") out_dir = value;
    else if (key == "paths.weights") weights_path = value;
    else throw ConfigError("config: unknown key '" + key + "'");
}

void RunConfig::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto stripped = trim(line.substr(0, line.find('#')));
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + " line " + std::to_string(line_no) +
                              ": expected key = value");
        set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    }
}

std::string RunConfig::to_string() const {
    std::ostringstream out;
    out << "data.sample_rate_hz = " << fmt(sample_rate_hz) << "\n";
    out << "data.chunk_seconds = " << fmt(chunk_seconds) << "\n";
    out << "data.apnea_labels = " << join(apnea_labels) << "\n";
    out << "dsp.n_fft = " << spectrogram.n_fft << "\n";
    out << "dsp.win_length = " << spectrogram.win_length << "\n";
    out << "dsp.hop_length = " << spectrogram.hop_length << "\n";
    out << "dsp.n_mels = " << spectrogram.n_mels << "\n";
    out << "dsp.f_min_hz = " << fmt(spectrogram.f_min_hz) << "\n";
    out << "dsp.f_max_hz = " << fmt(spectrogram.f_max_hz) << "\n";
    out << "dsp.target_frames = " << spectrogram.target_frames << "\n";
    out << "dsp.eps = " << fmt(spectrogram.eps) << "\n";
    out << "model.stem_filters = " << model.stem_filters << "\n";
    out << "model.stage_filters = " << join_sizes(model.stage_filters) << "\n";
    out << "model.stage_blocks = " << join_sizes(model.stage_blocks) << "\n";
    out << "model.head_units = " << model.head_units << "\n";
    out << "model.dropout_rate = " << fmt(model.dropout_rate) << "\n";
    out << "train.batch_size = " << training.batch_size << "\n";
    out << "train.epochs = " << training.epochs << "\n";
    out << "train.learning_rate = " << fmt(training.learning_rate) << "\n";
    out << "train.loss = " << train::to_string(training.loss.kind) << "\n";
    out << "train.w_pos = " << fmt(training.loss.w_pos) << "\n";
    out << "train.w_neg = " << fmt(training.loss.w_neg) << "\n";
    out << "train.alpha = " << fmt(training.loss.alpha) << "\n";
    out << "train.gamma = " << fmt(training.loss.gamma) << "\n";
    out << "train.oversample = " << (training.oversample ? "true" : "false") << "\n";
    out << "train.class_weighting = " << (training.class_weighting ? "true" : "false") << "\n";
    out << "train.early_stopping = " << (training.early_stopping ? "true" : "false") << "\n";
    out << "train.es_patience = " << training.early_stop.patience << "\n";
    out << "train.es_min_delta = " << fmt(training.early_stop.min_delta) << "\n";
    out << "train.plateau = " << (training.plateau ? "true" : "false") << "\n";
    out << "train.plateau_factor = " << fmt(training.plateau_cfg.factor) << "\n";
    out << "train.plateau_patience = " << training.plateau_cfg.patience << "\n";
    out << "train.plateau_min_delta = " << fmt(training.plateau_cfg.min_delta) << "\n";
    out << "train.plateau_min_lr = " << fmt(training.plateau_cfg.min_lr) << "\n";
    out << "train.validation_fraction = " << fmt(training.validation_fraction) << "\n";
    out << "synth.records = " << synth_records << "\n";
    out << "synth.duration_s = " << fmt(synth.duration_s) << "\n";
    out << "synth.breath_rate_hz = " << fmt(synth.breath_rate_hz) << "\n";
    out << "synth.apnea_rate_per_min = " << fmt(synth.apnea_event_rate_per_min) << "\n";
    out << "synth.apnea_min_s = " << fmt(synth.apnea_min_s) << "\n";
    out << "synth.apnea_max_s = " << fmt(synth.apnea_max_s) << "\n";
    out << "synth.suppression = " << fmt(synth.apnea_suppression) << "\n";
    out << "synth.noise_snr_db = " << fmt(synth.noise_snr_db) << "\n";
    out << "eval.objective = " << eval_objective << "\n";
    out << "eval.floor = " << fmt(eval_floor) << "\n";
    out << "eval.threshold = " << (eval_has_threshold ? fmt(eval_threshold) : std::string("sweep"))
        << "\n";
    out << "ablate.runs = " << join(ablate_runs) << "\n";
    out << "ablate.threshold = " << fmt(ablate_threshold) << "\n";
    out << "run.seed = " << seed << "\n";
    out << "run.threads = " << threads << "\n";
    out << "paths.data_dir = " << data_dir << "\n";
    out << "paths.out_dir = " << out_dir << "\n";
    out << "paths.weights = " << weights_path << "\n";
    return out.str();
}

void RunConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write config file: " + path.string());
    out << to_string();
}

}  // namespace apnea::cli
