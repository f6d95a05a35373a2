#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "apnea/runconfig.hpp"

namespace apnea::cli {

// Subcommand bodies shared by the command-line tool and the test suites.
// All of them throw ConfigError / DataError / ArtifactError on failure and
// persist the effective configuration into the output directory.

void cmd_synth(const RunConfig& config);
void cmd_preprocess(const RunConfig& config);
void cmd_train(const RunConfig& config);
void cmd_evaluate(const RunConfig& config);
void cmd_ablate(const RunConfig& config);

// Consolidates metrics JSON files into one comparison CSV; `names` (when
// non-empty) must match `metric_files` in length, otherwise file stems are
// used. With `with_reference`, a row with the bundled MIT-BIH reference
// metrics is appended for side-by-side comparison.
void cmd_report(const std::vector<std::string>& metric_files,
                const std::vector<std::string>& names, bool with_reference,
                const std::filesystem::path& out_csv);

}  // namespace apnea::cli
