#pragma once

#include <stdexcept>

namespace apnea {

// CLI exit-code mapping: ConfigError -> 2, DataError -> 3, ArtifactError -> 4.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArtifactError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace apnea
