#pragma once

#include <stdexcept>
#include <string>

namespace spur {

// Error taxonomy. The CLI maps these onto process exit codes:
//   UsageError -> 1, ConfigError -> 2, BackendError (and subclasses) -> 3.

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct BackendError : std::runtime_error {
    explicit BackendError(const std::string& msg) : std::runtime_error(msg) {}
};

// Backend reached but returned a payload we cannot interpret.
struct ProtocolError : BackendError {
    explicit ProtocolError(const std::string& msg) : BackendError(msg) {}
};

// Generator completion did not follow the {"prompts": [...]} contract.
// Recoverable: the engine retries up to parse_retry_limit before recording
// the batch as failed.
struct CandidateParseError : std::runtime_error {
    explicit CandidateParseError(const std::string& msg) : std::runtime_error(msg) {}
};

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const UsageError*>(&e)) return 1;
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const BackendError*>(&e)) return 3;
    return 1;
}

} // namespace spur
