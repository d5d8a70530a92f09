#pragma once

#include <Eigen/Dense>

#include <cstdlib>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fpb {

/// Maximum spatial dimension handled anywhere in the library.
inline constexpr int kMaxDim = 3;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// Raised by the solver when a run has to be aborted (CFL, clipping, linear solve).
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an evaluator's preconditions make a verdict impossible.
class RefusedError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Minimal leveled logging to stderr, controlled by FB_LOG (error|warn|info|debug).
enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("FB_LOG");
        if (env == nullptr) return LogLevel::warn;
        const std::string_view v{env};
        if (v == "error") return LogLevel::error;
        if (v == "info") return LogLevel::info;
        if (v == "debug") return LogLevel::debug;
        return LogLevel::warn;
    }();
    return level;
}

inline void log(LogLevel level, std::string_view msg) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    static constexpr const char* names[] = {"error", "warn", "info", "debug"};
    std::cerr << "[fpbounds " << names[static_cast<int>(level)] << "] " << msg << '\n';
}

}  // namespace fpb
