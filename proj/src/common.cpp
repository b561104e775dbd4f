#include "flexcap/common.hpp"

#include <spdlog/spdlog.h>

#include <cstdlib>

namespace flexcap {

ParseError::ParseError(const std::string& where, std::size_t line, const std::string& what)
    : Error(where + ":" + std::to_string(line) + ": " + what), line_(line) {}

ParseError::ParseError(const std::string& where, const std::string& what) : Error(where + ": " + what) {}

ExitCode exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ValidationError*>(&e)) return ExitCode::Config;
    if (dynamic_cast<const InfeasibleError*>(&e)) return ExitCode::Infeasible;
    if (dynamic_cast<const SolverError*>(&e)) return ExitCode::Solver;
    if (dynamic_cast<const InvariantError*>(&e)) return ExitCode::InvariantBreach;
    return ExitCode::Config;
}

void init_logging() {
    static bool done = false;
    if (done) return;
    done = true;
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("FLEXCAP_LOG")) {
        spdlog::set_level(spdlog::level::from_str(env));
    }
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace flexcap
