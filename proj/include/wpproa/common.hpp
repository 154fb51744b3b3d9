#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace wpproa {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr double kPi = 3.14159265358979323846;

// Raised when a parameter or input file violates a documented constraint.
// The message names the offending field and the constraint.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a computation cannot proceed (singular inertia, non-Hurwitz
// dynamics, failed fit, infeasible operating point, ...).
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

// Worker count for trajectory ensembles: WPPROA_WORKERS env var if set,
// otherwise hardware concurrency (minimum 1).
int default_workers();

// Static-chunked parallel loop. Results must be written to preallocated,
// index-owned slots so the outcome is independent of scheduling.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

// FNV-1a 64-bit hash, used for config/artifact fingerprints in manifests.
std::uint64_t fnv1a64(std::string_view data);

std::string to_hex(std::uint64_t value);

}  // namespace wpproa
