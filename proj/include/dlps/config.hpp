#pragma once

#include "dlps/controller.hpp"
#include "dlps/device.hpp"
#include "dlps/workload.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

namespace dlps {

enum class WorkloadKind : std::uint8_t { Phase, Sweep, Trace, Idle };

std::string_view to_string(WorkloadKind k);

/**
 * Everything one invocation needs. Loaded from a flat "key = value" file
 * with dotted section keys, e.g.
 *
 *   device.preset = ddr4-2400-8gb-x4
 *   device.tXS_ck = 408
 *   controller.page_policy = closed_adaptive
 *   workload.kind = sweep
 */
struct RunConfig
{
    DeviceConfig device;
    ControllerConfig controller;

    WorkloadKind workload = WorkloadKind::Phase;
    PhaseConfig phase;
    std::optional<SimTime> itt_min_override;
    std::optional<SimTime> itt_max_override;
    SweepConfig sweep;
    std::filesystem::path trace;
    SimTime idle_duration = 10 * kPsPerMs;
    bool prime_open_bank = true;

    std::uint64_t seed = 1;
    std::filesystem::path out_dir;
    std::filesystem::path drampower_trace;

    /// Phase parameters with ITT bounds filled in from the profile.
    PhaseConfig resolved_phase() const;
    /// Throws ConfigError (or InputError for a missing trace file).
    void validate() const;
};

/// Apply one setting. Throws ConfigError for unknown keys or bad values.
/// Relative paths are resolved against `base_dir`.
void apply_setting(RunConfig& cfg, std::string_view key,
                   std::string_view value,
                   const std::filesystem::path& base_dir = {});

/// device.preset is applied before every other key; cycle counts (_ck)
/// are converted with the final tCK. Validates the result.
RunConfig parse_run_config(std::istream& in, std::string_view name = "<config>",
                           const std::filesystem::path& base_dir = {});
/// Throws InputError if the file cannot be read.
RunConfig load_run_config(const std::filesystem::path& path);

} // namespace dlps
