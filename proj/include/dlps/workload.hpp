#pragma once

#include "dlps/controller.hpp"
#include "dlps/device.hpp"
#include "dlps/engine.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dlps {

enum class DensityProfile : std::uint8_t { VeryDense, Dense, Sparse };

std::string_view to_string(DensityProfile p);
DensityProfile parse_density_profile(std::string_view s);
/// ITT_max as a multiple of tPDE: 1, 20, 100.
std::uint32_t itt_multiplier(DensityProfile p);

/// (tCCD, k * tPDE) for the profile.
std::pair<SimTime, SimTime> itt_bounds(const DeviceConfig& cfg,
                                       DensityProfile profile);

struct PhaseConfig
{
    DensityProfile profile = DensityProfile::VeryDense;
    SimTime itt_min = 0;
    SimTime itt_max = 0;
    std::uint32_t n_seq_bytes = 64;
    /// Numerator of the bank utilisation k/16: banks 0..k-1 are used.
    std::uint32_t bank_util = 16;
    SimTime duration = 250 * kPsPerUs;
    std::uint32_t req_size = 64;
    std::uint64_t addr_range = std::uint64_t{256} << 20;
    std::uint64_t seed = 1;

    /// Throws ConfigError.
    void validate(const DeviceConfig& dev) const;
    std::string label() const;
};

struct MemoryConfig
{
    std::uint32_t ranks = 1;
    PagePolicy page_policy = PagePolicy::OpenAdaptive;

    std::string label() const;
};

struct SweepConfig
{
    std::vector<std::uint32_t> ranks{1, 2};
    std::vector<PagePolicy> page_policies{PagePolicy::OpenAdaptive,
                                          PagePolicy::ClosedAdaptive};
    std::vector<DensityProfile> profiles{DensityProfile::VeryDense,
                                         DensityProfile::Dense,
                                         DensityProfile::Sparse};
    std::vector<std::uint32_t> bank_utils{1, 8, 16};
    std::vector<std::uint32_t> n_seq_bytes{64, 256, 512};
    SimTime phase_duration = 250 * kPsPerUs;
    std::uint64_t base_seed = 1;

    /// Memory configurations, ranks outer, page policy inner.
    std::vector<MemoryConfig> memory_configs() const;
    /// Phases in run order: profile, then bank utilisation, then n_seq.
    /// Phase i uses seed base_seed + i.
    std::vector<PhaseConfig> phases(const DeviceConfig& dev) const;
};

/**
 * Address stream of one phase: 64 B steps through a block of n_seq_bytes,
 * then a jump to a fresh random block, aligned to n_seq_bytes, whose bank
 * lies in 0..bank_util-1.
 */
class AddressStream
{
  public:
    AddressStream(const PhaseConfig& phase, const Geometry& g);

    std::uint64_t next(Rng& rng);

  private:
    PhaseConfig phase_;
    Geometry geom_;
    std::uint64_t block_ = 0;
    std::uint32_t offset_ = 0;
    bool have_block_ = false;
};

struct GeneratorStats
{
    std::uint64_t generated = 0;
    std::uint64_t injected = 0;
    std::uint64_t rejections = 0;
    std::uint64_t dropped_at_phase_end = 0;
};

/**
 * Open-loop synthetic read generator. A request that meets a full queue is
 * held and retried on the controller's vacancy signal; the next inter-
 * transaction time is drawn after each successful injection.
 */
class TrafficGenerator
{
  public:
    TrafficGenerator(EventQueue& events, Controller& ctl);

    /// Generate from `start` until `start + phase.duration` (exclusive).
    void start_phase(const PhaseConfig& phase, SimTime start);

    const GeneratorStats& stats() const { return stats_; }
    /// Injection timestamps, recorded when enabled.
    void record_injections(bool on) { record_ = on; }
    const std::vector<SimTime>& injection_times() const { return times_; }
    const std::vector<std::uint64_t>& injected_addresses() const
    {
        return addrs_;
    }

  private:
    void attempt(std::uint64_t generation);
    void retry();

    EventQueue& events_;
    Controller& ctl_;
    PhaseConfig phase_;
    Rng rng_{0};
    std::optional<AddressStream> stream_;
    SimTime end_ = 0;
    std::uint64_t generation_ = 0;
    std::optional<Request> held_;
    GeneratorStats stats_;
    bool record_ = false;
    std::vector<SimTime> times_;
    std::vector<std::uint64_t> addrs_;
};

/// Fill one request per rank at t=0 so each rank starts with a bank open.
void prime_open_banks(Controller& ctl);

struct TraceRecord
{
    SimTime at = 0;
    Op op = Op::Read;
    std::uint64_t address = 0;
    std::uint32_t size = 64;

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

/**
 * Parse "<time_ps> <R|W> <hex_address> <size_bytes>" lines; blank lines and
 * lines starting with '#' are skipped. Throws InputError naming the line on
 * malformed input or decreasing timestamps.
 */
std::vector<TraceRecord> parse_trace(std::istream& in,
                                     std::string_view name = "<trace>");
std::vector<TraceRecord> parse_trace_file(const std::filesystem::path& path);

/**
 * Replays a trace. Records arrive at their timestamps shifted by the stall
 * accumulated so far; a record that finds its queue full waits for a
 * vacancy and the wait adds to the stall. Records larger than one burst
 * are split into consecutive bursts.
 */
class TraceReplayer
{
  public:
    TraceReplayer(EventQueue& events, Controller& ctl,
                  std::vector<TraceRecord> records);

    void start();
    bool finished() const { return next_ >= records_.size() && !held_; }
    SimTime stall() const { return stall_; }
    std::uint64_t injected() const { return injected_; }
    /// FNV-1a over (op, address) of every injected burst, in order.
    std::uint64_t stream_hash() const { return hash_; }

  private:
    void arrive();
    void retry();
    void schedule_next();

    EventQueue& events_;
    Controller& ctl_;
    std::vector<TraceRecord> records_;
    std::size_t next_ = 0;
    std::uint32_t chunk_ = 0;
    bool held_ = false;
    SimTime stall_ = 0;
    std::uint64_t injected_ = 0;
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

} // namespace dlps
