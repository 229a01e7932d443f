#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <string_view>
#include <vector>

namespace dlps {

/// Simulation time in integer picoseconds since the start of the run.
using SimTime = std::uint64_t;

constexpr SimTime kPsPerNs = 1000;
constexpr SimTime kPsPerUs = 1000 * kPsPerNs;
constexpr SimTime kPsPerMs = 1000 * kPsPerUs;

constexpr double to_seconds(SimTime t) { return static_cast<double>(t) * 1e-12; }

enum class EventKind : std::uint8_t {
    RequestArrival,
    CommandIssueWindow,
    RefreshDue,
    PrechargeComplete,
    ReadDataReturned,
    RefreshComplete,
    PowerdownCheck,
    PhaseBoundary,
};

std::string_view to_string(EventKind kind);

struct Event
{
    SimTime fire_at = 0;
    EventKind kind = EventKind::CommandIssueWindow;
    std::function<void()> action;
};

/**
 * Ordered event queue and global clock.
 *
 * Events dispatch in (fire_at, insertion sequence) order, so equal
 * timestamps resolve first-scheduled-first-fired. Handlers may schedule
 * further events, including at the current time.
 */
class EventQueue
{
  public:
    SimTime now() const { return clock_; }

    /// Throws FatalError if ev.fire_at is earlier than now().
    void schedule(Event ev);

    void schedule(SimTime at, EventKind kind, std::function<void()> action)
    {
        schedule(Event{at, kind, std::move(action)});
    }

    /// Dispatch every event with fire_at <= limit, then advance the clock
    /// to limit. Returns the final clock value.
    SimTime run_until(SimTime limit);

    bool empty() const { return heap_.empty(); }
    std::size_t pending() const { return heap_.size(); }
    std::uint64_t dispatched() const { return dispatched_; }

    /// Fire time of the earliest pending event; only valid if !empty().
    SimTime next_fire_at() const { return heap_.top().fire_at; }

  private:
    struct Entry
    {
        SimTime fire_at;
        std::uint64_t seq;
        EventKind kind;
        std::function<void()> action;
    };
    struct Later
    {
        bool operator()(const Entry& a, const Entry& b) const
        {
            if (a.fire_at != b.fire_at)
                return a.fire_at > b.fire_at;
            return a.seq > b.seq;
        }
    };

    std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
    SimTime clock_ = 0;
    std::uint64_t next_seq_ = 0;
    std::uint64_t dispatched_ = 0;
};

/**
 * xoshiro256** seeded through splitmix64.
 *
 * The algorithm is fixed so that seeded runs reproduce bit-for-bit on
 * every platform; std::mt19937 plus std::uniform_int_distribution would
 * not, since the distribution is implementation-defined.
 */
class Rng
{
  public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t next_u64();

    /// Uniform integer in [0, bound); bound must be > 0. Unbiased.
    std::uint64_t below(std::uint64_t bound);

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01();

    template <typename Seq>
    const auto& choice(const Seq& seq)
    {
        return seq[below(seq.size())];
    }

  private:
    std::uint64_t s_[4];
};

/// Uniform SimTime in [lo, hi], both ends inclusive. Throws
/// std::invalid_argument if lo > hi.
SimTime uniform(Rng& rng, SimTime lo, SimTime hi);

std::uint64_t splitmix64(std::uint64_t& state);

} // namespace dlps
