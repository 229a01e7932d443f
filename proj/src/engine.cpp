#include "dlps/engine.hpp"

#include "dlps/errors.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace dlps {

std::string_view
to_string(EventKind kind)
{
    switch (kind) {
      case EventKind::RequestArrival: return "request-arrival";
      case EventKind::CommandIssueWindow: return "command-issue-window";
      case EventKind::RefreshDue: return "refresh-due";
      case EventKind::PrechargeComplete: return "precharge-complete";
      case EventKind::ReadDataReturned: return "read-data-returned";
      case EventKind::RefreshComplete: return "refresh-complete";
      case EventKind::PowerdownCheck: return "powerdown-check";
      case EventKind::PhaseBoundary: return "phase-boundary";
    }
    return "unknown";
}

void
EventQueue::schedule(Event ev)
{
    if (ev.fire_at < clock_) {
        throw FatalError("event '" + std::string(to_string(ev.kind)) +
                         "' scheduled at " + std::to_string(ev.fire_at) +
                         " ps, before current time " + std::to_string(clock_) +
                         " ps");
    }
    heap_.push(Entry{ev.fire_at, next_seq_++, ev.kind, std::move(ev.action)});
}

SimTime
EventQueue::run_until(SimTime limit)
{
    while (!heap_.empty() && heap_.top().fire_at <= limit) {
        // priority_queue::top is const; move the handler out before popping
        Entry e = std::move(const_cast<Entry&>(heap_.top()));
        heap_.pop();
        clock_ = e.fire_at;
        ++dispatched_;
        if (e.action)
            e.action();
    }
    if (limit > clock_)
        clock_ = limit;
    return clock_;
}

std::uint64_t
splitmix64(std::uint64_t& state)
{
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed)
{
    std::uint64_t sm = seed;
    for (auto& s : s_)
        s = splitmix64(sm);
}

namespace {
constexpr std::uint64_t
rotl(std::uint64_t x, int k)
{
    return (x << k) | (x >> (64 - k));
}
} // namespace

std::uint64_t
Rng::next_u64()
{
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

std::uint64_t
Rng::below(std::uint64_t bound)
{
    if (bound == 0)
        throw std::invalid_argument("Rng::below: bound must be positive");
    // reject the partial top bucket so every residue is equally likely
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % bound;
}

double
Rng::uniform01()
{
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

SimTime
uniform(Rng& rng, SimTime lo, SimTime hi)
{
    if (lo > hi)
        throw std::invalid_argument("uniform: lo (" + std::to_string(lo) +
                                    ") > hi (" + std::to_string(hi) + ")");
    const std::uint64_t span = hi - lo;
    if (span == std::numeric_limits<std::uint64_t>::max())
        return rng.next_u64();
    return lo + rng.below(span + 1);
}

} // namespace dlps
