#include "dlps/workload.hpp"

#include "dlps/errors.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

namespace dlps {

std::string_view
to_string(DensityProfile p)
{
    switch (p) {
      case DensityProfile::VeryDense: return "very_dense";
      case DensityProfile::Dense: return "dense";
      case DensityProfile::Sparse: return "sparse";
    }
    return "?";
}

DensityProfile
parse_density_profile(std::string_view s)
{
    if (s == "very_dense" || s == "very-dense")
        return DensityProfile::VeryDense;
    if (s == "dense")
        return DensityProfile::Dense;
    if (s == "sparse")
        return DensityProfile::Sparse;
    throw ConfigError("unknown density profile '" + std::string(s) + "'");
}

std::uint32_t
itt_multiplier(DensityProfile p)
{
    switch (p) {
      case DensityProfile::VeryDense: return 1;
      case DensityProfile::Dense: return 20;
      case DensityProfile::Sparse: return 100;
    }
    return 1;
}

std::pair<SimTime, SimTime>
itt_bounds(const DeviceConfig& cfg, DensityProfile profile)
{
    return {cfg.timing.tCCD, itt_multiplier(profile) * compute_tpde(cfg)};
}

void
PhaseConfig::validate(const DeviceConfig& dev) const
{
    auto fail = [](const std::string& what) {
        throw ConfigError("phase: " + what);
    };
    if (itt_min > itt_max)
        fail("itt_min must be <= itt_max");
    if (req_size != dev.geometry.burst_bytes)
        fail("request size must equal the burst size");
    if (n_seq_bytes == 0 || n_seq_bytes % req_size != 0 ||
        !std::has_single_bit(n_seq_bytes))
        fail("n_seq_bytes must be a power-of-two multiple of the request size");
    if (n_seq_bytes > dev.geometry.row_buffer_bytes)
        fail("n_seq_bytes must not exceed the row buffer");
    if (bank_util < 1 || bank_util > dev.geometry.banks_per_rank)
        fail("bank_util must be in 1.." +
             std::to_string(dev.geometry.banks_per_rank));
    if (addr_range == 0 || addr_range % n_seq_bytes != 0 ||
        addr_range > dev.geometry.capacity_bytes())
        fail("addr_range must be a multiple of n_seq_bytes within capacity");
    if (duration == 0)
        fail("duration must be > 0");
}

std::string
PhaseConfig::label() const
{
    return std::string(to_string(profile)) + "/b" + std::to_string(bank_util) +
           "/s" + std::to_string(n_seq_bytes);
}

std::string
MemoryConfig::label() const
{
    return std::to_string(ranks) + "r-" + std::string(to_string(page_policy));
}

std::vector<MemoryConfig>
SweepConfig::memory_configs() const
{
    std::vector<MemoryConfig> out;
    for (std::uint32_t r : ranks)
        for (PagePolicy p : page_policies)
            out.push_back({r, p});
    return out;
}

std::vector<PhaseConfig>
SweepConfig::phases(const DeviceConfig& dev) const
{
    std::vector<PhaseConfig> out;
    for (DensityProfile prof : profiles)
        for (std::uint32_t bu : bank_utils)
            for (std::uint32_t ns : n_seq_bytes) {
                PhaseConfig p;
                p.profile = prof;
                std::tie(p.itt_min, p.itt_max) = itt_bounds(dev, prof);
                p.bank_util = bu;
                p.n_seq_bytes = ns;
                p.duration = phase_duration;
                p.req_size = dev.geometry.burst_bytes;
                p.seed = base_seed + out.size();
                out.push_back(p);
            }
    return out;
}

AddressStream::AddressStream(const PhaseConfig& phase, const Geometry& g)
    : phase_(phase), geom_(g)
{
}

std::uint64_t
AddressStream::next(Rng& rng)
{
    if (!have_block_ || offset_ >= phase_.n_seq_bytes) {
        const std::uint64_t blocks = phase_.addr_range / phase_.n_seq_bytes;
        // rejection keeps the draw uniform over blocks in allowed banks
        do {
            block_ = rng.below(blocks) * phase_.n_seq_bytes;
        } while (decode(block_, geom_).bank >= phase_.bank_util);
        offset_ = 0;
        have_block_ = true;
    }
    const std::uint64_t a = block_ + offset_;
    offset_ += phase_.req_size;
    return a;
}

TrafficGenerator::TrafficGenerator(EventQueue& events, Controller& ctl)
    : events_(events), ctl_(ctl)
{
    ctl_.on_vacancy([this] { retry(); });
}

void
TrafficGenerator::start_phase(const PhaseConfig& phase, SimTime start)
{
    phase.validate(ctl_.device());
    if (held_) {
        ++stats_.dropped_at_phase_end;
        held_.reset();
    }
    phase_ = phase;
    rng_ = Rng(phase.seed);
    stream_.emplace(phase, ctl_.device().geometry);
    end_ = start + phase.duration;
    const std::uint64_t gen = ++generation_;
    events_.schedule(start, EventKind::RequestArrival,
                     [this, gen] { attempt(gen); });
}

void
TrafficGenerator::attempt(std::uint64_t generation)
{
    if (generation != generation_ || events_.now() >= end_)
        return;
    Request req;
    req.op = Op::Read;
    req.address = stream_->next(rng_);
    req.size = phase_.req_size;
    ++stats_.generated;
    held_ = req;
    retry();
}

void
TrafficGenerator::retry()
{
    if (!held_)
        return;
    const SimTime now = events_.now();
    if (now >= end_) {
        ++stats_.dropped_at_phase_end;
        held_.reset();
        return;
    }
    if (!ctl_.enqueue(*held_)) {
        ++stats_.rejections;
        return;
    }
    ++stats_.injected;
    if (record_) {
        times_.push_back(now);
        addrs_.push_back(held_->address);
    }
    held_.reset();
    const SimTime at = now + uniform(rng_, phase_.itt_min, phase_.itt_max);
    if (at < end_) {
        const std::uint64_t gen = generation_;
        events_.schedule(at, EventKind::RequestArrival,
                         [this, gen] { attempt(gen); });
    }
}

void
prime_open_banks(Controller& ctl)
{
    for (std::uint32_t r = 0; r < ctl.ranks(); ++r) {
        DecodedAddress d;
        d.rank = r;
        Request req;
        req.op = Op::Read;
        req.address = encode(d, ctl.device().geometry);
        req.size = ctl.device().geometry.burst_bytes;
        ctl.enqueue(req);
    }
}

namespace {

std::string_view
trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
bool
parse_uint(std::string_view tok, T& out, int base = 10)
{
    const auto [p, ec] =
        std::from_chars(tok.data(), tok.data() + tok.size(), out, base);
    return ec == std::errc{} && p == tok.data() + tok.size();
}

} // namespace

std::vector<TraceRecord>
parse_trace(std::istream& in, std::string_view name)
{
    std::vector<TraceRecord> out;
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& what) {
        throw InputError(std::string(name) + ":" + std::to_string(lineno) +
                         ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view s = trim(line);
        if (s.empty() || s.front() == '#')
            continue;
        std::istringstream ls{std::string(s)};
        std::string t, op, addr, size, extra;
        if (!(ls >> t >> op >> addr >> size) || (ls >> extra))
            fail("expected '<time_ps> <R|W> <hex_address> <size_bytes>'");
        TraceRecord rec;
        if (!parse_uint(t, rec.at))
            fail("bad timestamp '" + t + "'");
        if (op == "R" || op == "r")
            rec.op = Op::Read;
        else if (op == "W" || op == "w")
            rec.op = Op::Write;
        else
            fail("bad operation '" + op + "' (expected R or W)");
        std::string_view hex = addr;
        if (hex.starts_with("0x") || hex.starts_with("0X"))
            hex.remove_prefix(2);
        if (hex.empty() || !parse_uint(hex, rec.address, 16))
            fail("bad hex address '" + addr + "'");
        if (!parse_uint(size, rec.size) || rec.size == 0)
            fail("bad size '" + size + "'");
        if (!out.empty() && rec.at < out.back().at)
            fail("timestamp " + t + " is earlier than the previous record");
        out.push_back(rec);
    }
    return out;
}

std::vector<TraceRecord>
parse_trace_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open trace '" + path.string() + "'");
    return parse_trace(in, path.string());
}

TraceReplayer::TraceReplayer(EventQueue& events, Controller& ctl,
                             std::vector<TraceRecord> records)
    : events_(events), ctl_(ctl), records_(std::move(records))
{
    const std::uint64_t cap = ctl_.device().geometry.capacity_bytes();
    for (std::size_t i = 0; i < records_.size(); ++i)
        if (records_[i].address >= cap ||
            records_[i].size > cap - records_[i].address)
            throw InputError("trace record " + std::to_string(i + 1) +
                             ": address beyond device capacity");
    ctl_.on_vacancy([this] { retry(); });
}

void
TraceReplayer::start()
{
    schedule_next();
}

void
TraceReplayer::schedule_next()
{
    if (next_ >= records_.size())
        return;
    const SimTime at = std::max(events_.now(), records_[next_].at + stall_);
    events_.schedule(at, EventKind::RequestArrival, [this] { arrive(); });
}

void
TraceReplayer::arrive()
{
    const std::uint32_t burst = ctl_.device().geometry.burst_bytes;
    const SimTime now = events_.now();
    while (next_ < records_.size() && records_[next_].at + stall_ <= now) {
        const TraceRecord& rec = records_[next_];
        const std::uint64_t first = rec.address / burst * burst;
        const std::uint64_t last = (rec.address + rec.size - 1) / burst * burst;
        Request req;
        req.op = rec.op;
        req.address = first + std::uint64_t{chunk_} * burst;
        req.size = burst;
        if (!ctl_.enqueue(req)) {
            held_ = true;
            return;
        }
        ++injected_;
        for (std::uint64_t v : {std::uint64_t(rec.op), req.address})
            for (int b = 0; b < 8; ++b) {
                hash_ ^= (v >> (8 * b)) & 0xff;
                hash_ *= 0x100000001b3ULL;
            }
        if (req.address == last) {
            chunk_ = 0;
            ++next_;
        } else {
            ++chunk_;
        }
    }
    schedule_next();
}

void
TraceReplayer::retry()
{
    if (!held_)
        return;
    held_ = false;
    const SimTime now = events_.now();
    stall_ = std::max(stall_, now - records_[next_].at);
    arrive();
}

} // namespace dlps
