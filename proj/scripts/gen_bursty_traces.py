#!/usr/bin/env python3
"""Generate the bundled synthetic bursty traces.

Each trace alternates compute bursts (dense memory traffic) with idle
stretches. Format per line: <time_ps> <R|W> <hex_address> <size_bytes>.
"""

import argparse
import random
from pathlib import Path

PS_PER_NS = 1_000
PS_PER_US = 1_000_000
ADDR_SPACE = 256 << 20


def stream_burst(rng, t, n, gap_ns, write_frac, seq_bytes):
    """n requests walking sequential blocks of seq_bytes at random bases."""
    out = []
    base, off = 0, seq_bytes
    for _ in range(n):
        if off >= seq_bytes:
            base = rng.randrange(ADDR_SPACE // seq_bytes) * seq_bytes
            off = 0
        op = "W" if rng.random() < write_frac else "R"
        out.append((t, op, base + off, 64))
        off += 64
        t += int(rng.uniform(*gap_ns) * PS_PER_NS)
    return out, t


def compute_idle(rng):
    """Regular compute/idle alternation, idle gaps well past two refresh intervals."""
    recs, t = [], 0
    for _ in range(40):
        burst, t = stream_burst(rng, t, 400, (3.4, 20.0), 0.2, 512)
        recs += burst
        t += 40 * PS_PER_US
    return recs


def phased_rw(rng):
    """Read-heavy and write-heavy phases with medium pauses and large records."""
    recs, t = [], 0
    for i in range(30):
        write_frac = 0.7 if i % 2 else 0.1
        for _ in range(150):
            base = rng.randrange(ADDR_SPACE // 256) * 256
            op = "W" if rng.random() < write_frac else "R"
            recs.append((t, op, base, 256))
            t += int(rng.uniform(10, 60) * PS_PER_NS)
        t += int(rng.uniform(20, 60) * PS_PER_US)
    return recs


def irregular(rng):
    """Random burst lengths and exponentially distributed idle gaps."""
    recs, t = [], 0
    for _ in range(60):
        n = rng.randint(20, 800)
        burst, t = stream_burst(rng, t, n, (3.4, 80.0), 0.3, rng.choice([64, 256, 512]))
        recs += burst
        t += int(rng.expovariate(1 / 30.0) * PS_PER_US) + 2 * PS_PER_US
    return recs


def write(path, recs, title):
    with open(path, "w") as f:
        f.write(f"# {title}\n# time_ps op address size_bytes\n")
        for t, op, addr, size in recs:
            f.write(f"{t} {op} 0x{addr:x} {size}\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "traces")
    ap.add_argument("--seed", type=int, default=2017)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    gens = [
        ("compute_idle.trc", compute_idle, "compute bursts with 40 us idle gaps"),
        ("phased_rw.trc", phased_rw, "alternating read/write phases, 256 B records"),
        ("irregular.trc", irregular, "random burst lengths, exponential idle gaps"),
    ]
    for i, (name, gen, title) in enumerate(gens):
        rng = random.Random(args.seed + i)
        recs = gen(rng)
        write(args.out / name, recs, title)
        print(f"{name}: {len(recs)} records, {recs[-1][0] / PS_PER_US:.1f} us")


if __name__ == "__main__":
    main()
