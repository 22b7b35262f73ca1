"""Random iDMA jobs and the nested-loop copy oracle."""

import random

from hypercroc.idma import DmaJob

# disjoint areas so a job never reads what it writes
AREAS = [
    (0x1000_0000, 0x4000),  # SRAM banks 0-1
    (0x1000_4000, 0x4000),  # SRAM banks 2-3
    (0x8000_0000, 0x4_0000),  # HyperRAM
    (0x8100_0000, 0x4_0000),  # HyperRAM, another row range
]


def oracle_copy(mem: dict, job: DmaJob) -> None:
    """Apply ``job`` to a byte dict the obvious way."""
    for r in range(job.reps):
        s = job.src + r * job.src_stride
        d = job.dst + r * job.dst_stride
        for i in range(job.length):
            mem[d + i] = mem[s + i]


def _layout(rng, size, length, reps):
    """Base and stride so all rows fit inside an area of ``size`` bytes."""
    if reps == 1:
        return rng.randrange(0, size - length + 1), 0
    room = size - length
    stride = rng.choice([0, length, rng.randint(0, room // (reps - 1))])
    stride = min(stride, room // (reps - 1))
    base = rng.randrange(0, room - stride * (reps - 1) + 1)
    return base, stride


def random_job(rng: random.Random, max_len=4096, max_reps=4) -> DmaJob:
    sa, da = rng.sample(range(len(AREAS)), 2)
    length = rng.choice([0, rng.randint(1, 16), rng.randint(1, max_len), rng.randint(1, max_len)])
    reps = rng.choice([1, 1, rng.randint(1, max_reps)])
    (sb, ss), (db, ds) = AREAS[sa], AREAS[da]
    so, sst = _layout(rng, ss, length, reps)
    do, dst = _layout(rng, ds, length, reps)
    cap = rng.choice([0, 0, rng.randint(1, 64)])
    return DmaJob(sb + so, db + do, length, sst, dst, reps, cap)


def snapshot(soc) -> dict:
    mem = {}
    for base, size in AREAS:
        for i, b in enumerate(soc.read_mem(base, size)):
            mem[base + i] = b
    return mem


def fill_areas(soc, rng) -> None:
    for base, size in AREAS:
        soc.write_mem(base, rng.randbytes(size))


def run_job(soc, dma, job, max_cycles=2_000_000):
    jid = dma.submit(job)
    assert jid
    soc.sim.run_until(max_soc_cycles=soc.sim.soc.cycle_count + max_cycles, stop=lambda: not dma.busy)
    assert not dma.busy, "job did not finish"
    return dma.completed[-1]


def check_jobs(n, seed):
    """Run ``n`` random jobs on one SoC, each against the oracle; returns failures."""
    from hypercroc.soc import Soc

    rng = random.Random(seed)
    soc = Soc()
    fill_areas(soc, rng)
    dma = soc.dmas[0]
    bad = []
    for k in range(n):
        job = random_job(rng)
        touched = set()
        for r in range(job.reps):
            d = job.dst + r * job.dst_stride
            touched.update(range(d, d + job.length))
        # oracle over the rows involved only (a dict per job keeps it cheap)
        rows = {}
        for r in range(job.reps):
            s = job.src + r * job.src_stride
            for i, b in enumerate(soc.read_mem(s, job.length)):
                rows[s + i] = b
        lo = min(touched, default=0)
        hi = max(touched, default=-1) + 1
        before = soc.read_mem(lo, hi - lo) if hi > lo else b""
        for i, b in enumerate(before):
            rows.setdefault(lo + i, b)
        oracle_copy(rows, job)
        done = run_job(soc, dma, job)
        after = soc.read_mem(lo, hi - lo) if hi > lo else b""
        expect = bytes(rows[lo + i] for i in range(hi - lo))
        if done.error or after != expect:
            bad.append((k, job))
    return bad
