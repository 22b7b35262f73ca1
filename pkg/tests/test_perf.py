import json

import pytest

from hypercroc.idma import DmaJob
from hypercroc.perf import PerfCounters
from hypercroc.soc import Soc

from dmautil import run_job


def test_accumulate():
    p = PerfCounters()
    p.record("phy0.read", 5_000, 2)
    assert p.total("phy0.read") == 2


def test_empty_report():
    reps = PerfCounters().report()
    assert [(r.channel, r.bytes, r.mb_per_s) for r in reps] == [("external", 0, 0.0)]


def test_391_6():
    p = PerfCounters()
    p.record("phy0.read", 0, 1024)
    (r, _), = [(r, 0) for r in p.report((0, 2_615_000)) if r.channel == "phy0.read"]
    assert r.mb_per_s == pytest.approx(391.59, abs=0.01)


def test_rate_invariant_and_words_per_cycle():
    p = PerfCounters(100_000_000)
    for k in range(100):
        p.record("x", 10_000 * k, 4)
    r = p.report((0, 1_000_000))[0]
    assert r.bytes == 400
    assert r.mb_per_s == pytest.approx(r.bytes / ((r.t1_ps - r.t0_ps) * 1e-12) / 1e6)
    assert r.words_per_soc_cycle == pytest.approx(1.0)


def test_time_regression_asserts():
    p = PerfCounters()
    p.record("a", 100, 1)
    with pytest.raises(AssertionError):
        p.record("a", 99, 1)
    with pytest.raises(AssertionError):
        p.record("a", 200, 0)


def test_empty_window_present():
    p = PerfCounters()
    p.record("phy0.read", 0, 4)
    r = {x.channel: x for x in p.report((10, 20))}
    assert r["phy0.read"].bytes == 0 and r["phy0.read"].mb_per_s == 0.0


def test_aggregate_is_sum_over_same_window():
    p = PerfCounters()
    for k in range(50):
        p.record("phy0.read", 5000 * k, 2)
        p.record("phy1.read", 5000 * k + 1, 2)
    w = (0, 250_000)
    r = {x.channel: x for x in p.report(w)}
    assert r["external"].bytes == r["phy0.read"].bytes + r["phy1.read"].bytes
    assert r["external"].mb_per_s == pytest.approx(r["phy0.read"].mb_per_s + r["phy1.read"].mb_per_s)


def test_conservation_against_transaction_log():
    soc = Soc()
    run_job(soc, soc.dmas[0], DmaJob(0x8000_0100, 0x1000_0000, 5000))
    run_job(soc, soc.dmas[0], DmaJob(0x1000_0000, 0x8001_0002, 3001))
    log = soc.phys[0].log
    assert soc.perf.total("phy0.read") == sum(t.data_bytes for t, _ in log if not t.write)
    assert soc.perf.total("phy0.write") == sum(t.data_bytes for t, _ in log if t.write)


def test_report_json_lines(tmp_path):
    p = PerfCounters()
    p.record("phy0.read", 0, 8)
    path = tmp_path / "r.jsonl"
    p.write_report(path)
    recs = [json.loads(x) for x in path.read_text().splitlines()]
    assert {"channel", "t0_ps", "t1_ps", "bytes", "mb_per_s", "words_per_soc_cycle"} == set(recs[0])
    assert [r["channel"] for r in recs] == ["phy0.read", "external"]
