import pytest

import dualcast


def test_failure_free_run_passes_checks():
    sc = dualcast.Scenario.parse("n=5\nf=1\nreliable=circulant:2\nrounds=10\n")
    r = dualcast.run(sc)
    assert r.outcome == "completed"
    assert all(c["verdict"] != "fail" for c in r.checks())
    log = r.log(0)
    assert len(log) >= 10
    assert [e["round"] for e in log[:10]] == list(range(1, 11))
    assert all(e["count"] == 5 for e in log[:10])


def test_same_seed_same_trace():
    sc = dualcast.Scenario.parse("n=6\nf=1\nreliable=circulant:2\nrounds=15\njitter_us=20\nfail=300:2\n")
    assert dualcast.run(sc).trace_hash == dualcast.run(sc).trace_hash
    assert dualcast.run(sc).crashed == [2]


def test_errors_are_value_errors():
    with pytest.raises(dualcast.InvalidSpec):
        dualcast.Scenario.parse("n=5\nwhat=1\n")
    sc = dualcast.Scenario.parse("n=9\nf=3\nreliable=circulant:3\n")
    with pytest.raises(dualcast.ConfigError):
        sc.validate()
    with pytest.raises(dualcast.DomainError):
        dualcast.expected_performance(1, 3, 2)


def test_overlay_and_model():
    assert dualcast.edges("ring", 3) == [(0, 1), (1, 2), (2, 0)]
    assert dualcast.vertex_connectivity(9, dualcast.edges("circulant:3", 9)) == 3
    lat, thr = dualcast.expected_performance(1, 3, 10)
    assert lat == pytest.approx(2.7)
    assert thr == pytest.approx(0.9 / 1.3)
    assert dualcast.worst_case_latency(1, 3, "merged", 3.5) == pytest.approx(5.5)


def test_metrics_and_trace_exports():
    r = dualcast.run(dualcast.Scenario.parse("n=4\nf=1\nrounds=12\n"))
    assert r.metrics_csv().startswith("server,median_latency_us,ci_lo,ci_hi,throughput_msgs_per_s,rounds,transmissions")
    assert r.trace_tsv().startswith("time\tserver\tevent\tpeer\tlabel\tdetail")
    assert r.transitions.get("rf", 0) == 4
