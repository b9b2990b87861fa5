import json

import pytest

from mcsim.engine import US_PER_S
from mcsim.trace import (
    CQI_EFFICIENCY,
    ChannelTrace,
    CqiRateTable,
    DEFAULT_RATE_TABLE,
    TraceError,
    generate_trace,
    load_trace,
    mean_fraction,
    rate_at,
    render_trace,
    save_trace,
)


def write(tmp_path, text):
    p = tmp_path / "trace.csv"
    p.write_text(text, encoding="utf-8")
    return p


def test_load_two_samples(tmp_path):
    trace = load_trace(write(tmp_path, "0,15\n1,12\n"))
    assert trace.cqi_by_second == [15, 12]


def test_header_is_optional(tmp_path):
    with_header = load_trace(write(tmp_path, "second,cqi\n0,15\n1,12\n"))
    assert with_header.cqi_by_second == [15, 12]


def test_cqi_out_of_range_names_line(tmp_path):
    with pytest.raises(TraceError, match=":1:"):
        load_trace(write(tmp_path, "0,16\n"))


def test_non_consecutive_seconds_rejected(tmp_path):
    with pytest.raises(TraceError, match=":2:"):
        load_trace(write(tmp_path, "0,10\n2,10\n"))


def test_malformed_row_names_line(tmp_path):
    with pytest.raises(TraceError, match=":2:"):
        load_trace(write(tmp_path, "0,10\n1;10\n"))


def test_empty_file_rejected(tmp_path):
    with pytest.raises(TraceError):
        load_trace(write(tmp_path, ""))


def test_round_trip_is_byte_identical(tmp_path):
    trace = generate_trace(seed=9, duration_s=20, cqi_min=5, cqi_max=13)
    p = tmp_path / "t.csv"
    save_trace(trace, p)
    original = p.read_bytes()
    reloaded = load_trace(p)
    assert render_trace(reloaded).encode() == original


def test_rate_zero_at_cqi_zero():
    trace = ChannelTrace([0])
    assert rate_at(trace, DEFAULT_RATE_TABLE, 15e6, 0) == 0.0


def test_single_sample_trace_is_constant_link():
    trace = ChannelTrace([12])
    expected = 15e6 * CQI_EFFICIENCY[12] / CQI_EFFICIENCY[15]
    for t in (0, US_PER_S, 7 * US_PER_S, 1234567):
        assert rate_at(trace, DEFAULT_RATE_TABLE, 15e6, t) == pytest.approx(expected)


def test_peak_rate_reached_at_cqi_15():
    # scale is peak / table(15): a CQI-15 second runs at exactly the peak rate
    trace = ChannelTrace([15, 10])
    assert rate_at(trace, DEFAULT_RATE_TABLE, 15e6, 0) == pytest.approx(15e6)


def test_rate_is_piecewise_constant_with_second_breakpoints():
    trace = ChannelTrace([15, 7, 11])
    peak = 10e6
    for sec, cqi in enumerate(trace.cqi_by_second):
        expected = peak * CQI_EFFICIENCY[cqi] / CQI_EFFICIENCY[15]
        for offset in (0, 1, 499_999, 999_999):
            t = sec * US_PER_S + offset
            assert rate_at(trace, DEFAULT_RATE_TABLE, peak, t) == pytest.approx(expected)


def test_rate_wraps_cyclically():
    trace = ChannelTrace([15, 7])
    peak = 10e6
    assert rate_at(trace, DEFAULT_RATE_TABLE, peak, 2 * US_PER_S) == pytest.approx(peak)
    assert rate_at(trace, DEFAULT_RATE_TABLE, peak, 3 * US_PER_S) == pytest.approx(
        peak * CQI_EFFICIENCY[7] / CQI_EFFICIENCY[15]
    )


def test_rate_bounds_hold_for_random_trace():
    trace = generate_trace(seed=3, duration_s=100, cqi_min=0, cqi_max=15)
    peak = 20e6
    for sec in range(100):
        r = rate_at(trace, DEFAULT_RATE_TABLE, peak, sec * US_PER_S)
        assert 0.0 <= r <= peak + 1e-9


def test_rate_table_must_be_monotone():
    bad = list(CQI_EFFICIENCY)
    bad[9], bad[10] = bad[10], bad[9]
    with pytest.raises(TraceError):
        CqiRateTable(tuple(bad))


def test_rate_table_requires_zero_entry():
    bad = (0.5,) + CQI_EFFICIENCY[1:]
    with pytest.raises(TraceError):
        CqiRateTable(bad)


def test_generate_trace_deterministic_and_banded():
    a = generate_trace(seed=77, duration_s=50, cqi_min=6, cqi_max=12)
    b = generate_trace(seed=77, duration_s=50, cqi_min=6, cqi_max=12)
    assert a.cqi_by_second == b.cqi_by_second
    assert all(6 <= c <= 12 for c in a.cqi_by_second)
    c = generate_trace(seed=78, duration_s=50, cqi_min=6, cqi_max=12)
    assert c.cqi_by_second != a.cqi_by_second


def test_manifest_reports_min_max_mean():
    trace = ChannelTrace([10, 12, 14], source_label="demo")
    m = trace.manifest()
    assert m == {
        "source_label": "demo",
        "seconds": 3,
        "cqi_min": 10,
        "cqi_max": 14,
        "cqi_mean": 12.0,
    }


def test_shipped_fixture_traces_match_their_manifests(fixtures_dir):
    for name in ("trace_a", "trace_b"):
        trace = load_trace(fixtures_dir / f"{name}.csv")
        manifest = json.loads((fixtures_dir / f"{name}.manifest.json").read_text())
        assert trace.manifest() == manifest
        assert manifest["seconds"] == 30


def test_shipped_fixtures_regenerate_from_their_seeds(fixtures_dir):
    # the fixtures are reproducible: same generator, same seeds, same bytes
    spec = {"trace_a": (101, 12, 15, 14), "trace_b": (202, 10, 14, 12)}
    for name, (seed, lo, hi, start) in spec.items():
        regenerated = generate_trace(seed, 30, lo, hi, start)
        on_disk = (fixtures_dir / f"{name}.csv").read_text(encoding="utf-8")
        assert render_trace(regenerated) == on_disk


def test_fixture_mean_capacities_sum_to_27_mbps(fixtures_dir):
    peaks = {"trace_a": 17130601, "trace_b": 14071794}
    total = 0.0
    for name, peak in peaks.items():
        trace = load_trace(fixtures_dir / f"{name}.csv")
        total += peak * mean_fraction(trace, DEFAULT_RATE_TABLE)
    assert total == pytest.approx(27e6, rel=1e-4)
