"""Dataset types and CSV IO: validation, round-trips, rejection messages."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import pmcpower as pp
from pmcpower.dataset import check_counter_names

from conftest import make_dataset


def test_counter_names_reject_time_and_duplicates():
    with pytest.raises(ValueError):
        check_counter_names(("TIME",))
    with pytest.raises(ValueError):
        check_counter_names(("A", "B", "A"))
    with pytest.raises(ValueError):
        check_counter_names(("A", ""))
    assert check_counter_names(["A", "B"]) == ("A", "B")


def test_counter_trace_requires_increasing_time():
    with pytest.raises(ValueError, match="strictly increasing"):
        pp.CounterTrace(
            time_keys=np.array([10, 10, 30], dtype=np.uint64),
            counters=("A",),
            values=np.zeros((3, 1), dtype=np.uint32),
        )


def test_counter_trace_shape_check():
    with pytest.raises(ValueError):
        pp.CounterTrace(
            time_keys=np.array([1, 2], dtype=np.uint64),
            counters=("A", "B"),
            values=np.zeros((2, 3), dtype=np.uint32),
        )


def test_power_trace_rejects_nonpositive_power():
    with pytest.raises(ValueError):
        pp.PowerTrace(
            time_keys=np.array([1, 2], dtype=np.uint64),
            power_w=np.array([1.0, 0.0]),
        )


def test_sample_row_delta_lookup():
    row = pp.SampleRow(
        time_key=100,
        run_id="r0",
        counters=("A", "B"),
        deltas=(3, 9),
        power_w=2.5,
    )
    assert row.delta("B") == 9
    with pytest.raises(KeyError):
        row.delta("C")


def test_dataset_equality_ignores_source():
    a = make_dataset(20, 3, seed=1)
    b = pp.Dataset(
        counters=a.counters,
        time_keys=a.time_keys.copy(),
        run_ids=a.run_ids,
        power_w=a.power_w.copy(),
        deltas=a.deltas.copy(),
        source="somewhere else",
    )
    assert a == b
    assert a != make_dataset(20, 3, seed=2)


def test_dataset_rejects_oversized_deltas():
    with pytest.raises(ValueError, match="2\\^32"):
        pp.Dataset(
            counters=("A",),
            time_keys=np.array([1], dtype=np.uint64),
            run_ids=("r",),
            power_w=np.array([1.0]),
            deltas=np.array([[2**32]], dtype=np.uint64),
        )


def test_dataset_from_rows_round_trip():
    ds = make_dataset(15, 2, seed=3, n_runs=3)
    again = pp.Dataset.from_rows(ds.counters, ds.rows)
    assert again == ds


# ---------------------------------------------------------------------------
# CSV files
# ---------------------------------------------------------------------------


def test_counter_trace_csv_round_trip(tmp_path):
    trace = pp.CounterTrace(
        time_keys=np.array([10, 20, 35], dtype=np.uint64),
        counters=("ICMISS", "DCMISS"),
        values=np.array([[1, 2], [3, 4], [2**32 - 1, 7]], dtype=np.uint32),
        run_id="bench1",
    )
    path = tmp_path / "t.csv"
    pp.write_counter_trace(trace, path)
    back = pp.read_counter_trace(path, run_id="bench1")
    assert np.array_equal(back.time_keys, trace.time_keys)
    assert np.array_equal(back.values, trace.values)
    assert back.counters == trace.counters
    assert back.run_id == "bench1"


def test_counter_trace_run_id_defaults_to_stem(tmp_path):
    path = tmp_path / "dhrystone.csv"
    path.write_text("TIME,A\n1,2\n5,3\n")
    assert pp.read_counter_trace(path).run_id == "dhrystone"


def test_power_trace_csv_round_trip_with_freq(tmp_path):
    trace = pp.PowerTrace(
        time_keys=np.array([5, 9], dtype=np.uint64),
        power_w=np.array([2.852397617, 1.43]),
        freq_mhz=np.array([80.0, 40.0]),
    )
    path = tmp_path / "p.csv"
    pp.write_power_trace(trace, path)
    back = pp.read_power_trace(path)
    assert np.array_equal(back.power_w, trace.power_w)
    assert np.array_equal(back.freq_mhz, trace.freq_mhz)


def test_comments_skipped_and_line_numbers_physical(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        "# recorded on the bench\n"
        "TIME,A\n"
        "# calibration block\n"
        "100,5\n"
        "90,6\n"
    )
    with pytest.raises(pp.FormatError) as err:
        pp.read_counter_trace(path)
    assert "strictly increasing" in str(err.value)
    assert "line 5" in str(err.value)


def test_non_numeric_cell_rejected_with_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("TIME,A\n1,2\n3,x\n")
    with pytest.raises(pp.FormatError, match="line 3"):
        pp.read_counter_trace(path)


def test_negative_and_float_counter_cells_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("TIME,A\n1,-2\n")
    with pytest.raises(pp.FormatError):
        pp.read_counter_trace(path)
    path.write_text("TIME,A\n1,2.5\n")
    with pytest.raises(pp.FormatError):
        pp.read_counter_trace(path)


def test_counter_value_range_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(f"TIME,A\n1,{2**32}\n")
    with pytest.raises(pp.FormatError, match="out of range"):
        pp.read_counter_trace(path)


def test_wrong_column_count_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("TIME,A,B\n1,2\n")
    with pytest.raises(pp.FormatError, match="expected 3 columns"):
        pp.read_counter_trace(path)


def test_missing_header_rejected(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("# nothing here\n")
    with pytest.raises(pp.FormatError, match="missing header"):
        pp.read_dataset(path)


def test_dataset_missing_power_column_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("RUN,TIME,A\nr0,1,2\n")
    with pytest.raises(pp.FormatError):
        pp.read_dataset(path)


def test_power_header_shape_enforced(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("TIME,WATTS\n1,2.0\n")
    with pytest.raises(pp.FormatError):
        pp.read_power_trace(path)


def test_dataset_csv_round_trip_exact(tmp_path):
    ds = make_dataset(40, 3, seed=7, n_runs=4)
    path = tmp_path / "d.csv"
    pp.write_dataset(ds, path)
    back = pp.read_dataset(path)
    assert back == ds
    # floats are written via repr, so a rewrite is byte-identical
    path2 = tmp_path / "d2.csv"
    pp.write_dataset(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_empty_dataset_round_trips(tmp_path):
    ds = pp.Dataset(
        counters=("A", "B"),
        time_keys=np.array([], dtype=np.uint64),
        run_ids=(),
        power_w=np.array([], dtype=np.float64),
        deltas=np.zeros((0, 2), dtype=np.uint64),
    )
    path = tmp_path / "empty.csv"
    pp.write_dataset(ds, path)
    assert pp.read_dataset(path) == ds


def test_run_id_with_comma_not_writable(tmp_path):
    ds = pp.Dataset(
        counters=("A",),
        time_keys=np.array([1], dtype=np.uint64),
        run_ids=("r,0",),
        power_w=np.array([1.0]),
        deltas=np.array([[2]], dtype=np.uint64),
    )
    with pytest.raises(ValueError):
        pp.write_dataset(ds, tmp_path / "x.csv")


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(0, 30),
    p=st.integers(1, 5),
    seed=st.integers(0, 10**6),
    with_freq=st.booleans(),
)
def test_dataset_round_trip_property(tmp_path_factory, n, p, seed, with_freq):
    """write -> read recovers the dataset exactly, freq channel included."""
    rng = np.random.default_rng(seed)
    ds = pp.Dataset(
        counters=tuple(f"C{i}" for i in range(1, p + 1)),
        time_keys=np.cumsum(rng.integers(1, 2**40, size=n, dtype=np.uint64)),
        run_ids=tuple(rng.choice(["a", "b", "c"]) for _ in range(n)),
        power_w=np.exp(rng.uniform(-20, 20, size=n)),
        deltas=rng.integers(0, 2**32, size=(n, p), dtype=np.uint64),
        freq_mhz=rng.uniform(1, 1000, size=n) if with_freq else None,
    )
    path = tmp_path_factory.mktemp("rt") / "ds.csv"
    pp.write_dataset(ds, path)
    assert pp.read_dataset(path) == ds


def test_large_dataset_round_trip_byte_identical(tmp_path):
    """A full-scale dataset file survives read/rewrite byte-for-byte."""
    model = pp.PowerModel(intercept_w=2.0, terms=(("A", 1e-6), ("B", 4e-7)))
    spec = pp.GenSpec(
        true_model=model,
        n_samples=288001,
        counter_ranges={"A": (0, 500000), "B": (0, 200000)},
        noise_rel=0.01,
        seed=42,
    )
    ds = pp.generate(spec).dataset
    assert ds.n_rows == 288000
    p1 = tmp_path / "big1.csv"
    p2 = tmp_path / "big2.csv"
    pp.write_dataset(ds, p1)
    back = pp.read_dataset(p1)
    pp.write_dataset(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert back == ds


def test_concat_single_dataset_passthrough():
    ds = make_dataset(10, 2, seed=1)
    assert pp.concat_datasets([ds]) is ds


def test_concat_prefixes_run_ids():
    a = make_dataset(6, 2, seed=1, n_runs=2)
    b = make_dataset(4, 2, seed=2)
    merged = pp.concat_datasets([a, b], source="merged")
    assert merged.n_rows == 10
    assert merged.run_ids[0].startswith("d0:")
    assert merged.run_ids[-1].startswith("d1:")
    assert len(set(merged.run_ids)) == 3


def test_concat_header_mismatch_rejected():
    a = make_dataset(5, 2, seed=1)
    b = make_dataset(5, 3, seed=1)
    with pytest.raises(ValueError, match="headers differ"):
        pp.concat_datasets([a, b])
