"""Core data types and on-disk formats for counter/power traces and datasets.

All files are UTF-8 with LF line endings; lines whose first character is
``#`` are comments and are ignored.  Three CSV contracts:

- PMC trace:    header ``TIME,<counter>,...``, one row per sample, all values
                unsigned decimal integers.  TIME is a 64-bit cycle count and
                strictly increasing; counter readings are cumulative 32-bit
                values (wrap at 2^32 allowed).
- power trace:  header ``TIME,POWER_W`` or ``TIME,POWER_W,FREQ_MHZ``.
                TIME as above, POWER_W/FREQ_MHZ decimal floats.
- dataset:      header ``RUN,TIME,POWER_W[,FREQ_MHZ],<counter>,...``.
                Counter columns hold per-interval deltas (unsigned, < 2^32).

The name ``TIME`` is reserved for the synchronisation key and never names a
predictor column.  Malformed files are rejected with a line number, never
repaired.  All types are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import FormatError

TIME_KEY = "TIME"
POWER_COL = "POWER_W"
FREQ_COL = "FREQ_MHZ"

COUNTER_MODULUS = 1 << 32  # cumulative PMC readings are 32-bit
TIME_MODULUS = 1 << 64  # TIME keys are 64-bit and assumed non-wrapping


def check_counter_names(counters: Sequence[str]) -> tuple[str, ...]:
    """Validate a predictor name list: non-empty, unique, TIME excluded."""
    names = tuple(counters)
    seen = set()
    for name in names:
        if not name:
            raise ValueError("empty counter name")
        if name == TIME_KEY:
            raise ValueError(f"{TIME_KEY!r} is reserved for the sync key")
        if name in seen:
            raise ValueError(f"duplicate counter name {name!r}")
        seen.add(name)
    return names


def _check_strictly_increasing(keys: np.ndarray, what: str) -> None:
    if keys.size > 1 and not np.all(keys[1:] > keys[:-1]):
        raise ValueError(f"{what} not strictly increasing")


@dataclass(frozen=True, eq=False)
class CounterTrace:
    """Time-ordered cumulative PMC samples from one run.

    ``values[i, j]`` is the cumulative reading of ``counters[j]`` at cycle
    ``time_keys[i]``.  Readings are 32-bit and may wrap; a decrease between
    consecutive samples is interpreted as a wrap when deltas are formed.
    """

    time_keys: np.ndarray  # uint64, strictly increasing
    counters: tuple[str, ...]
    values: np.ndarray  # uint32, shape (len(time_keys), len(counters))
    run_id: str = ""

    def __post_init__(self):
        keys = np.asarray(self.time_keys, dtype=np.uint64)
        vals = np.asarray(self.values, dtype=np.uint32)
        names = check_counter_names(self.counters)
        if vals.ndim != 2:
            vals = vals.reshape(len(keys), len(names))
        if vals.shape != (len(keys), len(names)):
            raise ValueError(
                f"values shape {vals.shape} does not match "
                f"{len(keys)} samples x {len(names)} counters"
            )
        _check_strictly_increasing(keys, TIME_KEY)
        object.__setattr__(self, "time_keys", keys)
        object.__setattr__(self, "counters", names)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.time_keys)


@dataclass(frozen=True, eq=False)
class PowerTrace:
    """Time-ordered power sensor samples, optionally with a frequency channel."""

    time_keys: np.ndarray  # uint64, strictly increasing
    power_w: np.ndarray  # float64, strictly positive
    freq_mhz: np.ndarray | None = None
    run_id: str = ""

    def __post_init__(self):
        keys = np.asarray(self.time_keys, dtype=np.uint64)
        power = np.asarray(self.power_w, dtype=np.float64)
        if power.shape != keys.shape:
            raise ValueError("power_w length does not match time_keys")
        _check_strictly_increasing(keys, TIME_KEY)
        if not np.all(np.isfinite(power)) or np.any(power <= 0):
            raise ValueError("power_w values must be finite and > 0")
        freq = self.freq_mhz
        if freq is not None:
            freq = np.asarray(freq, dtype=np.float64)
            if freq.shape != keys.shape:
                raise ValueError("freq_mhz length does not match time_keys")
            if not np.all(np.isfinite(freq)) or np.any(freq <= 0):
                raise ValueError("freq_mhz values must be finite and > 0")
        object.__setattr__(self, "time_keys", keys)
        object.__setattr__(self, "power_w", power)
        object.__setattr__(self, "freq_mhz", freq)

    def __len__(self) -> int:
        return len(self.time_keys)


@dataclass(frozen=True)
class SampleRow:
    """One synchronised interval: event-count deltas plus a power observation.

    ``time_key`` is the cycle count at the end of the interval.  Rows are
    self-describing: ``counters`` names the entries of ``deltas``.
    """

    time_key: int
    run_id: str
    counters: tuple[str, ...]
    deltas: tuple[int, ...]
    power_w: float
    freq_mhz: float | None = None

    def __post_init__(self):
        if len(self.deltas) != len(self.counters):
            raise ValueError("one delta per counter required")
        if not math.isfinite(self.power_w) or self.power_w <= 0:
            raise ValueError("power_w must be finite and > 0")

    def delta(self, counter: str) -> int:
        try:
            return self.deltas[self.counters.index(counter)]
        except ValueError:
            raise KeyError(f"counter {counter!r} not present in row") from None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Synchronised, delta-converted samples ready for regression.

    Stored column-wise; use ``rows`` / ``iter_rows`` for a per-sample view.
    ``source`` is provenance only and excluded from equality.
    """

    counters: tuple[str, ...]
    time_keys: np.ndarray  # uint64, end-of-interval keys
    run_ids: tuple[str, ...]
    power_w: np.ndarray  # float64, > 0
    deltas: np.ndarray  # uint64, shape (n_rows, len(counters)), < 2^32
    freq_mhz: np.ndarray | None = None
    source: str = field(default="", compare=False)

    def __post_init__(self):
        names = check_counter_names(self.counters)
        keys = np.asarray(self.time_keys, dtype=np.uint64)
        runs = tuple(self.run_ids)
        power = np.asarray(self.power_w, dtype=np.float64)
        deltas = np.asarray(self.deltas, dtype=np.uint64)
        n = len(keys)
        if deltas.ndim != 2:
            deltas = deltas.reshape(n, len(names))
        if deltas.shape != (n, len(names)):
            raise ValueError(
                f"deltas shape {deltas.shape} does not match "
                f"{n} rows x {len(names)} counters"
            )
        if len(runs) != n or power.shape != (n,):
            raise ValueError("run_ids/power_w length does not match time_keys")
        if not np.all(np.isfinite(power)) or np.any(power <= 0):
            raise ValueError("power_w values must be finite and > 0")
        if np.any(deltas >= COUNTER_MODULUS):
            raise ValueError("delta values must be < 2^32")
        freq = self.freq_mhz
        if freq is not None:
            freq = np.asarray(freq, dtype=np.float64)
            if freq.shape != (n,):
                raise ValueError("freq_mhz length does not match time_keys")
            if not np.all(np.isfinite(freq)) or np.any(freq <= 0):
                raise ValueError("freq_mhz values must be finite and > 0")
        object.__setattr__(self, "counters", names)
        object.__setattr__(self, "time_keys", keys)
        object.__setattr__(self, "run_ids", runs)
        object.__setattr__(self, "power_w", power)
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "freq_mhz", freq)

    @property
    def n_rows(self) -> int:
        return len(self.time_keys)

    def __len__(self) -> int:
        return self.n_rows

    def row(self, i: int) -> SampleRow:
        return SampleRow(
            time_key=int(self.time_keys[i]),
            run_id=self.run_ids[i],
            counters=self.counters,
            deltas=tuple(int(v) for v in self.deltas[i]),
            power_w=float(self.power_w[i]),
            freq_mhz=None if self.freq_mhz is None else float(self.freq_mhz[i]),
        )

    def iter_rows(self) -> Iterator[SampleRow]:
        return (self.row(i) for i in range(self.n_rows))

    @property
    def rows(self) -> list[SampleRow]:
        return list(self.iter_rows())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        if self.counters != other.counters or self.run_ids != other.run_ids:
            return False
        if (self.freq_mhz is None) != (other.freq_mhz is None):
            return False
        same = (
            np.array_equal(self.time_keys, other.time_keys)
            and np.array_equal(self.power_w, other.power_w)
            and np.array_equal(self.deltas, other.deltas)
        )
        if same and self.freq_mhz is not None:
            same = np.array_equal(self.freq_mhz, other.freq_mhz)
        return same

    @classmethod
    def from_rows(
        cls,
        counters: Sequence[str],
        rows: Sequence[SampleRow],
        source: str = "",
    ) -> "Dataset":
        names = tuple(counters)
        has_freq = any(r.freq_mhz is not None for r in rows)
        if has_freq and any(r.freq_mhz is None for r in rows):
            raise ValueError("freq_mhz must be present on every row or none")
        for r in rows:
            if r.counters != names:
                raise ValueError("row counters do not match dataset header")
        return cls(
            counters=names,
            time_keys=np.array([r.time_key for r in rows], dtype=np.uint64),
            run_ids=tuple(r.run_id for r in rows),
            power_w=np.array([r.power_w for r in rows], dtype=np.float64),
            deltas=np.array(
                [r.deltas for r in rows], dtype=np.uint64
            ).reshape(len(rows), len(names)),
            freq_mhz=(
                np.array([r.freq_mhz for r in rows], dtype=np.float64)
                if has_freq
                else None
            ),
            source=source,
        )


# ---------------------------------------------------------------------------
# CSV parsing / writing
# ---------------------------------------------------------------------------


def _fmt_float(v) -> str:
    # repr() of a Python float is the shortest string that round-trips exactly
    return repr(float(v))


def _data_lines(path) -> Iterator[tuple[int, str]]:
    """Yield (1-based physical line number, content) skipping comment lines."""
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.startswith("#"):
            continue
        yield lineno, line


def _parse_uint(tok: str, bound: int, what: str, path, lineno: int) -> int:
    if not (tok.isascii() and tok.isdigit()):
        raise FormatError(f"non-numeric {what} cell {tok!r}", path, lineno)
    value = int(tok)
    if value >= bound:
        raise FormatError(f"{what} value {value} out of range", path, lineno)
    return value


def _parse_float(tok: str, what: str, path, lineno: int) -> float:
    try:
        value = float(tok)
    except ValueError:
        raise FormatError(f"non-numeric {what} cell {tok!r}", path, lineno) from None
    if not math.isfinite(value):
        raise FormatError(f"non-finite {what} value", path, lineno)
    return value


def _split_row(line: str, n_cols: int, path, lineno: int) -> list[str]:
    if not line.strip():
        raise FormatError("empty line", path, lineno)
    cells = line.split(",")
    if len(cells) != n_cols:
        raise FormatError(
            f"expected {n_cols} columns, found {len(cells)}", path, lineno
        )
    return cells


def _read_header(lines: Iterator[tuple[int, str]], path) -> tuple[int, list[str]]:
    for lineno, line in lines:
        if not line.strip():
            raise FormatError("empty line", path, lineno)
        return lineno, line.split(",")
    raise FormatError("missing header", path)


def read_counter_trace(path, run_id: str | None = None) -> CounterTrace:
    """Read and validate a PMC trace CSV.  run_id defaults to the file stem."""
    lines = _data_lines(path)
    _, header = _read_header(lines, path)
    if header[0] != TIME_KEY or len(header) < 2:
        raise FormatError(
            f"PMC header must be {TIME_KEY},<counter>,... (got {','.join(header)!r})",
            path,
        )
    try:
        counters = check_counter_names(header[1:])
    except ValueError as exc:
        raise FormatError(str(exc), path) from None

    keys: list[int] = []
    values: list[list[int]] = []
    prev_key = -1
    for lineno, line in lines:
        cells = _split_row(line, len(header), path, lineno)
        key = _parse_uint(cells[0], TIME_MODULUS, TIME_KEY, path, lineno)
        if key <= prev_key:
            raise FormatError(f"{TIME_KEY} not strictly increasing", path, lineno)
        prev_key = key
        keys.append(key)
        values.append(
            [
                _parse_uint(c, COUNTER_MODULUS, "counter", path, lineno)
                for c in cells[1:]
            ]
        )
    return CounterTrace(
        time_keys=np.array(keys, dtype=np.uint64),
        counters=counters,
        values=np.array(values, dtype=np.uint32).reshape(len(keys), len(counters)),
        run_id=Path(path).stem if run_id is None else run_id,
    )


def write_counter_trace(trace: CounterTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join((TIME_KEY,) + trace.counters) + "\n")
        for i in range(len(trace)):
            row = [str(int(trace.time_keys[i]))]
            row += [str(int(v)) for v in trace.values[i]]
            f.write(",".join(row) + "\n")


def read_power_trace(path, run_id: str | None = None) -> PowerTrace:
    """Read and validate a power trace CSV."""
    lines = _data_lines(path)
    _, header = _read_header(lines, path)
    if header[:2] != [TIME_KEY, POWER_COL] or len(header) > 3 or (
        len(header) == 3 and header[2] != FREQ_COL
    ):
        raise FormatError(
            f"power header must be {TIME_KEY},{POWER_COL}[,{FREQ_COL}] "
            f"(got {','.join(header)!r})",
            path,
        )
    has_freq = len(header) == 3

    keys: list[int] = []
    power: list[float] = []
    freq: list[float] = []
    prev_key = -1
    for lineno, line in lines:
        cells = _split_row(line, len(header), path, lineno)
        key = _parse_uint(cells[0], TIME_MODULUS, TIME_KEY, path, lineno)
        if key <= prev_key:
            raise FormatError(f"{TIME_KEY} not strictly increasing", path, lineno)
        prev_key = key
        keys.append(key)
        p = _parse_float(cells[1], "power", path, lineno)
        if p <= 0:
            raise FormatError("non-positive power", path, lineno)
        power.append(p)
        if has_freq:
            fq = _parse_float(cells[2], "frequency", path, lineno)
            if fq <= 0:
                raise FormatError("non-positive frequency", path, lineno)
            freq.append(fq)
    return PowerTrace(
        time_keys=np.array(keys, dtype=np.uint64),
        power_w=np.array(power, dtype=np.float64),
        freq_mhz=np.array(freq, dtype=np.float64) if has_freq else None,
        run_id=Path(path).stem if run_id is None else run_id,
    )


def write_power_trace(trace: PowerTrace, path) -> None:
    header = [TIME_KEY, POWER_COL] + ([FREQ_COL] if trace.freq_mhz is not None else [])
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for i in range(len(trace)):
            row = [str(int(trace.time_keys[i])), _fmt_float(trace.power_w[i])]
            if trace.freq_mhz is not None:
                row.append(_fmt_float(trace.freq_mhz[i]))
            f.write(",".join(row) + "\n")


def _check_run_id(run_id: str) -> str:
    if any(c in run_id for c in ",\r\n") or run_id.startswith("#"):
        raise ValueError(f"run id {run_id!r} not representable in CSV")
    return run_id


def read_dataset(path, source: str | None = None) -> Dataset:
    """Read and validate a synchronised dataset CSV."""
    lines = _data_lines(path)
    _, header = _read_header(lines, path)
    if header[:3] != ["RUN", TIME_KEY, POWER_COL]:
        raise FormatError(
            f"dataset header must start RUN,{TIME_KEY},{POWER_COL} "
            f"(got {','.join(header[:3])!r})",
            path,
        )
    has_freq = len(header) > 3 and header[3] == FREQ_COL
    first_counter = 4 if has_freq else 3
    try:
        counters = check_counter_names(header[first_counter:])
    except ValueError as exc:
        raise FormatError(str(exc), path) from None

    runs: list[str] = []
    keys: list[int] = []
    power: list[float] = []
    freq: list[float] = []
    deltas: list[list[int]] = []
    for lineno, line in lines:
        cells = _split_row(line, len(header), path, lineno)
        runs.append(cells[0])
        keys.append(_parse_uint(cells[1], TIME_MODULUS, TIME_KEY, path, lineno))
        p = _parse_float(cells[2], "power", path, lineno)
        if p <= 0:
            raise FormatError("non-positive power", path, lineno)
        power.append(p)
        if has_freq:
            fq = _parse_float(cells[3], "frequency", path, lineno)
            if fq <= 0:
                raise FormatError("non-positive frequency", path, lineno)
            freq.append(fq)
        deltas.append(
            [
                _parse_uint(c, COUNTER_MODULUS, "delta", path, lineno)
                for c in cells[first_counter:]
            ]
        )
    return Dataset(
        counters=counters,
        time_keys=np.array(keys, dtype=np.uint64),
        run_ids=tuple(runs),
        power_w=np.array(power, dtype=np.float64),
        deltas=np.array(deltas, dtype=np.uint64).reshape(len(keys), len(counters)),
        freq_mhz=np.array(freq, dtype=np.float64) if has_freq else None,
        source=str(path) if source is None else source,
    )


def write_dataset(ds: Dataset, path) -> None:
    """Write a dataset CSV; read_dataset(write_dataset(ds)) == ds."""
    for run in set(ds.run_ids):
        _check_run_id(run)
    header = ["RUN", TIME_KEY, POWER_COL]
    if ds.freq_mhz is not None:
        header.append(FREQ_COL)
    header += list(ds.counters)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for i in range(ds.n_rows):
            row = [
                ds.run_ids[i],
                str(int(ds.time_keys[i])),
                _fmt_float(ds.power_w[i]),
            ]
            if ds.freq_mhz is not None:
                row.append(_fmt_float(ds.freq_mhz[i]))
            row += [str(int(v)) for v in ds.deltas[i]]
            f.write(",".join(row) + "\n")


def concat_datasets(datasets: Sequence[Dataset], source: str = "") -> Dataset:
    """Concatenate datasets sharing one counter header.

    Run ids are prefixed ``d<i>:`` when more than one dataset is given, so
    identically named runs from different files never collide.
    """
    if not datasets:
        raise ValueError("no datasets to concatenate")
    if len(datasets) == 1:
        return datasets[0]
    head = datasets[0]
    for ds in datasets[1:]:
        if ds.counters != head.counters:
            raise ValueError(
                f"counter headers differ: {head.counters} vs {ds.counters}"
            )
        if (ds.freq_mhz is None) != (head.freq_mhz is None):
            raise ValueError("frequency channel present in some datasets only")
    run_ids: list[str] = []
    for i, ds in enumerate(datasets):
        run_ids += [f"d{i}:{r}" for r in ds.run_ids]
    return Dataset(
        counters=head.counters,
        time_keys=np.concatenate([ds.time_keys for ds in datasets]),
        run_ids=tuple(run_ids),
        power_w=np.concatenate([ds.power_w for ds in datasets]),
        deltas=np.concatenate([ds.deltas for ds in datasets], axis=0),
        freq_mhz=(
            None
            if head.freq_mhz is None
            else np.concatenate([ds.freq_mhz for ds in datasets])
        ),
        source=source,
    )
