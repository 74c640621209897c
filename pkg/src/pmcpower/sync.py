"""Align a counter trace with a power trace and convert counts to deltas.

Samples are joined on the shared TIME cycle counter.  The default is exact
key equality; a nearest-within-tolerance join is available for rigs where
the sensor timestamps drift by a few cycles.  Ambiguity (two candidates in
one window, on either side) is an error, never a silent choice.

Deltas are taken between *consecutive matched* keys, so unmatched samples
widen the surrounding interval instead of corrupting it.  Counter readings
wrap at 2^32 and are wrap-corrected; the resulting dataset feeds the
regression with per-interval event counts, not cumulative totals.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dataset import COUNTER_MODULUS, CounterTrace, Dataset, PowerTrace
from .errors import SyncError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyncConfig:
    """Join parameters.

    key_tolerance: maximum |pmc TIME - power TIME| for a match, in cycles.
    drop_unmatched: if False, any unmatched key on either side is an error.
    """

    key_tolerance: int = 0
    drop_unmatched: bool = True
    wrap_modulus: int = COUNTER_MODULUS

    def __post_init__(self):
        if self.key_tolerance < 0:
            raise ValueError("key_tolerance must be >= 0")
        if self.wrap_modulus != COUNTER_MODULUS:
            raise ValueError("wrap_modulus is fixed at 2^32")


@dataclass(frozen=True)
class CoverageReport:
    """Match statistics for a trace pair under a given config."""

    matched: int
    unmatched_pmc: int
    unmatched_power: int
    ambiguous: int
    match_fraction: float

    def summary(self) -> str:
        pct = 100.0 * self.match_fraction
        parts = [
            f"matched {pct:.4g}% of keys ({self.matched})",
            f"{self.unmatched_pmc} unmatched PMC",
            f"{self.unmatched_power} unmatched power",
        ]
        if self.ambiguous:
            parts.append(f"{self.ambiguous} ambiguous")
        return ", ".join(parts)


def _window_counts(keys: np.ndarray, others: np.ndarray, tol: int) -> np.ndarray:
    """For each key, how many of ``others`` lie within +-tol (inclusive)."""
    signed = others.astype(np.int64)
    lo = np.searchsorted(signed, keys.astype(np.int64) - tol, side="left")
    hi = np.searchsorted(signed, keys.astype(np.int64) + tol, side="right")
    return hi - lo


def _match_pairs(
    pmc_keys: np.ndarray, pwr_keys: np.ndarray, tol: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """1-1 key join.

    Returns (pmc indices, power indices, ambiguous-key values).  A key is
    ambiguous when its tolerance window holds two or more candidates from
    the other trace; ambiguous keys are excluded from the match.
    """
    if tol == 0:
        _, pmc_idx, pwr_idx = np.intersect1d(
            pmc_keys, pwr_keys, assume_unique=True, return_indices=True
        )
        return pmc_idx, pwr_idx, np.array([], dtype=np.uint64)

    # TIME keys are uint64 but realistic cycle counts fit int64; the signed
    # view keeps searchsorted arithmetic overflow-free.
    for keys in (pmc_keys, pwr_keys):
        if keys.size and int(keys[-1]) + tol >= 1 << 63:
            raise SyncError("TIME keys too large for tolerance matching")
    n_pwr_near = _window_counts(pmc_keys, pwr_keys, tol)
    n_pmc_near = _window_counts(pwr_keys, pmc_keys, tol)
    ambiguous = np.concatenate(
        [pmc_keys[n_pwr_near > 1], pwr_keys[n_pmc_near > 1]]
    )

    pmc_ok = n_pwr_near == 1
    lo = np.searchsorted(
        pwr_keys.astype(np.int64), pmc_keys.astype(np.int64) - tol, side="left"
    )
    cand = lo[pmc_ok]  # the single candidate for each unambiguous pmc key
    keep = n_pmc_near[cand] == 1  # partner must be unambiguous too
    pmc_idx = np.nonzero(pmc_ok)[0][keep]
    pwr_idx = cand[keep]
    return pmc_idx, pwr_idx, np.unique(ambiguous)


def coverage_report(
    pmc: CounterTrace, pwr: PowerTrace, cfg: SyncConfig = SyncConfig()
) -> CoverageReport:
    """Match statistics only; never raises on poor overlap or ambiguity."""
    pmc_idx, pwr_idx, ambiguous = _match_pairs(
        pmc.time_keys, pwr.time_keys, cfg.key_tolerance
    )
    matched = len(pmc_idx)
    denom = max(len(pmc), len(pwr))
    return CoverageReport(
        matched=matched,
        unmatched_pmc=len(pmc) - matched,
        unmatched_power=len(pwr) - matched,
        ambiguous=len(ambiguous),
        match_fraction=matched / denom if denom else 0.0,
    )


def synchronize(
    pmc: CounterTrace, pwr: PowerTrace, cfg: SyncConfig = SyncConfig()
) -> Dataset:
    """Join the trace pair and return the per-interval dataset.

    Output row i covers the interval between matched keys i and i+1: deltas
    are wrap-corrected differences of the cumulative readings, power (and
    frequency, when present) is the sensor sample at the interval's end key.
    Row count is one less than the number of matched keys.
    """
    if len(pmc) == 0 or len(pwr) == 0:
        raise SyncError("insufficient overlap: empty trace")
    pmc_idx, pwr_idx, ambiguous = _match_pairs(
        pmc.time_keys, pwr.time_keys, cfg.key_tolerance
    )
    if len(ambiguous):
        raise SyncError(f"ambiguous key at TIME={int(ambiguous[0])}")
    if not cfg.drop_unmatched:
        if len(pmc_idx) < len(pmc):
            missing = np.setdiff1d(np.arange(len(pmc)), pmc_idx)
            raise SyncError(
                f"unmatched PMC key at TIME={int(pmc.time_keys[missing[0]])}"
            )
        if len(pwr_idx) < len(pwr):
            missing = np.setdiff1d(np.arange(len(pwr)), pwr_idx)
            raise SyncError(
                f"unmatched power key at TIME={int(pwr.time_keys[missing[0]])}"
            )
    if len(pmc_idx) < 2:
        raise SyncError(
            f"insufficient overlap: {len(pmc_idx)} matched keys, need at least 2"
        )
    dropped = (len(pmc) - len(pmc_idx), len(pwr) - len(pwr_idx))
    if any(dropped):
        log.info(
            "dropped unmatched keys: %d PMC, %d power", dropped[0], dropped[1]
        )

    vals = pmc.values[pmc_idx].astype(np.int64)
    deltas = ((vals[1:] - vals[:-1]) % COUNTER_MODULUS).astype(np.uint64)
    return Dataset(
        counters=pmc.counters,
        time_keys=pmc.time_keys[pmc_idx[1:]],
        run_ids=(pmc.run_id,) * (len(pmc_idx) - 1),
        power_w=pwr.power_w[pwr_idx[1:]],
        deltas=deltas,
        freq_mhz=None if pwr.freq_mhz is None else pwr.freq_mhz[pwr_idx[1:]],
        source=f"sync({pmc.run_id})",
    )
