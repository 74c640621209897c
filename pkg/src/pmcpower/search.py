"""Counter-subset selection by greedy search scored with k-fold CV MAPE.

Two greedy strategies are provided: bottom-up (start small, add the counter
whose inclusion lowers the cross-validated MAPE the most) and top-down
(start from a full set, remove the counter whose absence lowers it the
most), plus an exhaustive search over all subsets that serves as a
global-optimum oracle on small pools.

Scoring: for every candidate subset, fit on each (k-1)-fold complement and
average the held-out MAPE over the k folds.  The final model is always
refit on the full training set.  Candidate evaluations inside one
iteration are independent; with ``n_jobs > 1`` they run on a thread pool
with an ordered reduction, so results are identical to sequential runs.

Fold assignment is by whole benchmark run when at least k distinct runs
exist, otherwise by contiguous row blocks.  A candidate whose fit fails on
some fold (rank deficiency) scores +infinity rather than aborting the
search.  Ties are broken by candidate-pool order, lowest index first.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset, check_counter_names
from .errors import FitError, FormatError, SearchError
from .regress import PowerModel, TrainingMeta, _solve_ols, fit_ols, mape, model_from_dict, model_to_dict

log = logging.getLogger(__name__)

BOTTOM_UP = "bottom_up"
TOP_DOWN = "top_down"
EXHAUSTIVE = "exhaustive"
SEARCH_ALGORITHMS = (BOTTOM_UP, TOP_DOWN, EXHAUSTIVE)

# a step must beat the incumbent by more than this to count as an improvement
IMPROVEMENT_EPS = 1e-12
EXHAUSTIVE_POOL_LIMIT = 20


@dataclass(frozen=True)
class SearchConfig:
    """Search parameters.

    candidate_pool and initial_set are counter-name sequences; an empty
    pool means "all dataset counters".  For top_down an empty initial_set
    defaults to the whole pool.  max_events caps the model size for
    bottom_up and exhaustive.  Ties are always broken by candidate-pool
    order (lowest index wins); pool order therefore is the tie-break rule.
    """

    algorithm: str
    folds: int = 10
    initial_set: tuple[str, ...] = ()
    max_events: int | None = None
    candidate_pool: tuple[str, ...] = ()
    fold_seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        object.__setattr__(
            self, "initial_set", check_counter_names(self.initial_set)
        )
        object.__setattr__(
            self, "candidate_pool", check_counter_names(self.candidate_pool)
        )
        if self.algorithm not in SEARCH_ALGORITHMS:
            raise ValueError(f"unknown search algorithm {self.algorithm!r}")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.max_events is not None and self.max_events < 0:
            raise ValueError("max_events must be >= 0")
        if self.n_jobs < 1:
            raise ValueError("n_jobs must be >= 1")
        if self.fold_seed < 0:
            raise ValueError("fold_seed must be >= 0")


@dataclass(frozen=True)
class SearchIteration:
    """One accepted step: what changed and every candidate's CV score."""

    action: str  # "add" or "remove"
    counter: str
    cv_mape_pct: float
    candidate_scores: dict[str, float]


@dataclass(frozen=True)
class SearchReport:
    """Audit trail of a search: accepted steps, scores and the final model."""

    algorithm: str
    folds: int
    fold_seed: int
    pool: tuple[str, ...]
    stop_reason: str
    initial_cv_mape_pct: float
    iterations: tuple[SearchIteration, ...]
    final_model: PowerModel
    final_cv_mape_pct: float
    # exhaustive only: score of every evaluated subset, keyed "A+B+C" in
    # pool order ("" is the intercept-only subset)
    subset_scores: dict[str, float] | None = None

    def __post_init__(self):
        score = self.initial_cv_mape_pct
        for it in self.iterations:
            if it.cv_mape_pct > score + IMPROVEMENT_EPS:
                raise ValueError(
                    "accepted CV scores must be non-increasing "
                    f"({it.cv_mape_pct} after {score})"
                )
            score = it.cv_mape_pct


def kfold_split(ds: Dataset, k: int, seed: int = 0) -> list[np.ndarray]:
    """Partition row indices into k folds, by run when possible.

    Whole run_id groups are shuffled (deterministically per seed) and dealt
    round-robin when at least k distinct runs exist; otherwise rows are cut
    into k contiguous blocks.  Fold sizes differ by at most one group/block.
    """
    if k < 2:
        raise SearchError("folds must be >= 2")
    n = ds.n_rows
    runs = sorted(set(ds.run_ids))
    if len(runs) >= k:
        log.info("%d folds aligned to the %d run groups", k, len(runs))
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(runs))
        groups: dict[str, list[int]] = {r: [] for r in runs}
        for i, run in enumerate(ds.run_ids):
            groups[run].append(i)
        folds = [[] for _ in range(k)]
        for slot, gi in enumerate(order):
            folds[slot % k].extend(groups[runs[gi]])
        return [np.array(sorted(f), dtype=np.intp) for f in folds]
    if n >= k:
        log.info(
            "fewer than %d runs; %d folds cut as contiguous row blocks", k, k
        )
        return [np.sort(b) for b in np.array_split(np.arange(n, dtype=np.intp), k)]
    raise SearchError(
        f"{k} folds exceed the {max(len(runs), n)} assignable groups"
    )


class _CvEvaluator:
    """Shared design-matrix cache for scoring many subsets on fixed folds.

    Column 0 is the intercept; column j+1 holds pool counter j as float64.
    Scoring a subset slices the needed columns, fits each fold complement
    with the same solver the full fits use, and averages held-out MAPE.
    """

    def __init__(self, ds: Dataset, pool: Sequence[str], folds: list[np.ndarray]):
        idx = [ds.counters.index(name) for name in pool]
        n = ds.n_rows
        self.design = np.empty((n, 1 + len(idx)), dtype=np.float64)
        self.design[:, 0] = 1.0
        self.design[:, 1:] = ds.deltas[:, idx].astype(np.float64)
        self.y = ds.power_w
        all_rows = np.arange(n, dtype=np.intp)
        self.folds = [
            (np.setdiff1d(all_rows, test), test) for test in folds
        ]

    def score(self, selection: Sequence[int]) -> float:
        """CV MAPE of the pool columns in ``selection``; raises on fit failure."""
        cols = np.array([0] + [i + 1 for i in selection], dtype=np.intp)
        fold_scores = np.empty(len(self.folds))
        for fi, (train, test) in enumerate(self.folds):
            try:
                beta, _ = _solve_ols(self.design[np.ix_(train, cols)], self.y[train])
            except FitError as exc:
                raise FitError(f"fold {fi}: {exc}") from exc
            predicted = self.design[np.ix_(test, cols)] @ beta
            fold_scores[fi] = mape(self.y[test], predicted)
        return float(np.mean(fold_scores))

    def score_or_inf(self, selection: Sequence[int]) -> float:
        try:
            return self.score(selection)
        except FitError:
            return math.inf

    def score_many(
        self, selections: Sequence[Sequence[int]], n_jobs: int
    ) -> list[float]:
        """Infeasible candidates score +inf.  Ordered, so parallel runs are
        indistinguishable from sequential ones."""
        if n_jobs == 1 or len(selections) <= 1:
            return [self.score_or_inf(s) for s in selections]
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(self.score_or_inf, selections))


def cv_score(
    ds: Dataset, predictors: Sequence[str], k: int, seed: int = 0
) -> float:
    """k-fold CV MAPE of one predictor set; mean of the k fold MAPEs."""
    names = check_counter_names(predictors)
    missing = [n for n in names if n not in ds.counters]
    if missing:
        raise SearchError(f"predictors not in dataset: {', '.join(missing)}")
    evaluator = _CvEvaluator(ds, names, kfold_split(ds, k, seed))
    return evaluator.score(range(len(names)))


def _resolve_pool(ds: Dataset, cfg: SearchConfig) -> tuple[str, ...]:
    pool = cfg.candidate_pool if cfg.candidate_pool else ds.counters
    pool = check_counter_names(pool)
    missing = [n for n in pool if n not in ds.counters]
    if missing:
        raise SearchError(f"pool counters not in dataset: {', '.join(missing)}")
    return pool


def _refit_full(
    ds: Dataset, names: Sequence[str], cfg: SearchConfig, cv_mape_pct: float
) -> PowerModel:
    # coefficients come from the full training set, never from a fold fit
    model, diag = fit_ols(ds, names)
    meta = TrainingMeta(
        algorithm=cfg.algorithm,
        folds=cfg.folds,
        cv_mape_pct=cv_mape_pct,
        train_mape_pct=diag.train_mape_pct,
    )
    return dataclasses.replace(model, training=meta)


def bottom_up(ds: Dataset, cfg: SearchConfig) -> SearchReport:
    """Greedy forward selection from cfg.initial_set.

    Accepts the best-scoring addition while it strictly improves the CV
    MAPE (by more than IMPROVEMENT_EPS); stops at max_events, on pool
    exhaustion, or on convergence.  Term order in the final model is the
    order of selection.
    """
    if cfg.algorithm != BOTTOM_UP:
        raise SearchError(f"config algorithm is {cfg.algorithm!r}, not bottom_up")
    pool = _resolve_pool(ds, cfg)
    if not pool:
        raise SearchError("empty candidate pool")
    for name in cfg.initial_set:
        if name not in pool:
            raise SearchError(f"initial counter {name!r} not in candidate pool")
    evaluator = _CvEvaluator(ds, pool, kfold_split(ds, cfg.folds, cfg.fold_seed))

    selected = [pool.index(n) for n in cfg.initial_set]
    current = evaluator.score_or_inf(selected)
    initial_cv = current
    iterations: list[SearchIteration] = []
    while True:
        if cfg.max_events is not None and len(selected) >= cfg.max_events:
            stop = "max_events"
            break
        remaining = [i for i in range(len(pool)) if i not in selected]
        if not remaining:
            stop = "pool_exhausted"
            break
        scores = evaluator.score_many(
            [selected + [i] for i in remaining], cfg.n_jobs
        )
        best = min(range(len(remaining)), key=scores.__getitem__)
        if not current - scores[best] > IMPROVEMENT_EPS:
            stop = "converged"
            break
        selected.append(remaining[best])
        current = scores[best]
        iterations.append(
            SearchIteration(
                action="add",
                counter=pool[remaining[best]],
                cv_mape_pct=current,
                candidate_scores={
                    pool[i]: s for i, s in zip(remaining, scores)
                },
            )
        )
    names = [pool[i] for i in selected]
    return SearchReport(
        algorithm=BOTTOM_UP,
        folds=cfg.folds,
        fold_seed=cfg.fold_seed,
        pool=pool,
        stop_reason=stop,
        initial_cv_mape_pct=initial_cv,
        iterations=tuple(iterations),
        final_model=_refit_full(ds, names, cfg, current),
        final_cv_mape_pct=current,
    )


def top_down(ds: Dataset, cfg: SearchConfig) -> SearchReport:
    """Greedy backward elimination from cfg.initial_set (default: whole pool).

    A removal is accepted when the best resulting score is no worse than
    the incumbent: equal-score removals are taken to prefer the simpler
    model.  Term order in the final model is pool order.
    """
    if cfg.algorithm != TOP_DOWN:
        raise SearchError(f"config algorithm is {cfg.algorithm!r}, not top_down")
    pool = _resolve_pool(ds, cfg)
    if not pool:
        raise SearchError("empty candidate pool")
    initial = cfg.initial_set if cfg.initial_set else pool
    for name in initial:
        if name not in pool:
            raise SearchError(f"initial counter {name!r} not in candidate pool")
    if not initial:
        raise SearchError("top_down needs a non-empty initial set")
    evaluator = _CvEvaluator(ds, pool, kfold_split(ds, cfg.folds, cfg.fold_seed))

    selected = sorted(pool.index(n) for n in initial)
    current = evaluator.score_or_inf(selected)
    initial_cv = current
    iterations: list[SearchIteration] = []
    stop = "emptied"
    while selected:
        trials = [[i for i in selected if i != drop] for drop in selected]
        scores = evaluator.score_many(trials, cfg.n_jobs)
        best = min(range(len(selected)), key=scores.__getitem__)
        if not scores[best] <= current + IMPROVEMENT_EPS:
            stop = "converged"
            break
        dropped = selected[best]
        # an equal-score removal may tick the score up by <= IMPROVEMENT_EPS;
        # clamp so the accepted sequence stays non-increasing
        current = min(current, scores[best])
        iterations.append(
            SearchIteration(
                action="remove",
                counter=pool[dropped],
                cv_mape_pct=current,
                # keyed by the counter a trial would remove
                candidate_scores={
                    pool[d]: s for d, s in zip(selected, scores)
                },
            )
        )
        selected = trials[best]
    names = [pool[i] for i in selected]
    return SearchReport(
        algorithm=TOP_DOWN,
        folds=cfg.folds,
        fold_seed=cfg.fold_seed,
        pool=pool,
        stop_reason=stop,
        initial_cv_mape_pct=initial_cv,
        iterations=tuple(iterations),
        final_model=_refit_full(ds, names, cfg, current),
        final_cv_mape_pct=current,
    )


def exhaustive(ds: Dataset, cfg: SearchConfig) -> SearchReport:
    """Score every subset of the pool; the global optimum for the fold split.

    Subsets are enumerated sizes ascending, lexicographic within a size, and
    only a strictly better score displaces the incumbent, so ties resolve
    to the smaller subset and then to lexicographic pool order.  max_events
    caps the subset size.
    """
    if cfg.algorithm != EXHAUSTIVE:
        raise SearchError(f"config algorithm is {cfg.algorithm!r}, not exhaustive")
    pool = _resolve_pool(ds, cfg)
    if len(pool) > EXHAUSTIVE_POOL_LIMIT:
        raise SearchError(
            f"pool of {len(pool)} too large for exhaustive search "
            f"(limit {EXHAUSTIVE_POOL_LIMIT})"
        )
    evaluator = _CvEvaluator(ds, pool, kfold_split(ds, cfg.folds, cfg.fold_seed))

    top = len(pool) if cfg.max_events is None else min(cfg.max_events, len(pool))
    subsets = [
        combo
        for size in range(top + 1)
        for combo in itertools.combinations(range(len(pool)), size)
    ]
    scores = evaluator.score_many(subsets, cfg.n_jobs)
    best = 0
    for j in range(1, len(subsets)):
        if scores[j] < scores[best]:
            best = j
    subset_scores = {
        "+".join(pool[i] for i in combo): s for combo, s in zip(subsets, scores)
    }
    names = [pool[i] for i in subsets[best]]
    return SearchReport(
        algorithm=EXHAUSTIVE,
        folds=cfg.folds,
        fold_seed=cfg.fold_seed,
        pool=pool,
        stop_reason="enumerated",
        initial_cv_mape_pct=scores[0],
        iterations=(),
        final_model=_refit_full(ds, names, cfg, scores[best]),
        final_cv_mape_pct=scores[best],
        subset_scores=subset_scores,
    )


def run_search(ds: Dataset, cfg: SearchConfig) -> SearchReport:
    """Dispatch on cfg.algorithm."""
    return {BOTTOM_UP: bottom_up, TOP_DOWN: top_down, EXHAUSTIVE: exhaustive}[
        cfg.algorithm
    ](ds, cfg)


def _num(v: float):
    # JSON has no Infinity; candidates whose fit failed carry null instead
    return v if math.isfinite(v) else None


def _unnum(v) -> float:
    return math.inf if v is None else float(v)


def report_to_dict(report: SearchReport) -> dict:
    return {
        "algorithm": report.algorithm,
        "folds": report.folds,
        "fold_seed": report.fold_seed,
        "pool": list(report.pool),
        "stop_reason": report.stop_reason,
        "initial_cv_mape_pct": _num(report.initial_cv_mape_pct),
        "iterations": [
            {
                "action": it.action,
                "counter": it.counter,
                "cv_mape_pct": _num(it.cv_mape_pct),
                "candidate_scores": {
                    k: _num(v) for k, v in it.candidate_scores.items()
                },
            }
            for it in report.iterations
        ],
        "final_model": model_to_dict(report.final_model),
        "final_cv_mape_pct": _num(report.final_cv_mape_pct),
        **(
            {"subset_scores": {k: _num(v) for k, v in report.subset_scores.items()}}
            if report.subset_scores is not None
            else {}
        ),
    }


def report_from_dict(data: dict, where: str = "search report") -> SearchReport:
    try:
        subset_scores = None
        if "subset_scores" in data:
            subset_scores = {
                str(k): _unnum(v) for k, v in data["subset_scores"].items()
            }
        return SearchReport(
            algorithm=str(data["algorithm"]),
            folds=int(data["folds"]),
            fold_seed=int(data["fold_seed"]),
            pool=tuple(str(n) for n in data["pool"]),
            stop_reason=str(data["stop_reason"]),
            initial_cv_mape_pct=_unnum(data["initial_cv_mape_pct"]),
            iterations=tuple(
                SearchIteration(
                    action=str(it["action"]),
                    counter=str(it["counter"]),
                    cv_mape_pct=_unnum(it["cv_mape_pct"]),
                    candidate_scores={
                        str(k): _unnum(v)
                        for k, v in it["candidate_scores"].items()
                    },
                )
                for it in data["iterations"]
            ),
            final_model=model_from_dict(data["final_model"], where=where),
            final_cv_mape_pct=_unnum(data["final_cv_mape_pct"]),
            subset_scores=subset_scores,
        )
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise FormatError(f"bad search report JSON: {exc}", path=where) from exc


def write_report(report: SearchReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report_to_dict(report), fh, indent=2, allow_nan=False)
        fh.write("\n")


def read_report(path) -> SearchReport:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"bad search report JSON: {exc}", path=str(path)) from exc
    return report_from_dict(data, where=str(path))

