#!/usr/bin/env python3
"""End-to-end demo: generate traces, synchronise, train, validate.

Writes every intermediate artifact into --outdir so the files can be
inspected or replayed through the CLI afterwards, e.g.

    python scripts/run_pipeline.py --outdir /tmp/demo --noise-rel 0.01
    pmcpower validate --model /tmp/demo/model.json --dataset /tmp/demo/merged.csv
"""

import argparse
import sys
import time
from pathlib import Path

import pmcpower as pp


def parse_args(argv):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", type=Path, default=Path("pipeline_out"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--runs", type=int, default=6)
    ap.add_argument("--samples", type=int, default=200,
                    help="power samples per run")
    ap.add_argument("--noise-rel", type=float, default=0.01)
    ap.add_argument("--drop-rate", type=float, default=0.1)
    ap.add_argument("--algorithm", choices=sorted(pp.SEARCH_ALGORITHMS),
                    default="bottom_up")
    ap.add_argument("--folds", type=int, default=10)
    return ap.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    args.outdir.mkdir(parents=True, exist_ok=True)

    true_model = pp.PowerModel(
        intercept_w=2.59799,
        terms=(("CPU_OP", 4.58765e-06), ("MEM_ACC", 9.1e-07)),
    )
    spec = pp.GenSpec(
        true_model=true_model,
        counter_ranges={
            "CPU_OP": (0, 400_000),
            "MEM_ACC": (0, 900_000),
            "IO_EVT": (0, 50_000),
            "BRANCH_MISS": (0, 120_000),
        },
        n_samples=args.samples,
        n_runs=args.runs,
        noise_rel=args.noise_rel,
        drop_rate=args.drop_rate,
        inject_wrap=True,
        seed=args.seed,
    )
    print(f"true model: {true_model.describe()}")

    res = pp.generate(spec)
    for trace in res.pmc_traces:
        pp.write_counter_trace(trace, args.outdir / f"{trace.run_id}_pmc.csv")
    for trace in res.power_traces:
        pp.write_power_trace(trace, args.outdir / f"{trace.run_id}_power.csv")
    print(f"generated {len(res.pmc_traces)} runs, {len(res.dataset)} dataset rows")

    # resynchronise from the traces instead of trusting res.dataset, so the
    # demo exercises the same join the CLI does
    parts = []
    for cnt, pwr in zip(res.pmc_traces, res.power_traces):
        ds = pp.synchronize(cnt, pwr, pp.SyncConfig(key_tolerance=0))
        rep = pp.coverage_report(cnt, pwr, pp.SyncConfig(key_tolerance=0))
        print(f"  {cnt.run_id}: {rep.summary()}")
        parts.append(ds)
    merged = pp.concat_datasets(parts)
    pp.write_dataset(merged, args.outdir / "merged.csv")

    cfg = pp.SearchConfig(
        algorithm=args.algorithm,
        candidate_pool=merged.counters,
        folds=args.folds,
        fold_seed=args.seed,
    )
    t0 = time.perf_counter()
    report = pp.run_search(merged, cfg)
    dt = time.perf_counter() - t0
    model = report.final_model
    print(f"{args.algorithm} picked {sorted(n for n, _ in model.terms)} "
          f"in {dt:.2f}s, CV MAPE {report.final_cv_mape_pct:.3f}%")
    print(f"fitted:     {model.describe()}")
    pp.write_model(model, args.outdir / "model.json")
    pp.write_report(report, args.outdir / "report.json")

    result = pp.validate(model, merged)
    print(f"validation MAPE over {len(merged)} rows: {result.mape_pct:.3f}%")
    pp.write_prediction_trace(result, args.outdir / "predictions.csv")
    print(f"artifacts in {args.outdir}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
