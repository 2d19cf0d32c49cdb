"""Command line entry point.

Subcommands: ``gen`` (scenario -> source CSVs), ``distance`` (pairwise
divergence matrix), ``simulate`` (accumulation trajectories), ``recommend``
(ranked source addition), and ``report`` (cross-validated evaluation).
Every run writes a manifest.json recording the command, resolved options,
seed, and output files, and is byte-for-byte reproducible given the seed.

Exit codes: 0 success, 1 usage error, 2 data/contract error. The
SOURCE_SELECT_SEED environment variable overrides any configured seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .accumulate import build_training_set, divergence_trajectory, plan_from_config
from .configfile import read_kv
from .dataset import SplitSpec, Source, concat, load_csv, schema_from_config, subsample, write_csv
from .divergence import Metric, distance_matrix
from .errors import EmptyResults, SourceSelectError, UnknownSourceId, UsageError
from .evaluation import MetricKind, auc, run_experiment
from .models import apply_scaler, fit_logistic, fit_scaler, predict_proba, scaled_l2
from .seeding import derive_seed
from .strategy import StudyConfig, compare_strategies, rank_candidates, split_reference
from .synth import generate_from_config

SEED_ENV_VAR = "SOURCE_SELECT_SEED"
DEFAULT_SEED = 42


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # raise instead of exiting with argparse's code 2
        raise UsageError(f"{message}\n{self.format_usage()}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="source-select", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate scenario sources as CSV files")
    gen.add_argument("--scenario", required=True, help="scenario config file")
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--seed", type=int, default=None)

    dist = sub.add_parser("distance", help="pairwise divergence matrix over a data directory")
    dist.add_argument("--data", required=True, help="directory of source CSV files")
    dist.add_argument("--metric", required=True, help="divergence metric name")
    dist.add_argument("--schema", default=None, help="optional schema config file")
    dist.add_argument("--out", required=True)
    dist.add_argument("--seed", type=int, default=None)

    sim = sub.add_parser("simulate", help="divergence/AUC trajectories along a plan")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--plan", required=True, help="plan config file")
    sim.add_argument("--out", required=True)
    sim.add_argument("--seed", type=int, default=None)

    rec = sub.add_parser("recommend", help="rank candidate sources against a reference")
    rec.add_argument("--data", required=True)
    rec.add_argument("--reference", required=True, help="reference source id")
    rec.add_argument("--metric", default=Metric.SCORE_XY.value)
    rec.add_argument("--k", type=int, default=3)
    rec.add_argument("--full", action="store_true", help="also run the strategy comparison")
    rec.add_argument("--schema", default=None)
    rec.add_argument("--train-size", type=int, default=1500)
    rec.add_argument("--test-size", type=int, default=400)
    rec.add_argument("--out", required=True)
    rec.add_argument("--seed", type=int, default=None)

    rep = sub.add_parser("report", help="cross-validated evaluation of a training pool")
    rep.add_argument("--data", required=True)
    rep.add_argument("--reference", required=True)
    rep.add_argument("--add", default="", help="comma-separated source ids to add")
    rep.add_argument("--schema", default=None)
    rep.add_argument("--train-size", type=int, default=1500)
    rep.add_argument("--test-size", type=int, default=400)
    rep.add_argument("--folds", type=int, default=5)
    rep.add_argument("--repeats", type=int, default=5)
    rep.add_argument("--out", required=True)
    rep.add_argument("--seed", type=int, default=None)
    return parser


def _parse_metric(name: str) -> Metric:
    try:
        return Metric(name)
    except ValueError:
        valid = ", ".join(m.value for m in Metric)
        raise UsageError(f"unknown metric {name!r}; expected one of: {valid}") from None


def _resolve_seed(flag_seed: int | None, config_seed: int | None = None) -> int:
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from None
    if flag_seed is not None:
        return flag_seed
    if config_seed is not None:
        return config_seed
    return DEFAULT_SEED


def _float_repr(value) -> str:
    return repr(float(value))


def _write_manifest(out_dir: Path, command: str, seed: int, options: dict, outputs: list[str]):
    manifest = {
        "artifact": "source-select",
        "version": __version__,
        "command": command,
        "seed": seed,
        "options": options,
        "outputs": sorted(outputs),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def emit_plot_tables(rows, path) -> None:
    """Write long-format plot rows (x, series, mean, stderr) as CSV.

    Column order is fixed; identical rows produce byte-identical files.
    """
    rows = list(rows)
    if not rows:
        raise EmptyResults("no rows to write")
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["x", "series", "mean", "stderr"])
        for x, series, mean, stderr in rows:
            writer.writerow([x, series, _float_repr(mean), _float_repr(stderr)])


def _load_data_dir(data_dir, schema_path=None) -> list[Source]:
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise SourceSelectError(f"{data_dir} is not a directory")
    schema = schema_from_config(read_kv(schema_path)) if schema_path else None
    paths = sorted(data_dir.glob("*.csv"))
    if not paths:
        raise SourceSelectError(f"no CSV files under {data_dir}")
    return [load_csv(path, schema) for path in paths]


def _pop_reference(sources: list[Source], reference_id: str) -> tuple[Source, list[Source]]:
    for i, source in enumerate(sources):
        if source.id == reference_id:
            return source, sources[:i] + sources[i + 1 :]
    raise UnknownSourceId(f"reference {reference_id!r} not found in data directory")


def _cmd_gen(args) -> int:
    cfg = read_kv(args.scenario)
    seed = _resolve_seed(args.seed, int(cfg["seed"]) if "seed" in cfg else None)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    sources, test = generate_from_config(cfg, seed)
    outputs = []
    for source in sources + ([test] if test is not None else []):
        name = f"{source.id}.csv"
        write_csv(source, out_dir / name)
        outputs.append(name)
    _write_manifest(out_dir, "gen", seed, {"scenario": dict(cfg)}, outputs + ["manifest.json"])
    return 0


def _cmd_distance(args) -> int:
    seed = _resolve_seed(args.seed)
    metric = _parse_metric(args.metric)
    sources = _load_data_dir(args.data, args.schema)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ids, matrix, records = distance_matrix(sources, metric, seed)
    with open(out_dir / "matrix.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["p_source"] + ids)
        for i, row_id in enumerate(ids):
            writer.writerow([row_id] + [_float_repr(v) for v in matrix[i]])
    estimates = []
    index = 0
    for p_id in ids:
        for q_id in ids:
            record = records[index].to_dict()
            record["p"] = p_id
            record["q"] = q_id
            estimates.append(record)
            index += 1
    (out_dir / "estimates.json").write_text(
        json.dumps(estimates, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    _write_manifest(
        out_dir,
        "distance",
        seed,
        {"metric": metric.value, "n_sources": len(ids)},
        ["matrix.csv", "estimates.json", "manifest.json"],
    )
    return 0


def _single_fit_auc(train: Source, test: Source, l2: float = 1.0) -> float:
    scaler = fit_scaler(train.features)
    model = fit_logistic(
        apply_scaler(scaler, train.features), train.labels, l2=scaled_l2(l2, train.n_rows)
    )
    return auc(predict_proba(model, apply_scaler(scaler, test.features)), test.labels)


def _cmd_simulate(args) -> int:
    scenario_cfg = read_kv(args.scenario)
    plan_cfg = read_kv(args.plan)
    seed = _resolve_seed(
        args.seed, int(scenario_cfg["seed"]) if "seed" in scenario_cfg else None
    )
    parsed = plan_from_config(plan_cfg, default_seed=seed)
    if parsed["grid"] is None:
        raise UsageError("plan config needs a 'grid' of training sizes")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    grid = parsed["grid"]
    per_n_div = {n: [] for n in grid}
    per_n_auc = {n: [] for n in grid}
    for rep in range(parsed["n_seeds"]):
        rep_seed = derive_seed(seed, "sim", rep)
        sources, test = generate_from_config(scenario_cfg, rep_seed)
        if parsed["test"] is not None:
            pool = {s.id: s for s in sources + ([test] if test is not None else [])}
            if parsed["test"] not in pool:
                raise UnknownSourceId(f"test source {parsed['test']!r} not in scenario")
            test = pool[parsed["test"]]
        if test is None:
            raise UsageError("scenario has no test source; set 'test = <id>' in the plan")
        available = [s for s in sources if s.id in parsed["plan"].order]
        plan = parsed["plan"]
        plan = type(plan)(
            mode=plan.mode,
            order=plan.order,
            target_n=plan.target_n,
            seed=derive_seed(rep_seed, "plan"),
            weights=plan.weights,
        )
        trajectory = divergence_trajectory(available, plan, test, parsed["metric"], grid)
        for n, estimate in trajectory:
            per_n_div[n].append(estimate.value)
        for n in grid:
            train, _ = build_training_set(
                available, type(plan)(plan.mode, plan.order, n, plan.seed, plan.weights)
            )
            per_n_auc[n].append(_single_fit_auc(train, test))

    rows = []
    for n in grid:
        div = np.asarray(per_n_div[n])
        rows.append(
            (
                n,
                f"divergence:{parsed['metric'].value}",
                float(div.mean()),
                float(div.std(ddof=1) / np.sqrt(div.size)) if div.size > 1 else 0.0,
            )
        )
    for n in grid:
        aucs = np.asarray(per_n_auc[n])
        rows.append(
            (
                n,
                "auc",
                float(aucs.mean()),
                float(aucs.std(ddof=1) / np.sqrt(aucs.size)) if aucs.size > 1 else 0.0,
            )
        )
    emit_plot_tables(rows, out_dir / "trajectory.csv")
    _write_manifest(
        out_dir,
        "simulate",
        seed,
        {
            "scenario": dict(scenario_cfg),
            "plan": dict(plan_cfg),
            "metric": parsed["metric"].value,
            "n_seeds": parsed["n_seeds"],
        },
        ["trajectory.csv", "manifest.json"],
    )
    return 0


def _cmd_recommend(args) -> int:
    seed = _resolve_seed(args.seed)
    metric = _parse_metric(args.metric)
    sources = _load_data_dir(args.data, args.schema)
    reference, candidates = _pop_reference(sources, args.reference)
    if args.k < 0 or args.k > len(candidates):
        raise UsageError(f"--k must be between 0 and {len(candidates)}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = ["ranking.json", "manifest.json"]

    config = StudyConfig(train_size=args.train_size, test_size=args.test_size)
    ref_train, _ = split_reference(
        reference, config.test_size, config.train_size, derive_seed(seed, "refsplit")
    )
    capped = [
        subsample(c, min(config.train_size, c.n_rows), derive_seed(seed, "cap", c.id)).with_id(c.id)
        for c in candidates
    ]
    ranking = rank_candidates(
        ref_train.with_id(reference.id), capped, metric, seed=derive_seed(seed, "heuristic")
    )
    doc = ranking.to_dict()
    doc["k"] = args.k
    doc["recommended"] = ranking.ids_ascending()[: args.k]
    (out_dir / "ranking.json").write_text(
        json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )

    if args.full:
        outcomes = compare_strategies(reference, candidates, args.k, metric, config, seed)
        strategy_doc = [
            {
                "strategy": o.strategy.value,
                "k": o.k,
                "added_ids": list(o.added_ids),
                "result": o.result.to_dict(),
            }
            for o in outcomes
        ]
        (out_dir / "strategies.json").write_text(
            json.dumps(strategy_doc, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        rows = []
        for outcome in outcomes:
            for kind in MetricKind:
                if kind in outcome.result.mean:
                    rows.append(
                        (
                            kind.value,
                            outcome.strategy.value,
                            outcome.result.mean[kind],
                            outcome.result.stderr[kind],
                        )
                    )
        emit_plot_tables(rows, out_dir / "strategy_table.csv")
        outputs += ["strategies.json", "strategy_table.csv"]

    _write_manifest(
        out_dir,
        "recommend",
        seed,
        {
            "reference": args.reference,
            "metric": metric.value,
            "k": args.k,
            "full": bool(args.full),
            "train_size": args.train_size,
            "test_size": args.test_size,
        },
        outputs,
    )
    return 0


def _cmd_report(args) -> int:
    seed = _resolve_seed(args.seed)
    sources = _load_data_dir(args.data, args.schema)
    reference, others = _pop_reference(sources, args.reference)
    added_ids = [s for s in args.add.split(",") if s.strip()]
    by_id = {s.id: s for s in others}
    for sid in added_ids:
        if sid not in by_id:
            raise UnknownSourceId(f"added source {sid!r} not found in data directory")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    ref_train, ref_test = split_reference(
        reference, args.test_size, args.train_size, derive_seed(seed, "refsplit")
    )
    pool_parts = [ref_train]
    for sid in added_ids:
        extra = by_id[sid]
        pool_parts.append(
            subsample(extra, min(args.train_size, extra.n_rows), derive_seed(seed, "cap", sid))
        )
    pool = concat(pool_parts) if len(pool_parts) > 1 else ref_train
    split = SplitSpec(args.folds, args.repeats, derive_seed(seed, "xval"))
    result = run_experiment(pool, ref_test, split)

    (out_dir / "result.json").write_text(
        json.dumps(result.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    with open(out_dir / "aggregates.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["metric", "mean", "stderr"])
        for kind in MetricKind:
            if kind in result.mean:
                writer.writerow(
                    [kind.value, _float_repr(result.mean[kind]), _float_repr(result.stderr[kind])]
                )
    _write_manifest(
        out_dir,
        "report",
        seed,
        {
            "reference": args.reference,
            "add": added_ids,
            "train_size": args.train_size,
            "test_size": args.test_size,
            "folds": args.folds,
            "repeats": args.repeats,
        },
        ["result.json", "aggregates.csv", "manifest.json"],
    )
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "distance": _cmd_distance,
    "simulate": _cmd_simulate,
    "recommend": _cmd_recommend,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (SourceSelectError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
