"""Command-line surface: vsl gen | simulate | analyze | fit | report.

Every command is deterministic given its flags; --seed is mandatory
wherever randomness exists. Exit codes: 0 success, 2 validation error
(bad inputs, malformed files, unusable paths), 1 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import capacity, figures, io, observer, psychometrics, stimgen
from .errors import ValidationError, VslError
from .stimgen import TaskKind


@dataclass
class ExperimentConfig:
    """Optional JSON config mirrored by the CLI; flags always win."""

    task: str | None = None
    difficulties: list[int] = field(default_factory=list)
    seed: int | None = None
    out_dir: str | None = None
    observer: dict = field(default_factory=dict)
    fit: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | None) -> "ExperimentConfig":
        if path is None:
            return cls()
        p = Path(path)
        try:
            doc = json.loads(p.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ValidationError(f"cannot read config {p}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{p}: invalid JSON ({exc.msg})") from exc
        unknown = set(doc) - {"task", "difficulties", "seed", "out_dir",
                              "observer", "fit"}
        if unknown:
            raise ValidationError(f"{p}: unknown config keys {sorted(unknown)}")
        return cls(task=doc.get("task"),
                   difficulties=list(doc.get("difficulties", [])),
                   seed=doc.get("seed"),
                   out_dir=doc.get("out_dir"),
                   observer=dict(doc.get("observer", {})),
                   fit=dict(doc.get("fit", {})))


def _require(value, name: str):
    if value is None:
        raise ValidationError(f"missing required option --{name} (no config value either)")
    return value


def _parse_task(name: str) -> TaskKind:
    try:
        return TaskKind(name)
    except ValueError:
        raise ValidationError(
            f"unknown task {name!r}; choose from "
            f"{', '.join(t.value for t in TaskKind)}") from None


def cmd_gen(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.load(args.config)
    task = _parse_task(_require(args.task or cfg.task, "task"))
    difficulties = args.difficulty or cfg.difficulties
    if not difficulties:
        raise ValidationError("missing required option --difficulty")
    if len(set(difficulties)) != len(difficulties):
        raise ValidationError(f"repeated difficulty levels in {difficulties}")
    seed = _require(args.seed if args.seed is not None else cfg.seed, "seed")
    out_dir = Path(_require(args.out or cfg.out_dir, "out"))

    rows = []
    for difficulty in difficulties:
        sub_seed = stimgen.derive_seed(seed, 2, difficulty)
        rows.extend(stimgen.generate_dataset(task, difficulty, sub_seed, out_dir,
                                             write_manifest_file=False))
    io.write_manifest(rows, out_dir / "manifest.jsonl")

    counts: dict[tuple[int, str, int], list[int]] = {}
    for row in rows:
        c = counts.setdefault((row.difficulty, row.split, row.set_size), [0, 0])
        c[0 if row.target_present else 1] += 1
    print(f"wrote {len(rows)} images + manifest to {out_dir}")
    print("difficulty  split  set_size  present  absent")
    for (difficulty, split, set_size), (np_, na) in sorted(counts.items()):
        print(f"{difficulty:>10}  {split:<5}  {set_size:>8}  {np_:>7}  {na:>6}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.load(args.config)
    obs_cfg = cfg.observer
    d1 = args.d1 if args.d1 is not None else obs_cfg.get("d1")
    alpha = args.alpha if args.alpha is not None else obs_cfg.get("alpha")
    seed = args.seed if args.seed is not None else obs_cfg.get("seed")
    criterion = args.criterion if args.criterion is not None \
        else obs_cfg.get("criterion")
    params = observer.ObserverParams(
        d1=float(_require(d1, "d1")),
        alpha=float(_require(alpha, "alpha")),
        criterion=None if criterion is None else float(criterion),
        seed=int(_require(seed, "seed")),
    )
    manifest_path = args.manifest or (
        cfg.out_dir and str(Path(cfg.out_dir) / "manifest.jsonl"))
    manifest = io.read_manifest(Path(_require(manifest_path, "manifest")))
    records = observer.simulate_observer(params, manifest)
    io.write_responses(records, Path(args.out))
    print(f"wrote {len(records)} responses to {args.out}")
    return 0


def _analysis_tables(manifest, responses):
    cells = psychometrics.aggregate_cells(manifest, responses)
    dprimes = [psychometrics.cell_dprime(c) for c in cells]
    slopes = []
    for key in sorted({(c.task, c.difficulty) for c in cells}):
        pts = [d for c, d in zip(cells, dprimes)
               if (c.task, c.difficulty) == key]
        admissible = [p for p in pts if p.dprime > 0]
        if len(admissible) >= 2 and len({p.set_size for p in admissible}) >= 2:
            slopes.append((key[0], key[1], psychometrics.loglog_slope(pts)))
    return cells, dprimes, slopes


def cmd_analyze(args: argparse.Namespace) -> int:
    manifest = io.read_manifest(Path(args.manifest))
    responses = io.read_responses(Path(args.responses))
    cells, dprimes, slopes = _analysis_tables(manifest, responses)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    io.write_cells_csv(cells, dprimes, out_dir / "cells.csv")
    io.write_dprime_csv([(c.task, c.difficulty, d)
                         for c, d in zip(cells, dprimes)],
                        out_dir / "dprime.csv")
    io.write_slopes_csv(slopes, out_dir / "slopes.csv")
    print(f"wrote cells.csv, dprime.csv, slopes.csv to {out_dir} "
          f"({len(cells)} cells, {len(slopes)} slopes)")
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.load(args.config)
    fit_cfg = cfg.fit
    cells = io.read_cells_csv(Path(args.cells))
    grid = args.alpha_grid if args.alpha_grid is not None \
        else fit_cfg.get("alpha_grid")
    kwargs = {}
    if grid is not None:
        kwargs["alpha_grid"] = [float(a) for a in grid]
    tol = args.tol if args.tol is not None else fit_cfg.get("diameter_tol")
    if tol is not None:
        kwargs["diameter_tol"] = float(tol)
    max_evals = args.max_evals if args.max_evals is not None \
        else fit_cfg.get("max_evals")
    if max_evals is not None:
        kwargs["max_evals"] = int(max_evals)
    fit = capacity.fit_capacity(cells, **kwargs)
    io.write_fit_json(fit, Path(args.out))
    d1s = ", ".join(f"level {lvl}: {d1:.3f}"
                    for lvl, d1 in sorted(fit.params.d1_by_difficulty.items()))
    print(f"alpha = {fit.params.alpha:.4f}  ({d1s})")
    print(f"nll = {fit.neg_log_likelihood:.3f}  converged = {fit.converged}  "
          f"evaluations = {fit.evaluations}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    cells = io.read_cells_csv(Path(args.cells))
    keyed_dprimes = io.read_dprime_csv(Path(args.dprime))
    fit = io.read_fit_json(Path(args.fit))

    cell_keys = [(c.task, c.difficulty, c.set_size) for c in cells]
    dp_keys = [(t, d, p.set_size) for t, d, p in keyed_dprimes]
    if cell_keys != dp_keys:
        raise ValidationError("cells.csv and dprime.csv rows do not match")
    dprimes = [p for _, _, p in keyed_dprimes]

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    svg = figures.build_report_svg(cells, dprimes, fit)
    (out_dir / "report.svg").write_text(svg, encoding="utf-8")
    rows = figures.report_rows(cells, dprimes, fit)
    with (out_dir / "report.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("task", "difficulty", "set_size", "pc", "dprime",
                         "pc_model", "dprime_model"))
        for r in rows:
            writer.writerow((r["task"], r["difficulty"], r["set_size"],
                             repr(r["pc"]), repr(r["dprime"]),
                             repr(r["pc_model"]), repr(r["dprime_model"])))
    print(f"wrote report.svg and report.csv to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vsl",
        description="Visual-search datasets, simulated observers, d' analysis "
                    "and capacity-model fits.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a stimulus dataset + manifest")
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--task", help="one of: " + ", ".join(t.value for t in TaskKind))
    p.add_argument("--difficulty", type=int, action="append",
                   help="difficulty level 1-3; repeat for several levels")
    p.add_argument("--seed", type=int, help="dataset seed (required)")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("simulate", help="run a capacity-limited observer on a manifest")
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--manifest", help="manifest.jsonl path")
    p.add_argument("--d1", type=float, help="single-item sensitivity (>= 0)")
    p.add_argument("--alpha", type=float, help="capacity exponent in [0, 2]")
    p.add_argument("--criterion", type=float,
                   help="fixed standardized criterion (default: optimal)")
    p.add_argument("--seed", type=int, help="observer seed (required)")
    p.add_argument("--out", required=True, help="responses CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="aggregate responses into cells, d' and slopes")
    p.add_argument("--manifest", required=True)
    p.add_argument("--responses", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", help="fit the capacity model to a cells.csv")
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--cells", required=True)
    p.add_argument("--out", required=True, help="fit JSON path")
    p.add_argument("--alpha-grid", type=lambda s: s.split(","),
                   help="comma-separated alpha grid for the scan stage")
    p.add_argument("--tol", type=float, help="simplex diameter tolerance")
    p.add_argument("--max-evals", type=int, help="simplex evaluation budget")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="emit report.svg and report.csv")
    p.add_argument("--cells", required=True)
    p.add_argument("--dprime", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        path = exc.filename or ""
        print(f"error: {exc.strerror or exc}{': ' if path else ''}{path}",
              file=sys.stderr)
        return 2
    except VslError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
