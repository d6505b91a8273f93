"""Readers and writers for every file format the pipeline exchanges.

All writers produce byte-deterministic output for fixed inputs, and all
readers validate eagerly, reporting 1-based physical line numbers (the
CSV header is line 1).

Formats:
  manifest      JSON Lines, one trial per line
  responses     CSV  trial_id,response[,score]
  cells         CSV  task,difficulty,set_size,n_present,n_absent,hits,
                     false_alarms,pc,dprime,clamped
  dprime        CSV  task,difficulty,set_size,dprime,clamped
  slopes        CSV  task,difficulty,slope,intercept,points_used
  fit report    JSON {alpha, d1, nll, converged, evaluations, alpha_profile}
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

from .capacity import CapacityFit, ModelParams
from .errors import ValidationError
from .psychometrics import CellStats, DPrimePoint, SlopeEstimate
from .records import RESPONSES, SPLITS, ManifestRow
from .records import ResponseRecord
from .stimgen import TaskKind

TASK_NAMES = tuple(t.value for t in TaskKind)

MANIFEST_FIELDS = ("trial_id", "split", "task", "difficulty", "set_size",
                   "target_present", "image_path", "seed")
CELLS_HEADER = ("task", "difficulty", "set_size", "n_present", "n_absent",
                "hits", "false_alarms", "pc", "dprime", "clamped")
DPRIME_HEADER = ("task", "difficulty", "set_size", "dprime", "clamped")
SLOPES_HEADER = ("task", "difficulty", "slope", "intercept", "points_used")


def _bad_line(path: Path, lineno: int, why: str) -> ValidationError:
    return ValidationError(f"{path}:{lineno}: {why}")


def write_manifest(rows: Iterable[ManifestRow], path: Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row.to_json_dict(), separators=(",", ":")))
            fh.write("\n")


def read_manifest(path: Path) -> list[ManifestRow]:
    path = Path(path)
    rows: list[ManifestRow] = []
    seen_ids: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise _bad_line(path, lineno, f"invalid JSON ({exc.msg})") from exc
            missing = [f for f in MANIFEST_FIELDS if f not in obj]
            if missing:
                raise _bad_line(path, lineno, f"missing fields {missing}")
            if obj["split"] not in SPLITS:
                raise _bad_line(path, lineno, f"split must be one of {SPLITS}")
            if obj["task"] not in TASK_NAMES:
                raise _bad_line(path, lineno, f"task must be one of {TASK_NAMES}")
            if not isinstance(obj["target_present"], bool):
                raise _bad_line(path, lineno, "target_present must be a JSON boolean")
            try:
                row = ManifestRow(
                    trial_id=str(obj["trial_id"]),
                    split=obj["split"],
                    task=obj["task"],
                    difficulty=int(obj["difficulty"]),
                    set_size=int(obj["set_size"]),
                    target_present=obj["target_present"],
                    image_path=str(obj["image_path"]),
                    seed=int(obj["seed"]),
                )
            except (TypeError, ValueError) as exc:
                raise _bad_line(path, lineno, f"bad field value ({exc})") from exc
            if row.seed < 0:
                raise _bad_line(path, lineno, "seed must be unsigned")
            if row.trial_id in seen_ids:
                raise _bad_line(path, lineno, f"duplicate trial_id {row.trial_id!r}")
            seen_ids.add(row.trial_id)
            rows.append(row)
    return rows


def write_responses(records: Iterable[ResponseRecord], path: Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("trial_id", "response"))
        for rec in records:
            writer.writerow((rec.trial_id, rec.response))


def read_responses(path: Path) -> list[ResponseRecord]:
    path = Path(path)
    records: list[ResponseRecord] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise _bad_line(path, 1, "empty response file")
        header = [h.strip() for h in header]
        if header[:2] != ["trial_id", "response"] or len(header) > 3 or \
                (len(header) == 3 and header[2] != "score"):
            raise _bad_line(path, 1,
                            "header must be trial_id,response[,score]")
        has_score = len(header) == 3
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise _bad_line(path, lineno,
                                f"expected {len(header)} fields, got {len(row)}")
            trial_id, response = row[0], row[1]
            if not trial_id:
                raise _bad_line(path, lineno, "empty trial_id")
            if response not in RESPONSES:
                raise _bad_line(path, lineno,
                                f"response must be one of {RESPONSES}, got {response!r}")
            score = None
            if has_score and row[2] != "":
                try:
                    score = float(row[2])
                except ValueError as exc:
                    raise _bad_line(path, lineno, f"bad score {row[2]!r}") from exc
            records.append(ResponseRecord(trial_id, response, score))
    return records


def _fmt(value: float) -> str:
    # repr of a Python float: shortest round-tripping decimal, deterministic
    return repr(float(value))


def write_cells_csv(cells: Sequence[CellStats],
                    dprimes: Sequence[DPrimePoint], path: Path) -> None:
    if len(cells) != len(dprimes):
        raise ValidationError("cells and dprime rows must align one-to-one")
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CELLS_HEADER)
        for cell, dp in zip(cells, dprimes):
            writer.writerow((cell.task, cell.difficulty, cell.set_size,
                             cell.n_present, cell.n_absent, cell.hits,
                             cell.false_alarms, _fmt(cell.pc), _fmt(dp.dprime),
                             str(dp.clamped).lower()))


def read_cells_csv(path: Path) -> list[CellStats]:
    path = Path(path)
    cells: list[CellStats] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CELLS_HEADER:
            raise _bad_line(path, 1, f"header must be {','.join(CELLS_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CELLS_HEADER):
                raise _bad_line(path, lineno,
                                f"expected {len(CELLS_HEADER)} fields, got {len(row)}")
            try:
                cells.append(CellStats.from_counts(
                    row[0], int(row[1]), int(row[2]), int(row[3]), int(row[4]),
                    int(row[5]), int(row[6])))
            except (TypeError, ValueError) as exc:
                raise _bad_line(path, lineno, f"bad field value ({exc})") from exc
    return cells


def write_dprime_csv(keyed_points: Sequence[tuple[str, int, DPrimePoint]],
                     path: Path) -> None:
    """keyed_points: (task, difficulty, point) tuples, one per cell."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DPRIME_HEADER)
        for task, difficulty, point in keyed_points:
            writer.writerow((task, difficulty, point.set_size,
                             _fmt(point.dprime), str(point.clamped).lower()))


def read_dprime_csv(path: Path) -> list[tuple[str, int, DPrimePoint]]:
    path = Path(path)
    out: list[tuple[str, int, DPrimePoint]] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != DPRIME_HEADER:
            raise _bad_line(path, 1, f"header must be {','.join(DPRIME_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(DPRIME_HEADER):
                raise _bad_line(path, lineno,
                                f"expected {len(DPRIME_HEADER)} fields, got {len(row)}")
            if row[4] not in ("true", "false"):
                raise _bad_line(path, lineno, "clamped must be true or false")
            try:
                out.append((row[0], int(row[1]),
                            DPrimePoint(int(row[2]), float(row[3]), row[4] == "true")))
            except (TypeError, ValueError) as exc:
                raise _bad_line(path, lineno, f"bad field value ({exc})") from exc
    return out


def write_slopes_csv(keyed_slopes: Sequence[tuple[str, int, SlopeEstimate]],
                     path: Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SLOPES_HEADER)
        for task, difficulty, s in keyed_slopes:
            writer.writerow((task, difficulty, _fmt(s.slope), _fmt(s.intercept),
                             s.points_used))


def write_fit_json(fit: CapacityFit, path: Path) -> None:
    doc = {
        "alpha": fit.params.alpha,
        "d1": {str(level): d1
               for level, d1 in sorted(fit.params.d1_by_difficulty.items())},
        "nll": fit.neg_log_likelihood,
        "converged": fit.converged,
        "evaluations": fit.evaluations,
        "alpha_profile": [[a, nll] for a, nll in fit.alpha_profile],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def read_fit_json(path: Path) -> CapacityFit:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from exc
    required = ("alpha", "d1", "nll", "converged", "evaluations", "alpha_profile")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ValidationError(f"{path}: fit report missing fields {missing}")
    try:
        params = ModelParams({int(k): float(v) for k, v in doc["d1"].items()},
                             float(doc["alpha"]))
        return CapacityFit(
            params=params,
            neg_log_likelihood=float(doc["nll"]),
            converged=bool(doc["converged"]),
            evaluations=int(doc["evaluations"]),
            alpha_profile=tuple((float(a), float(nll))
                                for a, nll in doc["alpha_profile"]),
        )
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: bad fit report value ({exc})") from exc
