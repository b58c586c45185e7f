"""Persistence: CSV tables with JSON sidecars, npy batches, and manifests.

Floats are written with 17 significant digits, which round-trips every
IEEE double exactly. Non-finite values appear as ``inf``, ``-inf`` and
``nan`` in both CSV and JSON.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from .cascade import CascadeSampleBatch
from .moments import MomentTable
from .ratefn import GridParams, RateGrid

CSV_BATCH_LIMIT = 10_000


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def jsonable(obj):
    """Recursively replace non-finite floats, tuples and numpy scalars."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else fmt(x)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def dump_json(obj, path: Path):
    path = Path(path)
    path.write_text(json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def _level_from(v):
    return math.inf if v == "inf" else int(v)


def _f(v):
    return v if isinstance(v, float) else float(v)


# --------------------------------------------------------------------------
# rate grids

def write_rate_grid(grid: RateGrid, stem) -> list[Path]:
    stem = Path(stem)
    csv_path = stem.with_suffix(".csv")
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["a", "value"])
        for a, v in zip(grid.points, grid.values):
            w.writerow([fmt(a), fmt(v)])
    return [csv_path, dump_json(grid.metadata(), stem.with_suffix(".json"))]


def read_rate_grid(stem) -> RateGrid:
    stem = Path(stem)
    if stem.suffix in (".csv", ".json"):
        stem = stem.with_suffix("")
    meta = json.loads(stem.with_suffix(".json").read_text())
    with stem.with_suffix(".csv").open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    pts = np.array([float(r["a"]) for r in rows])
    vals = np.array([float(r["value"]) for r in rows])
    gp = GridParams(**{k: float(v) for k, v in meta.pop("grid_params").items()})
    level = _level_from(meta.pop("level"))
    model_id = meta.pop("model")
    return RateGrid(level, pts, vals, model_id, gp, meta)


# --------------------------------------------------------------------------
# moment tables

def write_moment_table(tab: MomentTable, stem, extra: dict | None = None) -> list[Path]:
    stem = Path(stem)
    csv_path = stem.with_suffix(".csv")
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "value", "exact_flag", "exact_value"])
        for h, (v, ex) in enumerate(zip(tab.values, tab.exact)):
            w.writerow([h, fmt(v), int(ex), str(v) if ex else ""])
    meta = tab.metadata()
    meta.pop("log_values", None)
    meta.update(extra or {})
    return [csv_path, dump_json(meta, stem.with_suffix(".json"))]


def read_moment_table(stem) -> MomentTable:
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    with stem.with_suffix(".csv").open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    vals = [Fraction(r["exact_value"]) if r["exact_flag"] == "1" else float(r["value"]) for r in rows]
    return MomentTable(int(meta["r"]), _level_from(meta["level"]), int(meta["h_max"]), vals,
                       meta["mode"], meta["model"])


# --------------------------------------------------------------------------
# sample batches

def write_batch(batch: CascadeSampleBatch, stem, extra: dict | None = None) -> list[Path]:
    stem = Path(stem)
    npy = stem.with_suffix(".npy")
    np.save(npy, batch.samples)
    header = batch.metadata()
    header.update(extra or {})
    out = [npy, dump_json(header, stem.with_suffix(".json"))]
    if len(batch) <= CSV_BATCH_LIMIT:
        csv_path = stem.with_suffix(".csv")
        with csv_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "z"])
            for i, z in enumerate(batch.samples):
                w.writerow([i, fmt(z)])
        out.append(csv_path)
    return out


def read_batch(stem) -> CascadeSampleBatch:
    stem = Path(stem)
    header = json.loads(stem.with_suffix(".json").read_text())
    x = np.load(stem.with_suffix(".npy"))
    return CascadeSampleBatch(int(header["r"]), _level_from(header["level"]), x, int(header["seed"]),
                              header["gen_params"], header["model"], header.get("stats", {}))


# --------------------------------------------------------------------------
# deviation reports

REPORT_COLUMNS = ["check", "regime", "level", "a", "alpha", "r", "speed", "log_prob", "ci_lower",
                  "ci_upper", "hits", "fitted_slope", "theory_value", "verdict"]


def report_rows(report: dict) -> list[dict]:
    rows = []
    for chk in report.get("checks", []):
        d = chk.get("detail", {})
        if "r_values" not in d:
            continue
        for i, r in enumerate(d["r_values"]):
            rows.append({
                "check": chk["name"], "regime": d["regime"], "level": d["level"], "a": d["a"],
                "alpha": "" if d.get("alpha") is None else d["alpha"], "r": r,
                "speed": d["speed_values"][i], "log_prob": d["log_prob_estimates"][i],
                "ci_lower": d["ci_lower"][i], "ci_upper": d["ci_upper"][i], "hits": d["hits"][i],
                "fitted_slope": d["fitted_slope"], "theory_value": d["theory_value"],
                "verdict": chk["status"],
            })
    return rows


def _cell(v):
    if isinstance(v, float) or isinstance(v, np.floating):
        return fmt(v)
    return v


def write_rows(rows: list[dict], path, columns) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for row in rows:
            w.writerow({k: _cell(v) for k, v in row.items()})
    return path


def write_report(report: dict, stem) -> list[Path]:
    stem = Path(stem)
    return [dump_json(report, stem.with_suffix(".json")),
            write_rows(report_rows(report), stem.with_suffix(".csv"), REPORT_COLUMNS)]


# --------------------------------------------------------------------------
# manifest

def sha256(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(outdir, files, inputs: dict, seeds=()) -> Path:
    """Add this run to ``outdir/manifest.json`` and re-hash every listed file.

    Runs sharing an output directory accumulate, so the manifest always
    covers every file emitted there.
    """
    outdir = Path(outdir)
    path = outdir / "manifest.json"
    old = json.loads(path.read_text()) if path.is_file() else {"runs": [], "files": []}
    names = [e["path"] for e in old.get("files", [])]
    run_files = [str(Path(f).relative_to(outdir)) for f in files]
    for name in run_files:
        if name not in names:
            names.append(name)
    entries = [{"path": n, "sha256": sha256(outdir / n)} for n in names if (outdir / n).is_file()]
    runs = old.get("runs", []) + [{"inputs": inputs, "seeds": list(seeds), "files": run_files}]
    return dump_json({"runs": runs, "files": entries}, path)
