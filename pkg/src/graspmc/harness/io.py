"""On-disk formats.

* chain CSV: ``iter,qw,qx,qy,qz,tx,ty,tz,log_quality,accepted,branch``
* sketch CSV: ``index,qw,qx,qy,qz,tx,ty,tz,quality,valid``
* run report: JSON (config snapshot, metrics, counters, demos, chain file name)
* ``dispersion.csv``: ``c,bias,success_count,dispersion_area,target,seed,unique_success_count``
* ``aggregate.csv`` / ``aggregate.txt``: one row per (target, bias)

Floats are written with 17 significant digits.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict
from pathlib import Path

from graspmc.geometry import embed
from graspmc.metrics import AggregateRow, RunMetrics, aggregate, format_table

CHAIN_COLUMNS = ["iter", "qw", "qx", "qy", "qz", "tx", "ty", "tz", "log_quality", "accepted", "branch"]
SKETCH_COLUMNS = ["index", "qw", "qx", "qy", "qz", "tx", "ty", "tz", "quality", "valid"]
DISPERSION_COLUMNS = ["c", "bias", "success_count", "dispersion_area", "target", "seed",
                      "unique_success_count"]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def chain_csv_text(chain) -> str:
    buf = io.StringIO()
    buf.write(",".join(CHAIN_COLUMNS) + "\n")
    for i, rec in enumerate(chain):
        vals = [fmt(v) for v in embed(rec.pose)]
        buf.write(f"{i},{','.join(vals)},{fmt(rec.log_quality)},{int(rec.accepted)},{rec.branch}\n")
    return buf.getvalue()


def read_chain_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def sketch_csv_text(sketch) -> str:
    buf = io.StringIO()
    buf.write(",".join(SKETCH_COLUMNS) + "\n")
    for i, s in enumerate(sketch.samples):
        vals = ",".join(fmt(v) for v in embed(s.pose))
        buf.write(f"{i},{vals},{fmt(s.quality)},{int(s.valid)}\n")
    return buf.getvalue()


def run_stem(report) -> str:
    if report.sampler == "rw":
        return f"baseline_{report.target}_s{report.seed}"
    return f"run_{report.target}_{report.bias}_c{report.c:.4f}_s{report.seed}"


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def report_dict(report) -> dict:
    return _jsonable({
        "target": report.target,
        "sampler": report.sampler,
        "bias": report.bias,
        "c": report.c,
        "seed": report.seed,
        "config": report.config,
        "metrics": report.metrics.to_dict(),
        "counters": report.counters,
        "demos": [embed(d).tolist() for d in report.demos],
        "duration_s": report.duration_s,
        "chain_length": len(report.chain),
        "chain_sha256": report.chain_hash(),
        "chain_file": run_stem(report) + ".csv",
    })


def write_report(report, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = run_stem(report)
    (out_dir / f"{stem}.csv").write_text(chain_csv_text(report.chain))
    path = out_dir / f"{stem}.json"
    path.write_text(json.dumps(report_dict(report), indent=1))
    return path


def load_reports(directory) -> list[dict]:
    reports = []
    for p in sorted(Path(directory).glob("run_*.json")):
        reports.append(json.loads(p.read_text()))
    return reports


def metrics_from_report(rep: dict) -> RunMetrics:
    m = dict(rep["metrics"])
    if m.get("c_value") is None:
        m["c_value"] = math.nan
    return RunMetrics(**m)


def dispersion_csv_text(metrics) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DISPERSION_COLUMNS)
    for m in metrics:
        w.writerow([fmt(m.c_value), m.bias, m.success_count, fmt(m.dispersion_area), m.target,
                    m.seed, m.unique_success_count])
    return buf.getvalue()


def read_dispersion_csv(path) -> list[RunMetrics]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(RunMetrics(int(row["success_count"]), int(row["unique_success_count"]),
                                  math.nan, float(row["dispersion_area"]), float(row["c"]),
                                  row["bias"], int(row["seed"]), target=row["target"]))
    return out


def aggregate_csv_text(rows: list[AggregateRow]) -> str:
    buf = io.StringIO()
    cols = list(asdict(rows[0]).keys()) if rows else [f for f in AggregateRow.__dataclass_fields__]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([fmt(v) if isinstance(v, float) else v for v in asdict(r).values()])
    return buf.getvalue()


def write_matrix_outputs(out_dir, metrics, rows=None, failures=()) -> None:
    out_dir = Path(out_dir)
    metrics = sorted(metrics, key=lambda m: (m.target, m.bias, m.c_value, m.seed))
    rows = aggregate(metrics) if rows is None else rows
    (out_dir / "dispersion.csv").write_text(dispersion_csv_text(metrics))
    (out_dir / "aggregate.csv").write_text(aggregate_csv_text(rows))
    (out_dir / "aggregate.txt").write_text(format_table(rows))
    if failures:
        (out_dir / "failures.json").write_text(json.dumps(list(failures), indent=1))
