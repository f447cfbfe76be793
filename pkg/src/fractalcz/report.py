"""Report files: JSON bundle, CSV summary, plot-data text and a console table.

JSON schema ``fractalcz.report/1``::

    {"schema", "command", "config", "passed", "counts": {total, passed, errors},
     "entries": [{"label", "kind": "bound" | "check" | "error", "passed", ...}]}

Bound entries carry the fields of a BoundReport, check entries those of a
CheckReport and error entries an ``error`` message.

CSV summary columns (version 1)::

    label,kind,id,passed,value,target,tolerance,drift,drift_cap,samples

Plot-data files hold two whitespace-separated columns, ``level constant``.
"""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path
from typing import Iterable

REPORT_SCHEMA = "fractalcz.report/1"
SUMMARY_COLUMNS = ("label", "kind", "id", "passed", "value", "target", "tolerance", "drift", "drift_cap", "samples")


def slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9.+-]+", "_", text).strip("_")


def dumps(bundle: dict) -> str:
    """Canonical JSON text (sorted keys, fixed indentation, trailing newline)."""
    return json.dumps(bundle, indent=2, sort_keys=True, allow_nan=False) + "\n"


def summary_row(entry: dict) -> dict:
    kind = entry["kind"]
    if kind == "bound":
        return {
            "label": entry["label"],
            "kind": kind,
            "id": entry["estimate_id"],
            "passed": entry["passed"],
            "value": entry["fitted_exponent"],
            "target": entry["target_exponent"],
            "tolerance": entry["exponent_tolerance"],
            "drift": entry["drift"],
            "drift_cap": entry["drift_cap"],
            "samples": entry["sample_count"],
        }
    if kind == "check":
        return {
            "label": entry["label"],
            "kind": kind,
            "id": entry["check_id"],
            "passed": entry["passed"],
            "value": entry["value"],
            "target": 0.0,
            "tolerance": entry["threshold"],
            "drift": "",
            "drift_cap": "",
            "samples": "",
        }
    return {"label": entry["label"], "kind": kind, "id": "", "passed": False, "value": entry.get("error", "")} | {
        k: "" for k in ("target", "tolerance", "drift", "drift_cap", "samples")
    }


def write_bundle(bundle: dict, out_dir: str | Path, stem: str, formats: Iterable[str]) -> list[Path]:
    """Write the requested formats under ``out_dir``; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    formats = set(formats)
    paths: list[Path] = []
    if "json" in formats:
        p = out / f"{stem}.json"
        p.write_text(dumps(bundle), encoding="utf-8")
        paths.append(p)
    if "csv" in formats:
        p = out / f"{stem}_summary.csv"
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
            w.writeheader()
            for e in bundle["entries"]:
                w.writerow(summary_row(e))
        paths.append(p)
    if "plot" in formats:
        pdir = out / "plots" / stem
        for e in bundle["entries"]:
            if e["kind"] != "bound":
                continue
            p = pdir / f"{slug(e['label'])}.dat"
            write_columns(p, [(lv, c) for lv, c in e["per_level_constants"]], header="level constant")
            paths.append(p)
    return paths


def write_columns(path: str | Path, rows: Iterable[tuple], header: str | None = None) -> None:
    """Two-column whitespace-delimited text; ``header`` goes in a comment line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        for a, b in rows:
            fh.write(f"{a!r} {b!r}\n" if isinstance(a, float) else f"{a} {b!r}\n")


def load_bundles(directory: str | Path) -> list[tuple[Path, dict]]:
    """All report bundles (by schema) in ``directory``, sorted by file name."""
    out = []
    for p in sorted(Path(directory).glob("*.json")):
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except (OSError, ValueError):
            continue
        if isinstance(data, dict) and data.get("schema") == REPORT_SCHEMA:
            out.append((p, data))
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def format_table(entries: list[dict]) -> str:
    """Fixed-width table of the summary columns."""
    cols = ("label", "passed", "value", "target", "tolerance", "drift", "drift_cap")
    rows = [[_fmt(summary_row(e)[c]) for c in cols] for e in entries]
    widths = [max(len(c), *(len(r[i]) for r in rows)) if rows else len(c) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    return "\n".join(lines)
