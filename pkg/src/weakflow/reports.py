"""Report writers, the run manifest and the report comparison harness.

Floats are written with ``repr`` so identical runs give byte-identical files.
Timings and host facts live only in ``manifest.json``, which the comparison
skips.
"""
from __future__ import annotations

import csv
import fnmatch
import json
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np

MANIFEST = "manifest.json"


def _clean(obj):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")
    return path


def _cell(v):
    v = _clean(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return json.dumps(v)
    return v


def write_csv(path, rows: list[dict], columns=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if columns is None:
        columns = []
        for r in rows:
            for k in r:
                if k not in columns:
                    columns.append(k)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c, "")) for c in columns])
    return path


def write_plot_data(path, x, y) -> Path:
    """Two whitespace-separated columns, one sample per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for a, b in zip(x, y):
            fh.write(f"{float(a)!r} {float(b)!r}\n")
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _versions() -> dict:
    import numba
    import pydantic
    import scipy

    from . import __version__

    return {
        "weakflow": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "pydantic": pydantic.__version__,
    }


class Manifest:
    """Run manifest, written at start and rewritten as stages finish."""

    def __init__(self, out_dir, scenario: str, config: dict, seed: int, extra: dict | None = None):
        from ._accel import numba_enabled, thread_count

        self.path = Path(out_dir) / MANIFEST
        self._t0 = time.perf_counter()
        self._stage = self._t0
        self.data = {
            "scenario": scenario,
            "seed": seed,
            "config": config,
            "versions": _versions(),
            "platform": platform.platform(),
            "numba_enabled": numba_enabled(),
            "threads": thread_count(),
            "status": "running",
            "timings": {},
            "reports": [],
        }
        if extra:
            self.data.update(extra)
        self.write()

    def write(self):
        write_json(self.path, self.data)

    def stage(self, name: str):
        now = time.perf_counter()
        self.data["timings"][name] = now - self._stage
        self._stage = now
        self.write()

    def report(self, path):
        self.data["reports"].append(Path(path).name)

    def finish(self, status: str, exit_code: int, message: str | None = None):
        self.data["timings"]["total"] = time.perf_counter() - self._t0
        self.data["status"] = status
        self.data["exit_code"] = exit_code
        if message:
            self.data["message"] = message
        self.data["reports"] = sorted(set(self.data["reports"]))
        self.write()


# --- comparison ---------------------------------------------------------------


class SchemaMismatch(ValueError):
    pass


def load_tolerances(spec) -> dict:
    """Tolerance spec: {"default": rel, "columns": {pattern: tol}, "files": [globs]}.

    A column tolerance is a relative bound or {"rel": r, "abs": a}; a value
    pair passes when either bound holds. ``spec`` may be a dict, a path to a
    JSON file, or None (exact match).
    """
    if spec is None:
        spec = {}
    elif not isinstance(spec, dict):
        spec = json.loads(Path(spec).read_text())
    unknown = set(spec) - {"default", "columns", "files"}
    if unknown:
        raise SchemaMismatch(f"unknown tolerance keys {sorted(unknown)}")
    return {
        "default": float(spec.get("default", 0.0)),
        "columns": {str(k): _tol_pair(v) for k, v in spec.get("columns", {}).items()},
        "files": list(spec.get("files", ["*"])),
    }


def _tol_pair(v) -> tuple[float, float]:
    if isinstance(v, dict):
        extra = set(v) - {"rel", "abs"}
        if extra:
            raise SchemaMismatch(f"unknown tolerance fields {sorted(extra)}")
        return float(v.get("rel", 0.0)), float(v.get("abs", 0.0))
    return float(v), 0.0


def _tol_for(column: str, tol: dict) -> tuple[float, float]:
    """(rel, abs) of the longest matching column pattern."""
    best = None
    for pat, val in tol["columns"].items():
        if fnmatch.fnmatchcase(column, pat):
            if best is None or len(pat) > len(best[0]):
                best = (pat, val)
    return (tol["default"], 0.0) if best is None else best[1]


def _flatten(obj, prefix=""):
    out = {}
    if isinstance(obj, dict):
        for k in sorted(obj):
            out.update(_flatten(obj[k], f"{prefix}.{k}" if prefix else str(k)))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            out.update(_flatten(v, f"{prefix}[{i}]"))
    else:
        out[prefix] = obj
    return out


def _as_number(v):
    if isinstance(v, bool):
        return None
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            return None
    return None


def _compare_value(where, column, a, b, tol, diffs):
    x, y = _as_number(a), _as_number(b)
    if x is None or y is None:
        if a != b:
            diffs.append({"where": where, "column": column, "a": a, "b": b, "rel": math.inf, "tol": 0.0})
        return
    if x == y or (math.isnan(x) and math.isnan(y)):
        return
    scale = max(abs(x), abs(y))
    rel = abs(x - y) / scale if scale > 0 and math.isfinite(scale) else math.inf
    t_rel, t_abs = _tol_for(column, tol)
    if not (rel <= t_rel or abs(x - y) <= t_abs):
        diffs.append({"where": where, "column": column, "a": a, "b": b, "rel": rel, "tol": t_rel, "abs_tol": t_abs})


def _strip_index(key: str) -> str:
    """Column name of a flattened JSON key: indices dropped."""
    out, depth = [], 0
    for ch in key:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        elif depth == 0:
            out.append(ch)
    return "".join(out)


def compare_reports(run_a, run_b, tolerance_spec=None) -> dict:
    """Relative differences between two report directories.

    Every CSV and JSON file except the manifest is compared column by
    column. Differences above the per-column tolerance are listed; an empty
    list means the runs agree. Different scenarios, file sets, columns or
    row counts raise SchemaMismatch.
    """
    a, b = Path(run_a), Path(run_b)
    tol = load_tolerances(tolerance_spec)
    ma, mb = a / MANIFEST, b / MANIFEST
    if ma.exists() and mb.exists():
        sa = json.loads(ma.read_text()).get("scenario")
        sb = json.loads(mb.read_text()).get("scenario")
        if sa != sb:
            raise SchemaMismatch(f"scenario mismatch: {sa!r} vs {sb!r}")

    def files(d):
        names = {p.name for p in d.iterdir() if p.suffix in (".csv", ".json") and p.name != MANIFEST}
        return {n for n in names if any(fnmatch.fnmatchcase(n, pat) for pat in tol["files"])}

    fa, fb = files(a), files(b)
    if fa != fb:
        raise SchemaMismatch(f"report sets differ: only in A {sorted(fa - fb)}, only in B {sorted(fb - fa)}")
    diffs = []
    for name in sorted(fa):
        if name.endswith(".csv"):
            ra, rb = read_csv(a / name), read_csv(b / name)
            ca = list(ra[0].keys()) if ra else []
            cb = list(rb[0].keys()) if rb else []
            if ca != cb or len(ra) != len(rb):
                raise SchemaMismatch(f"{name}: columns or row counts differ")
            for i, (x, y) in enumerate(zip(ra, rb)):
                for c in ca:
                    _compare_value(f"{name}:{i}", c, x[c], y[c], tol, diffs)
        else:
            ja = _flatten(json.loads((a / name).read_text()))
            jb = _flatten(json.loads((b / name).read_text()))
            if set(ja) != set(jb):
                raise SchemaMismatch(f"{name}: keys differ ({sorted(set(ja) ^ set(jb))[:5]})")
            for k in sorted(ja):
                _compare_value(f"{name}:{k}", _strip_index(k), ja[k], jb[k], tol, diffs)
    return {"files": sorted(fa), "diffs": diffs, "identical": not diffs}
