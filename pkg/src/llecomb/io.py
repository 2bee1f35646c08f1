"""File formats: candidate tables, branches with state sidecars, trajectories.

All writers are atomic (temporary file in the target directory, then
``os.replace``).  States are stored with 17 significant digits so a double
survives the round trip unchanged; the candidate table uses 6 fractional
digits because it is meant for reading.

Branch layout for a stem ``name``::

    name.csv           step,param,l2norm,min_eig,event
    name.json          mode, fixed parameter, d, n, origin, events
    name.points.csv    step,constraint,ds,det_sign, node values, tangent
    name_states/       one x,a1,a2 file per flagged point (start, events, end)
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable

import numpy as np

from .continuation import Branch, BranchPoint, Event
from .model import BifurcationCandidate, Parameters, enumerate_bifpoints
from .spectral import FieldState, get_grid

STATE_FMT = "%.16e"
TABLE_DIGITS = 6
OUT_DIR_ENV = "COMB_OUT_DIR"


def output_dir(default: str | os.PathLike = ".") -> Path:
    """Output directory: ``$COMB_OUT_DIR`` when set, else ``default``."""
    return Path(os.environ.get(OUT_DIR_ENV) or default)


def atomic_write(path: str | os.PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path, data) -> Path:
    return atomic_write(path, json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _csv_text(header: list[str], rows: Iterable[Iterable], comment: str | None = None) -> str:
    buf = _io.StringIO()
    if comment:
        for line in comment.splitlines():
            buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def _g(x: float) -> str:
    return STATE_FMT % x


# --------------------------------------------------------------------------
# candidate tables

CANDIDATE_COLUMNS = ["k", "sigma", "coord", "param", "S", "T", "marginal"]


def _fixed(x: float) -> str:
    s = f"{x:.{TABLE_DIGITS}f}"
    return "0.000000" if s == "-0.000000" else s


def candidate_rows(cands: list[BifurcationCandidate]) -> list[list[str]]:
    ordered = sorted(cands, key=lambda c: (c.k, c.sigma, c.coord))
    return [
        [str(c.k), str(c.sigma), _fixed(c.coord), _fixed(c.param), str(c.s_ok).lower(), str(c.t_ok).lower(), str(c.marginal).lower()]
        for c in ordered
    ]


def candidates_csv(cands: list[BifurcationCandidate]) -> str:
    return _csv_text(CANDIDATE_COLUMNS, candidate_rows(cands))


def candidates_json(cands: list[BifurcationCandidate], p: Parameters, mode: str) -> str:
    rows = [dict(zip(CANDIDATE_COLUMNS, r)) for r in candidate_rows(cands)]
    for r in rows:
        r["k"], r["sigma"] = int(r["k"]), int(r["sigma"])
        for key in ("S", "T", "marginal"):
            r[key] = r[key] == "true"
    meta = {"mode": mode, "d": p.d, "f": p.f, "zeta": p.zeta, "candidates": rows}
    return json.dumps(meta, indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# states


def write_state(path, u: FieldState, comment: str | None = None) -> Path:
    rows = ([_g(x), _g(a), _g(b)] for x, a, b in zip(u.x, u.a1, u.a2))
    return atomic_write(path, _csv_text(["x", "a1", "a2"], rows, comment))


def read_state(path) -> FieldState:
    header, rows = _read_csv(path)
    if header != ["x", "a1", "a2"]:
        raise ValueError(f"{path}: not a state file")
    arr = np.array(rows, dtype=float)
    return FieldState(arr[:, 1], arr[:, 2], get_grid(arr.shape[0]))


# --------------------------------------------------------------------------
# branches


def origin_dict(origin) -> dict | str | None:
    if isinstance(origin, BifurcationCandidate):
        return {"mode": origin.mode, "k": origin.k, "sigma": origin.sigma, "coord": origin.coord, "param": origin.param}
    return origin


def _restore_origin(meta: dict, p: Parameters):
    o = meta.get("origin")
    if not isinstance(o, dict):
        return o
    for c in enumerate_bifpoints(meta["mode"], p):
        if c.k == o["k"] and c.sigma == o["sigma"] and abs(c.coord - o["coord"]) < 1e-9:
            return c
    return o


def flagged_indices(branch: Branch) -> list[int]:
    if not branch.points:
        return []
    idx = {0, len(branch.points) - 1}
    idx.update(e.index for e in branch.events if 0 <= e.index < len(branch.points))
    return sorted(idx)


def write_branch(stem, branch: Branch) -> dict[str, Path]:
    """Write ``stem.csv``, ``stem.json``, ``stem.points.csv`` and state sidecars."""
    stem = Path(stem)
    n = branch.points[0].state.n if branch.points else 0
    by_index: dict[int, list[str]] = {}
    for e in branch.events:
        by_index.setdefault(e.index, []).append(e.kind)
    rows = [
        [str(i), _g(pt.param), _g(pt.l2norm), _g(pt.min_eig), ";".join(by_index.get(i, []))]
        for i, pt in enumerate(branch.points)
    ]
    paths = {"csv": atomic_write(stem.with_suffix(".csv"), _csv_text(["step", "param", "l2norm", "min_eig", "event"], rows))}

    header = ["step", "constraint", "ds", "det_sign"]
    header += [f"a1_{j}" for j in range(n)] + [f"a2_{j}" for j in range(n)]
    header += [f"tau_{j}" for j in range(2 * n + 1)]
    prow = []
    for i, pt in enumerate(branch.points):
        vals = np.concatenate([[pt.ds, pt.det_sign], pt.state.a1, pt.state.a2, pt.tangent])
        prow.append([str(i), pt.constraint] + [_g(v) for v in vals])
    paths["points"] = atomic_write(Path(f"{stem}.points.csv"), _csv_text(header, prow))

    sidecar_dir = Path(f"{stem}_states")
    sidecars = {}
    for i in flagged_indices(branch):
        pt = branch.points[i]
        name = f"step{i:05d}.csv"
        write_state(sidecar_dir / name, pt.state, comment=f"param={_g(pt.param)}")
        sidecars[str(i)] = f"{sidecar_dir.name}/{name}"
    meta = {
        "mode": branch.mode,
        "fixed_param": branch.fixed_param,
        "d": branch.d,
        "n": n,
        "origin": origin_dict(branch.origin),
        "events": [{"kind": e.kind, "index": e.index, "param": e.param, "detail": e.detail} for e in branch.events],
        "sidecars": sidecars,
    }
    paths["json"] = write_json(stem.with_suffix(".json"), meta)
    return paths


def _branch_stem(path) -> Path:
    path = Path(path)
    name = path.name
    for suffix in (".points.csv", ".csv", ".json"):
        if name.endswith(suffix):
            return path.with_name(name[: -len(suffix)])
    return path


def _parse_float(s: str) -> float:
    return float(s)


def read_branch(path) -> Branch:
    """Reload a branch written by :func:`write_branch` (any of its files or the stem)."""
    stem = _branch_stem(path)
    meta_path = stem.with_suffix(".json")
    for p_ in (meta_path, stem.with_suffix(".csv"), Path(f"{stem}.points.csv")):
        if not p_.exists():
            raise FileNotFoundError(f"missing branch file: {p_}")
    meta = json.loads(meta_path.read_text())
    _, rows = _read_csv(stem.with_suffix(".csv"))
    _, prow = _read_csv(Path(f"{stem}.points.csv"))
    n = int(meta["n"])
    grid = get_grid(n) if n else None
    points = []
    for r, pr in zip(rows, prow):
        vals = np.array(pr[2:], dtype=float)
        ds, det = vals[0], vals[1]
        a1, a2 = vals[2 : 2 + n], vals[2 + n : 2 + 2 * n]
        tau = vals[2 + 2 * n :]
        points.append(
            BranchPoint(
                param=_parse_float(r[1]),
                state=FieldState(a1, a2, grid),
                l2norm=_parse_float(r[2]),
                min_eig=_parse_float(r[3]),
                tangent=tau,
                ds=float(ds),
                det_sign=float(det),
                constraint=pr[1],
            )
        )
    events = [Event(e["kind"], int(e["index"]), float(e["param"]), dict(e.get("detail", {}))) for e in meta["events"]]
    mode, fixed, d = meta["mode"], float(meta["fixed_param"]), float(meta["d"])
    branch = Branch(mode, fixed, d, None, points, events)
    branch.origin = _restore_origin(meta, branch.parameters(points[0].param if points else 0.0))
    return branch


# --------------------------------------------------------------------------
# trajectories and spectra


def write_trajectory(path, traj) -> Path:
    rows = ([_g(t), _g(z), _g(v)] for t, z, v in zip(traj.t, traj.zeta, traj.l2norm))
    comment = "aborted: " + traj.message if traj.aborted else None
    return atomic_write(path, _csv_text(["t", "zeta", "l2norm"], rows, comment))


def read_trajectory_csv(path) -> np.ndarray:
    _, rows = _read_csv(path)
    return np.array(rows, dtype=float)


SPECTRUM_NOTE = (
    "log_abs_ak = log|a_k| of the exponential Fourier series of the even 2pi extension;\n"
    "a_0 is the mean and a_k = a_-k = c_k/2 for the cosine coefficient c_k (k >= 1);\n"
    "magnitudes are floored at 1e-300"
)


def write_spectrum(path, spec: list[tuple[int, float]]) -> Path:
    rows = ([str(k), _g(v)] for k, v in spec)
    return atomic_write(path, _csv_text(["k", "log_abs_ak"], rows, SPECTRUM_NOTE))


def write_snapshots(directory, snapshots: dict[int, FieldState], times=None) -> list[Path]:
    out = []
    for idx in sorted(snapshots):
        comment = None if times is None else f"t={_g(times[idx])}"
        out.append(write_state(Path(directory) / f"sample{idx:07d}.csv", snapshots[idx], comment))
    return out
