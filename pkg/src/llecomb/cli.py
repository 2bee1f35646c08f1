"""Command-line interface: ``llecomb <command> [options]``.

Commands
--------
bifpoints   table of bifurcation candidates on a family of constant solutions
continue    follow the branch bifurcating at one candidate (or a secondary one)
diagram     SVG bifurcation diagram from stored branches
evolve      time integration with a detuning ramp
bounds      a priori bounds as JSON
verify      re-check stored branches and states

Options can also come from ``--config FILE`` (JSON object keyed by option
name, dashes or underscores) and ``--preset NAME``; explicit flags win over
the config file, which wins over the preset.

Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import evolution as evo
from . import io as cio
from . import svg
from .continuation import (
    BranchSwitchError,
    ConditionError,
    ContinuationConfig,
    TheoryViolationError,
    arclength_defects,
    branch_switch,
    continue_branch,
    switch_secondary,
)
from .model import DomainError, Parameters, PreconditionError, bounds_report, constant_at, enumerate_bifpoints
from .spectral import FieldState, get_grid, l2norm_coeffs, validate_solution

PRESETS = ("sec5.1", "sec5.2", "sec5.3", "sec5.4", "sec5.5")
EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


def load_preset(name: str) -> dict:
    if name not in PRESETS:
        raise UsageError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("llecomb").joinpath("presets", f"{name}.json").read_text()
    return json.loads(text)


def _flatten_preset(preset: dict) -> dict:
    flat = {k: v for k, v in preset.items() if k not in ("continuation", "evolve", "description", "branches")}
    flat.update(preset.get("continuation", {}))
    flat.update(preset.get("evolve", {}))
    return flat


def _merge(args: argparse.Namespace, defaults: dict) -> argparse.Namespace:
    """Fill unset (None) options from the config file and preset."""
    layered: dict = {}
    preset_name = getattr(args, "preset", None)
    if preset_name:
        preset = load_preset(preset_name)
        layered.update(_flatten_preset(preset))
        args.preset_branches = preset.get("branches", [])
    else:
        args.preset_branches = []
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        try:
            data = json.loads(Path(cfg_path).read_text())
        except FileNotFoundError:
            raise UsageError(f"config file not found: {cfg_path}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {cfg_path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        layered.update({k.replace("-", "_"): v for k, v in data.items()})
    for key, value in layered.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    for key, value in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    return args


def _params(args, need_mode: bool = True) -> Parameters:
    if need_mode and args.mode not in ("hat", "bar"):
        raise UsageError("--mode must be 'hat' or 'bar'")
    if args.d is None:
        raise UsageError("--d is required")
    if args.mode == "hat" and args.f is None:
        raise UsageError("hat mode needs --f")
    if args.mode == "bar" and args.zeta is None:
        raise UsageError("bar mode needs --zeta")
    try:
        return Parameters(d=float(args.d), zeta=float(args.zeta or 0.0), f=float(args.f or 0.0))
    except (DomainError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _out_dir(args) -> Path:
    return cio.output_dir(args.out or ".")


def _common(p: argparse.ArgumentParser, params: bool = True) -> None:
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--preset", help=f"one of {', '.join(PRESETS)}")
    p.add_argument("--out", help="output directory (default: $COMB_OUT_DIR or .)")
    if params:
        p.add_argument("--mode", choices=("hat", "bar"))
        p.add_argument("--d", type=float)
        p.add_argument("--f", type=float)
        p.add_argument("--zeta", type=float)


# --------------------------------------------------------------------------
# commands


def cmd_bifpoints(args) -> int:
    _merge(args, {"format": "csv", "include_k0": False})
    p = _params(args)
    cands = enumerate_bifpoints(args.mode, p, include_k0=bool(args.include_k0))
    if args.format == "json":
        text = cio.candidates_json(cands, p, args.mode)
    else:
        text = cio.candidates_csv(cands)
    sys.stdout.write(text)
    if args.out or cio.OUT_DIR_ENV in os.environ:
        cio.atomic_write(_out_dir(args) / f"bifpoints_{args.mode}.{args.format}", text)
    return EXIT_OK


def _continuation_config(args) -> ContinuationConfig:
    kw = {}
    for key in ("ds_init", "ds_min", "ds_max", "max_steps", "n", "trivial_return_tol"):
        value = getattr(args, key, None)
        if value is not None:
            kw[key] = type(getattr(ContinuationConfig(), key))(value)
    if args.no_min_eig:
        kw["compute_min_eig"] = False
    try:
        return ContinuationConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _select(cands, k, sigma, coord_sign):
    sel = [c for c in cands if c.k == k and (sigma is None or c.sigma == sigma)]
    if coord_sign is not None:
        sel = [c for c in sel if math.copysign(1.0, c.coord) == coord_sign]
    if not sel:
        raise UsageError(f"no candidate with k={k}, sigma={sigma}, coord sign={coord_sign}")
    if len(sel) > 1:
        listing = "; ".join(f"k={c.k} sigma={c.sigma} coord={c.coord:.6f}" for c in sel)
        raise UsageError(f"candidate selection is ambiguous ({listing}); add --sigma or --coord-sign")
    return sel[0]


def _summary(name: str, branch) -> str:
    lines = [f"{name}: {len(branch.points)} points, parameter {branch.params[0]:.6f} -> {branch.params[-1]:.6f}"]
    for e in branch.events:
        extra = ""
        if e.kind == "turning_point":
            extra = f" (refined {e.detail.get('refined_param', float('nan')):.6f})"
        elif e.kind == "trivial_return" and "candidate_k" in e.detail:
            extra = f" (candidate k={e.detail['candidate_k']} sigma={e.detail['candidate_sigma']})"
        elif e.kind == "step_limit":
            extra = f" ({e.detail.get('reason')})"
        lines.append(f"  {e.kind:24s} step {e.index:5d}  param {e.param:.6f}{extra}")
    return "\n".join(lines)


def cmd_continue(args) -> int:
    _merge(args, {"eps": 1e-3})
    cfg = _continuation_config(args)
    out = _out_dir(args)
    jobs = []
    if args.from_branch is not None:
        if args.switch_at is None:
            raise UsageError("--from needs --switch-at")
        try:
            parent = cio.read_branch(args.from_branch)
        except FileNotFoundError as exc:
            raise UsageError(str(exc)) from None
        p = parent.parameters(parent.points[0].param)
        if not 0 < args.switch_at < len(parent.points):
            raise UsageError(f"--switch-at must be in 1..{len(parent.points) - 1}")
        try:
            start = switch_secondary(parent, args.switch_at, eps=args.eps)
        except BranchSwitchError as exc:
            raise NumericalFailure(str(exc)) from None
        name = args.name or f"{Path(args.from_branch).stem}_sw{args.switch_at}"
        jobs.append((name, start, p, parent.mode, f"secondary of {args.from_branch} at {args.switch_at}"))
    else:
        p = _params(args)
        cands = enumerate_bifpoints(args.mode, p)
        if args.k is not None:
            picks = [_select(cands, args.k, args.sigma, args.coord_sign)]
        elif args.preset_branches:
            picks = [_select(cands, b["k"], b.get("sigma"), b.get("coord_sign")) for b in args.preset_branches]
        else:
            raise UsageError("--k is required")
        for c in picks:
            try:
                start = branch_switch(c, p, eps=args.eps, n=cfg.n)
            except ConditionError as exc:
                raise NumericalFailure(f"refusing to switch: {exc}") from None
            except BranchSwitchError as exc:
                raise NumericalFailure(str(exc)) from None
            name = args.name if (args.name and len(picks) == 1) else f"branch_{args.mode}_k{c.k}_s{'p' if c.sigma > 0 else 'm'}"
            jobs.append((name, start, p, args.mode, c))
    status = EXIT_OK
    for name, start, p, mode, origin in jobs:
        try:
            branch = continue_branch(start, p, cfg, mode=mode, origin=origin)
        except TheoryViolationError as exc:
            raise NumericalFailure(f"theory check failed: {exc}") from None
        cio.write_branch(out / name, branch)
        print(_summary(name, branch))
        if branch.failed:
            print(f"{name}: continuation stopped early (step size underflow); partial branch written", file=sys.stderr)
            status = EXIT_NUMERIC
    return status


def cmd_diagram(args) -> int:
    _merge(args, {"output": "diagram.svg"})
    branches = []
    for path in args.inputs:
        try:
            branches.append(cio.read_branch(path))
        except FileNotFoundError as exc:
            raise UsageError(f"cannot read branch: {exc}") from None
    p = None
    if args.mode is not None and args.d is not None:
        p = _params(args)
    elif not branches:
        raise UsageError("without inputs, --mode, --d and --f/--zeta are required")
    spec = svg.DiagramSpec(
        branches=branches,
        mode=args.mode,
        params=p,
        trivial=not args.no_trivial,
        colors=args.colors.split(",") if args.colors else None,
        labels=args.labels.split(",") if args.labels else None,
        xlim=tuple(args.xlim) if args.xlim else None,
        ylim=tuple(args.ylim) if args.ylim else None,
    )
    target = Path(args.output)
    if not target.is_absolute():
        target = _out_dir(args) / target
    cio.atomic_write(target, svg.bifurcation_diagram(spec))
    print(target)
    return EXIT_OK


def cmd_evolve(args) -> int:
    defaults = {
        "zeta_start": -5.0,
        "zeta_end": 2.67,
        "T": 1000.0,
        "dt": 1e-3,
        "n": 256,
        "noise": 1e-14,
        "sample_every": 100,
        "snapshot_every": 0,
        "seed": 0,
        "mode": "hat",
    }
    _merge(args, defaults)
    if args.f is None or args.d is None:
        raise UsageError("evolve needs --f and --d (or --preset sec5.5)")
    if args.zeta is not None:
        ramp = evo.RampSchedule.constant(args.zeta, args.T)
    else:
        try:
            ramp = evo.RampSchedule.plateau_ramp(args.zeta_start, args.zeta_end, args.T, args.hold, args.ramp_end)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    try:
        p = Parameters(d=float(args.d), zeta=float(ramp(0.0)), f=float(args.f))
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    grid = get_grid(int(args.n))
    if args.init:
        try:
            u0 = cio.read_state(args.init)
        except FileNotFoundError:
            raise UsageError(f"initial state not found: {args.init}") from None
    else:
        states = constant_at("hat", p)
        if not states:
            raise UsageError("no constant solution at the initial detuning")
        u0 = FieldState.constant((states[0].a1, states[0].a2), grid)
    try:
        traj = evo.evolve(
            u0, ramp, p, dt=float(args.dt), sample_every=int(args.sample_every), noise_amp=float(args.noise),
            seed=int(args.seed), snapshot_every=int(args.snapshot_every) or None,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _out_dir(args)
    cio.write_trajectory(out / "trajectory.csv", traj)
    cio.write_state(out / "final_state.csv", traj.final, comment=f"t={traj.t[-1]!r} zeta={traj.zeta[-1]!r}")
    spec = evo.spectrum(traj.final)
    cio.write_spectrum(out / "spectrum.csv", spec)
    if traj.snapshots:
        cio.write_snapshots(out / "snapshots", traj.snapshots, traj.t)
    x, amp = evo.periodic_extension(traj.final)
    cio.atomic_write(out / "final_profile.svg", svg.profile_plot(x, amp, "final |a| on [0, 2pi)"))
    cio.atomic_write(out / "spectrum.svg", svg.spectrum_plot(spec, "final spectrum"))
    cio.atomic_write(out / "trajectory.svg", svg.trajectory_plot(traj.t, traj.l2norm, "L2 norm"))
    window = min(10.0, float(traj.t[-1]))
    print(f"final t={traj.t[-1]:g} zeta={traj.zeta[-1]:g} l2norm={traj.l2norm[-1]:.10f}")
    print(f"peaks of |a| on [0, 2pi): {evo.count_extrema(traj.final, 'max')}")
    print(f"L2 drift over last {window:g}: {traj.drift(window):.3e}")
    if traj.aborted:
        print(f"aborted: {traj.message}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_bounds(args) -> int:
    _merge(args, {})
    if args.d is None or args.f is None:
        raise UsageError("bounds needs --d and --f")
    try:
        p = Parameters(d=float(args.d), zeta=float(args.zeta or 0.0), f=float(args.f))
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    rep = bounds_report(p).as_dict()
    rep.update({"d": p.d, "f": p.f, "zeta": p.zeta})
    cands = enumerate_bifpoints("hat", p)
    rep["hat_candidates"] = len(cands)
    rep["hat_active_k"] = sorted({c.k for c in cands})
    if p.d < 0:
        rep["bar_candidates"] = len(enumerate_bifpoints("bar", p))
    text = json.dumps(cio._jsonable(rep), indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if args.out or cio.OUT_DIR_ENV in os.environ:
        cio.atomic_write(_out_dir(args) / "bounds.json", text)
    return EXIT_OK


def verify_branch(path, tol: float = 1e-8) -> list[str]:
    """All invariant violations of a stored branch (empty when it is sound)."""
    branch = cio.read_branch(path)
    problems = []
    n_pts = len(branch.points)
    for e in branch.events:
        if not 0 <= e.index < n_pts:
            problems.append(f"event {e.kind} has invalid index {e.index}")
    for i, pt in enumerate(branch.points):
        p = branch.parameters(pt.param)
        rep = validate_solution(pt.state, p)
        if not rep.ok:
            problems.append(f"point {i}: {', '.join(rep.failures())}")
        norm = l2norm_coeffs(pt.state.coeffs, pt.state.grid)
        if abs(norm - pt.l2norm) > 1e-10 * max(1.0, norm):
            problems.append(f"point {i}: stored L2 norm {pt.l2norm!r} differs from state norm {norm!r}")
    defects = arclength_defects(branch)
    bad = np.nonzero(np.abs(defects) > tol)[0]
    for j in bad[:10]:
        problems.append(f"point {j + 1}: arclength constraint defect {defects[j]:.2e}")
    stem = cio._branch_stem(path)
    meta = json.loads(stem.with_suffix(".json").read_text())
    for idx, rel in meta.get("sidecars", {}).items():
        side = stem.parent / rel
        if not side.exists():
            problems.append(f"missing sidecar {side}")
            continue
        state = cio.read_state(side)
        ref = branch.points[int(idx)].state
        if not state.allclose(ref, atol=1e-12):
            problems.append(f"sidecar {side} does not match point {idx}")
    return problems


def verify_state(path, p: Parameters) -> list[str]:
    rep = validate_solution(cio.read_state(path), p)
    return [", ".join(rep.failures())] if not rep.ok else []


def cmd_verify(args) -> int:
    _merge(args, {})
    failed = False
    for path in args.paths:
        path = Path(path)
        try:
            header = _first_header(path)
            if header == ["x", "a1", "a2"]:
                if args.d is None:
                    raise UsageError(f"{path}: verifying a state file needs --d and --f/--zeta")
                problems = verify_state(path, Parameters(d=args.d, zeta=args.zeta or 0.0, f=args.f or 0.0))
            else:
                problems = verify_branch(path)
        except FileNotFoundError as exc:
            raise UsageError(f"cannot read {exc.filename or path}") from None
        if problems:
            failed = True
            print(f"FAIL {path}")
            for msg in problems:
                print(f"  {msg}")
        else:
            print(f"ok   {path}")
    return EXIT_NUMERIC if failed else EXIT_OK


def _first_header(path: Path) -> list[str]:
    if path.suffix == ".json" or not path.exists():
        if not path.exists() and not cio._branch_stem(path).with_suffix(".json").exists():
            raise FileNotFoundError(2, "no such file", str(path))
        return []
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                return [h.strip() for h in line.split(",")]
    return []


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="llecomb", description="Frequency-comb solutions of the Lugiato-Lefever equation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bifpoints", help="list bifurcation candidates")
    _common(p)
    p.add_argument("--include-k0", action="store_true", default=None, help="also list turning points of the constant family")
    p.add_argument("--format", choices=("csv", "json"))
    p.set_defaults(func=cmd_bifpoints)

    p = sub.add_parser("continue", help="continue a bifurcating branch")
    _common(p)
    p.add_argument("--k", type=int)
    p.add_argument("--sigma", type=int, choices=(-1, 1))
    p.add_argument("--coord-sign", type=float, choices=(-1.0, 1.0))
    p.add_argument("--max-steps", type=int)
    p.add_argument("--ds-init", type=float)
    p.add_argument("--ds-min", type=float)
    p.add_argument("--ds-max", type=float)
    p.add_argument("--trivial-return-tol", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--eps", type=float, help="initial offset along the kernel")
    p.add_argument("--name", help="output file stem")
    p.add_argument("--from", dest="from_branch", help="stored branch for secondary switching")
    p.add_argument("--switch-at", type=int, help="index of the point after a determinant sign flip")
    p.add_argument("--no-min-eig", action="store_true", help="skip the eigenvalue indicator")
    p.set_defaults(func=cmd_continue)

    p = sub.add_parser("diagram", help="render a bifurcation diagram")
    _common(p)
    p.add_argument("inputs", nargs="*", help="branch files (.csv, .json or stem)")
    p.add_argument("--no-trivial", action="store_true", help="omit the constant solutions")
    p.add_argument("--colors", help="comma-separated colors, one per branch")
    p.add_argument("--labels", help="comma-separated legend labels")
    p.add_argument("--xlim", type=float, nargs=2)
    p.add_argument("--ylim", type=float, nargs=2)
    p.add_argument("--output", help="SVG file (relative paths go to the output directory)")
    p.set_defaults(func=cmd_diagram)

    p = sub.add_parser("evolve", help="time integration with a detuning ramp")
    _common(p)
    p.add_argument("--zeta-start", type=float)
    p.add_argument("--zeta-end", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--hold", type=float)
    p.add_argument("--ramp-end", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--sample-every", type=int)
    p.add_argument("--snapshot-every", type=int, help="samples between stored snapshots (0: none)")
    p.add_argument("--init", help="initial state file (default: constant solution)")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("bounds", help="a priori bounds")
    _common(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("verify", help="re-check stored branches or states")
    _common(p)
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"llecomb {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"llecomb {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (PreconditionError, DomainError) as exc:
        print(f"llecomb {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
