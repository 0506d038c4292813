"""Command line interface: ``tvfwi <subcommand> ...``.

Exit codes: 0 success, 1 failed gradient check, 2 unreadable or invalid
input, 3 solver or inversion failure.
"""
from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .acquisition import generate_data
from .checks import gradcheck
from .constraints import asym_tv_norm, tv_norm
from .grid import Grid, ModelField, linear_gradient, make_synthetic, model_error, smooth
from .io import UNIT_SLOWNESS_SQ, UNIT_VELOCITY, FormatError, data_to_bytes, read_data, read_model, write_model
from .pdhg import default_steps, project_intersection
from .workflow import InversionAborted, run_inversion

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3


class InputError(Exception):
    pass


class SolverError(Exception):
    pass


def _load_model(path) -> ModelField:
    try:
        return read_model(path)
    except (OSError, FormatError) as exc:
        raise InputError(f"cannot read model {path}: {exc}") from exc


def _load_config(path):
    if path is None:
        return cfgmod.defaults()
    try:
        return cfgmod.load_config(path)
    except cfgmod.ConfigError as exc:
        raise InputError(str(exc)) from exc


def _grid_from_config(cfg) -> Grid:
    g = cfg["grid"]
    if g["nz"] is None or g["nx"] is None or g["h"] is None:
        raise InputError("config [grid] needs nz, nx and h")
    try:
        return Grid(g["nz"], g["nx"], g["h"])
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def cmd_synth(args) -> int:
    cfg = _load_config(args.config)
    grid = _grid_from_config(cfg)
    try:
        if args.kind == "gradient":
            m = linear_gradient(grid, args.v_top, args.v_bottom)
        else:
            m = make_synthetic(args.kind, grid)
        if args.smooth > 0:
            m = smooth(m, args.smooth)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    write_model(args.out, m, UNIT_VELOCITY if args.velocity else UNIT_SLOWNESS_SQ)
    print(f"nz={grid.nz} nx={grid.nx} h={grid.h:g} vmin={m.velocity.min():.1f} vmax={m.velocity.max():.1f}")
    return EXIT_OK


def cmd_forward(args) -> int:
    cfg = _load_config(args.config)
    m = _load_model(args.model)
    try:
        geom = cfgmod.geometry_from_config(cfg, m.grid)
        freqs = cfgmod.frequencies_from_config(cfg)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    t0 = time.perf_counter()
    try:
        data = generate_data(m, geom, cfgmod.wavelet_from_config(cfg), freqs)
    except (np.linalg.LinAlgError, RuntimeError, ArithmeticError) as exc:
        raise SolverError(f"forward modeling failed: {exc}") from exc
    Path(args.out).write_bytes(data_to_bytes(data, geom))
    nf, ns, nr = data.values.shape
    print(f"n_freq={nf} n_src={ns} n_rec={nr} elapsed={time.perf_counter() - t0:.3f}s")
    return EXIT_OK


def _write_outputs(outdir: Path, log, final, status, plan, m_true):
    for p, b, snap in log.snapshots:
        write_model(outdir / f"pass{p:02d}_batch{b:02d}.model", snap)
    log.to_csv(outdir / "runlog.csv")
    lines = [f"status = {status}", f"mode = {plan.mode}", f"passes = {len(plan.passes)}",
             f"frequencies = {', '.join(f'{f:g}' for f in plan.frequencies)}",
             f"steps = {len(log.rows)}", f"accepted = {sum(bool(r['accepted']) for r in log.rows)}"]
    for p, err in enumerate(log.pass_errors):
        lines.append(f"pass {p} model_error = {float(err)!r}")
    if final is not None:
        err = model_error(final, m_true) if m_true is not None else math.nan
        lines.append(f"final model_error = {float(err)!r}")
    (outdir / "summary.txt").write_text("\n".join(lines) + "\n")


def cmd_invert(args) -> int:
    cfg = _load_config(args.config)
    m0 = _load_model(args.init)
    m_true = _load_model(args.truth) if args.truth else None
    reference = _load_model(args.reference) if args.reference else None
    for other in (m_true, reference):
        if other is not None and other.grid != m0.grid:
            raise InputError("models are on different grids")
    try:
        data = read_data(args.data, m0.grid)
        plan = cfgmod.plan_from_config(cfg)
        data = data.with_sources(data.geometry, cfgmod.wavelet_from_config(cfg))
        data = data.select(plan.frequencies)
    except (OSError, FormatError, ValueError, KeyError) as exc:
        raise InputError(f"cannot set up inversion: {exc}") from exc
    if any(p.needs_reference for p in plan.passes) and m_true is None and reference is None:
        raise InputError("fractional constraint radii need --truth or --reference")
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        final, log = run_inversion(plan, data, m0, m_true, reference)
    except InversionAborted as exc:
        _write_outputs(outdir, exc.log, None, "aborted", plan, m_true)
        raise SolverError(str(exc)) from exc
    write_model(outdir / "final.model", final)
    _write_outputs(outdir, log, final, "completed", plan, m_true)
    print(f"steps={len(log.rows)} final_objective={float(log.rows[-1]['objective']) if log.rows else math.nan!r}")
    return EXIT_OK


def cmd_project(args) -> int:
    cfg = _load_config(args.config)
    m = _load_model(args.model)
    try:
        plan_bounds = cfgmod.plan_from_config(cfg).bounds(m.grid)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if not args.tau > 0 or (args.xi is not None and args.xi < 0):
        raise InputError("need tau > 0 and xi >= 0")
    pd = cfg["pdhg"]
    steps = default_steps(np.ones(m.grid.size), 0.0, m.grid.h, asym=args.xi is not None,
                          step_ratio=pd["step_ratio"], tol=pd["tol"], max_iters=pd["max_iters"])
    out, res = project_intersection(m, plan_bounds, args.tau, args.xi, steps)
    if not res.converged:
        raise SolverError(f"projection did not converge in {res.iters} iterations")
    write_model(args.out, out)
    dist = float(np.linalg.norm(out.values - m.values))
    print(f"tv={float(tv_norm(m.grid, out.values))!r}")
    print(f"asym_tv={float(asym_tv_norm(m.grid, out.values))!r}")
    print(f"distance={dist!r}")
    return EXIT_OK


def cmd_render(args) -> int:
    m = _load_model(args.model)
    v = m.grid.to_array(m.velocity)
    vmin = float(v.min()) if args.vmin is None else args.vmin
    vmax = float(v.max()) if args.vmax is None else args.vmax
    if args.vmin is None and args.vmax is None and vmax == vmin:
        # a constant field with automatic range: paint it black instead of failing
        vmax = vmin + 1.0
    if not vmax > vmin:
        raise InputError(f"degenerate display range [{vmin}, {vmax}]")
    col = m.grid.nx // 2 if args.slice is None else args.slice
    if not 0 <= col < m.grid.nx:
        raise InputError(f"slice column {col} outside 0..{m.grid.nx - 1}")
    pix = np.clip(np.rint((v - vmin) / (vmax - vmin) * 255.0), 0, 255).astype(np.uint8)
    nz, nx = pix.shape
    out = Path(args.out)
    out.write_bytes(f"P5\n{nx} {nz}\n255\n".encode("ascii") + pix.tobytes())
    with open(out.with_suffix(".csv"), "w") as fh:
        fh.write("depth,velocity\n")
        for k in range(nz):
            fh.write(f"{float(k * m.grid.h)!r},{float(v[k, col])!r}\n")
    print(f"wrote {out} ({nx}x{nz}) and {out.with_suffix('.csv')} (column {col})")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    cfg = _load_config(args.config)
    o = cfg["objective"]
    errs = {}
    for mode in ("fwi", "wri"):
        try:
            errs[mode] = gradcheck(mode, o["lambda"], o["sabotage_sign"], literal_boundary=o["literal_boundary"])
        except (np.linalg.LinAlgError, RuntimeError) as exc:
            raise SolverError(str(exc)) from exc
        print(f"{mode},{errs[mode]:.6e}")
    return EXIT_OK if all(e <= args.tol for e in errs.values()) else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tvfwi", description="Constrained waveform inversion toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic model")
    p.add_argument("--kind", choices=["layered", "salt_toy", "gradient"], required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--v-top", type=float, default=1500.0)
    p.add_argument("--v-bottom", type=float, default=3000.0)
    p.add_argument("--smooth", type=float, default=0.0, help="Gaussian smoothing radius in meters")
    p.add_argument("--velocity", action="store_true", help="store velocities instead of slowness squared")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("forward", help="model frequency-domain data")
    p.add_argument("--model", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("invert", help="run a constrained multi-pass inversion")
    p.add_argument("--data", required=True)
    p.add_argument("--init", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--truth")
    p.add_argument("--reference", help="model defining fractional constraint radii (defaults to --truth)")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("project", help="project a model onto box, TV and one-sided TV constraints")
    p.add_argument("--model", required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--xi", type=float)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("render", help="write a PGM image and a vertical velocity slice")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--vmin", type=float)
    p.add_argument("--vmax", type=float)
    p.add_argument("--slice", type=int, help="column index of the CSV slice (default: middle)")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("gradcheck", help="finite-difference check of both gradients")
    p.add_argument("--config")
    p.add_argument("--tol", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"tvfwi: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"tvfwi: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
