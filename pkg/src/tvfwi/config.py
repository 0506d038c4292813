"""Flat ``key = value`` configuration with sections and strict keys.

Unknown sections or keys are errors.  Values are typed by the schema
below; ``none`` stands for an unset optional value and lists are comma
separated.
"""
from __future__ import annotations

import configparser
import math

import numpy as np

from .acquisition import Wavelet, default_geometry
from .sgp import SgpParams
from .workflow import EncodingSpec, InversionPlan, PassSpec

__all__ = ["ConfigError", "SCHEMA", "parse_config", "load_config", "dump_config",
           "plan_from_config", "geometry_from_config", "wavelet_from_config", "frequencies_from_config"]


class ConfigError(ValueError):
    pass


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt(conv):
    def parse(s):
        return None if s.strip().lower() in ("none", "") else conv(s)
    parse.optional = True
    parse.base = conv
    return parse


def _floats(s):
    s = s.strip()
    if not s or s.lower() == "none":
        return []
    return [float(x) for x in s.split(",")]


def _str(s):
    return s.strip()


_float = float
_int = int

# section -> key -> (parser, default)
SCHEMA = {
    "grid": {
        "nz": (_opt(_int), None),
        "nx": (_opt(_int), None),
        "h": (_opt(_float), None),
    },
    "acquisition": {
        "peak_frequency": (_float, 15.0),
        "frequencies": (_floats, []),
        "fmin": (_float, 3.0),
        "fmax": (_float, 10.0),
        "fstep": (_float, 1.0),
        "src_step": (_int, 4),
        "src_depth": (_int, 2),
        "rec_step": (_int, 2),
        "rec_depth": (_int, 3),
        "encoding": (_bool, False),
        "n_super": (_int, 2),
        "seed": (_int, 0),
    },
    "objective": {
        "mode": (_str, "wri"),
        "lambda": (_float, 300.0),
        "literal_boundary": (_bool, False),
        "sabotage_sign": (_bool, False),
    },
    "constraints": {
        "vmin": (_float, 1400.0),
        "vmax": (_float, 5000.0),
        "tau": (_opt(_float), None),
        "tau_frac": (_opt(_float), None),
        "xi": (_opt(_float), None),
        "xi_frac": (_opt(_float), None),
    },
    "sgp": {
        "sigma": (_float, 0.1),
        "xi1": (_float, 2.0),
        "xi2": (_float, 2.0),
        "rho": (_float, 1e-12),
        "eps": (_float, 1e-4),
        "c0": (_opt(_float), None),
        "max_outer": (_int, 25),
        "lambda_h_min": (_opt(_float), None),
        "lambda_h_max": (_opt(_float), None),
        "damping": (_str, "auto"),
        "nu": (_opt(_float), None),
        "max_rejections": (_int, 60),
        "hessian_floor": (_float, 0.0),
        "max_polish": (_float, 0.5),
    },
    "pdhg": {
        "tol": (_float, 1e-4),
        "max_iters": (_int, 20000),
        "step_ratio": (_float, 0.3),
    },
    "schedule": {
        "passes": (_opt(_int), None),
        "tau": (_floats, []),
        "tau_frac": (_floats, []),
        "xi": (_floats, []),
        "xi_frac": (_floats, []),
    },
}


def defaults() -> dict:
    return {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}


def parse_config(text: str) -> dict:
    cp = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), comment_prefixes=("#", ";"),
        delimiters=("=",), default_section="__none__",
    )
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    cfg = defaults()
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown config section [{sec}]")
        for key, raw in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown config key {key!r} in [{sec}]")
            conv = SCHEMA[sec][key][0]
            try:
                cfg[sec][key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for [{sec}] {key}: {raw!r} ({exc})") from exc
    return cfg


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _render(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: dict) -> str:
    lines = []
    for sec, keys in SCHEMA.items():
        lines.append(f"[{sec}]")
        for key in keys:
            lines.append(f"{key} = {_render(cfg[sec][key])}")
        lines.append("")
    return "\n".join(lines)


def frequencies_from_config(cfg: dict) -> list:
    acq = cfg["acquisition"]
    if acq["frequencies"]:
        return list(acq["frequencies"])
    n = int(math.floor((acq["fmax"] - acq["fmin"]) / acq["fstep"] + 1e-9)) + 1
    return [float(f) for f in acq["fmin"] + acq["fstep"] * np.arange(n)]


def wavelet_from_config(cfg: dict) -> Wavelet:
    return Wavelet(cfg["acquisition"]["peak_frequency"])


def geometry_from_config(cfg: dict, grid):
    a = cfg["acquisition"]
    return default_geometry(grid, a["src_step"], a["src_depth"], a["rec_step"], a["rec_depth"])


def _passes(cfg: dict) -> list:
    sch, con = cfg["schedule"], cfg["constraints"]
    lists = {k: sch[k] for k in ("tau", "tau_frac", "xi", "xi_frac")}
    n = sch["passes"] or max([len(v) for v in lists.values()] + [1])

    def pick(key, i):
        vals = lists[key]
        if vals:
            return vals[i] if i < len(vals) else vals[-1]
        return con[key]

    return [PassSpec(tau=pick("tau", i), tau_frac=pick("tau_frac", i),
                     xi=pick("xi", i), xi_frac=pick("xi_frac", i)) for i in range(n)]


def plan_from_config(cfg: dict) -> InversionPlan:
    s, o, a, p = cfg["sgp"], cfg["objective"], cfg["acquisition"], cfg["pdhg"]
    mode = o["mode"].lower()
    damping = s["damping"].lower()
    if damping == "auto":
        damping = "multiplicative" if mode == "fwi" else "additive"
    try:
        sgp = SgpParams(
            sigma=s["sigma"], xi1=s["xi1"], xi2=s["xi2"], rho=s["rho"], eps=s["eps"], c0=s["c0"],
            max_outer=s["max_outer"], lambda_h_min=s["lambda_h_min"], lambda_h_max=s["lambda_h_max"],
            damping_mode=damping, nu=s["nu"], max_rejections=s["max_rejections"],
            hessian_floor=s["hessian_floor"],
            max_polish=s["max_polish"],
            pdhg_tol=p["tol"], pdhg_max_iters=p["max_iters"], pdhg_step_ratio=p["step_ratio"],
        )
        return InversionPlan(
            mode=mode, lam=o["lambda"], frequencies=frequencies_from_config(cfg), passes=_passes(cfg),
            encoding=EncodingSpec(a["encoding"], a["n_super"], a["seed"]),
            vmin=cfg["constraints"]["vmin"], vmax=cfg["constraints"]["vmax"], sgp=sgp,
            literal_boundary=o["literal_boundary"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
