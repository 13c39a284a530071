"""Sectioned run configuration: parsing, validation, canonical emission.

Files use INI syntax.  Numbers, lists and matrices are Python literals
(``L = [[0, 0], [0, 1]]``), booleans accept ``true``/``false``, strings
are bare words.  Every key is checked against a schema; unknown sections
or keys are rejected.

In ``[system]`` the flux matrices are ``A1 .. Ad`` and the linear parts
``T<k>_<m>`` (direction k, component m, both counted from 1); missing
``T`` entries are zero.
"""

import ast
import configparser
import re
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError
from .euler_solver import NormSpec, SolverConfig
from .littlewood_paley import BesovIndex, TorusGrid
from .pme_solver import PmeConfig
from .relaxation import SweepConfig
from .system_model import EulerParams, PartiallyDissipativeSystem, euler_system

FLOAT, INT, BOOL, STR, MATRIX, FLOATS, INTS, NORMS = (
    "float", "int", "bool", "str", "matrix", "floats", "ints", "norms")

SCHEMA = {
    "system": {"d": INT, "n1": INT, "L": MATRIX},
    "euler": {"gamma": FLOAT, "A": FLOAT, "rho_bar": FLOAT, "epsilon": FLOAT, "d": INT},
    "grid": {"d": INT, "N": INT, "L_len": FLOAT},
    "solver": {"dt": FLOAT, "T": FLOAT, "dealias": BOOL, "scheme": STR, "rescaled": BOOL,
               "diag_every": INT, "snapshot_every": INT, "transport": BOOL, "cfl": FLOAT},
    "initial": {"kind": STR, "amplitude": FLOAT, "seed": INT, "k0": INT, "band": INTS,
                "path": STR},
    "diagnostics": {"norms": NORMS, "damped": FLOATS, "p": FLOAT},
    "sweep": {"epsilons": FLOATS, "p": FLOAT, "k_p": INT, "amplitude": FLOAT, "seed": INT,
              "T": FLOAT, "velocity": STR, "band": INTS, "cfl": FLOAT, "dt_eps2": FLOAT,
              "uniform_T": FLOAT},
}
SECTION_ORDER = tuple(SCHEMA)
_SYSTEM_MATRIX = re.compile(r"^(A[1-9]|T[1-9]_[1-9][0-9]*)$")


def _key_type(section, key):
    kinds = SCHEMA[section]
    if key in kinds:
        return kinds[key]
    if section == "system" and _SYSTEM_MATRIX.match(key):
        return MATRIX
    raise ConfigurationError(f"unknown key {key!r} in section [{section}]")


def _literal(text, section, key):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError) as exc:
        raise ConfigurationError(f"[{section}] {key}: cannot parse {text!r}") from exc


def _convert(kind, text, section, key):
    where = f"[{section}] {key}"
    if kind == STR:
        s = text.strip()
        if len(s) >= 2 and s[0] == s[-1] and s[0] in "'\"":
            s = s[1:-1]
        return s
    if kind == BOOL:
        low = text.strip().lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigurationError(f"{where}: expected a boolean, got {text!r}")
    value = _literal(text, section, key)
    if kind == FLOAT:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{where}: expected a number, got {text!r}")
        return float(value)
    if kind == INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{where}: expected an integer, got {text!r}")
        return int(value)
    if kind in (FLOATS, INTS):
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"{where}: expected a list, got {text!r}")
        conv = FLOAT if kind == FLOATS else INT
        return tuple(_convert(conv, repr(v), section, key) for v in value)
    if kind == MATRIX:
        try:
            arr = np.array(value, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"{where}: not a numeric matrix") from exc
        if arr.ndim != 2:
            raise ConfigurationError(f"{where}: expected a bracketed 2-d matrix")
        return tuple(tuple(float(x) for x in row) for row in arr)
    if kind == NORMS:
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"{where}: expected a list of norm entries")
        out = []
        for entry in value:
            if not isinstance(entry, (list, tuple)) or len(entry) not in (6, 7):
                raise ConfigurationError(
                    f"{where}: entries are [name, field, s, p, r, part] or [..., part, J]")
            name, fld, s, p, r, part = entry[:6]
            J = entry[6] if len(entry) == 7 else None
            out.append((str(name), str(fld), float(s), float(p), float(r), str(part),
                        None if J is None else int(J)))
        return tuple(out)
    raise AssertionError(kind)


@dataclass(frozen=True)
class RunConfiguration:
    """Typed sections; equality compares content."""

    sections: dict

    def has(self, section):
        return section in self.sections

    def section(self, name):
        return self.sections.get(name, {})

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def require(self, section, key):
        try:
            return self.sections[section][key]
        except KeyError:
            raise ConfigurationError(f"missing key {key!r} in section [{section}]") from None


def parse_config(text):
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"), strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed configuration: {exc}") from exc
    sections = {}
    for name in parser.sections():
        if name not in SCHEMA:
            raise ConfigurationError(f"unknown section [{name}]")
        sections[name] = {key: _convert(_key_type(name, key), raw, name, key)
                          for key, raw in parser.items(name)}
    if "system" in sections and "euler" in sections:
        raise ConfigurationError("give either [system] or [euler], not both")
    return RunConfiguration(sections)


def load_config(path):
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigurationError(f"cannot read configuration {path}: {exc}") from exc


def _fmt(kind, value):
    if kind == STR:
        return value
    if kind == BOOL:
        return "true" if value else "false"
    if kind == FLOAT:
        return repr(float(value))
    if kind == INT:
        return str(int(value))
    if kind in (FLOATS, INTS):
        f = repr if kind == FLOATS else str
        return "[" + ", ".join(f(v) for v in value) + "]"
    if kind == MATRIX:
        return "[" + ", ".join("[" + ", ".join(repr(float(x)) for x in row) + "]"
                               for row in value) + "]"
    if kind == NORMS:
        items = []
        for name, fld, s, p, r, part, J in value:
            parts = [repr(name), repr(fld), repr(s), repr(p), repr(r), repr(part)]
            if J is not None:
                parts.append(str(J))
            items.append("[" + ", ".join(parts) + "]")
        return "[" + ", ".join(items) + "]"
    raise AssertionError(kind)


def _system_key_order(key):
    if key in SCHEMA["system"]:
        return (0, list(SCHEMA["system"]).index(key), 0, 0)
    if key.startswith("A"):
        return (1, int(key[1:]), 0, 0)
    k, m = key[1:].split("_")
    return (2, int(k), int(m), 0)


def emit_config(cfg):
    """Canonical INI text; ``parse_config(emit_config(cfg)) == cfg``."""
    lines = []
    for name in SECTION_ORDER:
        if name not in cfg.sections:
            continue
        sec = cfg.sections[name]
        if name == "system":
            keys = sorted(sec, key=_system_key_order)
        else:
            keys = [k for k in SCHEMA[name] if k in sec]
        if lines:
            lines.append("")
        lines.append(f"[{name}]")
        for key in keys:
            lines.append(f"{key} = {_fmt(_key_type(name, key), sec[key])}")
    return "\n".join(lines) + "\n"


# -- builders -----------------------------------------------------------------

def euler_params(cfg, epsilon=None):
    sec = cfg.section("euler")
    if not sec:
        raise ConfigurationError("missing [euler] section")
    eps = epsilon if epsilon is not None else sec.get("epsilon", 1.0)
    return EulerParams(cfg.require("euler", "gamma"), cfg.require("euler", "A"),
                       cfg.require("euler", "rho_bar"), eps)


def system_from_config(cfg):
    if cfg.has("euler"):
        return euler_system(euler_params(cfg), cfg.get("euler", "d", 1))
    if not cfg.has("system"):
        raise ConfigurationError("configuration needs a [system] or [euler] section")
    sec = cfg.section("system")
    d = cfg.require("system", "d")
    n1 = cfg.require("system", "n1")
    L = np.array(cfg.require("system", "L"))
    n = L.shape[0]
    try:
        A_bar = np.array([cfg.require("system", f"A{k}") for k in range(1, d + 1)])
    except ValueError as exc:
        raise ConfigurationError(f"flux matrices have inconsistent shapes: {exc}") from exc
    T = np.zeros((d, n, n, n))
    for key, value in sec.items():
        if key.startswith("T"):
            k, m = (int(x) for x in key[1:].split("_"))
            if not (1 <= k <= d and 1 <= m <= n):
                raise ConfigurationError(f"[system] {key}: index out of range")
            M = np.array(value)
            if M.shape != (n, n):
                raise ConfigurationError(f"[system] {key}: expected shape {(n, n)}")
            T[k - 1, m - 1] = M
    for k in range(1, d + 1):
        if f"A{k}" not in sec:
            raise ConfigurationError(f"[system] missing flux matrix A{k}")
    return PartiallyDissipativeSystem(A_bar=A_bar, T=T, L=L, n1=n1)


def system_to_config(system):
    sec = {"d": system.d, "n1": system.n1, "L": _matrix(system.L)}
    for k in range(system.d):
        sec[f"A{k + 1}"] = _matrix(system.A_bar[k])
        for m in range(system.n):
            if np.any(system.T[k, m] != 0):
                sec[f"T{k + 1}_{m + 1}"] = _matrix(system.T[k, m])
    return RunConfiguration({"system": sec})


def _matrix(M):
    return tuple(tuple(float(x) for x in row) for row in np.asarray(M))


def grid_from_config(cfg):
    if not cfg.has("grid"):
        raise ConfigurationError("missing [grid] section")
    return TorusGrid(cfg.get("grid", "d", 1), cfg.require("grid", "N"), cfg.get("grid", "L_len", 1.0))


def _norm_specs(cfg):
    specs = []
    for name, fld, s, p, r, part, J in cfg.get("diagnostics", "norms", ()):
        specs.append(NormSpec(name, fld, s, p, r, part, J))
    return tuple(specs)


def solver_config(cfg):
    grid = grid_from_config(cfg)
    sec = cfg.section("solver")
    damped = cfg.get("diagnostics", "damped")
    if damped is not None and len(damped) != 3:
        raise ConfigurationError("[diagnostics] damped = [s, p, r]")
    return SolverConfig(
        grid=grid,
        dt=cfg.require("solver", "dt"),
        T=cfg.require("solver", "T"),
        dealias=sec.get("dealias", True),
        scheme=sec.get("scheme", "if-rk4"),
        rescaled=sec.get("rescaled", False),
        diag_every=sec.get("diag_every", 1),
        diagnostics=_norm_specs(cfg),
        damped_index=None if damped is None else BesovIndex(*damped),
        snapshot_every=sec.get("snapshot_every", 0),
        transport=sec.get("transport", True),
        cfl=sec.get("cfl", 0.5),
    )


def pme_config(cfg):
    grid = grid_from_config(cfg)
    sec = cfg.section("solver")
    return PmeConfig(grid=grid, dt=cfg.require("solver", "dt"), T=cfg.require("solver", "T"),
                     diag_every=sec.get("diag_every", 1), p=cfg.get("diagnostics", "p", 2.0),
                     dealias=sec.get("dealias", True),
                     snapshot_every=sec.get("snapshot_every", 0))


def sweep_config(cfg):
    sec = cfg.section("sweep")
    e = cfg.section("euler")
    grid = grid_from_config(cfg) if cfg.has("grid") else TorusGrid(1, 512, 1.0)
    kwargs = {k: v for k, v in sec.items()}
    for key in ("gamma", "A", "rho_bar"):
        if key in e:
            kwargs[key] = e[key]
    return SweepConfig(grid=grid, **kwargs)


DEFAULTS = {
    "euler": {"epsilon": 1.0, "d": 1},
    "grid": {"d": 1, "L_len": 1.0},
    "solver": {"dealias": True, "scheme": "if-rk4", "rescaled": False, "diag_every": 1,
               "snapshot_every": 0, "transport": True, "cfl": 0.5},
    "initial": {"kind": "mode", "amplitude": 1e-6, "seed": 0, "k0": 1, "band": (1, 4)},
    "diagnostics": {"norms": (), "p": 2.0},
    "sweep": {"epsilons": (0.2, 0.1, 0.05, 0.025), "p": 2.0, "k_p": 2, "amplitude": 1e-2,
              "seed": 1, "T": 1.0, "velocity": "unscaled", "band": (1, 2), "cfl": 0.5,
              "dt_eps2": 0.25},
}


def resolve(cfg, sections=()):
    """Fill defaults into the present sections and into any listed in ``sections``."""
    out = {}
    for name in SECTION_ORDER:
        if name in cfg.sections or name in sections:
            merged = dict(DEFAULTS.get(name, {}))
            merged.update(cfg.sections.get(name, {}))
            out[name] = merged
    return RunConfiguration(out)


def replace_snapshots(solver_cfg, every=0):
    """Copy of a solver config that stores snapshots (initial and final at least)."""
    every = every or solver_cfg.snapshot_every or max(solver_cfg.n_steps, 1)
    return replace(solver_cfg, snapshot_every=int(every))
