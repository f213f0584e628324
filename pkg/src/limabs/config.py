"""Run configuration: TOML loading, schema validation, and scene assembly.

A run config is a plain nested dict with sections

    [grid]       h, n, r0, obstacle (inline table or "none")
    [material]   kind = vacuum | radial | tabulated, plus kind parameters
    [bc]         rule = all_pec | all_pmc | hemisphere
    [frequency]  omega, omega_im, schedule = {sigma0, ratio, n_max}
    [source]     kind = bump | dipole, plus kind parameters
    [solver]     tol, budget, method
    [outputs]    dir, formats
    seed         top-level integer

Validation reports the failing section and key in every message so a bad
config can be fixed without reading code.  ``config_hash`` gives a stable
digest of the canonicalized config that output writers embed for provenance.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import tomli

from .errors import ConfigError

_KNOWN_SECTIONS = {"grid", "material", "bc", "frequency", "source",
                   "solver", "outputs"}
_KNOWN_TOP = _KNOWN_SECTIONS | {"seed"}

_DEFAULTS = {
    "grid": {"h": 0.25, "n": 16, "r0": 1.0, "obstacle": "none"},
    "material": {"kind": "vacuum"},
    "bc": {"rule": "all_pec"},
    "frequency": {"omega": 1.0, "omega_im": 0.5},
    "source": {"kind": "bump", "center": [1.1, 0.0, 0.0], "width": 0.35,
               "component": "e"},
    "solver": {"tol": 1e-10, "budget": 1e9, "method": "auto"},
    "outputs": {"dir": ".", "formats": ["vtk", "json", "csv"]},
}


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration plus its provenance hash."""
    grid: dict
    material: dict
    bc: dict
    frequency: dict
    source: dict
    solver: dict
    outputs: dict
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def hash(self):
        return config_hash(self.raw)

    def omega(self):
        return complex(self.frequency["omega"],
                       self.frequency.get("omega_im", 0.0))


def _fail(section, key, why):
    raise ConfigError(f"{section}.{key} {why}")


def _require_number(section, data, key, *, positive=False, integer=False,
                    allow_zero=False):
    if key not in data:
        _fail(section, key, "is required")
    val = data[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        _fail(section, key, f"must be a number, got {val!r}")
    if integer and int(val) != val:
        _fail(section, key, f"must be an integer, got {val!r}")
    if positive and not (val > 0 or (allow_zero and val == 0)):
        _fail(section, key, f"must be positive, got {val!r}")
    return val


def _merged(user):
    cfg = {}
    for section, defaults in _DEFAULTS.items():
        got = dict(defaults)
        got.update(user.get(section, {}) or {})
        cfg[section] = got
    cfg["seed"] = user.get("seed", 0)
    return cfg


def validate_config(data):
    """Validate a raw config dict and return a ``RunConfig``.

    Raises ``ConfigError`` naming the offending section and key.
    """
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table of sections")
    for key in data:
        if key not in _KNOWN_TOP:
            raise ConfigError(f"unknown config section {key!r}; expected one "
                              f"of {sorted(_KNOWN_TOP)}")
    cfg = _merged(data)

    g = cfg["grid"]
    _require_number("grid", g, "h", positive=True)
    n = _require_number("grid", g, "n", positive=True, integer=True)
    if n < 4:
        _fail("grid", "n", "must be at least 4")
    _require_number("grid", g, "r0", positive=True)
    obs = g.get("obstacle", "none")
    if obs not in (None, "none") and not isinstance(obs, dict):
        _fail("grid", "obstacle", 'must be "none" or an inline table')
    if isinstance(obs, dict) and obs.get("kind") not in ("sphere", "box",
                                                         "union"):
        _fail("grid", "obstacle.kind",
              "must be one of sphere, box, union")

    m = cfg["material"]
    if m.get("kind") not in ("vacuum", "radial", "tabulated"):
        _fail("material", "kind", "must be one of vacuum, radial, tabulated")

    b = cfg["bc"]
    if b.get("rule") not in ("all_pec", "all_pmc", "hemisphere"):
        _fail("bc", "rule", "must be one of all_pec, all_pmc, hemisphere")

    fr = cfg["frequency"]
    _require_number("frequency", fr, "omega")
    if "omega_im" in fr:
        _require_number("frequency", fr, "omega_im")
    if fr["omega"] == 0 and fr.get("omega_im", 0.0) == 0:
        _fail("frequency", "omega", "must be nonzero")
    sched = fr.get("schedule")
    if sched is not None:
        if not isinstance(sched, dict):
            _fail("frequency", "schedule", "must be an inline table")
        _require_number("frequency.schedule", sched, "sigma0", positive=True)
        ratio = _require_number("frequency.schedule", sched, "ratio")
        if not 0.0 < ratio < 1.0:
            raise ConfigError("schedule.ratio must be in (0,1)")
        n_max = _require_number("frequency.schedule", sched, "n_max",
                                positive=True, integer=True)
        if n_max < 2:
            _fail("frequency.schedule", "n_max", "must be at least 2")
    elif fr.get("omega_im", 0.0) == 0.0:
        raise ConfigError("frequency needs omega_im != 0 or a schedule")

    src = cfg["source"]
    if src.get("kind") not in ("bump", "dipole"):
        _fail("source", "kind", "must be one of bump, dipole")
    if src["kind"] == "bump":
        _require_number("source", src, "width", positive=True)
        if "cut" in src:
            _require_number("source", src, "cut", positive=True)
        c = src.get("center", [0.0, 0.0, 0.0])
        if not (isinstance(c, (list, tuple)) and len(c) == 3):
            _fail("source", "center", "must be a 3-vector")

    sv = cfg["solver"]
    _require_number("solver", sv, "tol", positive=True)
    _require_number("solver", sv, "budget", positive=True)
    if sv.get("method") not in ("auto", "direct", "fft"):
        _fail("solver", "method", "must be one of auto, direct, fft")

    out = cfg["outputs"]
    if not isinstance(out.get("dir"), str):
        _fail("outputs", "dir", "must be a path string")
    fm = out.get("formats", [])
    bad = [x for x in fm if x not in ("vtk", "json", "csv")]
    if bad:
        _fail("outputs", "formats", f"contains unknown entries {bad}")

    seed = cfg["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}")

    return RunConfig(grid=g, material=m, bc=b, frequency=fr, source=src,
                     solver=sv, outputs=out, seed=seed, raw=cfg)


def load_config(path):
    """Load and validate a TOML run config from disk."""
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}")
    return validate_config(data)


def config_hash(cfg_dict):
    """Stable short digest of a canonicalized config dict."""
    canon = json.dumps(cfg_dict, sort_keys=True, separators=(",", ":"),
                       default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def build_scene(cfg):
    """Assemble (grid, labeling, material, operator) from a ``RunConfig``."""
    from .grid import build_grid, classify_boundary
    from .materials import build_material
    from .operators import DiscreteMaxwellOperator

    g = cfg.grid
    obs = g.get("obstacle")
    obstacle = None if obs in (None, "none") else obs
    grid = build_grid(h=g["h"], n=int(g["n"]), obstacle=obstacle, r0=g["r0"])
    labeling = classify_boundary(grid, cfg.bc["rule"])
    mat = build_material(dict(cfg.material), grid)
    op = DiscreteMaxwellOperator(grid, labeling, mat)
    return grid, labeling, mat, op


def build_source(cfg, op):
    """Source field on the scene's dofs, as described by [source]."""
    import numpy as np
    from .operators import FieldPair
    from .oracles import dipole_field

    src = cfg.source
    dofs = op.dofs
    if src["kind"] == "dipole":
        return dipole_field(dofs, cfg.omega(),
                            center=tuple(src.get("center", (0, 0, 0))))
    c = np.asarray(src.get("center", (0.0, 0.0, 0.0)), dtype=float)
    w = float(src["width"])
    cut = float(src.get("cut", 4.0 * w))
    comp = src.get("component", "e")
    pts = dofs.edge_dof_points() if comp == "e" else dofs.face_dof_points()
    rr = np.linalg.norm(pts - c, axis=1)
    vals = np.exp(-(rr / w) ** 2) * (rr < cut)
    if comp == "e":
        return FieldPair(vals.astype(complex),
                         np.zeros(dofs.n_face, complex), dofs)
    return FieldPair(np.zeros(dofs.n_edge, complex),
                     vals.astype(complex), dofs)
