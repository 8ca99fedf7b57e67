import hashlib
from dataclasses import dataclass
from importlib_resources import files
from ..electrostatics.electrostatics import ChargeMode, SolverSettings
from ..errors import ConfigError, VPMEError
from ..fields.fields import GridSpec
from ..kinetics.kinetics import InitialDataSpec
from ..scenarios.scenarios import ProfileSpec

DEFAULT_SCENARIO = "default_scenario.cfg"


def _vector(text: str) -> tuple:
    parts = tuple(float(p) for p in text.split(","))
    if len(parts) != 3:
        raise ValueError("expected three comma separated numbers")
    return parts


def _orders(text: str) -> tuple:
    return tuple(float(p) if "." in p else int(p) for p in (s.strip() for s in text.split(",")) if p)


# key -> parser of the value text
KEYS = {
    "grid.L": float, "grid.n": int, "particles.N": int, "seed": int, "mode": str, "dt": float, "T": float,
    "snapshot_every": int,
    "g.profile": str, "g.sigma": float, "g.center": _vector, "g.radius": float, "g.separation": float,
    "f0.profile": str, "f0.sigma": float, "f0.radius": float, "f0.center": _vector, "f0.separation": float,
    "f0.velocity": str, "f0.vth": float, "f0.r": float, "f0.m0": float, "f0.x0": _vector, "f0.v0": _vector,
    "f0.shift": _vector,
    "solver.tol": float, "solver.max_iter": int, "solver.theta": float, "solver.K": int, "solver.method": str,
    "diag.orders": _orders,
}

_F0_FIELDS = {"f0.profile": "spatial", "f0.sigma": "sigma", "f0.radius": "radius", "f0.center": "center",
              "f0.separation": "separation", "f0.velocity": "velocity", "f0.vth": "vth", "f0.r": "r",
              "f0.m0": "m0", "f0.x0": "x0", "f0.v0": "v0", "f0.shift": "shift"}
_G_FIELDS = {"g.profile": "profile", "g.sigma": "sigma", "g.center": "center", "g.radius": "radius",
             "g.separation": "separation"}
_SOLVER_FIELDS = {"solver.tol": "tolerance", "solver.max_iter": "max_iterations", "solver.theta": "damping",
                  "solver.K": "K", "solver.method": "method"}


@dataclass(frozen=True)
class ScenarioConfig:
    """
    A parsed scenario file. text keeps the exact source so the run can be hashed and reproduced.
    """
    grid: GridSpec
    particles: int
    seed: int
    mode: ChargeMode
    dt: float
    T: float
    snapshot_every: int
    g: ProfileSpec
    f0: InitialDataSpec
    solver: SolverSettings
    orders: tuple
    text: str = ""

    @property
    def digest(self) -> str:
        return config_hash(self.text)


def config_hash(text: str) -> str:
    """
    SHA-256 of the config bytes (utf-8).
    """
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _tokenize(text: str) -> dict:
    """
    :return: key -> (parsed value, 1-based line number).
    """
    entries = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(number, f"expected 'key = value', got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(number, f"unknown key '{key}'")
        if key in entries:
            raise ConfigError(number, f"duplicate key '{key}' (first set on line {entries[key][1]})")
        try:
            entries[key] = (KEYS[key](value), number)
        except ValueError as error:
            raise ConfigError(number, f"cannot parse {key} = '{value}': {error}") from error
    return entries


def parse_config(text: str) -> ScenarioConfig:
    """
    Parses a flat 'key = value' scenario text. Unset keys take the package defaults.
    :param text: the file content.
    :return: a ScenarioConfig.
    """
    entries = _tokenize(text)

    def get(key: str, default):
        return entries[key][0] if key in entries else default

    def build(keys: tuple, factory, mapping: dict, **extra):
        try:
            return factory(**extra, **{mapping[k]: entries[k][0] for k in mapping if k in entries})
        except VPMEError as error:
            lines = [entries[k][1] for k in keys if k in entries]
            raise ConfigError(max(lines) if lines else 0, str(error)) from error

    grid = build(("grid.L", "grid.n"), lambda half_width=4.0, cells=32: GridSpec(half_width, cells),
                 {"grid.L": "half_width", "grid.n": "cells"})
    for key, minimum in (("dt", 0.0), ("T", 0.0)):
        if key in entries and not entries[key][0] > minimum:
            raise ConfigError(entries[key][1], f"{key} must be positive")
    for key in ("particles.N", "snapshot_every"):
        if key in entries and entries[key][0] < 1:
            raise ConfigError(entries[key][1], f"{key} must be at least 1")
    try:
        mode = ChargeMode(get("mode", "variable"))
    except ValueError as error:
        raise ConfigError(entries["mode"][1], "mode must be 'variable' or 'fixed'") from error
    orders = get("diag.orders", (2, 4, 6))
    if not orders or any(k < 0 for k in orders):
        raise ConfigError(entries["diag.orders"][1], "diag.orders must be a non-empty list of non-negative orders")
    return ScenarioConfig(grid=grid, particles=get("particles.N", 10000), seed=get("seed", 0), mode=mode,
                          dt=get("dt", 0.01), T=get("T", 1.0), snapshot_every=get("snapshot_every", 1),
                          g=build(tuple(_G_FIELDS), ProfileSpec, _G_FIELDS),
                          f0=build(tuple(_F0_FIELDS), InitialDataSpec, _F0_FIELDS),
                          solver=build(tuple(_SOLVER_FIELDS), SolverSettings, _SOLVER_FIELDS),
                          orders=tuple(orders), text=text)


def load_config(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config(handle.read())


def default_config_text() -> str:
    """
    the bundled default scenario.
    """
    return files("vpme.data").joinpath(DEFAULT_SCENARIO).read_text(encoding="utf-8")


def default_config() -> ScenarioConfig:
    return parse_config(default_config_text())
