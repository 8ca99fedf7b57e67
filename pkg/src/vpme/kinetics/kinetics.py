import logging
import math
import struct
import warnings
from dataclasses import dataclass, field, replace
import numpy as np
from scipy.special import betaincinv, beta as beta_function, ndtri
from scipy.stats import qmc
from ..electrostatics.electrostatics import ChargeMode, PotentialSplit, SolverSettings, solve_split_field
from ..errors import InvalidFieldError, InvalidParameterError, InvalidSpecError, StaleStateError, StepError, \
    TruncationError, VPMEError
from ..fields.fields import GridSpec, ScalarField, VectorField, check_same_grid
from ..user_messages import CFL_MSG, INVALID_FIELD_MSG, OUT_OF_BOX_MSG

logger = logging.getLogger(__name__)

SNAPSHOT_MAGIC = b"VPMEP1"
SNAPSHOT_RECORD = np.dtype([("id", "<i8"), ("x", "<f8", (3,)), ("v", "<f8", (3,))])
TRUNCATION_FRACTION = 0.01
MAX_HALVINGS = 8
SPATIAL_PROFILES = ("gaussian", "ball", "two_bump", "point")
VELOCITY_PROFILES = ("maxwellian", "power", "cold", "point")
_UNIFORM_CLIP = 1e-12


@dataclass
class ParticleEnsemble:
    """
    Equal-weight particles carrying the ion distribution f; particle i has weight 1/N and a stable id.
    """
    positions: np.ndarray
    velocities: np.ndarray
    ids: np.ndarray = None

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.velocities = np.asarray(self.velocities, dtype=np.float64).reshape(-1, 3)
        if self.positions.shape != self.velocities.shape or self.count < 1:
            raise InvalidParameterError("ensemble", self.positions.shape, "positions and velocities must both be "
                                                                          "N x 3 with N >= 1")
        if self.ids is None:
            self.ids = np.arange(self.count, dtype=np.int64)
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if not np.array_equal(np.sort(self.ids), np.arange(self.count)):
            raise InvalidParameterError("ids", self.ids.shape, "ids must be a permutation of 0..N-1")

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def weight(self) -> float:
        return 1.0 / self.count

    @property
    def mass(self) -> float:
        return self.count * self.weight

    def speeds(self) -> np.ndarray:
        return np.linalg.norm(self.velocities, axis=1)

    def copy(self) -> "ParticleEnsemble":
        return ParticleEnsemble(self.positions.copy(), self.velocities.copy(), self.ids.copy())


@dataclass(frozen=True)
class InitialDataSpec:
    """
    Initial ion distribution f0(x, v) = (spatial profile)(x) x (velocity profile)(v).
    :param spatial: "gaussian", "ball", "two_bump" (two Gaussians split along x) or "point" (at x0).
    :param velocity: "maxwellian" (thermal speed vth), "power" (density proportional to (1 + |v|)^-r), "cold" or
                     "point" (at v0).
    :param shift: rigid displacement added to every sampled position (paired stability runs).
    """
    spatial: str = "gaussian"
    velocity: str = "maxwellian"
    sigma: float = 0.5
    radius: float = 1.0
    center: tuple = (0.0, 0.0, 0.0)
    separation: float = 1.5
    vth: float = 1.0
    r: float = 6.0
    m0: float = 7.0
    x0: tuple = (0.0, 0.0, 0.0)
    v0: tuple = (0.0, 0.0, 0.0)
    shift: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if self.spatial not in SPATIAL_PROFILES:
            raise InvalidSpecError(f"unknown spatial profile '{self.spatial}', expected one of {SPATIAL_PROFILES}")
        if self.velocity not in VELOCITY_PROFILES:
            raise InvalidSpecError(f"unknown velocity profile '{self.velocity}', expected one of "
                                   f"{VELOCITY_PROFILES}")
        if self.velocity == "power" and not self.r > 3:
            raise InvalidSpecError(f"the velocity tail exponent r must exceed 3 (got {self.r})")
        if not (self.sigma > 0 and self.radius > 0 and self.vth > 0 and self.separation >= 0):
            raise InvalidSpecError("sigma, radius and vth must be positive, separation non-negative")
        if not self.m0 > 0:
            raise InvalidSpecError(f"the tracked moment order m0 must be positive (got {self.m0})")
        for name in ("center", "x0", "v0", "shift"):
            if len(getattr(self, name)) != 3:
                raise InvalidSpecError(f"{name} needs three components")

    def spatial_dimensions(self) -> int:
        return {"gaussian": 3, "ball": 3, "two_bump": 4, "point": 0}[self.spatial]

    def velocity_dimensions(self) -> int:
        return {"maxwellian": 3, "power": 3, "cold": 0, "point": 0}[self.velocity]


@dataclass
class SimulationState:
    """
    Time, particles and the cached split field of the ensemble's deposited density. The cache is valid only while
    stale is False.
    """
    time: float
    ensemble: ParticleEnsemble
    grid: GridSpec
    g: ScalarField
    mode: ChargeMode = ChargeMode.VARIABLE
    settings: SolverSettings = SolverSettings()
    split: PotentialSplit = None
    steps: int = 0
    stale: bool = True
    out_of_box_events: int = 0
    frozen_field: callable = field(default=None, repr=False)


@dataclass(frozen=True)
class Snapshot:
    time: float
    ids: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    @classmethod
    def of(cls, state: SimulationState) -> "Snapshot":
        ens = state.ensemble
        arrays = [ens.ids.copy(), ens.positions.copy(), ens.velocities.copy()]
        for a in arrays:
            a.setflags(write=False)
        return cls(state.time, *arrays)

    def ensemble(self) -> ParticleEnsemble:
        return ParticleEnsemble(self.positions.copy(), self.velocities.copy(), self.ids.copy())


# sampling

def _unit_directions(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    cos_theta = 2.0 * u1 - 1.0
    sin_theta = np.sqrt(np.maximum(0.0, 1.0 - cos_theta ** 2))
    phi = 2.0 * math.pi * u2
    return np.column_stack([sin_theta * np.cos(phi), sin_theta * np.sin(phi), cos_theta])


def _sample_positions(spec: InitialDataSpec, u: np.ndarray) -> np.ndarray:
    n = u.shape[0]
    center = np.asarray(spec.center, dtype=np.float64)
    if spec.spatial == "gaussian":
        x = center + spec.sigma * ndtri(u)
    elif spec.spatial == "ball":
        x = center + spec.radius * np.cbrt(u[:, :1]) * _unit_directions(u[:, 1], u[:, 2])
    elif spec.spatial == "two_bump":
        offset = np.where(u[:, 3] < 0.5, -0.5, 0.5) * spec.separation
        x = center + spec.sigma * ndtri(u[:, :3])
        x[:, 0] += offset
    else:
        x = np.tile(np.asarray(spec.x0, dtype=np.float64), (n, 1))
    return x + np.asarray(spec.shift, dtype=np.float64)


def _sample_velocities(spec: InitialDataSpec, u: np.ndarray, n: int) -> np.ndarray:
    if spec.velocity == "maxwellian":
        return spec.vth * ndtri(u)
    if spec.velocity == "power":
        # |v| = s / (1 - s) with s ~ Beta(3, r - 3) has radial density proportional to v^2 (1 + v)^-r
        s = betaincinv(3.0, spec.r - 3.0, u[:, 0])
        speed = s / (1.0 - s)
        return speed[:, None] * _unit_directions(u[:, 1], u[:, 2])
    if spec.velocity == "cold":
        return np.zeros((n, 3))
    return np.tile(np.asarray(spec.v0, dtype=np.float64), (n, 1))


def sample_initial(spec: InitialDataSpec, N: int, seed: int = 0) -> ParticleEnsemble:
    """
    Draws N equal-weight particles from f0 with a scrambled Halton sequence (stratified, deterministic in the seed),
    mapped through the inverse CDFs of the profiles.
    :param spec: the InitialDataSpec.
    :param N: number of particles, at least 1.
    :param seed: scrambling seed.
    :return: the ParticleEnsemble, ids 0..N-1.
    """
    if N < 1:
        raise InvalidParameterError("N", N, "need at least one particle")
    ds, dv = spec.spatial_dimensions(), spec.velocity_dimensions()
    if ds + dv:
        u = qmc.Halton(d=ds + dv, scramble=True, seed=seed).random(N)
        u = np.clip(u, _UNIFORM_CLIP, 1.0 - _UNIFORM_CLIP)
    else:
        u = np.zeros((N, 0))
    positions = _sample_positions(spec, u[:, :ds])
    velocities = _sample_velocities(spec, u[:, ds:], N)
    logger.debug("sampled %d particles (%s x %s, seed %d)", N, spec.spatial, spec.velocity, seed)
    return ParticleEnsemble(positions, velocities)


def _spatial_peak(spec: InitialDataSpec) -> float:
    gaussian_peak = (2.0 * math.pi * spec.sigma ** 2) ** -1.5
    if spec.spatial == "gaussian":
        return gaussian_peak
    if spec.spatial == "ball":
        return 3.0 / (4.0 * math.pi * spec.radius ** 3)
    if spec.spatial == "two_bump":
        # the maximum of the two-bump mixture lies on the segment joining the bumps
        t = np.linspace(-0.5, 0.5, 2001) * spec.separation
        half = 0.5 * spec.separation
        profile = 0.5 * (np.exp(-(t - half) ** 2 / (2 * spec.sigma ** 2))
                         + np.exp(-(t + half) ** 2 / (2 * spec.sigma ** 2)))
        return gaussian_peak * float(profile.max())
    return math.inf


def _velocity_peak(spec: InitialDataSpec) -> float:
    if spec.velocity == "maxwellian":
        return (2.0 * math.pi * spec.vth ** 2) ** -1.5
    if spec.velocity == "power":
        return 1.0 / (4.0 * math.pi * beta_function(3.0, spec.r - 3.0))
    return math.inf


def f_inf_bound(spec: InitialDataSpec) -> float:
    """
    analytic sup of f0 (math.inf for point or cold profiles).
    """
    return _spatial_peak(spec) * _velocity_peak(spec)


def velocity_moment(spec: InitialDataSpec, k: float) -> float:
    """
    analytic M_k of the velocity profile: Maxwellian moments via the Gamma function, power-law moments via the Beta
    function (finite for k < r - 3).
    """
    if spec.velocity == "maxwellian":
        return spec.vth ** k * 2.0 ** (k / 2.0) * math.gamma((k + 3.0) / 2.0) / math.gamma(1.5)
    if spec.velocity == "power":
        if k >= spec.r - 3.0:
            return math.inf
        return beta_function(3.0 + k, spec.r - 3.0 - k) / beta_function(3.0, spec.r - 3.0)
    if spec.velocity == "cold":
        return 1.0 if k == 0 else 0.0
    return float(np.linalg.norm(spec.v0)) ** k


# particle <-> mesh

def inside_box(positions: np.ndarray, grid: GridSpec) -> np.ndarray:
    return np.all(np.abs(positions) <= grid.half_width, axis=1)


def _cic_stencil(positions: np.ndarray, grid: GridSpec) -> tuple:
    """
    flat indices and trilinear weights (N x 8) of the cells around each position; positions within half a cell of
    a face put the outward weight on the face cell.
    """
    n = grid.cells
    xi = np.clip((positions + grid.half_width) / grid.spacing - 0.5, 0.0, n - 1.0)
    base = np.minimum(np.floor(xi).astype(np.int64), n - 2)
    frac = xi - base
    indices = np.empty((positions.shape[0], 8), dtype=np.int64)
    weights = np.empty((positions.shape[0], 8))
    corner = 0
    for dx in (0, 1):
        wx = frac[:, 0] if dx else 1.0 - frac[:, 0]
        for dy in (0, 1):
            wy = frac[:, 1] if dy else 1.0 - frac[:, 1]
            for dz in (0, 1):
                wz = frac[:, 2] if dz else 1.0 - frac[:, 2]
                indices[:, corner] = ((base[:, 0] + dx) * n + base[:, 1] + dy) * n + base[:, 2] + dz
                weights[:, corner] = wx * wy * wz
                corner += 1
    return indices, weights


def out_of_box_mass(ens: ParticleEnsemble, grid: GridSpec) -> float:
    return float(np.count_nonzero(~inside_box(ens.positions, grid))) * ens.weight


def deposit_density(ens: ParticleEnsemble, grid: GridSpec) -> ScalarField:
    """
    Cloud-in-cell deposition of the particle weights onto the cell-centred grid, so that the integral of the
    result equals the in-box mass.
    :param ens: the particles.
    :param grid: target grid.
    :return: rho_f as a non-negative ScalarField.
    """
    inside = inside_box(ens.positions, grid)
    outside = int(inside.size - np.count_nonzero(inside))
    if outside:
        lost = outside * ens.weight
        if lost > TRUNCATION_FRACTION:
            raise TruncationError(lost)
        warnings.warn(OUT_OF_BOX_MSG.format(outside), RuntimeWarning)
    indices, weights = _cic_stencil(ens.positions[inside], grid)
    counts = np.bincount(indices.ravel(), weights=(weights * ens.weight).ravel(), minlength=grid.cells ** 3)
    return ScalarField(grid, counts.reshape(grid.shape) / grid.cell_volume, nonnegative=True, name="rho")


def interpolate_acceleration(E: VectorField, positions: np.ndarray) -> np.ndarray:
    """
    Trilinear gather of E at the particle positions with the deposition weights; particles outside the box get
    zero acceleration.
    :param E: the electric field.
    :param positions: N x 3 array.
    :return: N x 3 array of accelerations.
    """
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    inside = inside_box(positions, E.grid)
    acc = np.zeros(positions.shape)
    indices, weights = _cic_stencil(positions[inside], E.grid)
    for axis, component in enumerate(E.components):
        acc[inside, axis] = np.sum(component.ravel()[indices] * weights, axis=1)
    return acc


def gather_scalar(u: ScalarField, positions: np.ndarray) -> np.ndarray:
    """
    trilinear gather of a scalar field (zero outside the box), the adjoint of deposit_density.
    """
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    inside = inside_box(positions, u.grid)
    values = np.zeros(positions.shape[0])
    indices, weights = _cic_stencil(positions[inside], u.grid)
    values[inside] = np.sum(u.values.ravel()[indices] * weights, axis=1)
    return values


# time stepping

def solve_state_field(state: SimulationState) -> SimulationState:
    """
    deposits the current ensemble and re-solves the split field, warm-starting U_hat from the cached one.
    :return: a new state with a fresh cache.
    """
    if state.frozen_field is not None:
        return replace(state, split=None, stale=False)
    rho = deposit_density(state.ensemble, state.grid)
    initial = state.split.u_hat if state.split is not None else None
    split = solve_split_field(rho, state.g, state.mode, state.settings, initial=initial)
    return replace(state, split=split, stale=False)


def initial_state(ens: ParticleEnsemble, grid: GridSpec, g: ScalarField, mode=ChargeMode.VARIABLE,
                  settings: SolverSettings = SolverSettings(), frozen_field: callable = None,
                  time: float = 0.0) -> SimulationState:
    """
    builds the state at time t and solves its field.
    :param frozen_field: optional callable positions -> accelerations replacing the self-consistent field.
    """
    check_same_grid(grid, g.grid)
    state = SimulationState(time=time, ensemble=ens.copy(), grid=grid, g=g, mode=ChargeMode(mode),
                            settings=settings, frozen_field=frozen_field)
    return solve_state_field(state)


def current_field(state: SimulationState) -> VectorField:
    """
    :return: the cached total field E; raises StaleStateError if the cache does not match the particles.
    """
    if state.stale or state.split is None:
        raise StaleStateError()
    return state.split.e_total


def _accelerations(state: SimulationState, positions: np.ndarray) -> np.ndarray:
    if state.frozen_field is not None:
        return np.asarray(state.frozen_field(positions), dtype=np.float64).reshape(-1, 3)
    return interpolate_acceleration(current_field(state), positions)


def cfl_bound(ens: ParticleEnsemble, grid: GridSpec) -> float:
    vmax = float(ens.speeds().max())
    return grid.spacing / (4.0 * vmax) if vmax > 0 else math.inf


def _kick_drift_kick(state: SimulationState, dt: float) -> SimulationState:
    ens = state.ensemble
    half_kick = 0.5 * dt * _accelerations(state, ens.positions)
    velocities = ens.velocities + half_kick
    positions = ens.positions + dt * velocities
    moved = ParticleEnsemble(positions, velocities, ens.ids.copy())
    outside = int(np.count_nonzero(~inside_box(positions, state.grid)))
    state = solve_state_field(replace(state, ensemble=moved, stale=True))
    moved.velocities = moved.velocities + 0.5 * dt * _accelerations(state, moved.positions)
    return replace(state, time=state.time + dt, steps=state.steps + 1,
                   out_of_box_events=state.out_of_box_events + outside)


def step(state: SimulationState, dt: float, mode=None, frozen_field: callable = None) -> SimulationState:
    """
    Kick-drift-kick leapfrog step: half kick with the current field, drift, re-deposit and re-solve the split
    field, half kick. When dt exceeds h / (4 max|V|) the step is taken as 2^k equal sub-steps (k <= 8).
    :param state: current state, not modified.
    :param dt: time step, positive.
    :param mode: optional ChargeMode overriding the state's mode.
    :param frozen_field: optional callable overriding the state's frozen field.
    :return: the state at t + dt.
    """
    if not dt > 0:
        raise InvalidParameterError("dt", dt, "must be positive")
    if mode is not None and ChargeMode(mode) is not state.mode:
        state = solve_state_field(replace(state, mode=ChargeMode(mode), stale=True))
    if frozen_field is not None:
        state = replace(state, frozen_field=frozen_field, split=None, stale=False)
    if state.frozen_field is None and state.stale:
        state = solve_state_field(state)
    bound = cfl_bound(state.ensemble, state.grid)
    halvings = 0
    while dt / 2 ** halvings > bound:
        halvings += 1
        if halvings > MAX_HALVINGS:
            raise StepError(state.time, InvalidParameterError("dt", dt, CFL_MSG.format(dt, bound, MAX_HALVINGS)))
    if halvings:
        logger.debug("dt=%.3e split into %d sub-steps (CFL bound %.3e)", dt, 2 ** halvings, bound)
    sub_dt = dt / 2 ** halvings
    start_time = state.time
    current = state
    for _ in range(2 ** halvings):
        try:
            current = _kick_drift_kick(current, sub_dt)
        except (VPMEError, ArithmeticError) as error:
            raise StepError(current.time, error) from error
    return replace(current, time=start_time + dt, steps=state.steps + 1)


def run(state: SimulationState, dt: float, T: float, snapshot_every: int = 1, observer: callable = None,
        on_step: callable = None) -> list:
    """
    Advances a state to the final time T, recording a Snapshot at t = 0, every snapshot_every steps and at T.
    :param state: the initial state.
    :param dt: time step (the last step is shortened to land on T).
    :param T: final time, non-negative.
    :param snapshot_every: snapshot cadence in steps.
    :param observer: optional callable(state) invoked at every recorded snapshot.
    :param on_step: optional callable(state) invoked at t = 0 and after every step.
    :return: the list of Snapshots.
    """
    if T < 0:
        raise InvalidParameterError("T", T, "must be non-negative")
    if snapshot_every < 1:
        raise InvalidParameterError("snapshot_every", snapshot_every, "must be at least 1")
    t0 = state.time
    steps = int(math.ceil(T / dt - 1e-9)) if T > 0 else 0
    snapshots = [Snapshot.of(state)]
    if observer is not None:
        observer(state)
    if on_step is not None:
        on_step(state)
    for index in range(1, steps + 1):
        target = t0 + min(index * dt, T)
        state = step(state, target - state.time)
        state = replace(state, time=target)
        if on_step is not None:
            on_step(state)
        if index % snapshot_every == 0 or index == steps:
            snapshots.append(Snapshot.of(state))
            if observer is not None:
                observer(state)
    logger.info("run finished at t=%.4f after %d steps (%d snapshots)", state.time, steps, len(snapshots))
    return snapshots


def velocity_support_growth(snapshots: list) -> float:
    """
    max|V(t)| - max|V(0)| over a run, to be compared with T sup_t ||E||_inf.
    """
    v0 = float(np.linalg.norm(snapshots[0].velocities, axis=1).max())
    return max(float(np.linalg.norm(s.velocities, axis=1).max()) for s in snapshots) - v0


# persistence

def write_snapshot(snapshot: Snapshot, path) -> None:
    """
    writes "VPMEP1", N (int64), time (float64), then N records (id int64, X 3 x float64, V 3 x float64).
    """
    records = np.empty(snapshot.ids.shape[0], dtype=SNAPSHOT_RECORD)
    records["id"] = snapshot.ids
    records["x"] = snapshot.positions
    records["v"] = snapshot.velocities
    with open(path, "wb") as handle:
        handle.write(SNAPSHOT_MAGIC + struct.pack("<q", records.size) + struct.pack("<d", snapshot.time))
        handle.write(records.tobytes())


def read_snapshot(path) -> Snapshot:
    with open(path, "rb") as handle:
        data = handle.read()
    if data[:len(SNAPSHOT_MAGIC)] != SNAPSHOT_MAGIC:
        raise InvalidFieldError(INVALID_FIELD_MSG.format(f"{path} is not a snapshot file"))
    offset = len(SNAPSHOT_MAGIC)
    (count,) = struct.unpack_from("<q", data, offset)
    (time,) = struct.unpack_from("<d", data, offset + 8)
    records = np.frombuffer(data, dtype=SNAPSHOT_RECORD, count=count, offset=offset + 16)
    arrays = [records["id"].copy(), records["x"].copy(), records["v"].copy()]
    for a in arrays:
        a.setflags(write=False)
    return Snapshot(time, *arrays)
