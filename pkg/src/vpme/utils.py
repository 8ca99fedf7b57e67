import numpy as np
from .electrostatics.electrostatics import ChargeMode, PotentialSplit, SolverSettings, solve_split_field
from .fields.fields import GridSpec, ScalarField, solve_free_space_poisson
from .kinetics.kinetics import InitialDataSpec, ParticleEnsemble, deposit_density, initial_state, run, \
    sample_initial
from .scenarios.scenarios import ProfileSpec, profile_field
from .stability.stability import Coupling, StabilityReport, verify_stability


def potential_of(rho: np.ndarray, half_width: float) -> np.ndarray:
    """
    Receives an ion density sampled on a cubic grid over [-L, L]^3 and returns its free-space Newtonian potential
    U_bar (the solution of -Lap U_bar = rho decaying at infinity).
    :param rho: n x n x n array of non-negative samples, n even.
    :param half_width: L, half the side of the box.
    :return: U_bar as an n x n x n array.
    """
    grid = GridSpec(half_width, rho.shape[0])
    return solve_free_space_poisson(ScalarField(grid, rho, name="rho")).values


def split_potential(rho: np.ndarray, g: np.ndarray, half_width: float, mode: str = "variable",
                    settings: SolverSettings = SolverSettings()) -> PotentialSplit:
    """
    Receives the ion density and the electron profile on the same cubic grid and returns the decomposition
    U = U_bar + U_hat of the potential together with the fields.
    :param rho: n x n x n array, non-negative.
    :param g: n x n x n array, non-negative; unit mass in the fixed mode.
    :param half_width: L, half the side of the box.
    :param mode: "variable" or "fixed" total charge.
    :param settings: solver settings, default is SolverSettings().
    :return: the PotentialSplit. If the screening iteration does not converge, a ConvergenceError is raised.
    """
    grid = GridSpec(half_width, rho.shape[0])
    return solve_split_field(ScalarField(grid, rho, name="rho"), ScalarField(grid, g, name="g"), ChargeMode(mode),
                             settings)


def simulate(spec: InitialDataSpec, g: ProfileSpec, grid: GridSpec, N: int, dt: float, T: float, seed: int = 0,
             mode: str = "variable", snapshot_every: int = 1) -> list:
    """
    Samples N particles from f0 and advances them to time T with the self-consistent split field.
    :param spec: initial data.
    :param g: electron profile.
    :param grid: the box.
    :param N: particle count.
    :param dt: time step.
    :param T: final time.
    :param seed: sampling seed, default is 0.
    :param mode: "variable" or "fixed" total charge.
    :param snapshot_every: snapshot cadence in steps.
    :return: the list of Snapshots from t = 0 to T.
    """
    state = initial_state(sample_initial(spec, N, seed), grid, profile_field(grid, g), ChargeMode(mode))
    return run(state, dt, T, snapshot_every)


def deposit(positions: np.ndarray, half_width: float, cells: int) -> np.ndarray:
    """
    Cloud-in-cell density of equal-weight particles (total mass 1).
    :param positions: N x 3 array.
    :return: n x n x n array.
    """
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    ens = ParticleEnsemble(positions, np.zeros_like(positions))
    return deposit_density(ens, GridSpec(half_width, cells)).values


def compare_runs(run1: list, run2: list) -> StabilityReport:
    """
    Receives two runs sampled with the same seed and particle count and returns their stability report along the
    identity coupling on particle ids.
    """
    return verify_stability(run1, run2, Coupling())
