from dataclasses import dataclass
import numpy as np
from ..errors import InvalidParameterError, InvalidSpecError
from ..fields.fields import GridSpec, ScalarField

PROFILES = ("gaussian", "ball", "two_bump")


@dataclass(frozen=True)
class ProfileSpec:
    """
    A unit-mass spatial profile on the grid, used for g and for reference densities.
    """
    profile: str = "gaussian"
    sigma: float = 0.5
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 1.0
    separation: float = 1.5
    mass: float = 1.0

    def __post_init__(self) -> None:
        if self.profile not in PROFILES:
            raise InvalidSpecError(f"unknown profile '{self.profile}', expected one of {PROFILES}")
        if not (self.sigma > 0 and self.radius > 0 and self.mass > 0):
            raise InvalidSpecError("sigma, radius and mass must be positive")
        if len(self.center) != 3:
            raise InvalidSpecError("center needs three components")


def _normalized(grid: GridSpec, values: np.ndarray, mass: float, name: str) -> ScalarField:
    total = float(np.sum(values)) * grid.cell_volume
    if total <= 0:
        raise InvalidParameterError(name, total, "the profile does not intersect the grid")
    return ScalarField(grid, values * (mass / total), nonnegative=True, name=name)


def _offsets(grid: GridSpec, center) -> tuple:
    x, y, z = grid.mesh()
    return x - center[0], y - center[1], z - center[2]


def gaussian_density(grid: GridSpec, sigma: float, center=(0.0, 0.0, 0.0), mass: float = 1.0,
                     name: str = "rho") -> ScalarField:
    """
    Gaussian bump renormalised so that its midpoint-rule integral is exactly mass.
    """
    dx, dy, dz = _offsets(grid, center)
    return _normalized(grid, np.exp(-(dx ** 2 + dy ** 2 + dz ** 2) / (2.0 * sigma ** 2)), mass, name)


def ball_density(grid: GridSpec, radius: float, center=(0.0, 0.0, 0.0), mass: float = 1.0,
                 name: str = "rho") -> ScalarField:
    dx, dy, dz = _offsets(grid, center)
    return _normalized(grid, (dx ** 2 + dy ** 2 + dz ** 2 <= radius ** 2).astype(np.float64), mass, name)


def two_bump_density(grid: GridSpec, sigma: float, separation: float, center=(0.0, 0.0, 0.0), mass: float = 1.0,
                     name: str = "rho") -> ScalarField:
    """
    two equal Gaussians at center -/+ (separation/2, 0, 0).
    """
    dx, dy, dz = _offsets(grid, center)
    r2 = dy ** 2 + dz ** 2
    values = (np.exp(-((dx + 0.5 * separation) ** 2 + r2) / (2.0 * sigma ** 2))
              + np.exp(-((dx - 0.5 * separation) ** 2 + r2) / (2.0 * sigma ** 2)))
    return _normalized(grid, values, mass, name)


def profile_field(grid: GridSpec, spec: ProfileSpec, name: str = "g") -> ScalarField:
    """
    samples a ProfileSpec on a grid.
    """
    if spec.profile == "gaussian":
        return gaussian_density(grid, spec.sigma, spec.center, spec.mass, name)
    if spec.profile == "ball":
        return ball_density(grid, spec.radius, spec.center, spec.mass, name)
    return two_bump_density(grid, spec.sigma, spec.separation, spec.center, spec.mass, name)


def generate_random_density(grid: GridSpec, seed: int = 0, bumps: int = 3, width_bounds=(0.3, 0.7),
                            mass: float = 1.0) -> ScalarField:
    """
    Generates a smooth random density: a sum of Gaussian bumps with random centres, widths and weights, kept inside
    the central half of the box.
    :param grid: target grid.
    :param seed: generator seed.
    :param bumps: number of bumps, default is 3.
    :param width_bounds: lower and upper bound on the bump widths, relative to a quarter of the box half-width.
    :param mass: integral of the result, default is 1.
    :return: A non-negative ScalarField of the given mass.
    """
    rng = np.random.default_rng(seed)
    quarter = 0.25 * grid.half_width
    x, y, z = grid.mesh()
    values = np.zeros(grid.shape)
    for _ in range(bumps):
        c = rng.uniform(-quarter, quarter, size=3)
        s = quarter * rng.uniform(*width_bounds)
        values += rng.uniform(0.5, 1.5) * np.exp(-((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2)
                                                 / (2.0 * s ** 2))
    return _normalized(grid, values, mass, "rho")


def interior_bump(grid: GridSpec, center, width: float) -> np.ndarray:
    """
    smooth compactly supported bump (1 - r^2/w^2)^3 vanishing on the outermost cell layer.
    """
    dx, dy, dz = _offsets(grid, center)
    q = 1.0 - (dx ** 2 + dy ** 2 + dz ** 2) / width ** 2
    bump = np.where(q > 0, q ** 3, 0.0)
    bump[0, :, :] = bump[-1, :, :] = 0.0
    bump[:, 0, :] = bump[:, -1, :] = 0.0
    bump[:, :, 0] = bump[:, :, -1] = 0.0
    return bump


def random_perturbations(grid: GridSpec, count: int = 20, seed: int = 0, amplitude: float = 0.1) -> list:
    """
    Generates signed interior bumps with random centres, widths and amplitudes for variational checks.
    """
    rng = np.random.default_rng(seed)
    half = 0.5 * grid.half_width
    directions = []
    for _ in range(count):
        width = rng.uniform(3.0, 6.0) * grid.spacing
        bump = interior_bump(grid, rng.uniform(-half, half, size=3), width)
        directions.append(rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 1.0) * amplitude * bump)
    return directions


@dataclass(frozen=True)
class Scenario:
    name: str
    rho: ScalarField
    g: ScalarField


def density_battery(grid: GridSpec, seed: int = 0) -> list:
    """
    The six reference (rho, g) pairs used by the constant fits and the acceptance checks: neutral equilibrium,
    a compact ion ball, a narrow ion bump, a two-bump ion density, a random ion density and a wide electron
    profile under a concentrated ion cloud.
    """
    scale = grid.half_width
    g = gaussian_density(grid, 0.12 * scale, name="g")
    return [
        Scenario("neutral", g.like(g.values.copy(), name="rho"), g),
        Scenario("ball", ball_density(grid, 0.25 * scale), g),
        Scenario("narrow", gaussian_density(grid, 0.1 * scale), g),
        Scenario("two_bump", two_bump_density(grid, 0.12 * scale, 0.35 * scale), g),
        Scenario("random", generate_random_density(grid, seed), g),
        Scenario("wide_g", gaussian_density(grid, 0.12 * scale), gaussian_density(grid, 0.16 * scale, name="g")),
    ]
