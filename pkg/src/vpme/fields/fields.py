import functools
import logging
import math
import struct
import warnings
from dataclasses import dataclass
import numpy as np
import scipy.fft as sp_fft
from ..errors import GridMismatchError, InvalidFieldError, InvalidParameterError
from ..helper_funcs.helper_funcs import fft_workers, laplacian
from ..user_messages import SUPPORT_GUARD_MSG, INVALID_FIELD_MSG, NEGATIVE_FIELD_MSG

logger = logging.getLogger(__name__)

FIELD_MAGIC = b"VPMEF1"
DIRECT_SUMMATION_CAP = 32
SUPPORT_GUARD_FRACTION = 1e-6
RESOLVED_LEVEL_CELLS = 64
# integral of 1/|x| over the unit cube centred at the origin
UNIT_CUBE_SELF_INTEGRAL = 3.0 * math.log(2.0 + math.sqrt(3.0)) - math.pi / 2.0


@dataclass(frozen=True)
class GridSpec:
    """
    Uniform cell-centred grid on the cube [-L, L]^3, the truncation of R^3 all fields are sampled on.
    """
    half_width: float
    cells: int

    def __post_init__(self) -> None:
        if not self.half_width > 0 or not math.isfinite(self.half_width):
            raise InvalidParameterError("half_width", self.half_width, "must be positive and finite")
        if self.cells < 8 or self.cells % 2:
            raise InvalidParameterError("cells", self.cells, "must be an even integer >= 8")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.cells

    @property
    def cell_volume(self) -> float:
        return self.spacing ** 3

    @property
    def shape(self) -> tuple:
        return self.cells, self.cells, self.cells

    def centers(self) -> np.ndarray:
        """
        :return: the 1-D array of cell-centre coordinates along one axis.
        """
        return -self.half_width + (np.arange(self.cells) + 0.5) * self.spacing

    def mesh(self) -> tuple:
        """
        :return: (X, Y, Z) coordinate arrays of shape (n, n, n), 'ij' indexing (first index is x).
        """
        c = self.centers()
        return tuple(np.meshgrid(c, c, c, indexing="ij"))

    def radius(self) -> np.ndarray:
        """
        :return: |x| at every cell centre.
        """
        x, y, z = self.mesh()
        return np.sqrt(x ** 2 + y ** 2 + z ** 2)


@dataclass
class ScalarField:
    """
    A real function sampled at the cell centres of a grid (densities, g, and the potentials).
    """
    grid: GridSpec
    values: np.ndarray
    nonnegative: bool = False
    name: str = "field"

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise InvalidFieldError(INVALID_FIELD_MSG.format(f"shape {self.values.shape} != {self.grid.shape}"))
        if not np.all(np.isfinite(self.values)):
            raise InvalidFieldError(INVALID_FIELD_MSG.format(f"'{self.name}' has NaN or infinite samples"))
        if self.nonnegative and self.values.size and self.values.min() < 0:
            raise InvalidFieldError(NEGATIVE_FIELD_MSG.format(self.name, float(self.values.min())))

    def integral(self) -> float:
        """
        midpoint-rule integral of the field over the box.
        """
        return float(np.sum(self.values)) * self.grid.cell_volume

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def like(self, values: np.ndarray, name: str = None, nonnegative: bool = False) -> "ScalarField":
        """
        returns a new field on the same grid.
        """
        return ScalarField(self.grid, values, nonnegative=nonnegative, name=name or self.name)

    @classmethod
    def zeros(cls, grid: GridSpec, name: str = "zero") -> "ScalarField":
        return cls(grid, np.zeros(grid.shape), name=name)


@dataclass
class VectorField:
    """
    Three component arrays on a grid, e.g. the fields E, E_bar and E_hat.
    """
    grid: GridSpec
    components: tuple
    name: str = "vector"

    def __post_init__(self) -> None:
        comps = tuple(np.asarray(c, dtype=np.float64) for c in self.components)
        if len(comps) != 3 or any(c.shape != self.grid.shape for c in comps):
            raise InvalidFieldError(INVALID_FIELD_MSG.format("vector fields need three components on the grid"))
        if not all(np.all(np.isfinite(c)) for c in comps):
            raise InvalidFieldError(INVALID_FIELD_MSG.format(f"'{self.name}' has NaN or infinite samples"))
        self.components = comps

    def magnitude(self) -> ScalarField:
        """
        :return: the pointwise Euclidean norm |E| as a scalar field.
        """
        x, y, z = self.components
        return ScalarField(self.grid, np.sqrt(x ** 2 + y ** 2 + z ** 2), nonnegative=True, name=f"|{self.name}|")

    def squared_l2(self) -> float:
        """
        midpoint-rule integral of |E|^2 over the box.
        """
        return float(sum(np.sum(c ** 2) for c in self.components)) * self.grid.cell_volume

    def __add__(self, other: "VectorField") -> "VectorField":
        check_same_grid(self.grid, other.grid)
        return VectorField(self.grid, tuple(a + b for a, b in zip(self.components, other.components)),
                           name=f"{self.name}+{other.name}")

    def __sub__(self, other: "VectorField") -> "VectorField":
        check_same_grid(self.grid, other.grid)
        return VectorField(self.grid, tuple(a - b for a, b in zip(self.components, other.components)),
                           name=f"{self.name}-{other.name}")


@dataclass(frozen=True)
class NormReport:
    l1: float
    l53: float
    l2: float
    linf: float
    weak_l3: float
    weak_l32: float


def check_same_grid(*grids: GridSpec) -> None:
    """
    raises GridMismatchError unless all grids are equal.
    """
    for grid in grids[1:]:
        if grid != grids[0]:
            raise GridMismatchError(grids[0], grid)


def check_field(u) -> None:
    """
    re-validates a field whose values may have been mutated in place.
    """
    arrays = u.components if isinstance(u, VectorField) else (u.values,)
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise InvalidFieldError(INVALID_FIELD_MSG.format(f"'{u.name}' has NaN or infinite samples"))


@functools.lru_cache(maxsize=8)
def _green_kernel(grid: GridSpec) -> np.ndarray:
    """
    Green kernel 1/(4 pi |x|) sampled on the doubled grid in wrap-around order. The singular cell holds the cell
    average of the kernel over one cell.
    """
    n, h = grid.cells, grid.spacing
    offsets = np.arange(2 * n)
    offsets = np.where(offsets <= n, offsets, offsets - 2 * n).astype(np.float64)
    dx, dy, dz = np.meshgrid(offsets, offsets, offsets, indexing="ij", sparse=True)
    r = h * np.sqrt(dx ** 2 + dy ** 2 + dz ** 2)
    r[0, 0, 0] = 1.0
    kernel = 1.0 / (4.0 * math.pi * r)
    kernel[0, 0, 0] = UNIT_CUBE_SELF_INTEGRAL / (4.0 * math.pi * h)
    return kernel


@functools.lru_cache(maxsize=8)
def _green_kernel_hat(grid: GridSpec) -> np.ndarray:
    return sp_fft.rfftn(_green_kernel(grid), workers=fft_workers())


def _support_guard(rho: ScalarField) -> None:
    total = float(np.sum(np.abs(rho.values)))
    if total == 0.0:
        return
    x, y, z = rho.grid.mesh()
    shell = np.maximum(np.maximum(np.abs(x), np.abs(y)), np.abs(z)) > 0.75 * rho.grid.half_width
    fraction = float(np.sum(np.abs(rho.values[shell]))) / total
    if fraction > SUPPORT_GUARD_FRACTION:
        warnings.warn(SUPPORT_GUARD_MSG.format(fraction), RuntimeWarning)


def green_convolution(rho: ScalarField, method: str = "fft") -> np.ndarray:
    """
    computes (G * rho)(x_i) = sum_j G(x_i - x_j) rho_j h^3 with the free-space kernel G = 1/(4 pi |x|).
    :param rho: source density.
    :param method: "fft" for the zero-padded doubled-grid transform, "direct" for the O(n^6) summation (n <= 32).
    :return: array of shape (n, n, n).
    """
    check_field(rho)
    grid = rho.grid
    n = grid.cells
    if method == "fft":
        padded = np.zeros((2 * n,) * 3)
        padded[:n, :n, :n] = rho.values
        workers = fft_workers()
        conv = sp_fft.irfftn(sp_fft.rfftn(padded, workers=workers) * _green_kernel_hat(grid), s=padded.shape,
                             workers=workers)
        return conv[:n, :n, :n] * grid.cell_volume
    if method == "direct":
        if n > DIRECT_SUMMATION_CAP:
            raise InvalidParameterError("method", method, f"direct summation is limited to n <= "
                                                          f"{DIRECT_SUMMATION_CAP}")
        kernel = np.fft.fftshift(_green_kernel(grid))[1:, 1:, 1:]  # offsets -(n-1)..(n-1), centre at n-1
        result = np.zeros(grid.shape)
        for i, j, k in zip(*np.nonzero(rho.values)):
            result += rho.values[i, j, k] * kernel[n - 1 - i:2 * n - 1 - i, n - 1 - j:2 * n - 1 - j,
                                                   n - 1 - k:2 * n - 1 - k]
        return result * grid.cell_volume
    raise InvalidParameterError("method", method, "expected 'fft' or 'direct'")


def _dirichlet_solve(rho: np.ndarray, boundary: np.ndarray, h: float) -> np.ndarray:
    """
    solves -Lap_h u = rho on interior cells with u fixed to boundary on the outermost layer (DST-I).
    """
    n = rho.shape[0]
    m = n - 2
    frame = boundary.copy()
    frame[1:-1, 1:-1, 1:-1] = 0.0
    rhs = rho[1:-1, 1:-1, 1:-1] + (frame[2:, 1:-1, 1:-1] + frame[:-2, 1:-1, 1:-1]
                                   + frame[1:-1, 2:, 1:-1] + frame[1:-1, :-2, 1:-1]
                                   + frame[1:-1, 1:-1, 2:] + frame[1:-1, 1:-1, :-2]) / h ** 2
    eig = (2.0 - 2.0 * np.cos(np.pi * np.arange(1, m + 1) / (m + 1))) / h ** 2
    denom = eig[:, None, None] + eig[None, :, None] + eig[None, None, :]
    workers = fft_workers()
    coeffs = sp_fft.dstn(rhs, type=1, norm="ortho", workers=workers) / denom
    frame[1:-1, 1:-1, 1:-1] = sp_fft.idstn(coeffs, type=1, norm="ortho", workers=workers)
    return frame


def solve_free_space_poisson(rho: ScalarField, method: str = "fft", discrete: bool = None,
                             guard: bool = True) -> ScalarField:
    """
    Free-space solution U_bar of -Lap U_bar = rho on the truncated box, decaying like 1/(4 pi |x|).
    The Green convolution supplies the free-space values; with discrete=True the interior is then replaced by the
    exact solution of the 7-point problem with those values held on the outermost layer, so that the discrete
    Laplacian of the result reproduces -rho on every interior cell. The "direct" method returns the plain summed
    convolution unless discrete=True is asked for.
    :param rho: source density, finite.
    :param method: "fft" or "direct", see green_convolution.
    :param discrete: whether to apply the 7-point interior solve; None means True for "fft" and False for "direct".
    :param guard: whether to warn when the source reaches into the outer quarter of the box.
    :return: U_bar as a ScalarField on the same grid.
    """
    check_field(rho)
    if guard:
        _support_guard(rho)
    values = green_convolution(rho, method)
    if discrete is None:
        discrete = method == "fft"
    if discrete:
        values = _dirichlet_solve(rho.values, values, rho.grid.spacing)
    logger.debug("free-space Poisson solve on n=%d (%s, discrete=%s)", rho.grid.cells, method, discrete)
    return ScalarField(rho.grid, values, name="U_bar")


def poisson_residual(u: ScalarField, rho: ScalarField) -> float:
    """
    relative L2 residual ||Lap_h u + rho|| / ||rho|| on interior cells.
    """
    check_same_grid(u.grid, rho.grid)
    target = rho.values[1:-1, 1:-1, 1:-1]
    scale = float(np.linalg.norm(target))
    res = float(np.linalg.norm(laplacian(u.values, u.grid.spacing) + target))
    return res / scale if scale > 0 else res


def negative_gradient(u: ScalarField) -> VectorField:
    """
    E = -grad u with second-order central differences in the interior and second-order one-sided differences on the
    faces.
    :param u: potential, finite.
    :return: the vector field -grad u.
    """
    check_field(u)
    grads = np.gradient(u.values, u.grid.spacing, edge_order=2)
    return VectorField(u.grid, tuple(-g for g in grads), name=f"-grad {u.name}")


def _as_magnitude(u) -> np.ndarray:
    if isinstance(u, VectorField):
        return u.magnitude().values
    return np.abs(u.values)


def lp_norm(u, p: float) -> float:
    """
    midpoint-rule L^p norm (sum |u|^p h^3)^(1/p), or the max for p = inf. Vector fields use |u|.
    :param u: ScalarField or VectorField.
    :param p: exponent in [1, inf].
    :return: the norm, non-negative.
    """
    if not p >= 1:
        raise InvalidParameterError("p", p, "L^p norms need p >= 1")
    check_field(u)
    a = _as_magnitude(u)
    if math.isinf(p):
        return float(a.max())
    return float((np.sum(a ** p) * u.grid.cell_volume) ** (1.0 / p))


def weak_lp_quasinorm(u, p: float, resolved_cells: int = RESOLVED_LEVEL_CELLS) -> float:
    """
    Weak L^p quasi-norm sup_t t * |{|u| > t}|^(1/p), the thresholds swept over the sorted sample magnitudes (each
    threshold taken as the limit from below, so a level set of height a and measure m gives a * m^(1/p)).
    Only levels whose superlevel set holds at least resolved_cells cells enter the sup, since cell-centre samples
    near a point singularity over-count the measure of its top level sets. Fields supported on fewer cells use
    every level.
    :param u: ScalarField or VectorField.
    :param p: exponent, positive.
    :param resolved_cells: smallest superlevel set, in cells, taken into account; 1 keeps every level.
    :return: the quasi-norm, non-negative.
    """
    if not p > 0:
        raise InvalidParameterError("p", p, "weak L^p quasi-norms need p > 0")
    if resolved_cells < 1:
        raise InvalidParameterError("resolved_cells", resolved_cells, "must be at least 1")
    check_field(u)
    a = np.sort(_as_magnitude(u).ravel())[::-1]
    a = a[a > 0]
    if a.size == 0:
        return 0.0
    measure = np.arange(1, a.size + 1) * u.grid.cell_volume
    values = a * measure ** (1.0 / p)
    if a.size >= resolved_cells:
        values = values[resolved_cells - 1:]
    return float(np.max(values))


def norm_report(u) -> NormReport:
    """
    :return: the NormReport of a scalar or vector field.
    """
    return NormReport(l1=lp_norm(u, 1), l53=lp_norm(u, 5.0 / 3.0), l2=lp_norm(u, 2), linf=lp_norm(u, math.inf),
                      weak_l3=weak_lp_quasinorm(u, 3), weak_l32=weak_lp_quasinorm(u, 1.5))


def holder_seminorm_sample(u, alpha: float, pairs: int = 20000, seed: int = 0, max_distance: float = None) -> float:
    """
    sampled Holder quotient max |u(x) - u(y)| / |x - y|^alpha over random pairs of distinct cell centres. This is a
    mesh-dependent lower estimate of the seminorm, not a certificate.
    :param u: ScalarField or VectorField (vector differences use the Euclidean norm).
    :param alpha: exponent in (0, 1].
    :param pairs: number of sampled pairs.
    :param seed: seed of the pair sampler.
    :param max_distance: optional cap on |x - y|, to sample small scales.
    :return: the largest sampled quotient.
    """
    if not 0 < alpha <= 1:
        raise InvalidParameterError("alpha", alpha, "must lie in (0, 1]")
    grid = u.grid
    rng = np.random.default_rng(seed)
    n = grid.cells
    first = rng.integers(0, n, size=(pairs, 3))
    if max_distance is None:
        second = rng.integers(0, n, size=(pairs, 3))
    else:
        reach = max(1, int(max_distance / grid.spacing))
        second = np.clip(first + rng.integers(-reach, reach + 1, size=(pairs, 3)), 0, n - 1)
    dist = grid.spacing * np.linalg.norm(first - second, axis=1)
    keep = dist > 0
    first, second, dist = first[keep], second[keep], dist[keep]
    arrays = u.components if isinstance(u, VectorField) else (u.values,)
    diff2 = np.zeros(dist.shape)
    for a in arrays:
        diff2 += (a[tuple(first.T)] - a[tuple(second.T)]) ** 2
    if dist.size == 0:
        return 0.0
    return float(np.max(np.sqrt(diff2) / dist ** alpha))


@dataclass(frozen=True)
class UbarEstimateReport:
    """
    Measured left and right sides of the integrability estimates on U_bar and E_bar. The ratio of each pair is the
    constant the estimate needs on this density.
    """
    rho_l1: float
    rho_l53: float
    ubar_weak_l3: float
    ubar_linf: float
    ubar_holder_fifth: float
    ebar_weak_l32: float
    ebar_l154: float

    @property
    def ratios(self) -> dict:
        interp = self.rho_l53 ** (5.0 / 6.0) * self.rho_l1 ** (1.0 / 6.0)
        return {"weak_l3": _ratio(self.ubar_weak_l3, self.rho_l1),
                "linf": _ratio(self.ubar_linf, interp),
                "holder_fifth": _ratio(self.ubar_holder_fifth, self.rho_l53),
                "ebar_weak_l32": _ratio(self.ebar_weak_l32, self.rho_l1),
                "ebar_l154": _ratio(self.ebar_l154, self.rho_l53)}


def _ratio(lhs: float, rhs: float) -> float:
    if rhs > 0:
        return lhs / rhs
    return 0.0 if lhs == 0 else math.inf


def ubar_estimate_report(rho: ScalarField, u_bar: ScalarField, seed: int = 0) -> UbarEstimateReport:
    """
    measures both sides of the U_bar / E_bar estimates for one density.
    :param rho: source density.
    :param u_bar: its free-space potential.
    :param seed: seed of the Holder pair sampler.
    :return: an UbarEstimateReport.
    """
    check_same_grid(rho.grid, u_bar.grid)
    e_bar = negative_gradient(u_bar)
    return UbarEstimateReport(rho_l1=lp_norm(rho, 1), rho_l53=lp_norm(rho, 5.0 / 3.0),
                              ubar_weak_l3=weak_lp_quasinorm(u_bar, 3), ubar_linf=lp_norm(u_bar, math.inf),
                              ubar_holder_fifth=holder_seminorm_sample(u_bar, 0.2, seed=seed),
                              ebar_weak_l32=weak_lp_quasinorm(e_bar, 1.5), ebar_l154=lp_norm(e_bar, 15.0 / 4.0))


def fit_constants(reports: list) -> dict:
    """
    smallest constant per estimate making it hold across a battery of UbarEstimateReports.
    """
    constants = {}
    for report in reports:
        for key, value in report.ratios.items():
            constants[key] = max(constants.get(key, 0.0), value)
    return constants


def write_field(u: ScalarField, path) -> None:
    """
    writes the binary record: magic "VPMEF1", n (int32), L (float64), then n^3 float64 samples, x fastest.
    """
    header = FIELD_MAGIC + struct.pack("<i", u.grid.cells) + struct.pack("<d", u.grid.half_width)
    with open(path, "wb") as handle:
        handle.write(header)
        handle.write(np.asarray(u.values, dtype="<f8").ravel(order="F").tobytes())


def read_field(path, name: str = "field") -> ScalarField:
    """
    reads a field written by write_field.
    """
    with open(path, "rb") as handle:
        data = handle.read()
    if data[:len(FIELD_MAGIC)] != FIELD_MAGIC:
        raise InvalidFieldError(INVALID_FIELD_MSG.format(f"{path} is not a field file"))
    offset = len(FIELD_MAGIC)
    (n,) = struct.unpack_from("<i", data, offset)
    (half_width,) = struct.unpack_from("<d", data, offset + 4)
    grid = GridSpec(half_width, n)
    values = np.frombuffer(data, dtype="<f8", count=n ** 3, offset=offset + 12).reshape(grid.shape, order="F")
    return ScalarField(grid, values.copy(), name=name)


def export_csv(u: ScalarField, path) -> None:
    """
    writes x,y,z,value rows (x fastest) for plotting.
    """
    x, y, z = u.grid.mesh()
    table = np.column_stack([a.ravel(order="F") for a in (x, y, z, u.values)])
    np.savetxt(path, table, delimiter=",", header="x,y,z,value", comments="", fmt="%.17g")
