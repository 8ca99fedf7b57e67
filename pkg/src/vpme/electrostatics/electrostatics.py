import enum
import logging
import math
from dataclasses import dataclass, field
import numpy as np
from scipy.optimize import newton_krylov, NoConvergence
from ..errors import ConvergenceError, GuardViolationError, InvalidFieldError, InvalidNormalizationError, \
    InvalidParameterError
from ..fields.fields import ScalarField, VectorField, check_field, check_same_grid, holder_seminorm_sample, \
    lp_norm, negative_gradient, solve_free_space_poisson, weak_lp_quasinorm
from ..helper_funcs.helper_funcs import dirichlet_energy, graph_laplacian, interior, laplacian, \
    smallest_feasible_constant
from ..user_messages import NEGATIVE_FIELD_MSG

logger = logging.getLogger(__name__)

NORMALIZATION_TOLERANCE = 1e-3
DEFAULT_BOUCHUT_CONSTANT = 10.0
SIGN_TOLERANCE = 1e-12
GROWTH_STREAK = 2


class ChargeMode(str, enum.Enum):
    """
    The two closures for the electron density: g e^U (variable total charge) or g e^U / int g e^U (fixed).
    """
    VARIABLE = "variable"
    FIXED = "fixed"


@dataclass(frozen=True)
class SolverSettings:
    """
    Knobs of the nonlinear screening solvers.
    :param tolerance: relative residual at which the iteration stops.
    :param max_iterations: sweeps allowed before a ConvergenceError.
    :param damping: initial damping theta in (0, 1]; halved on residual increase down to theta_floor and doubled
        back, up to this value, after two sweeps accepted in a row.
    :param K: cutoff of the regularised logarithm L_K (fixed total charge).
    :param method: "picard" (damped fixed point on the Green representation) or "newton" (Newton-Krylov).
    :param theta_floor: smallest damping before the solver gives up.
    """
    tolerance: float = 1e-8
    max_iterations: int = 500
    damping: float = 1.0
    K: int = 30
    method: str = "picard"
    theta_floor: float = 1.0 / 64.0

    def __post_init__(self) -> None:
        if not self.tolerance > 0:
            raise InvalidParameterError("tolerance", self.tolerance, "must be positive")
        if not 0 < self.damping <= 1:
            raise InvalidParameterError("damping", self.damping, "must lie in (0, 1]")
        if self.max_iterations < 1:
            raise InvalidParameterError("max_iterations", self.max_iterations, "must be at least 1")
        if self.K < 2:
            raise InvalidParameterError("K", self.K, "must be at least 2")
        if self.method not in ("picard", "newton"):
            raise InvalidParameterError("method", self.method, "expected 'picard' or 'newton'")


@dataclass
class PotentialSplit:
    """
    The decomposition U = U_bar + U_hat of the potential for one density, with the total field and the solver
    certificate.
    """
    u_bar: ScalarField
    u_hat: ScalarField
    e_bar: VectorField
    e_hat: VectorField
    e_total: VectorField
    mode: ChargeMode
    residual: float
    iterations: int
    electron_mass: float = None
    rho: ScalarField = None
    residual_history: list = field(default_factory=list)

    @property
    def u_total(self) -> ScalarField:
        return self.u_bar.like(self.u_bar.values + self.u_hat.values, name="U")


@dataclass(frozen=True)
class BouchutCertificate:
    """
    Lower bound on int g e^{-|u|} of the form exp(-c ||u||_{L^{3,inf}} ||g||_inf^{1/3}).
    """
    lower_bound: float
    measured: float
    u_weak_l3: float
    g_linf: float
    constant: float

    @property
    def holds(self) -> bool:
        return self.measured >= self.lower_bound


def check_electron_profile(g: ScalarField) -> None:
    check_field(g)
    if g.values.min() < 0:
        raise InvalidFieldError(NEGATIVE_FIELD_MSG.format(g.name, float(g.values.min())))


def _check_u_bar(u_bar: ScalarField) -> None:
    check_field(u_bar)
    if u_bar.values.min() < -SIGN_TOLERANCE * max(1.0, u_bar.max_abs()):
        raise InvalidFieldError(NEGATIVE_FIELD_MSG.format(u_bar.name, float(u_bar.values.min())))


def normalized_profile(g: ScalarField, normalize_g: bool = False) -> ScalarField:
    """
    checks that g has unit mass, renormalizing it only when asked to.
    :param g: electron profile.
    :param normalize_g: whether to divide g by its mass instead of failing.
    :return: g, or g / int g.
    """
    mass = g.integral()
    if normalize_g and mass > 0:
        return g.like(g.values / mass)
    if abs(mass - 1.0) > NORMALIZATION_TOLERANCE:
        raise InvalidNormalizationError(mass)
    return g


# regularised logarithm of the fixed-charge functional

def _check_k(K: int) -> None:
    if K < 2:
        raise InvalidParameterError("K", K, "must be at least 2")


def _bridge(s, K: int):
    """
    position t in [0, 1] of log x inside the bridge [-K-1, -K].
    """
    return np.clip(np.asarray(s, dtype=np.float64) + K + 1.0, 0.0, 1.0)


def _log(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.log(np.maximum(x, 0.0))


def l_k(x, K: int):
    """
    C^2 non-decreasing regularisation of log: log x for x >= e^-K, constant -K - 1/2 for x <= e^-(K+1), and a
    quintic-smoothstep bridge in log x in between.
    :param x: non-negative scalar or array.
    :param K: cutoff, at least 2.
    :return: L_K(x), same shape as x.
    """
    _check_k(K)
    s = _log(x)
    t = _bridge(s, K)
    bridge = -K - 0.5 + t ** 6 - 3.0 * t ** 5 + 2.5 * t ** 4
    result = np.where(s >= -K, s, bridge)
    return result if result.ndim else float(result)


def m_k(x, K: int):
    """
    M_K(x) = x L_K'(x), the slope of L_K in log x; it lies in [0, 1].
    """
    _check_k(K)
    s = _log(x)
    t = _bridge(s, K)
    result = np.where(s >= -K, 1.0, 6.0 * t ** 5 - 15.0 * t ** 4 + 10.0 * t ** 3)
    return result if result.ndim else float(result)


def l_k_prime(x, K: int):
    """
    L_K'(x) = M_K(x) / x, zero on the lower plateau. Since 0 <= M_K <= 1 and the bridge starts at e^-(K+1),
    0 <= L_K'(x) <= min(1/x, e^(K+1)); its largest value, about 1.154 e^K, sits inside the bridge.
    """
    x = np.asarray(x, dtype=np.float64)
    slope = np.asarray(m_k(x, K))
    with np.errstate(divide="ignore", invalid="ignore"):
        result = np.where(slope > 0, slope / np.where(x > 0, x, 1.0), 0.0)
    return result if result.ndim else float(result)


# the solvers

def _inverse_laplacian(q: np.ndarray, grid, method: str = "fft") -> np.ndarray:
    """
    free-space solution S(q) of -Lap S = q.
    """
    return solve_free_space_poisson(ScalarField(grid, q, name="source"), method=method, discrete=True,
                                    guard=False).values


def _relative_residual(u_hat: np.ndarray, q: np.ndarray, h: float) -> float:
    target = interior(q)
    scale = float(np.linalg.norm(target))
    res = float(np.linalg.norm(laplacian(u_hat, h) - target))
    return res / scale if scale > 0 else res


class _ScreeningProblem:
    """
    Lap U_hat = N(U_hat) for one of the charge closures, with N(u) = g e^{U_bar + u} (variable) or
    g e^{U_bar + u} L_K'(int g e^{U_bar + u}) (fixed).
    """

    def __init__(self, u_bar: ScalarField, g: ScalarField, mode: ChargeMode, settings: SolverSettings) -> None:
        self.grid = u_bar.grid
        self.h = u_bar.grid.spacing
        self.u_bar = u_bar.values
        self.g = g.values
        self.mode = ChargeMode(mode)
        self.settings = settings

    def electron_density(self, u: np.ndarray) -> np.ndarray:
        return self.g * np.exp(self.u_bar + u)

    def mass(self, u: np.ndarray) -> float:
        return float(np.sum(self.electron_density(u))) * self.grid.cell_volume

    def nonlinearity(self, u: np.ndarray) -> np.ndarray:
        density = self.electron_density(u)
        if self.mode is ChargeMode.VARIABLE:
            return density
        m = float(np.sum(density)) * self.grid.cell_volume
        return density * l_k_prime(m, self.settings.K)

    def residual(self, u: np.ndarray) -> float:
        return _relative_residual(u, self.nonlinearity(u), self.h)

    def picard_target(self, u: np.ndarray) -> np.ndarray:
        return -_inverse_laplacian(self.nonlinearity(u), self.grid)

    def solve(self, initial: np.ndarray = None) -> tuple:
        """
        :return: (U_hat values, final residual, iterations, residual history).
        """
        u = np.zeros(self.grid.shape) if initial is None else np.minimum(np.asarray(initial, dtype=float), 0.0)
        if self.settings.method == "newton":
            return self._solve_newton(u)
        return self._solve_picard(u)

    def _solve_picard(self, u: np.ndarray) -> tuple:
        s = self.settings
        res = self.residual(u)
        history = [res]
        theta = s.damping
        iterations = 0
        # sweeps accepted in a row at the current damping
        streak = 0
        while res >= s.tolerance:
            if iterations >= s.max_iterations:
                raise ConvergenceError(iterations, res)
            target = self.picard_target(u)
            while True:
                candidate = (1.0 - theta) * u + theta * target
                candidate_res = self.residual(candidate)
                if candidate_res <= res:
                    break
                theta *= 0.5
                streak = -1
                if theta < s.theta_floor:
                    raise ConvergenceError(iterations, res)
                logger.debug("residual increased, damping halved to %.4f", theta)
            u, res = candidate, candidate_res
            iterations += 1
            history.append(res)
            streak += 1
            if streak >= GROWTH_STREAK and theta < s.damping:
                theta, streak = min(s.damping, 2.0 * theta), 0
                logger.debug("damping raised to %.4f", theta)
            logger.debug("%s sweep %d: residual %.3e", self.mode.value, iterations, res)
        return u, res, iterations, history

    def _solve_newton(self, u: np.ndarray) -> tuple:
        s = self.settings
        shape = self.grid.shape
        scale = max(float(np.max(np.abs(self.picard_target(u)))), 1e-300)

        def fixed_point_map(x: np.ndarray) -> np.ndarray:
            v = x.reshape(shape)
            return (v - self.picard_target(v)).ravel()

        history = [self.residual(u)]

        def record(x: np.ndarray, f: np.ndarray) -> None:
            history.append(float(np.max(np.abs(f))) / scale)
            logger.debug("newton step %d: fixed-point defect %.3e", len(history) - 1, history[-1])

        try:
            x = newton_krylov(fixed_point_map, u.ravel(), f_tol=1e-3 * s.tolerance * scale,
                              maxiter=s.max_iterations, method="lgmres", callback=record)
        except NoConvergence as error:
            x = np.asarray(error.args[0])
        iterations = len(history) - 1
        # one undamped sweep restores U_hat <= 0 exactly
        u = np.minimum(self.picard_target(x.reshape(shape)), 0.0)
        res = self.residual(u)
        history.append(res)
        if res >= s.tolerance:
            raise ConvergenceError(iterations, res)
        return u, res, iterations, history


def solve_hat_variable(u_bar: ScalarField, g: ScalarField, s: SolverSettings = SolverSettings(),
                       initial: ScalarField = None) -> ScalarField:
    """
    Solves Lap U_hat = g e^{U_bar + U_hat} (variable total charge) by damped fixed-point iteration on the Green
    representation U_hat = -G * (g e^{U_bar + U_hat}), starting from U_hat = 0.
    :param u_bar: singular part of the potential, non-negative.
    :param g: electron profile, non-negative.
    :param s: solver settings.
    :param initial: optional starting iterate (clipped to be non-positive).
    :return: U_hat, non-positive, as a ScalarField.
    """
    return _solve_hat(u_bar, g, ChargeMode.VARIABLE, s, initial)[0]


def solve_hat_fixed(u_bar: ScalarField, g: ScalarField, s: SolverSettings = SolverSettings(),
                    initial: ScalarField = None, normalize_g: bool = False) -> tuple:
    """
    Solves Lap U_hat = g e^{U_bar + U_hat} / m, m = int g e^{U_bar + U_hat} (fixed total charge), recomputing m at
    every sweep through L_K'(m). After convergence m must sit above the L_K guard e^-(K-1).
    :param u_bar: singular part of the potential, non-negative.
    :param g: electron profile, non-negative with unit mass.
    :param s: solver settings.
    :param initial: optional starting iterate.
    :param normalize_g: divide g by its mass instead of failing when the mass is not 1.
    :return: A tuple (U_hat, m).
    """
    u_hat, _, _, _, m = _solve_hat(u_bar, normalized_profile(g, normalize_g), ChargeMode.FIXED, s, initial)
    return u_hat, m


def _solve_hat(u_bar: ScalarField, g: ScalarField, mode: ChargeMode, s: SolverSettings,
               initial: ScalarField = None) -> tuple:
    check_same_grid(u_bar.grid, g.grid)
    check_electron_profile(g)
    _check_u_bar(u_bar)
    problem = _ScreeningProblem(u_bar, g, mode, s)
    u, res, iterations, history = problem.solve(None if initial is None else initial.values)
    u_hat = ScalarField(u_bar.grid, u, name="U_hat")
    m = None
    if problem.mode is ChargeMode.FIXED:
        m = problem.mass(u)
        guard = math.exp(-(s.K - 1))
        if m <= guard:
            raise GuardViolationError(m, guard, bouchut_certificate(g, u_hat).lower_bound)
    logger.info("%s screening solve converged in %d sweeps (residual %.2e)", problem.mode.value, iterations, res)
    return u_hat, res, iterations, history, m


def solve_split_field(rho: ScalarField, g: ScalarField, mode=ChargeMode.VARIABLE,
                      s: SolverSettings = SolverSettings(), initial: ScalarField = None,
                      normalize_g: bool = False) -> PotentialSplit:
    """
    Computes U = U_bar + U_hat for a density: the free-space Poisson solve, the screening solve of the chosen mode,
    and the fields E_bar, E_hat and E = E_bar + E_hat.
    :param rho: ion density, non-negative.
    :param g: electron profile.
    :param mode: ChargeMode or its string value.
    :param s: solver settings.
    :param initial: optional warm start for U_hat.
    :param normalize_g: fixed mode only, see solve_hat_fixed.
    :return: the PotentialSplit.
    """
    mode = ChargeMode(mode)
    check_same_grid(rho.grid, g.grid)
    check_field(rho)
    if rho.values.min() < 0:
        raise InvalidFieldError(NEGATIVE_FIELD_MSG.format(rho.name, float(rho.values.min())))
    if mode is ChargeMode.FIXED:
        g = normalized_profile(g, normalize_g)
    u_bar = solve_free_space_poisson(rho)
    u_hat, res, iterations, history, m = _solve_hat(u_bar, g, mode, s, initial)
    e_bar = negative_gradient(u_bar)
    e_hat = negative_gradient(u_hat)
    e_bar.name, e_hat.name = "E_bar", "E_hat"
    e_total = e_bar + e_hat
    e_total.name = "E"
    return PotentialSplit(u_bar=u_bar, u_hat=u_hat, e_bar=e_bar, e_hat=e_hat, e_total=e_total, mode=mode,
                          residual=res, iterations=iterations, electron_mass=m, rho=rho,
                          residual_history=history)


# variational functionals

def evaluate_JV(h: ScalarField, u_bar: ScalarField, g: ScalarField, dirichlet_weight: float = 1.0) -> float:
    """
    J_V[h] = w ||grad h||_2^2 + int g e^{h + U_bar}. With w = 1/2 the discrete Euler-Lagrange equation is exactly
    Lap_h U_hat = g e^{U_bar + U_hat}, so U_hat is the minimiser among perturbations supported inside the box.
    :param h: trial function.
    :param u_bar: singular potential.
    :param g: electron profile.
    :param dirichlet_weight: weight w of the gradient term, 1 for the literal functional.
    :return: J_V[h], non-negative.
    """
    check_same_grid(h.grid, u_bar.grid, g.grid)
    grid = h.grid
    electrons = float(np.sum(g.values * np.exp(h.values + u_bar.values))) * grid.cell_volume
    return dirichlet_weight * dirichlet_energy(h.values, grid.spacing) + electrons


def jv_gradient(h: ScalarField, u_bar: ScalarField, g: ScalarField, dirichlet_weight: float = 1.0) -> np.ndarray:
    """
    pointwise weak-form residual of J_V: -2w Lap h + g e^{h + U_bar}; the derivative of J_V in a direction phi is
    sum(gradient * phi) h^3.
    """
    check_same_grid(h.grid, u_bar.grid, g.grid)
    return -2.0 * dirichlet_weight * graph_laplacian(h.values, h.grid.spacing) + g.values * np.exp(
        h.values + u_bar.values)


@dataclass(frozen=True)
class GateauxCheck:
    finite_difference: float
    weak_form: float
    scale: float

    @property
    def relative_error(self) -> float:
        return abs(self.finite_difference - self.weak_form) / self.scale if self.scale > 0 else 0.0


def gateaux_check(h: ScalarField, u_bar: ScalarField, g: ScalarField, directions: list, step: float = 1e-4,
                  dirichlet_weight: float = 0.5) -> list:
    """
    compares central finite differences of J_V along each direction with the weak-form residual.
    :param h: base point, typically the converged U_hat.
    :param directions: list of arrays of the grid shape.
    :param step: finite-difference step.
    :return: one GateauxCheck per direction; relative errors are measured against the magnitude of the two terms of
             the weak form.
    """
    grad = jv_gradient(h, u_bar, g, dirichlet_weight)
    dv = h.grid.cell_volume
    electrons = g.values * np.exp(h.values + u_bar.values)
    stiffness = 2.0 * dirichlet_weight * graph_laplacian(h.values, h.grid.spacing)
    checks = []
    for phi in directions:
        plus = evaluate_JV(h.like(h.values + step * phi), u_bar, g, dirichlet_weight)
        minus = evaluate_JV(h.like(h.values - step * phi), u_bar, g, dirichlet_weight)
        scale = float(np.sum(np.abs(stiffness * phi)) + np.sum(np.abs(electrons * phi))) * dv
        checks.append(GateauxCheck((plus - minus) / (2.0 * step), float(np.sum(grad * phi)) * dv, scale))
    return checks


def evaluate_JK(h: ScalarField, u_bar: ScalarField, g: ScalarField, K: int) -> float:
    """
    J_K[h] = ||grad h||_2^2 + L_K(int g e^{U_bar + h}).
    """
    _check_k(K)
    check_same_grid(h.grid, u_bar.grid, g.grid)
    mass = float(np.sum(g.values * np.exp(h.values + u_bar.values))) * h.grid.cell_volume
    return dirichlet_energy(h.values, h.grid.spacing) + l_k(mass, K)


# certificates and regularity

def bouchut_certificate(g: ScalarField, u: ScalarField, constant: float = DEFAULT_BOUCHUT_CONSTANT,
                        normalize_g: bool = False) -> BouchutCertificate:
    """
    Measures int g e^{-|u|} and the lower bound exp(-c ||u||_{L^{3,inf}} ||g||_inf^{1/3}).
    :param g: electron profile with unit mass.
    :param u: potential.
    :param constant: the battery constant c (see fit_bouchut_constant).
    :return: BouchutCertificate; certificate.holds tells whether the measured value clears the bound.
    """
    check_same_grid(g.grid, u.grid)
    g = normalized_profile(g, normalize_g)
    measured = float(np.sum(g.values * np.exp(-np.abs(u.values)))) * g.grid.cell_volume
    u_weak = weak_lp_quasinorm(u, 3)
    g_inf = lp_norm(g, math.inf)
    return BouchutCertificate(lower_bound=math.exp(-constant * u_weak * g_inf ** (1.0 / 3.0)), measured=measured,
                              u_weak_l3=u_weak, g_linf=g_inf, constant=constant)


def fit_bouchut_constant(pairs: list) -> float:
    """
    smallest c making the Bouchut bound hold for every (g, u) pair of a battery.
    """
    c = 0.0
    for g, u in pairs:
        cert = bouchut_certificate(g, u, constant=0.0)
        exponent = cert.u_weak_l3 * cert.g_linf ** (1.0 / 3.0)
        if exponent > 0 and cert.measured < 1.0:
            c = max(c, -math.log(cert.measured) / exponent)
    return c


@dataclass(frozen=True)
class RegularityReport:
    """
    Measured norms of U_hat and E_hat together with the quantities entering their bounds.
    """
    mode: ChargeMode
    hat_weak_l3: float
    hat_e_weak_l32: float
    hat_linf: float
    hat_e_linf: float
    hat_e_holder: float
    laplacian_l1: float
    laplacian_linf: float
    rho_l1: float
    rho_l53: float
    ubar_linf: float
    g_l1: float
    g_linf: float
    electron_mass: float = None
    holder_alpha: float = 0.5

    @property
    def source_scale(self) -> float:
        return self.rho_l1 ** (1.0 / 6.0) * self.rho_l53 ** (5.0 / 6.0)

    @property
    def c1_alpha(self) -> float:
        """
        sampled stand-in for ||U_hat||_{C^{1,alpha}}.
        """
        return self.hat_linf + self.hat_e_linf + self.hat_e_holder

    def bounds(self, c: float) -> dict:
        """
        right-hand sides of the three regularity estimates for a constant c.
        """
        if self.mode is ChargeMode.VARIABLE:
            growth = math.exp(c * self.source_scale)
            return {"weak_l3": c * self.g_l1 * growth, "e_weak_l32": c * self.g_l1 * growth,
                    "c1_alpha": c * self.g_linf * growth}
        return {"weak_l3": c, "e_weak_l32": c, "c1_alpha": math.exp(c * self.rho_l53 ** (5.0 / 6.0))}

    def violation(self, c: float) -> float:
        bounds = self.bounds(c)
        return max(self.hat_weak_l3 - bounds["weak_l3"], self.hat_e_weak_l32 - bounds["e_weak_l32"],
                   self.c1_alpha - bounds["c1_alpha"])

    def lemma_checks(self) -> dict:
        """
        Laplacian bounds: ||Lap U_hat||_1 <= e^{||U_bar||_inf} ||g||_1 (variable) or = 1 (fixed), and
        ||Lap U_hat||_inf <= e^{||U_bar||_inf} ||g||_inf (divided by m in the fixed mode).
        """
        growth = math.exp(self.ubar_linf)
        if self.mode is ChargeMode.VARIABLE:
            return {"laplacian_l1": self.laplacian_l1 <= growth * self.g_l1 * (1 + 1e-6),
                    "laplacian_linf": self.laplacian_linf <= growth * self.g_linf * (1 + 1e-6)}
        return {"laplacian_l1": abs(self.laplacian_l1 - 1.0) < 1e-6,
                "laplacian_linf": self.laplacian_linf <= growth * self.g_linf / self.electron_mass * (1 + 1e-6)}


def regularity_report(split: PotentialSplit, g: ScalarField, alpha: float = 0.5, seed: int = 0) -> RegularityReport:
    """
    Regularity measurements of a converged split field.
    :param split: converged PotentialSplit (carrying its density).
    :param g: electron profile used for the solve.
    :param alpha: Holder exponent sampled on E_hat.
    :param seed: seed of the Holder pair sampler.
    :return: a RegularityReport.
    """
    h = split.u_hat.grid.spacing
    lap = laplacian(split.u_hat.values, h)
    dv = split.u_hat.grid.cell_volume
    rho = split.rho if split.rho is not None else ScalarField.zeros(split.u_bar.grid)
    return RegularityReport(mode=split.mode, hat_weak_l3=weak_lp_quasinorm(split.u_hat, 3),
                            hat_e_weak_l32=weak_lp_quasinorm(split.e_hat, 1.5),
                            hat_linf=lp_norm(split.u_hat, math.inf), hat_e_linf=lp_norm(split.e_hat, math.inf),
                            hat_e_holder=holder_seminorm_sample(split.e_hat, alpha, seed=seed,
                                                                max_distance=8 * h),
                            laplacian_l1=float(np.sum(np.abs(lap))) * dv,
                            laplacian_linf=float(np.max(np.abs(lap))) if lap.size else 0.0,
                            rho_l1=lp_norm(rho, 1), rho_l53=lp_norm(rho, 5.0 / 3.0),
                            ubar_linf=lp_norm(split.u_bar, math.inf), g_l1=lp_norm(g, 1),
                            g_linf=lp_norm(g, math.inf), electron_mass=split.electron_mass, holder_alpha=alpha)


def fit_regularity_constant(reports: list) -> float:
    """
    smallest constant making all three regularity estimates hold across a battery of reports.
    """
    return smallest_feasible_constant(lambda c: max(r.violation(c) for r in reports))


def comparison_check(split: PotentialSplit, g: ScalarField, exponents: tuple = (1.0, 5.0 / 3.0, 2.0, math.inf)) \
        -> dict:
    """
    Checks g e^{U_bar + U_hat} <= g e^{U_bar} samplewise and the L^p bounds
    ||g e^{U_bar + U_hat}||_p <= e^{||U_bar||_inf} ||g||_inf^{1 - 1/p} ||g||_1^{1/p}.
    :return: dict mapping "pointwise" and each exponent to a bool.
    """
    check_same_grid(split.u_bar.grid, g.grid)
    screened = g.values * np.exp(split.u_bar.values + split.u_hat.values)
    unscreened = g.values * np.exp(split.u_bar.values)
    result = {"pointwise": bool(np.all(screened <= unscreened))}
    growth = math.exp(lp_norm(split.u_bar, math.inf))
    g_inf, g_one = lp_norm(g, math.inf), lp_norm(g, 1)
    field_ = g.like(screened, name="g e^U")
    for p in exponents:
        inv = 0.0 if math.isinf(p) else 1.0 / p
        result[p] = lp_norm(field_, p) <= growth * g_inf ** (1.0 - inv) * g_one ** inv * (1 + 1e-12)
    return result


@dataclass(frozen=True)
class MassBounds:
    lower: float
    mass: float
    upper: float

    @property
    def holds(self) -> bool:
        return self.lower <= self.mass <= self.upper


def mass_bounds(split: PotentialSplit, g: ScalarField, constant: float = DEFAULT_BOUCHUT_CONSTANT) -> MassBounds:
    """
    Fixed mode: the electron mass satisfies C_g <= int g e^{-|U_hat|} <= m <= ||g||_1 e^{||U_bar||_inf}.
    """
    cert = bouchut_certificate(g, split.u_hat, constant)
    m = split.electron_mass
    if m is None:
        m = float(np.sum(g.values * np.exp(split.u_bar.values + split.u_hat.values))) * g.grid.cell_volume
    return MassBounds(lower=min(cert.lower_bound, cert.measured), mass=m,
                      upper=lp_norm(g, 1) * math.exp(lp_norm(split.u_bar, math.inf)))
