import logging
import math
import warnings
from dataclasses import dataclass
import numpy as np
import ot
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from ..electrostatics.electrostatics import ChargeMode, PotentialSplit
from ..errors import CouplingError, InvalidParameterError, UnsynchronizedError
from ..fields.fields import ScalarField, VectorField, lp_norm
from ..helper_funcs.helper_funcs import smallest_feasible_constant
from ..kinetics.kinetics import ParticleEnsemble, interpolate_acceleration
from ..user_messages import EXACT_CAP_MSG, SINKHORN_MSG

logger = logging.getLogger(__name__)

EXACT_W2_CAP = 2048
ENTROPIC_SUPPORT_CAP = 2048
DEFAULT_EPSILON = 1e-3
MARGINAL_TOLERANCE = 1e-6
H_THRESHOLD = math.exp(-2.0)
H_PLATEAU = 4.0 * math.exp(-2.0)


@dataclass(frozen=True)
class Coupling:
    """
    A pairing of the particle ids of two ensembles. Without pairs it is the identity on ids, which needs equal N and
    matching id sets.
    :param pairs: optional K x 2 integer array (id in the first ensemble, id in the second).
    """
    pairs: np.ndarray = None

    def resolve(self, ens1: ParticleEnsemble, ens2: ParticleEnsemble) -> tuple:
        """
        :return: index arrays (i1, i2) such that particle i1[j] of ens1 is paired with particle i2[j] of ens2.
        """
        if ens1.count != ens2.count:
            raise CouplingError(f"ensembles have {ens1.count} and {ens2.count} particles")
        index1 = _index_of(ens1.ids)
        index2 = _index_of(ens2.ids)
        if self.pairs is None:
            ids = np.arange(ens1.count)
            return index1[ids], index2[ids]
        pairs = np.asarray(self.pairs, dtype=np.int64)
        if pairs.shape != (ens1.count, 2):
            raise CouplingError(f"expected {ens1.count} pairs, got an array of shape {pairs.shape}")
        for column in (0, 1):
            if not np.array_equal(np.sort(pairs[:, column]), np.arange(ens1.count)):
                raise CouplingError("the pairs are not a bijection between the two id sets")
        return index1[pairs[:, 0]], index2[pairs[:, 1]]


def _index_of(ids: np.ndarray) -> np.ndarray:
    index = np.empty(ids.size, dtype=np.int64)
    index[ids] = np.arange(ids.size)
    return index


def coupled_distance(ens1: ParticleEnsemble, ens2: ParticleEnsemble, coupling: Coupling = Coupling()) -> float:
    """
    D = sum over paired particles of w (|X1 - X2|^2 + |V1 - V2|^2).
    """
    i1, i2 = coupling.resolve(ens1, ens2)
    dx = ens1.positions[i1] - ens2.positions[i2]
    dv = ens1.velocities[i1] - ens2.velocities[i2]
    return float(np.sum(dx ** 2) + np.sum(dv ** 2)) * ens1.weight


def _take(ens: ParticleEnsemble, index: np.ndarray) -> ParticleEnsemble:
    return ParticleEnsemble(ens.positions[index], ens.velocities[index], np.arange(index.size, dtype=np.int64))


def paired_subsample(ens1: ParticleEnsemble, ens2: ParticleEnsemble, coupling: Coupling = Coupling(),
                     size: int = ENTROPIC_SUPPORT_CAP, seed: int = 0) -> tuple:
    """
    Draws the same seeded set of coupled pairs from both ensembles. The sub-ensembles are renumbered so that the
    identity coupling on their ids is the restriction of the given coupling.
    :param size: number of pairs kept; the full ensembles are returned in pair order when N <= size.
    :return: (sub-ensemble of ens1, sub-ensemble of ens2).
    """
    i1, i2 = coupling.resolve(ens1, ens2)
    if ens1.count > size:
        keep = np.sort(np.random.default_rng(seed).choice(ens1.count, size, replace=False))
        i1, i2 = i1[keep], i2[keep]
    return _take(ens1, i1), _take(ens2, i2)


def _points(ens: ParticleEnsemble, positions_only: bool) -> np.ndarray:
    if positions_only:
        return ens.positions
    return np.hstack([ens.positions, ens.velocities])


def w2_exact(ens1: ParticleEnsemble, ens2: ParticleEnsemble, cap: int = EXACT_W2_CAP,
             positions_only: bool = False) -> float:
    """
    Exact W2 between two equal-weight ensembles, by optimal assignment on the squared phase-space cost.
    :param ens1: first ensemble.
    :param ens2: second ensemble, same N.
    :param cap: largest N accepted.
    :param positions_only: transport the position marginals only.
    :return: W2, the square root of the optimal mean cost.
    """
    if ens1.count != ens2.count:
        raise CouplingError(f"ensembles have {ens1.count} and {ens2.count} particles")
    if ens1.count > cap:
        raise InvalidParameterError("N", ens1.count, EXACT_CAP_MSG.format(cap, ens1.count))
    cost = cdist(_points(ens1, positions_only), _points(ens2, positions_only), "sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return math.sqrt(max(float(cost[rows, cols].sum()) * ens1.weight, 0.0))


@dataclass(frozen=True)
class EntropicTransport:
    """
    Entropic transport estimate. value >= w2_exact - gap_bound on the transported supports; support is the number of
    particles per side that entered the plan.
    """
    value: float
    gap_bound: float
    marginal_error: float
    converged: bool
    support: int = 0

    def __float__(self) -> float:
        return self.value


def _bounded_support(ens1: ParticleEnsemble, ens2: ParticleEnsemble, support: int, seed: int) -> tuple:
    rng = np.random.default_rng(seed)
    if ens1.count == ens2.count:
        if ens1.count <= support:
            return ens1, ens2
        keep = np.sort(rng.choice(ens1.count, support, replace=False))
        return _take(ens1, keep), _take(ens2, keep)
    subsets = []
    for ens in (ens1, ens2):
        subsets.append(ens if ens.count <= support else
                       _take(ens, np.sort(rng.choice(ens.count, support, replace=False))))
    return tuple(subsets)


def w2_entropic(ens1: ParticleEnsemble, ens2: ParticleEnsemble, epsilon: float = DEFAULT_EPSILON,
                iterations: int = 100, positions_only: bool = False, support: int = ENTROPIC_SUPPORT_CAP,
                seed: int = 0) -> EntropicTransport:
    """
    W2 through entropic transport with an annealed regularisation (epsilon scaling) down to epsilon. The plan is a
    coupling of its own marginals, so its cost exceeds the transport cost between them; the gap to the exact value
    is bounded through the marginal error times the largest cost.
    Ensembles larger than support are replaced by a seeded subsample of that size (the same array positions on both
    sides when the counts agree), which keeps the cost matrix at support^2 entries.
    :param ens1: first ensemble.
    :param ens2: second ensemble.
    :param epsilon: final regularisation, positive, in units of the squared phase-space distance.
    :param iterations: outer annealing iterations.
    :param positions_only: transport the position marginals only.
    :param support: largest number of particles per side entering the plan.
    :param seed: subsampling seed.
    :return: an EntropicTransport.
    """
    if not epsilon > 0:
        raise InvalidParameterError("epsilon", epsilon, "must be positive")
    if support < 1:
        raise InvalidParameterError("support", support, "must be at least 1")
    if max(ens1.count, ens2.count) > support:
        logger.debug("entropic transport on a subsample of %d out of %d/%d particles", support, ens1.count,
                     ens2.count)
    ens1, ens2 = _bounded_support(ens1, ens2, support, seed)
    a = np.full(ens1.count, ens1.weight)
    b = np.full(ens2.count, ens2.weight)
    cost = cdist(_points(ens1, positions_only), _points(ens2, positions_only), "sqeuclidean")
    epsilon0 = max(float(cost.max()), 10.0 * epsilon)
    plan = ot.bregman.sinkhorn_epsilon_scaling(a, b, cost, epsilon, numItermax=iterations, epsilon0=epsilon0,
                                               warn=False)
    error = float(np.abs(plan.sum(axis=1) - a).sum() + np.abs(plan.sum(axis=0) - b).sum())
    converged = error <= MARGINAL_TOLERANCE
    if not converged:
        warnings.warn(SINKHORN_MSG.format(error), RuntimeWarning)
    value = math.sqrt(max(float(np.sum(plan * cost)), 0.0))
    return EntropicTransport(value=value, gap_bound=math.sqrt(float(cost.max()) * error), marginal_error=error,
                             converged=converged, support=ens1.count)


def w2(ens1: ParticleEnsemble, ens2: ParticleEnsemble, cap: int = EXACT_W2_CAP, positions_only: bool = False,
       epsilon: float = DEFAULT_EPSILON, support: int = ENTROPIC_SUPPORT_CAP) -> float:
    """
    exact W2 up to the cap, the entropic estimate on a bounded subsample above it.
    """
    if ens1.count <= cap:
        return w2_exact(ens1, ens2, cap, positions_only)
    return w2_entropic(ens1, ens2, epsilon, positions_only=positions_only, support=support).value


def h_modulus(s):
    """
    H(s) = s (log s)^2 for s <= e^-2, 4 e^-2 above, H(0) = 0.
    :param s: non-negative scalar or array.
    :return: H(s), same shape.
    """
    s = np.asarray(s, dtype=np.float64)
    if np.any(s < 0):
        raise InvalidParameterError("s", float(s.min()), "H is defined for s >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        small = s * np.log(np.where(s > 0, s, 1.0)) ** 2
    result = np.where(s <= H_THRESHOLD, small, H_PLATEAU)
    return result if result.ndim else float(result)


def regime_switch_time(w2_0: float, C: float) -> float:
    """
    t0 with log(w2_0) e^{-C t0} = log(1/2), 0 when w2_0 >= 1/2.
    """
    if w2_0 >= 0.5 or w2_0 <= 0:
        return 0.0
    return math.log(math.log(w2_0) / math.log(0.5)) / C


def gronwall_envelope(w2_0: float, C: float, t: float) -> float:
    """
    Two-regime stability envelope: w2_0 e^{Ct} when w2_0 > 1/2; otherwise exp[log(w2_0) e^{-Ct}] up to t0 and
    (1/2) e^{C(t - t0)} after.
    :param w2_0: initial distance, non-negative.
    :param C: positive constant.
    :param t: time, non-negative.
    :return: the bound at t.
    """
    if w2_0 < 0:
        raise InvalidParameterError("w2_0", w2_0, "must be non-negative")
    if not C > 0:
        raise InvalidParameterError("C", C, "must be positive")
    if w2_0 == 0:
        return 0.0
    if w2_0 > 0.5:
        return w2_0 * math.exp(C * t)
    t0 = regime_switch_time(w2_0, C)
    if t <= t0:
        return math.exp(math.log(w2_0) * math.exp(-C * t))
    return 0.5 * math.exp(C * (t - t0))


@dataclass(frozen=True)
class FieldSplitTerms:
    """
    The four field-difference integrals along the coupled characteristics at one time.
    """
    i1: float
    i2: float
    i3: float
    i4: float

    def shape_ratios(self, d: float) -> dict:
        """
        I1, I3 against H(D) and I2, I4 against D.
        """
        h = h_modulus(d)
        return {"i1": _safe_ratio(self.i1, h), "i2": _safe_ratio(self.i2, d),
                "i3": _safe_ratio(self.i3, h), "i4": _safe_ratio(self.i4, d)}

    def drive(self, d: float) -> float:
        """
        D + 2 sqrt(D) sum_i I_i^{1/2}, the bound on dD/dt.
        """
        return d + 2.0 * math.sqrt(d) * sum(math.sqrt(x) for x in (self.i1, self.i2, self.i3, self.i4))


def _safe_ratio(lhs: float, rhs: float) -> float:
    if rhs > 0:
        return lhs / rhs
    return 0.0 if lhs == 0 else math.inf


def field_split_terms(ens1: ParticleEnsemble, ens2: ParticleEnsemble, split1: PotentialSplit,
                      split2: PotentialSplit, coupling: Coupling = Coupling()) -> FieldSplitTerms:
    """
    I1 = sum w |E_bar1(X1) - E_bar1(X2)|^2, I2 = sum w |E_bar1(X2) - E_bar2(X2)|^2 and I3, I4 likewise for E_hat.
    """
    i1, i2 = coupling.resolve(ens1, ens2)
    x1, x2 = ens1.positions[i1], ens2.positions[i2]
    w = ens1.weight

    def integral(field_a: VectorField, xa: np.ndarray, field_b: VectorField, xb: np.ndarray) -> float:
        diff = interpolate_acceleration(field_a, xa) - interpolate_acceleration(field_b, xb)
        return float(np.sum(diff ** 2)) * w

    return FieldSplitTerms(i1=integral(split1.e_bar, x1, split1.e_bar, x2),
                           i2=integral(split1.e_bar, x2, split2.e_bar, x2),
                           i3=integral(split1.e_hat, x1, split1.e_hat, x2),
                           i4=integral(split1.e_hat, x2, split2.e_hat, x2))


@dataclass(frozen=True)
class StabilityReport:
    """
    Paired-run measurements: D(t), W2(t), W2 of the position marginals, the fitted envelope and per-time verdicts.
    """
    times: np.ndarray
    distance: np.ndarray
    w2: np.ndarray
    w2_positions: np.ndarray
    constant: float
    switch_time: float
    envelope: np.ndarray
    coupling_ok: np.ndarray
    regime_residuals: dict
    split_terms: list = None
    distance_rate: np.ndarray = None
    drive_ok: np.ndarray = None

    @property
    def holds(self) -> bool:
        return bool(np.all(self.coupling_ok)) and bool(np.all(self.w2 <= self.envelope * (1 + 1e-9) + 1e-15))


def _fit_envelope(times: np.ndarray, w2_t: np.ndarray) -> float:
    w2_0 = float(w2_t[0])
    if w2_0 == 0:
        return 1e-3 if np.all(w2_t == 0) else math.inf

    def violation(c: float) -> float:
        env = np.array([gronwall_envelope(w2_0, c, t) for t in times])
        return float(np.max(w2_t - env * (1.0 + 1e-9)))

    return smallest_feasible_constant(violation)


def verify_stability(run1: list, run2: list, coupling: Coupling = Coupling(), exact_cap: int = EXACT_W2_CAP,
                     splits1: list = None, splits2: list = None,
                     support: int = ENTROPIC_SUPPORT_CAP) -> StabilityReport:
    """
    Measures two runs against each other at their common snapshot times: D(t) along the coupling, W2(t) (exact up to
    exact_cap particles, entropic above), W2^2 <= D at every time, the smallest C keeping W2(t) below the
    two-regime envelope started at W2(0), and, when the runs' split fields are given, the four field-difference
    integrals with the measured dD/dt.
    :param run1: list of Snapshots.
    :param run2: list of Snapshots with the same times.
    :param coupling: the pairing of ids, identity by default.
    :param exact_cap: particle count up to which W2 is exact.
    :param splits1: optional PotentialSplit per snapshot of run1.
    :param splits2: optional PotentialSplit per snapshot of run2.
    :param support: above exact_cap, W2 is estimated on this many seeded coupled pairs.
    :return: a StabilityReport.
    """
    if len(run1) != len(run2) or any(not math.isclose(a.time, b.time, rel_tol=1e-12, abs_tol=1e-12)
                                     for a, b in zip(run1, run2)):
        raise UnsynchronizedError([s.time for s in run1], [s.time for s in run2])
    times = np.array([s.time for s in run1]) - run1[0].time
    distance, w2_t, w2_rho, coupling_ok = [], [], [], []
    for a, b in zip(run1, run2):
        ens1, ens2 = a.ensemble(), b.ensemble()
        d = coupled_distance(ens1, ens2, coupling)
        if ens1.count <= exact_cap:
            value, tol = w2_exact(ens1, ens2, exact_cap), 1e-12 * (1.0 + d)
            value_rho = w2_exact(ens1, ens2, exact_cap, positions_only=True)
            d_measured = d
        else:
            # the same pairs at every snapshot, so W2 and D are compared on one sub-ensemble
            sub1, sub2 = paired_subsample(ens1, ens2, coupling, support)
            value = w2_entropic(sub1, sub2, support=support).value
            value_rho = w2_entropic(sub1, sub2, positions_only=True, support=support).value
            d_measured = coupled_distance(sub1, sub2)
            tol = 2.0 * DEFAULT_EPSILON * math.log(sub1.count) + 1e-12
        distance.append(d)
        w2_t.append(value)
        w2_rho.append(value_rho)
        coupling_ok.append(value ** 2 <= d_measured + tol)
    distance, w2_t, w2_rho = np.array(distance), np.array(w2_t), np.array(w2_rho)
    constant = _fit_envelope(times, w2_t)
    c_eval = constant if math.isfinite(constant) else 1e3
    envelope = np.array([gronwall_envelope(float(w2_t[0]), c_eval, t) for t in times])
    switch = regime_switch_time(float(w2_t[0]), c_eval)
    residual = w2_t - envelope
    early = times <= switch
    regime_residuals = {"early": float(residual[early].max()) if np.any(early) else None,
                        "late": float(residual[~early].max()) if np.any(~early) else None}
    terms, rate, drive_ok = None, None, None
    if splits1 is not None and splits2 is not None:
        terms = [field_split_terms(a.ensemble(), b.ensemble(), s1, s2, coupling)
                 for a, b, s1, s2 in zip(run1, run2, splits1, splits2)]
        if times.size > 1:
            rate = np.gradient(distance, times)
            drives = np.array([t.drive(float(d)) for t, d in zip(terms, distance)])
            drive_ok = rate <= drives * (1 + 1e-6) + 1e-15
    logger.info("stability: fitted C=%.4g, t0=%.4g, W2(T)=%.3e", constant, switch, w2_t[-1])
    return StabilityReport(times=times, distance=distance, w2=w2_t, w2_positions=w2_rho, constant=constant,
                           switch_time=switch, envelope=envelope, coupling_ok=np.array(coupling_ok),
                           regime_residuals=regime_residuals, split_terms=terms, distance_rate=rate,
                           drive_ok=drive_ok)


def log_lipschitz_check(e_bar: VectorField, rho: ScalarField, pairs: int = 20000, seed: int = 0,
                        max_distance: float = None) -> float:
    """
    Sampled |E(x) - E(y)|^2 / (M^2 H(|x - y|^2)) over pairs of cell centres, M = max(1, ||rho||_1 + ||rho||_inf).
    :return: the largest quotient, i.e. the constant the log-Lipschitz bound needs on this field.
    """
    grid = e_bar.grid
    rng = np.random.default_rng(seed)
    n = grid.cells
    first = rng.integers(0, n, size=(pairs, 3))
    reach = max(1, int((max_distance if max_distance is not None else grid.half_width) / grid.spacing))
    second = np.clip(first + rng.integers(-reach, reach + 1, size=(pairs, 3)), 0, n - 1)
    dist2 = grid.spacing ** 2 * np.sum((first - second) ** 2, axis=1).astype(np.float64)
    keep = dist2 > 0
    first, second, dist2 = first[keep], second[keep], dist2[keep]
    diff2 = np.zeros(dist2.shape)
    for c in e_bar.components:
        diff2 += (c[tuple(first.T)] - c[tuple(second.T)]) ** 2
    m = max(1.0, lp_norm(rho, 1) + lp_norm(rho, math.inf))
    if dist2.size == 0:
        return 0.0
    return float(np.max(diff2 / (m ** 2 * h_modulus(dist2))))


@dataclass(frozen=True)
class FieldStabilityVerdict:
    """
    ||grad U_bar1 - grad U_bar2||_2 and ||grad U_hat1 - grad U_hat2||_2 against (max ||rho_i||_inf)^{1/2} W2(rho1, rho2).
    """
    bar_difference: float
    hat_difference: float
    w2_rho: float
    rho_linf: float
    hat_constant: float
    c0: float

    @property
    def scale(self) -> float:
        return math.sqrt(self.rho_linf) * self.w2_rho

    def bar_holds(self, slack: float = 1.1) -> bool:
        return self.bar_difference <= self.scale * slack

    def hat_holds(self, battery_constant: float) -> bool:
        return self.hat_difference <= battery_constant * self.scale


def field_stability_check(split1: PotentialSplit, split2: PotentialSplit, ens1: ParticleEnsemble,
                          ens2: ParticleEnsemble, g: ScalarField, exact_cap: int = EXACT_W2_CAP) \
        -> FieldStabilityVerdict:
    """
    Both field stability inequalities for one pair of states. The U_hat constant is reported as measured and also
    as C0 in C = ||g||_{3/2}^{1/2} exp{C0 [1 + max ||U_bar||_inf + max ||U_hat||_inf]} (variable), or with
    max ||U||_inf in the bracket (fixed).
    """
    if ens1.count <= exact_cap:
        w2_rho = w2_exact(ens1, ens2, exact_cap, positions_only=True)
    else:
        w2_rho = w2_entropic(*paired_subsample(ens1, ens2), positions_only=True).value
    rho_linf = max(lp_norm(split1.rho, math.inf), lp_norm(split2.rho, math.inf))
    bar = math.sqrt((split1.e_bar - split2.e_bar).squared_l2())
    hat = math.sqrt((split1.e_hat - split2.e_hat).squared_l2())
    scale = math.sqrt(rho_linf) * w2_rho
    hat_constant = _safe_ratio(hat, scale)
    if split1.mode is ChargeMode.VARIABLE:
        size = max(lp_norm(s.u_bar, math.inf) for s in (split1, split2)) + \
            max(lp_norm(s.u_hat, math.inf) for s in (split1, split2))
    else:
        size = max(lp_norm(s.u_total, math.inf) for s in (split1, split2))
    g_scale = math.sqrt(lp_norm(g, 1.5))
    if hat_constant > 0 and math.isfinite(hat_constant) and g_scale > 0:
        c0 = max(0.0, math.log(hat_constant / g_scale) / (1.0 + size))
    else:
        c0 = 0.0
    return FieldStabilityVerdict(bar_difference=bar, hat_difference=hat, w2_rho=w2_rho, rho_linf=rho_linf,
                                 hat_constant=hat_constant, c0=c0)
