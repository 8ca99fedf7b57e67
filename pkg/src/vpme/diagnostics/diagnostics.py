import logging
import math
import warnings
from dataclasses import dataclass, field
import numpy as np
from ..electrostatics.electrostatics import ChargeMode
from ..errors import InvalidParameterError
from ..fields.fields import ScalarField, lp_norm
from ..helper_funcs.helper_funcs import golden_section_constant
from ..kinetics.kinetics import ParticleEnsemble, SimulationState, current_field
from ..user_messages import FIT_FLAG_MSG

logger = logging.getLogger(__name__)

DEFAULT_ORDERS = (2, 4, 6)
BATTERY_ENVELOPE_CONSTANT = 10.0


@dataclass(frozen=True)
class EnergyReport:
    """
    The terms of the two conserved energies at one time. kinetic is sum w |V|^2, field is int |E|^2.
    """
    time: float
    mode: ChargeMode
    kinetic: float
    field: float
    electron_V: float
    electron_F: float

    @property
    def total_V(self) -> float:
        return self.kinetic + self.field + self.electron_V

    @property
    def total_F(self) -> float:
        return self.kinetic + self.field + self.electron_F

    @property
    def total(self) -> float:
        return self.total_V if self.mode is ChargeMode.VARIABLE else self.total_F


@dataclass
class MomentReport:
    """
    Velocity moments M_k = sum w |V|^k recorded over time.
    """
    orders: tuple
    times: list = field(default_factory=list)
    values: dict = field(default_factory=dict)

    def record(self, time: float, ens: ParticleEnsemble) -> None:
        speeds = ens.speeds()
        self.times.append(time)
        for k in self.orders:
            self.values.setdefault(k, []).append(float(np.sum(speeds ** k)) * ens.weight)

    def series(self, k) -> np.ndarray:
        return np.asarray(self.values[k])

    def sup_history(self, k) -> np.ndarray:
        """
        running supremum sup_{s <= t} M_k(s).
        """
        return np.maximum.accumulate(self.series(k))


def _check_orders(orders) -> tuple:
    orders = tuple(orders)
    if any(not k >= 0 for k in orders):
        raise InvalidParameterError("orders", orders, "moment orders must be non-negative")
    return orders


def moments(ens: ParticleEnsemble, orders=DEFAULT_ORDERS, time: float = 0.0) -> MomentReport:
    """
    exact particle sums M_k for each order, recorded at one time.
    """
    report = MomentReport(_check_orders(orders))
    report.record(time, ens)
    return report


def moment_history(snapshots: list, orders=DEFAULT_ORDERS) -> MomentReport:
    report = MomentReport(_check_orders(orders))
    for snapshot in snapshots:
        report.record(snapshot.time, snapshot.ensemble())
    return report


def energy(state: SimulationState, mode=None) -> EnergyReport:
    """
    Energy terms of a state with a fresh field: kinetic sum w|V|^2, field int|E|^2, electron_V = 2 int (U - 1) g e^U
    and electron_F = 2 int phi g e^phi with phi = U - log m, m the electron mass of the split.
    :param state: simulation state; its cached field must match the particles.
    :param mode: which total to report as EnergyReport.total, default is the state's mode.
    :return: an EnergyReport.
    """
    e_total = current_field(state)
    split = state.split
    mode = ChargeMode(mode) if mode is not None else state.mode
    ens = state.ensemble
    g = state.g.values
    dv = state.grid.cell_volume
    u = split.u_bar.values + split.u_hat.values
    electrons = g * np.exp(u)
    m = split.electron_mass if split.electron_mass is not None else float(np.sum(electrons)) * dv
    phi = u - math.log(m)
    kinetic = float(np.sum(ens.velocities ** 2)) * ens.weight
    return EnergyReport(time=state.time, mode=mode, kinetic=kinetic, field=e_total.squared_l2(),
                        electron_V=2.0 * float(np.sum((u - 1.0) * electrons)) * dv,
                        electron_F=2.0 * float(np.sum(phi * g * np.exp(phi))) * dv)


def energy_drift(reports: list) -> float:
    """
    max_t |E(t) - E(0)| / |E(0)| of the reported totals.
    """
    e0 = reports[0].total
    return max(abs(r.total - e0) for r in reports) / abs(e0) if e0 else max(abs(r.total) for r in reports)


def energy_moment_bound(report: EnergyReport, g_mass: float) -> bool:
    """
    kinetic <= E_V + 2 ||g||_1 (variable) or kinetic <= E_F + (2/e) ||g||_1 (fixed), from x e^x >= -1/e and
    (x - 1) e^x >= -1.
    """
    if report.mode is ChargeMode.VARIABLE:
        return report.kinetic <= report.total_V + 2.0 * g_mass + 1e-12
    return report.kinetic <= report.total_F + 2.0 / math.e * g_mass + 1e-12


def interpolation_constant(k: float) -> float:
    """
    C_k = (4 pi / 3)^{k/(k+3)} [(3/k)^{k/(k+3)} + (k/3)^{3/(k+3)}], the optimum of splitting int f dv at the speed
    R minimising ||f||_inf (4 pi/3) R^3 + R^-k m_k.
    """
    a = k / (k + 3.0)
    return (4.0 * math.pi / 3.0) ** a * ((3.0 / k) ** a + (k / 3.0) ** (3.0 / (k + 3.0)))


@dataclass(frozen=True)
class InterpolationVerdict:
    k: float
    lhs: float
    rhs: float
    constant: float
    holds: bool

    @property
    def margin(self) -> float:
        if self.lhs == 0:
            return math.inf
        return self.rhs / self.lhs


def interpolation_check(rho: ScalarField, ens: ParticleEnsemble, k: float, f_inf_bound: float,
                        tol: float = 1e-12) -> InterpolationVerdict:
    """
    Compares ||rho||_{(k+3)/3} with C_k ||f||_inf^{k/(k+3)} M_k^{3/(k+3)}. A vanishing moment makes the right side 0,
    the left side is then compared with tol.
    :param rho: deposited density of ens.
    :param ens: the particles.
    :param k: moment order, positive.
    :param f_inf_bound: sup of f (see kinetics.f_inf_bound).
    :return: an InterpolationVerdict.
    """
    if not k > 0:
        raise InvalidParameterError("k", k, "must be positive")
    m_k = float(np.sum(ens.speeds() ** k)) * ens.weight
    lhs = lp_norm(rho, (k + 3.0) / 3.0)
    constant = interpolation_constant(k)
    if m_k == 0:
        rhs = 0.0
    else:
        rhs = constant * f_inf_bound ** (k / (k + 3.0)) * m_k ** (3.0 / (k + 3.0))
    return InterpolationVerdict(k=k, lhs=lhs, rhs=rhs, constant=constant, holds=lhs <= rhs + tol)


@dataclass(frozen=True)
class EnvelopeVerdict:
    constants: dict
    battery_constant: float

    @property
    def constant(self) -> float:
        return max(self.constants.values())

    @property
    def holds(self) -> bool:
        return self.constant <= self.battery_constant


def _envelope_violation(times: np.ndarray, values: np.ndarray):
    anchor = 1.0 + math.log1p(values[0])
    positive = values > 0
    t, log_m = times[positive], np.log(values[positive])

    def violation(c: float) -> float:
        with np.errstate(over="ignore"):
            return float(np.max(log_m - c * anchor * np.exp(c * t)))

    return violation


def moment_envelope_check(history: MomentReport, battery_constant: float = BATTERY_ENVELOPE_CONSTANT) \
        -> EnvelopeVerdict:
    """
    Fits, per order, the smallest C with M_k(t) <= exp[C (1 + log(1 + M_k(0))) e^{Ct}] at every recorded time
    (compared in log scale).
    :param history: a MomentReport covering [0, T].
    :param battery_constant: the single constant the battery must stay below.
    :return: an EnvelopeVerdict carrying the fitted constant per order.
    """
    if not history.times:
        raise InvalidParameterError("history", "empty", "need at least one recorded time")
    times = np.asarray(history.times) - history.times[0]
    constants = {}
    for k in history.orders:
        values = history.series(k)
        if not np.any(values > 0):
            constants[k] = 0.0
            continue
        constants[k] = golden_section_constant(_envelope_violation(times, values))
    verdict = EnvelopeVerdict(constants, battery_constant)
    if verdict.constant > 10.0 * battery_constant:
        warnings.warn(FIT_FLAG_MSG.format(verdict.constant, battery_constant), RuntimeWarning)
    logger.info("moment envelope constants: %s", constants)
    return verdict


def moment_drive_check(times, values, field_norms, k: float) -> float:
    """
    Fits C in dM_k/dt <= C ||E||_{L^{k+3}} M_k^{(k+2)/(k+3)} from forward differences of a recorded history.
    :param times: recorded times.
    :param values: M_k at those times.
    :param field_norms: ||E||_{L^{k+3}} at those times.
    :param k: the order.
    :return: the smallest C consistent with every growing interval, 0 when M_k never grows.
    """
    times, values, norms = (np.asarray(a, dtype=np.float64) for a in (times, values, field_norms))
    rates = np.diff(values) / np.diff(times)
    mid_m = 0.5 * (values[1:] + values[:-1])
    mid_e = 0.5 * (norms[1:] + norms[:-1])
    drive = mid_e * mid_m ** ((k + 2.0) / (k + 3.0))
    growing = (rates > 0) & (drive > 0)
    if not np.any(growing):
        return 0.0
    return float(np.max(rates[growing] / drive[growing]))


def holder_ordering_check(report: MomentReport, rel_tol: float = 1e-12) -> bool:
    """
    M_n <= M_k^{n/k} for every recorded pair 0 < n <= k (unit mass).
    """
    orders = sorted(k for k in report.orders if k > 0)
    for i, n in enumerate(orders):
        for k in orders[i + 1:]:
            m_n, m_k = report.series(n), report.series(k)
            if np.any(m_n > m_k ** (n / k) * (1.0 + rel_tol) + rel_tol):
                return False
    return True
