import math
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar
from vpme.diagnostics.diagnostics import EnergyReport, MomentReport, energy, energy_drift, energy_moment_bound, \
    holder_ordering_check, interpolation_check, interpolation_constant, moment_drive_check, moment_envelope_check, \
    moment_history, moments
from vpme.electrostatics.electrostatics import ChargeMode
from vpme.errors import InvalidParameterError
from vpme.fields.fields import GridSpec
from vpme.kinetics.kinetics import InitialDataSpec, ParticleEnsemble, deposit_density, f_inf_bound, initial_state, \
    run, sample_initial
from vpme.scenarios.scenarios import gaussian_density


@pytest.fixture(scope="module")
def grid():
    return GridSpec(4.0, 16)


@pytest.fixture(scope="module")
def g(grid):
    return gaussian_density(grid, 0.6, name="g")


@pytest.fixture(scope="module")
def spec():
    return InitialDataSpec(sigma=0.5, vth=0.5)


def test_moments_of_known_speeds():
    ens = ParticleEnsemble(np.zeros((2, 3)), [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
    report = moments(ens, orders=(0, 2, 4), time=1.5)
    assert report.times == [1.5]
    assert report.series(0)[0] == pytest.approx(1.0)
    assert report.series(2)[0] == pytest.approx(2.5)
    assert report.series(4)[0] == pytest.approx(8.5)
    with pytest.raises(InvalidParameterError):
        moments(ens, orders=(-1,))


def test_sup_history_is_a_running_maximum():
    report = MomentReport((2,), times=[0, 1, 2, 3], values={2: [1.0, 3.0, 2.0, 4.0]})
    np.testing.assert_array_equal(report.sup_history(2), [1.0, 3.0, 3.0, 4.0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_moment_orders_are_holder_ordered(seed):
    rng = np.random.default_rng(seed)
    ens = ParticleEnsemble(np.zeros((50, 3)), rng.standard_t(4, size=(50, 3)))
    assert holder_ordering_check(moments(ens, orders=(1, 2, 3.5, 6)))


@pytest.mark.parametrize("k", [0.5, 2.0, 4.0, 6.0, 11.0])
def test_interpolation_constant_is_the_optimal_split(k):
    best = minimize_scalar(lambda s: 4.0 * math.pi / 3.0 * math.exp(3 * s) + math.exp(-k * s),
                           bounds=(-10, 10), method="bounded", options={"xatol": 1e-12})
    assert interpolation_constant(k) == pytest.approx(best.fun, rel=1e-8)
    assert interpolation_constant(k) == pytest.approx((4 * math.pi / k) ** (k / (k + 3)) * (1 + k / 3))


@pytest.mark.parametrize("k", [2, 4, 6])
def test_interpolation_inequality_on_a_sampled_density(grid, spec, k):
    ens = sample_initial(spec, 20000, seed=1)
    verdict = interpolation_check(deposit_density(ens, grid), ens, k, f_inf_bound(spec))
    assert verdict.holds
    assert verdict.margin > 1.0


def test_interpolation_with_vanishing_moment(grid):
    spec = InitialDataSpec(velocity="cold")
    ens = sample_initial(spec, 1000, seed=1)
    verdict = interpolation_check(deposit_density(ens, grid), ens, 2, f_inf_bound(spec))
    assert verdict.rhs == 0.0
    assert not verdict.holds
    with pytest.raises(InvalidParameterError):
        interpolation_check(deposit_density(ens, grid), ens, 0, 1.0)


def test_envelope_of_a_constant_history():
    report = MomentReport((2,), times=[0.0, 0.5, 1.0], values={2: [3.0, 3.0, 3.0]})
    verdict = moment_envelope_check(report)
    expected = math.log(3.0) / (1.0 + math.log1p(3.0))
    assert verdict.constants[2] == pytest.approx(expected, rel=1e-5)
    assert verdict.holds


def test_envelope_flags_explosive_growth():
    times = np.linspace(0.0, 1.0, 11)
    report = MomentReport((2,), times=list(times), values={2: list(np.exp(500.0 * times))})
    with pytest.warns(RuntimeWarning):
        verdict = moment_envelope_check(report, battery_constant=0.1)
    assert not verdict.holds


def test_envelope_needs_a_history():
    with pytest.raises(InvalidParameterError):
        moment_envelope_check(MomentReport((2,)))


def test_moment_drive_fit():
    c = moment_drive_check([0.0, 1.0, 2.0], [1.0, 2.0, 2.0], [1.0, 1.0, 1.0], 2)
    assert c == pytest.approx(1.0 / 1.5 ** 0.8)
    assert moment_drive_check([0.0, 1.0], [2.0, 1.0], [1.0, 1.0], 2) == 0.0


def _report(total, mode=ChargeMode.VARIABLE):
    return EnergyReport(time=0.0, mode=mode, kinetic=total, field=0.0, electron_V=0.0, electron_F=1.0)


def test_energy_report_totals_and_drift():
    report = EnergyReport(time=0.0, mode=ChargeMode.FIXED, kinetic=1.0, field=2.0, electron_V=-4.0, electron_F=0.5)
    assert report.total_V == -1.0 and report.total_F == 3.5 and report.total == 3.5
    assert energy_drift([_report(2.0), _report(2.1), _report(1.8)]) == pytest.approx(0.1)


@pytest.mark.parametrize("mode", ["variable", "fixed"])
def test_energy_terms_of_a_state(grid, g, spec, mode):
    ens = sample_initial(spec, 4000, seed=3)
    state = initial_state(ens, grid, g, mode)
    report = energy(state)
    assert report.mode.value == mode
    assert report.kinetic == pytest.approx(float(np.mean(np.sum(ens.velocities ** 2, axis=1))))
    assert report.field == pytest.approx(state.split.e_total.squared_l2())
    assert energy_moment_bound(report, g.integral())
    assert energy(state, mode="variable").total == report.total_V


@pytest.mark.slow
@pytest.mark.parametrize("mode", ["variable", "fixed"])
def test_energy_is_conserved_along_a_short_run(grid, g, spec, mode):
    state = initial_state(sample_initial(spec, 5000, seed=4), grid, g, mode)
    reports = []
    run(state, 0.02, 0.2, observer=lambda s: reports.append(energy(s)))
    assert len(reports) == 11
    assert energy_drift(reports) < 1e-2


def test_moment_history_along_a_run(grid, g, spec):
    state = initial_state(sample_initial(spec, 2000, seed=5), grid, g)
    snapshots = run(state, 0.02, 0.1)
    history = moment_history(snapshots)
    assert history.orders == (2, 4, 6)
    assert len(history.times) == len(snapshots)
    assert holder_ordering_check(history)
    verdict = moment_envelope_check(history)
    assert verdict.holds
