import math
import numpy as np
import pytest
from dataclasses import replace
from vpme.errors import InvalidParameterError, InvalidSpecError, StaleStateError, StepError, TruncationError
from vpme.fields.fields import GridSpec, ScalarField, VectorField
from vpme.kinetics.kinetics import InitialDataSpec, ParticleEnsemble, Snapshot, current_field, deposit_density, \
    f_inf_bound, gather_scalar, initial_state, interpolate_acceleration, read_snapshot, run, sample_initial, step, \
    velocity_moment, velocity_support_growth, write_snapshot
from vpme.scenarios.scenarios import gaussian_density


@pytest.fixture(scope="module")
def grid():
    return GridSpec(4.0, 16)


@pytest.fixture(scope="module")
def g(grid):
    return gaussian_density(grid, 0.6, name="g")


def _still(positions, velocities=None):
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    velocities = np.zeros_like(positions) if velocities is None else np.atleast_2d(velocities)
    return ParticleEnsemble(positions, velocities)


def _frozen_state(ens, field, grid=GridSpec(4.0, 8)):
    g = gaussian_density(grid, 0.6, name="g")
    return initial_state(ens, grid, g, frozen_field=field)


def test_ensemble_validation():
    with pytest.raises(InvalidParameterError):
        ParticleEnsemble(np.zeros((3, 3)), np.zeros((2, 3)))
    with pytest.raises(InvalidParameterError):
        ParticleEnsemble(np.zeros((3, 3)), np.zeros((3, 3)), ids=[0, 1, 1])
    ens = ParticleEnsemble(np.zeros((4, 3)), np.ones((4, 3)))
    assert ens.weight == 0.25 and ens.mass == pytest.approx(1.0)
    np.testing.assert_allclose(ens.speeds(), math.sqrt(3.0))


@pytest.mark.parametrize("kwargs", [{"velocity": "power", "r": 3.0}, {"spatial": "torus"}, {"velocity": "hot"},
                                    {"sigma": -1.0}, {"m0": 0.0}, {"center": (0.0, 0.0)}])
def test_initial_data_spec_validation(kwargs):
    with pytest.raises(InvalidSpecError):
        InitialDataSpec(**kwargs)


def test_sampling_is_deterministic_in_the_seed():
    spec = InitialDataSpec()
    a, b, c = sample_initial(spec, 500, seed=1), sample_initial(spec, 500, seed=1), sample_initial(spec, 500, seed=2)
    assert np.array_equal(a.positions, b.positions) and np.array_equal(a.velocities, b.velocities)
    assert not np.array_equal(a.positions, c.positions)
    assert np.array_equal(a.ids, np.arange(500))


def test_gaussian_maxwellian_statistics():
    spec = InitialDataSpec(sigma=0.5, center=(0.5, -0.5, 0.0), vth=0.7)
    ens = sample_initial(spec, 20000, seed=4)
    np.testing.assert_allclose(ens.positions.mean(axis=0), spec.center, atol=1e-2)
    np.testing.assert_allclose(ens.positions.std(axis=0), 0.5, rtol=2e-2)
    m2 = float(np.mean(ens.speeds() ** 2))
    assert m2 == pytest.approx(velocity_moment(spec, 2), rel=2e-2)
    assert velocity_moment(spec, 2) == pytest.approx(3 * 0.7 ** 2)


def test_power_law_speeds_match_the_analytic_moment():
    spec = InitialDataSpec(velocity="power", r=8.0)
    ens = sample_initial(spec, 20000, seed=5)
    assert float(np.mean(ens.speeds())) == pytest.approx(velocity_moment(spec, 1), rel=3e-2)
    assert velocity_moment(spec, 5.0) == math.inf


@pytest.mark.parametrize("spatial, check", [
    ("ball", lambda x: np.all(np.linalg.norm(x, axis=1) <= 1.0 + 1e-12)),
    ("point", lambda x: np.all(x == np.array([0.25, 0.0, 0.0]))),
    ("two_bump", lambda x: abs(np.mean(x[:, 0] < 0) - 0.5) < 0.02),
])
def test_spatial_profiles(spatial, check):
    spec = InitialDataSpec(spatial=spatial, x0=(0.25, 0.0, 0.0), separation=2.0, sigma=0.3)
    assert check(sample_initial(spec, 2000, seed=0).positions)


def test_cold_and_shifted_samples():
    spec = InitialDataSpec(velocity="cold")
    shifted = InitialDataSpec(velocity="cold", shift=(1e-3, 0.0, 0.0))
    a, b = sample_initial(spec, 300, seed=9), sample_initial(shifted, 300, seed=9)
    assert np.all(a.velocities == 0.0)
    np.testing.assert_allclose(b.positions - a.positions, [[1e-3, 0.0, 0.0]] * 300)


def test_f_inf_bound():
    spec = InitialDataSpec(sigma=0.5, vth=0.7)
    expected = (2 * math.pi * 0.25) ** -1.5 * (2 * math.pi * 0.49) ** -1.5
    assert f_inf_bound(spec) == pytest.approx(expected)
    assert f_inf_bound(InitialDataSpec(velocity="cold")) == math.inf


def test_deposit_conserves_mass_and_positivity(grid):
    ens = sample_initial(InitialDataSpec(sigma=0.5), 5000, seed=3)
    rho = deposit_density(ens, grid)
    assert rho.integral() == pytest.approx(1.0, rel=1e-12)
    assert rho.values.min() >= 0.0


def test_particle_at_a_cell_centre_fills_one_cell(grid):
    centre = grid.centers()[[3, 5, 11]]
    rho = deposit_density(_still(centre), grid)
    assert rho.values[3, 5, 11] * grid.cell_volume == pytest.approx(1.0)
    assert np.count_nonzero(rho.values) == 1


def test_particles_on_the_faces_stay_in_the_box(grid):
    rho = deposit_density(_still([[-4.0, 0.0, 4.0], [4.0, 4.0, 4.0]]), grid)
    assert rho.integral() == pytest.approx(1.0)
    assert rho.values[0, 7, 15] > 0 and rho.values[15, 15, 15] > 0


def test_out_of_box_particles(grid):
    positions = np.zeros((200, 3))
    positions[0] = (5.0, 0.0, 0.0)
    with pytest.warns(RuntimeWarning):
        rho = deposit_density(_still(positions), grid)
    assert rho.integral() == pytest.approx(199 / 200)
    positions[1:3] = (0.0, -6.0, 0.0)
    with pytest.raises(TruncationError):
        deposit_density(_still(positions), grid)


def test_gather_is_the_adjoint_of_deposit(grid):
    ens = sample_initial(InitialDataSpec(sigma=0.8), 3000, seed=8)
    rho = deposit_density(ens, grid)
    rng = np.random.default_rng(0)
    u = ScalarField(grid, rng.normal(size=grid.shape))
    lhs = float(np.sum(gather_scalar(u, ens.positions))) * ens.weight
    rhs = float(np.sum(u.values * rho.values)) * grid.cell_volume
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_interpolation_is_exact_for_linear_fields(grid):
    x, y, z = grid.mesh()
    E = VectorField(grid, (x, 2.0 * y, -z))
    rng = np.random.default_rng(1)
    inner = grid.half_width - grid.spacing
    positions = rng.uniform(-inner, inner, size=(100, 3))
    acc = interpolate_acceleration(E, positions)
    np.testing.assert_allclose(acc, positions * np.array([1.0, 2.0, -1.0]), atol=1e-12)
    assert np.all(interpolate_acceleration(E, [[0.0, 9.0, 0.0]]) == 0.0)


def test_self_consistent_step(grid, g):
    ens = sample_initial(InitialDataSpec(sigma=0.5, vth=0.3), 2000, seed=2)
    state = initial_state(ens, grid, g)
    assert current_field(state) is state.split.e_total
    advanced = step(state, 0.02)
    assert advanced.time == pytest.approx(0.02)
    assert advanced.steps == 1
    assert not advanced.stale and advanced.split is not state.split
    assert np.array_equal(advanced.ensemble.ids, ens.ids)
    # the input state is left untouched
    assert np.array_equal(state.ensemble.positions, ens.positions)
    assert not np.array_equal(advanced.ensemble.positions, ens.positions)
    with pytest.raises(StaleStateError):
        current_field(replace(advanced, stale=True))


def test_fixed_mode_step(grid, g):
    ens = sample_initial(InitialDataSpec(sigma=0.5, vth=0.3), 1000, seed=2)
    state = step(initial_state(ens, grid, g), 0.02, mode="fixed")
    assert state.mode.value == "fixed"
    assert state.split.electron_mass > 0


def test_harmonic_frozen_field_period():
    state = _frozen_state(_still([1.0, 0.0, 0.0]), lambda x: -x)
    snapshots = run(state, 1e-3, 10.0)
    times = np.array([s.time for s in snapshots])
    x = np.array([s.positions[0, 0] for s in snapshots])
    down = np.nonzero((x[:-1] > 0) & (x[1:] <= 0))[0]
    crossings = times[down] + x[down] / (x[down] - x[down + 1]) * (times[down + 1] - times[down])
    assert len(crossings) >= 2
    assert crossings[1] - crossings[0] == pytest.approx(2 * math.pi, rel=1e-2)


def _anharmonic(x):
    return -x - 0.3 * x ** 3


def test_leapfrog_is_second_order():
    positions = [[1.0, 0.0, 0.0], [0.0, -0.8, 0.3], [0.5, 0.5, -0.5]]
    velocities = [[0.0, 0.2, 0.0], [0.3, 0.0, 0.0], [0.0, 0.0, 0.4]]
    state = _frozen_state(ParticleEnsemble(positions, velocities), _anharmonic)
    finals = [run(state, dt, 0.5)[-1].positions for dt in (0.02, 0.01, 0.005)]
    ratio = np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2])
    assert ratio == pytest.approx(4.0, rel=0.2)


def test_leapfrog_preserves_phase_space_area():
    positions = [[0.5, 0.0, 0.0], [0.6, 0.0, 0.0], [0.5, 0.0, 0.0]]
    velocities = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.1, 0.0, 0.0]]
    state = _frozen_state(ParticleEnsemble(positions, velocities), lambda x: -x)
    for _ in range(200):
        state = step(state, 0.01)
    x, v = state.ensemble.positions[:, 0], state.ensemble.velocities[:, 0]
    area = (x[1] - x[0]) * (v[2] - v[0]) - (x[2] - x[0]) * (v[1] - v[0])
    assert area == pytest.approx(0.01, rel=1e-10)


def test_large_steps_are_subdivided():
    state = _frozen_state(_still([0.0, 0.0, 0.0], [[100.0, 0.0, 0.0]]), lambda x: np.zeros_like(x))
    advanced = step(state, 0.01)
    assert advanced.steps == 1
    assert advanced.time == pytest.approx(0.01)
    assert advanced.ensemble.positions[0, 0] == pytest.approx(1.0)


def test_too_many_halvings_is_a_step_error():
    state = _frozen_state(_still([0.0, 0.0, 0.0], [[1e6, 0.0, 0.0]]), lambda x: np.zeros_like(x))
    with pytest.raises(StepError):
        step(state, 0.01)


def test_mass_leaving_the_box_is_a_step_error(grid, g):
    positions = np.tile([3.95, 0.0, 0.0], (10, 1))
    velocities = np.tile([10.0, 0.0, 0.0], (10, 1))
    state = initial_state(ParticleEnsemble(positions, velocities), grid, g)
    with pytest.raises(StepError) as info:
        step(state, 0.01)
    assert isinstance(info.value.cause, TruncationError)


def test_invalid_step_size(grid, g):
    state = _frozen_state(_still([0.0, 0.0, 0.0]), lambda x: -x)
    with pytest.raises(InvalidParameterError):
        step(state, 0.0)
    with pytest.raises(InvalidParameterError):
        run(state, 0.1, 1.0, snapshot_every=0)


def test_run_snapshot_cadence():
    state = _frozen_state(_still([0.5, 0.0, 0.0]), lambda x: -x)
    seen, stepped = [], []
    snapshots = run(state, 0.02, 0.1, snapshot_every=2, observer=seen.append, on_step=stepped.append)
    np.testing.assert_allclose([s.time for s in snapshots], [0.0, 0.04, 0.08, 0.1])
    assert len(seen) == 4
    np.testing.assert_allclose([s.time for s in stepped], [0.0, 0.02, 0.04, 0.06, 0.08, 0.1])
    assert [s.steps for s in stepped] == list(range(6))
    uneven = run(state, 0.02, 0.05)
    assert uneven[-1].time == pytest.approx(0.05)
    assert len(uneven) == 4


def test_velocity_support_growth_under_constant_force():
    state = _frozen_state(_still([0.0, 0.0, 0.0]), lambda x: np.tile([1.0, 0.0, 0.0], (len(x), 1)))
    snapshots = run(state, 0.01, 1.0, snapshot_every=10)
    assert velocity_support_growth(snapshots) == pytest.approx(1.0, rel=1e-9)


def test_snapshots_are_read_only_and_persist(tmp_path):
    ens = sample_initial(InitialDataSpec(), 50, seed=0)
    snapshot = Snapshot(0.5, ens.ids.copy(), ens.positions.copy(), ens.velocities.copy())
    frozen = Snapshot.of(_frozen_state(ens, lambda x: -x))
    with pytest.raises(ValueError):
        frozen.positions[0, 0] = 1.0
    write_snapshot(snapshot, tmp_path / "s.vpme")
    data = (tmp_path / "s.vpme").read_bytes()
    assert data[:6] == b"VPMEP1"
    assert len(data) == 6 + 8 + 8 + 50 * 56
    back = read_snapshot(tmp_path / "s.vpme")
    assert back.time == 0.5
    assert np.array_equal(back.ids, snapshot.ids)
    assert np.array_equal(back.positions, snapshot.positions)
    assert np.array_equal(back.velocities, snapshot.velocities)
    assert np.array_equal(back.ensemble().positions, ens.positions)
