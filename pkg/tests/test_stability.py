import itertools
import math
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from vpme.electrostatics.electrostatics import solve_split_field
from vpme.errors import CouplingError, InvalidParameterError, UnsynchronizedError
from vpme.fields.fields import GridSpec, solve_free_space_poisson, negative_gradient
from vpme.kinetics.kinetics import InitialDataSpec, ParticleEnsemble, Snapshot, deposit_density, sample_initial
from vpme.scenarios.scenarios import gaussian_density
from vpme.stability.stability import Coupling, coupled_distance, field_split_terms, field_stability_check, \
    gronwall_envelope, h_modulus, log_lipschitz_check, paired_subsample, regime_switch_time, verify_stability, w2, \
    w2_entropic, w2_exact


def _cloud(n, seed):
    rng = np.random.default_rng(seed)
    return ParticleEnsemble(rng.normal(size=(n, 3)), rng.normal(size=(n, 3)))


def _shifted(ens, dx):
    return ParticleEnsemble(ens.positions + np.asarray(dx), ens.velocities.copy(), ens.ids.copy())


def test_identity_coupling_and_translation_distance():
    ens = _cloud(100, 0)
    assert coupled_distance(ens, _shifted(ens, (0.3, 0.0, -0.4))) == pytest.approx(0.25)
    assert coupled_distance(ens, ens) == 0.0


def test_coupling_follows_ids():
    ens = _cloud(20, 1)
    order = np.random.default_rng(2).permutation(20)
    permuted = ParticleEnsemble(ens.positions[order], ens.velocities[order], ens.ids[order])
    assert coupled_distance(ens, permuted) == 0.0
    pairs = np.column_stack([np.arange(20), np.roll(np.arange(20), 1)])
    assert coupled_distance(ens, ens, Coupling(pairs)) > 0.0


@pytest.mark.parametrize("pairs", [np.zeros((20, 2)), np.column_stack([np.arange(19), np.arange(19)])])
def test_bad_couplings(pairs):
    ens = _cloud(20, 1)
    with pytest.raises(CouplingError):
        coupled_distance(ens, ens, Coupling(pairs))
    with pytest.raises(CouplingError):
        coupled_distance(ens, _cloud(21, 1))


def test_exact_w2_matches_brute_force():
    a, b = _cloud(8, 3), _cloud(8, 4)
    pa = np.hstack([a.positions, a.velocities])
    pb = np.hstack([b.positions, b.velocities])
    cost = ((pa[:, None, :] - pb[None, :, :]) ** 2).sum(axis=2)
    best = min(cost[np.arange(8), list(perm)].sum() for perm in itertools.permutations(range(8)))
    assert w2_exact(a, b) == pytest.approx(math.sqrt(best / 8))
    assert w2_exact(a, b) ** 2 <= coupled_distance(a, b) + 1e-12


def test_exact_w2_of_a_translation():
    ens = _cloud(300, 5)
    assert w2_exact(ens, _shifted(ens, (0.5, 0.0, 0.0))) == pytest.approx(0.5)
    assert w2_exact(ens, _shifted(ens, (0.0, 0.2, 0.0)), positions_only=True) == pytest.approx(0.2)


def test_exact_w2_cap():
    ens = _cloud(40, 6)
    with pytest.raises(InvalidParameterError):
        w2_exact(ens, ens, cap=32)
    with pytest.raises(CouplingError):
        w2_exact(ens, _cloud(39, 6))


def test_entropic_w2_of_a_translation():
    ens = _cloud(256, 7)
    shifted = _shifted(ens, (0.5, 0.0, 0.0))
    exact = w2_exact(ens, shifted)
    estimate = w2_entropic(ens, shifted)
    assert estimate.value == pytest.approx(exact, abs=2e-2)
    assert estimate.value >= exact - estimate.gap_bound - 1e-9
    assert float(estimate) == estimate.value
    with pytest.raises(InvalidParameterError):
        w2_entropic(ens, shifted, epsilon=0.0)


def test_entropic_w2_of_a_large_ensemble_uses_a_bounded_support():
    ens = _cloud(200000, 11)
    shifted = _shifted(ens, (0.5, 0.0, 0.0))
    estimate = w2_entropic(ens, shifted, support=256)
    assert estimate.support == 256
    assert estimate.value == pytest.approx(0.5, abs=2e-2)
    assert w2(ens, shifted, cap=100, support=256) == pytest.approx(estimate.value)
    with pytest.raises(InvalidParameterError):
        w2_entropic(ens, shifted, support=0)


def test_paired_subsample_keeps_the_coupling():
    ens = _cloud(1000, 12)
    other = ParticleEnsemble(ens.positions[::-1] + 0.1, ens.velocities[::-1], ens.ids[::-1])
    sub1, sub2 = paired_subsample(ens, other, size=50)
    assert sub1.count == sub2.count == 50
    np.testing.assert_allclose(sub2.positions - sub1.positions, 0.1)
    assert coupled_distance(sub1, sub2) == pytest.approx(0.03)
    full1, full2 = paired_subsample(ens, other, size=5000)
    assert full1.count == 1000
    np.testing.assert_allclose(full2.velocities, full1.velocities)


@pytest.mark.slow
def test_entropic_w2_on_independent_clouds():
    a, b = _cloud(512, 8), _cloud(512, 9)
    exact = w2_exact(a, b)
    estimate = w2_entropic(a, b)
    assert estimate.value >= exact - estimate.gap_bound - 1e-9
    assert estimate.value ** 2 <= exact ** 2 + 2e-3 * math.log(512) + estimate.gap_bound ** 2
    assert w2(a, b, cap=100) == pytest.approx(estimate.value)


def test_h_modulus():
    assert h_modulus(0.0) == 0.0
    threshold = math.exp(-2.0)
    assert h_modulus(threshold) == pytest.approx(4.0 * threshold)
    assert h_modulus(1.0) == pytest.approx(4.0 * threshold)
    s = np.linspace(1e-9, threshold, 200)
    assert np.all(np.diff(h_modulus(s)) >= 0)
    with pytest.raises(InvalidParameterError):
        h_modulus(-1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-8, 0.49), st.floats(0.1, 5.0))
def test_envelope_is_continuous_at_the_switch(w2_0, c):
    t0 = regime_switch_time(w2_0, c)
    assert t0 > 0
    assert gronwall_envelope(w2_0, c, t0) == pytest.approx(0.5, rel=1e-9)
    assert gronwall_envelope(w2_0, c, t0 * (1 + 1e-9)) == pytest.approx(0.5, rel=1e-6)
    assert gronwall_envelope(w2_0, c, 0.0) == pytest.approx(w2_0)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-6, 3.0), st.floats(0.1, 5.0), st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_envelope_is_non_decreasing(w2_0, c, t1, t2):
    lo, hi = sorted((t1, t2))
    assert gronwall_envelope(w2_0, c, lo) <= gronwall_envelope(w2_0, c, hi) * (1 + 1e-12)


def test_envelope_regimes():
    assert gronwall_envelope(0.8, 2.0, 1.0) == pytest.approx(0.8 * math.exp(2.0))
    assert gronwall_envelope(0.0, 2.0, 1.0) == 0.0
    assert regime_switch_time(0.7, 1.0) == 0.0
    with pytest.raises(InvalidParameterError):
        gronwall_envelope(0.1, 0.0, 1.0)


def _paired_runs(delta0, times, n=64):
    base = _cloud(n, 10)
    run1 = [Snapshot(t, base.ids, base.positions, base.velocities) for t in times]
    run2 = [Snapshot(t, base.ids, base.positions + [delta0 * math.exp(t), 0.0, 0.0], base.velocities)
            for t in times]
    return run1, run2


def test_verify_stability_on_a_growing_translation():
    times = np.linspace(0.0, 1.0, 6)
    run1, run2 = _paired_runs(0.01, times)
    report = verify_stability(run1, run2)
    np.testing.assert_allclose(report.w2, 0.01 * np.exp(times), rtol=1e-9)
    np.testing.assert_allclose(report.distance, report.w2 ** 2, rtol=1e-9)
    assert report.coupling_ok.all()
    assert math.isfinite(report.constant) and report.constant > 0
    assert report.holds
    assert report.split_terms is None and report.drive_ok is None


def test_verify_stability_with_the_entropic_estimate():
    run1, run2 = _paired_runs(0.3, [0.0, 0.5], n=64)
    report = verify_stability(run1, run2, exact_cap=16)
    assert report.coupling_ok.all()
    np.testing.assert_allclose(report.w2_positions, 0.3 * np.exp([0.0, 0.5]), atol=2e-2)


def test_verify_stability_above_the_entropic_support():
    run1, run2 = _paired_runs(0.2, [0.0, 0.5], n=600)
    report = verify_stability(run1, run2, exact_cap=16, support=128)
    assert report.coupling_ok.all()
    np.testing.assert_allclose(report.distance, (0.2 * np.exp([0.0, 0.5])) ** 2, rtol=1e-9)
    np.testing.assert_allclose(report.w2_positions, 0.2 * np.exp([0.0, 0.5]), atol=2e-2)


def test_unsynchronized_runs():
    run1, run2 = _paired_runs(0.01, [0.0, 0.5])
    with pytest.raises(UnsynchronizedError):
        verify_stability(run1, run2[:1])
    with pytest.raises(UnsynchronizedError):
        verify_stability(run1, [run2[0], Snapshot(0.6, run2[1].ids, run2[1].positions, run2[1].velocities)])


@pytest.fixture(scope="module")
def grid():
    return GridSpec(4.0, 16)


@pytest.fixture(scope="module")
def paired_splits(grid):
    g = gaussian_density(grid, 0.6, name="g")
    ens1 = sample_initial(InitialDataSpec(sigma=0.5), 2000, seed=11)
    ens2 = _shifted(ens1, (0.1, 0.0, 0.0))
    split1 = solve_split_field(deposit_density(ens1, grid), g)
    split2 = solve_split_field(deposit_density(ens2, grid), g)
    return g, ens1, ens2, split1, split2


def test_field_split_terms(paired_splits):
    _, ens1, ens2, split1, split2 = paired_splits
    same = field_split_terms(ens1, ens1, split1, split1)
    assert (same.i1, same.i2, same.i3, same.i4) == (0.0, 0.0, 0.0, 0.0)
    terms = field_split_terms(ens1, ens2, split1, split1)
    assert terms.i1 > 0 and terms.i3 > 0
    assert terms.i2 == 0.0 and terms.i4 == 0.0
    d = coupled_distance(ens1, ens2)
    assert terms.drive(d) > d
    assert set(terms.shape_ratios(d)) == {"i1", "i2", "i3", "i4"}


def test_field_stability_of_a_translated_density(paired_splits):
    g, ens1, ens2, split1, split2 = paired_splits
    verdict = field_stability_check(split1, split2, ens1, ens2, g)
    assert verdict.w2_rho == pytest.approx(0.1)
    assert verdict.bar_holds()
    assert verdict.hat_holds(10.0)
    assert verdict.c0 >= 0.0


def test_log_lipschitz_quotient(grid):
    rho = gaussian_density(grid, 0.5)
    e_bar = negative_gradient(solve_free_space_poisson(rho))
    c = log_lipschitz_check(e_bar, rho, pairs=5000, seed=1)
    assert 0.0 < c < math.inf
