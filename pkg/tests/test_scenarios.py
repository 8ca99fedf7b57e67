import numpy as np
import pytest
from vpme.errors import InvalidSpecError
from vpme.fields.fields import GridSpec
from vpme.scenarios.scenarios import ProfileSpec, ball_density, density_battery, gaussian_density, \
    generate_random_density, interior_bump, profile_field, random_perturbations, two_bump_density


@pytest.fixture(scope="module")
def grid():
    return GridSpec(4.0, 16)


def _mass(field):
    return float(np.sum(field.values)) * field.grid.cell_volume


@pytest.mark.parametrize("make", [
    lambda grid: gaussian_density(grid, 0.5, mass=2.5),
    lambda grid: ball_density(grid, 1.2, mass=2.5),
    lambda grid: two_bump_density(grid, 0.4, 1.5, mass=2.5),
    lambda grid: generate_random_density(grid, seed=4, mass=2.5),
])
def test_profiles_have_exact_mass(grid, make):
    field = make(grid)
    assert _mass(field) == pytest.approx(2.5, rel=1e-12)
    assert field.values.min() >= 0.0


def test_two_bumps_are_mirror_images(grid):
    values = two_bump_density(grid, 0.4, 1.5).values
    np.testing.assert_allclose(values, values[::-1, :, :], atol=1e-14)


@pytest.mark.parametrize("kwargs", [{"profile": "cube"}, {"sigma": 0.0}, {"radius": -1.0}, {"center": (0.0, 0.0)}])
def test_profile_spec_validation(kwargs):
    with pytest.raises(InvalidSpecError):
        ProfileSpec(**kwargs)


def test_profile_field_follows_the_spec(grid):
    field = profile_field(grid, ProfileSpec(profile="ball", radius=1.0))
    assert field.name == "g"
    np.testing.assert_allclose(field.values, ball_density(grid, 1.0).values)


def test_random_density_is_seeded(grid):
    a, b = generate_random_density(grid, seed=9), generate_random_density(grid, seed=9)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, generate_random_density(grid, seed=10).values)


def test_density_battery(grid):
    battery = density_battery(grid)
    assert [s.name for s in battery] == ["neutral", "ball", "narrow", "two_bump", "random", "wide_g"]
    for scenario in battery:
        assert _mass(scenario.rho) == pytest.approx(1.0)
        assert _mass(scenario.g) == pytest.approx(1.0)
    np.testing.assert_array_equal(battery[0].rho.values, battery[0].g.values)


def test_interior_bump_vanishes_on_the_boundary_layer(grid):
    bump = interior_bump(grid, (3.5, 0.0, 0.0), 1.5)
    assert bump.max() > 0
    for face in (bump[0], bump[-1], bump[:, 0], bump[:, -1], bump[:, :, 0], bump[:, :, -1]):
        assert np.all(face == 0.0)


def test_random_perturbations(grid):
    directions = random_perturbations(grid, count=7, seed=3, amplitude=0.2)
    assert len(directions) == 7
    for phi in directions:
        assert phi.shape == grid.shape
        assert 0 < np.abs(phi).max() <= 0.2
