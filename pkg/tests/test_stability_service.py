import os

import numpy as np
import pytest
from numpy.testing import assert_allclose

from semispec.models.errors import MatrixError
from semispec.models.schemas import GeneratorSpec
from tests.matrices import DIAG12, J2, ROTATION

SAMPLES = [np.array([1.0, 0.0]), np.array([0.3, -0.7 + 0.2j])]


def spec(A, name="g"):
    return GeneratorSpec(name=name, A=A)


@pytest.mark.parametrize("A, expected", [
    (DIAG12, "uniformly-stable"),
    (ROTATION, "bounded"),
    (J2, "unbounded"),
    (np.diag([-1.0, 1.0]), "unbounded"),
    (np.zeros((2, 2)), "bounded"),
])
def test_stability_class(stability, A, expected):
    assert stability.stability_class(spec(A)) == expected


def test_strong_check_on_diagonal(stability):
    verdict = stability.strong_stability_check(spec(DIAG12), SAMPLES)
    assert verdict.status == "stable"
    assert verdict.criterion_holds and verdict.simulation_agrees
    assert_allclose(verdict.decay_rate, -1.0, atol=1e-3)
    assert all(r < 1e-3 for r in verdict.criterion_evidence["final_ratios"])


def test_strong_check_rejects_rotation(stability):
    verdict = stability.strong_stability_check(spec(ROTATION), SAMPLES)
    assert verdict.status == "not-stable"
    assert not verdict.criterion_holds
    assert verdict.simulation_agrees
    assert_allclose(verdict.criterion_evidence["final_ratios"], np.ones(3), rtol=1e-8)
    assert len(verdict.criterion_evidence["local_spectra_on_axis"]) == 2


def test_strong_check_needs_a_bounded_semigroup(stability):
    verdict = stability.strong_stability_check(spec(np.diag([-1.0, 1.0])), SAMPLES)
    assert verdict.status == "hypothesis-not-met"
    assert not verdict.hypothesis_met
    assert verdict.criterion_evidence["omega"] > 0
    assert verdict.decay_rate is None


def test_uniform_check_on_diagonal(stability):
    verdict = stability.uniform_stability_check(spec(DIAG12), 1.0, SAMPLES)
    assert verdict.status == "stable"
    assert verdict.simulation_agrees
    assert_allclose(verdict.criterion_evidence["spectral_radius"], np.exp(-1.0), rtol=1e-10)
    assert_allclose(verdict.criterion_evidence["power_ratio"], np.exp(-1.0), rtol=0.1)


def test_uniform_check_rejects_rotation(stability):
    verdict = stability.uniform_stability_check(spec(ROTATION), 1.0, SAMPLES)
    assert verdict.status == "not-stable"
    assert verdict.simulation_agrees
    assert_allclose(verdict.criterion_evidence["power_norms"], np.ones(60), rtol=1e-8)


def test_uniform_check_at_time_zero(stability):
    verdict = stability.uniform_stability_check(spec(DIAG12), 0.0, SAMPLES)
    assert not verdict.criterion_holds
    assert verdict.simulation_agrees
    assert verdict.decay_rate is None


def test_uniform_check_rejects_negative_time(stability):
    with pytest.raises(MatrixError, match="nonnegative"):
        stability.uniform_stability_check(spec(DIAG12), -1.0, SAMPLES)


ZOO = ["diagonal", "jordan", "nilpotentShift", "rotation", "aliasPair", "truncatedLeftShift",
       "heat1d", "transport1d", "randomStable", "randomNonNormal"]


@pytest.mark.parametrize("name", ZOO)
def test_strong_criterion_is_sound_over_zoo(stability, zoo, name):
    generator = zoo.builtin(name)
    rng = np.random.default_rng(9)
    samples = [rng.standard_normal(generator.dim) for _ in range(4)]
    verdict = stability.strong_stability_check(generator, samples)
    assert verdict.simulation_agrees
    if verdict.criterion_holds:
        assert all(r < 1e-3 for r in verdict.criterion_evidence["final_ratios"])


@pytest.mark.parametrize("name", ZOO)
def test_uniform_criterion_matches_spectral_radius(stability, zoo, name):
    generator = zoo.builtin(name)
    verdict = stability.uniform_stability_check(generator, 0.5, [np.ones(generator.dim)])
    if verdict.hypothesis_met:
        assert verdict.criterion_evidence["local_criterion"] == verdict.criterion_evidence["radius_criterion"]
        assert verdict.simulation_agrees


@pytest.mark.parametrize("x, rate", [
    (np.array([0.0, 1.0]), -2.0),
    (np.array([1.0, 1.0]), -1.0),
])
def test_decay_rate_of_diagonal(stability, x, rate):
    assert_allclose(stability.decay_rate_estimate(spec(DIAG12), x, np.linspace(0, 20, 200)), rate, atol=1e-3)


def test_decay_rate_of_rotation(stability):
    assert_allclose(stability.decay_rate_estimate(spec(ROTATION), [1.0, 0.0], np.linspace(0, 10, 50)), 0.0,
                    atol=1e-10)


def test_decay_rate_survives_underflow(stability):
    fast = spec(np.diag([-400.0, -500.0]))
    rate = stability.decay_rate_estimate(fast, [1.0, 0.0], np.linspace(0, 3, 40))
    assert_allclose(rate, -400.0, rtol=1e-6)


def test_decay_rate_needs_four_points(stability):
    with pytest.raises(MatrixError, match="at least 4"):
        stability.decay_rate_estimate(spec(DIAG12), [1.0, 0.0], [0.0, 1.0, 2.0])


def test_power_norms_stop_at_the_floor(stability):
    norms = stability.power_norms(np.diag([1e-100, 0.0]))
    assert norms == [pytest.approx(1e-100), pytest.approx(1e-200)]


def test_write_trajectories_one_file_per_sample(stability, tmp_path):
    paths = stability.write_trajectories(spec(DIAG12), SAMPLES, [0.0, 0.5, 1.0], str(tmp_path / "strong.csv"))
    assert [os.path.basename(p) for p in paths] == ["strong_x0.csv", "strong_x1.csv"]
    assert open(paths[0]).readline().strip() == "t,norm"
