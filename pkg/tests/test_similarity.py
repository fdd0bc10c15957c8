import math

import numpy as np
import pytest

from trajsim.distance import DistanceMeasure
from trajsim.exceptions import ArgumentError, ShapeError
from trajsim.similarity import (
    pair_similarity,
    pair_similarity_backward,
    resolve_sim,
    sim_chebyshev,
    sim_cosine,
    sim_euclidean,
    similarity_to_many,
    tailored_sim,
)

SINGLE = {"euclidean": sim_euclidean, "chebyshev": sim_chebyshev, "cosine": sim_cosine}


def test_euclidean_examples():
    v = np.array([0.3, 1.2, 5.0])
    assert sim_euclidean(v, v) == 1.0
    assert sim_euclidean([1, 0, 0], [0, 0, 0]) == pytest.approx(0.367879, abs=1e-6)


def test_chebyshev_examples():
    assert sim_chebyshev([1.0, 2.0], [1.0, 2.0]) == 1.0
    assert sim_chebyshev([0, 0], [0.5, 2]) == pytest.approx(0.135335, abs=1e-6)


def test_cosine_examples():
    assert sim_cosine([0.4, 2.0, 1.0], [0.4, 2.0, 1.0]) == pytest.approx(1.0, abs=1e-7)
    assert sim_cosine([1, 0], [0, 1]) == 0.0
    assert sim_cosine([0, 0, 0], [1, 2, 3]) == 0.0
    assert sim_cosine([0, 0], [0, 0]) == 0.0


@pytest.mark.parametrize("name", sorted(SINGLE))
def test_symmetry_and_range(rng, name):
    fn = SINGLE[name]
    for _ in range(200):
        a, b = np.abs(rng.normal(size=(2, 16)))
        s = fn(a, b)
        assert s == fn(b, a)
        assert 0.0 <= s <= 1.0 + 1e-15


def test_chebyshev_dominates_euclidean(rng):
    for _ in range(200):
        a, b = rng.normal(size=(2, 8))
        assert sim_chebyshev(a, b) >= sim_euclidean(a, b)


@pytest.mark.parametrize("name", sorted(SINGLE))
def test_length_mismatch(name):
    with pytest.raises(ShapeError):
        SINGLE[name]([1.0, 2.0], [1.0, 2.0, 3.0])


def test_tailored_rule():
    assert tailored_sim(DistanceMeasure.DTW) == "cosine"
    assert tailored_sim("hausdorff") == "chebyshev"
    assert tailored_sim("frechet") == "chebyshev"
    assert resolve_sim("tailored", "dtw") == "cosine"
    assert resolve_sim("euclidean", "dtw") == "euclidean"
    with pytest.raises(ArgumentError):
        resolve_sim("tailored")
    with pytest.raises(ArgumentError):
        resolve_sim("manhattan")


@pytest.mark.parametrize("name", sorted(SINGLE))
def test_vectorised_forms_agree(rng, name):
    V1, V2 = np.abs(rng.normal(size=(2, 30, 12)))
    rows = pair_similarity(name, V1, V2)
    many = similarity_to_many(name, V1[0], V2)
    for i in range(30):
        assert rows[i] == pytest.approx(SINGLE[name](V1[i], V2[i]), rel=1e-13)
        assert many[i] == pytest.approx(SINGLE[name](V1[0], V2[i]), rel=1e-13)


@pytest.mark.parametrize("name", sorted(SINGLE))
def test_backward_matches_finite_differences(rng, name):
    V1, V2 = np.abs(rng.normal(size=(2, 5, 7))) + 0.1
    ds = rng.normal(size=5)
    s = pair_similarity(name, V1, V2)
    g1, g2 = pair_similarity_backward(name, V1, V2, s, ds)
    eps = 1e-6
    for V, g in ((V1, g1), (V2, g2)):
        num = np.zeros_like(V)
        for idx in np.ndindex(V.shape):
            old = V[idx]
            V[idx] = old + eps
            up = ds @ pair_similarity(name, V1, V2)
            V[idx] = old - eps
            down = ds @ pair_similarity(name, V1, V2)
            V[idx] = old
            num[idx] = (up - down) / (2 * eps)
        np.testing.assert_allclose(g, num, rtol=1e-6, atol=1e-8)


def test_euclidean_gradient_at_coincident_points():
    V = np.ones((1, 4))
    g1, g2 = pair_similarity_backward("euclidean", V, V.copy(), np.ones(1), np.ones(1))
    assert not np.isnan(g1).any() and (g1 == 0).all() and (g2 == 0).all()


def test_euclidean_ranking_matches_raw_distance(rng):
    reps = rng.normal(size=(100, 6))
    q = rng.normal(size=6)
    s = similarity_to_many("euclidean", q, reps)
    d = np.sqrt(((reps - q) ** 2).sum(axis=1))
    np.testing.assert_array_equal(np.argsort(-s, kind="stable"), np.argsort(d, kind="stable"))
    assert math.isclose(s.max(), math.exp(-d.min()))
