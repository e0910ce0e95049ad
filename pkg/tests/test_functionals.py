import numpy as np
import pytest

from splitbreg.functionals import (ErrorSchedule, dual_resolvent, functional_from_label,
                                   geometric_schedule, harmonic_schedule,
                                   prox_indicator_point, prox_l1, prox_quadratic,
                                   prox_weighted_l21, zero_functional, zero_schedule)


def _catalogue(dim=8):
    rng = np.random.default_rng(0)
    anchor = rng.standard_normal(dim)
    mask = np.zeros(dim, dtype=bool)
    mask[:3] = True
    return [
        prox_l1(1.0, dim=dim),
        prox_l1(np.abs(rng.standard_normal(dim)), dim=dim),
        prox_weighted_l21(np.abs(rng.standard_normal(dim // 2)) + 0.1, block_size=2),
        prox_quadratic(rng.standard_normal(dim), 0.7),
        prox_indicator_point(anchor, mask),
        prox_indicator_point(anchor),
    ]


def test_l1_examples():
    f = prox_l1(1.0, dim=1)
    assert np.array_equal(f.prox(np.array([2.0]), 1.0), [1.0])
    assert np.array_equal(f.prox(np.array([0.5]), 1.0), [0.0])
    assert np.array_equal(f.prox(np.array([-3.0]), 1.0), [-2.0])
    assert f.value(np.array([-3.0])) == 3.0
    with pytest.raises(ValueError):
        prox_l1(-0.5, dim=2)
    with pytest.raises(ValueError):
        prox_l1(1.0)  # scalar weight needs an explicit dim


def test_weighted_l21_examples():
    f = prox_weighted_l21(np.array([1.0]), block_size=2)
    out = f.prox(np.array([3.0, 4.0]), 1.0)
    assert np.allclose(out, [2.4, 3.2], atol=1e-15)
    assert np.array_equal(f.prox(np.zeros(2), 1.0), [0.0, 0.0])
    f0 = prox_weighted_l21(np.array([0.0]), block_size=2)
    y = np.array([0.3, -0.7])
    assert np.array_equal(f0.prox(y, 1.0), y)
    assert f.value(np.array([3.0, 4.0])) == 5.0
    with pytest.raises(ValueError):
        prox_weighted_l21(np.array([-1.0]), block_size=2)


def test_quadratic_examples():
    z = np.array([1.0, -2.0])
    f = prox_quadratic(z, 1.0)
    for t in (0.1, 1.0, 10.0):
        assert np.allclose(f.prox(z, t), z)
    f0 = prox_quadratic(np.zeros(1), 1.0)
    assert np.array_equal(f0.prox(np.array([4.0]), 1.0), [2.0])
    x = np.array([0.3, 0.4])
    assert np.allclose(f.prox(x, 1e-8), x, atol=1e-6)
    with pytest.raises(ValueError):
        prox_quadratic(z, 0.0)


def test_indicator_examples():
    anchor = np.array([7.0, 0.0])
    full = prox_indicator_point(anchor)
    assert np.array_equal(full.prox(np.array([1.0, 2.0]), 0.5), anchor)
    assert full.value(anchor) == 0.0
    assert full.value(np.array([7.0, 0.1])) == np.inf

    none = prox_indicator_point(anchor, np.zeros(2, dtype=bool))
    x = np.array([1.0, 2.0])
    assert np.array_equal(none.prox(x, 1.0), x)

    mixed = prox_indicator_point(anchor, np.array([True, False]))
    assert np.array_equal(mixed.prox(np.array([1.0, 2.0]), 1.0), [7.0, 2.0])


def test_zero_functional():
    f = zero_functional(3)
    x = np.array([1.0, -2.0, 3.0])
    assert f.value(x) == 0.0
    assert np.array_equal(f.prox(x, 2.0), x)
    assert f.conjugate_value(np.zeros(3)) == 0.0
    assert f.conjugate_value(x) == np.inf


def test_dual_resolvent_examples():
    l1 = prox_l1(1.0, dim=1)
    assert np.array_equal(dual_resolvent(l1, np.array([2.0]), 1.0), [1.0])
    quad = prox_quadratic(np.zeros(1), 1.0)
    assert np.array_equal(dual_resolvent(quad, np.array([4.0]), 1.0), [2.0])
    with pytest.raises(ValueError):
        dual_resolvent(l1, np.array([1.0]), 0.0)


def test_dual_resolvent_against_conjugate_closed_forms():
    rng = np.random.default_rng(3)
    for lam in (0.1, 1.0, 10.0):
        w = np.abs(rng.standard_normal(6)) + 0.2
        l1 = prox_l1(w, dim=6)
        x = 3.0 * rng.standard_normal(6)
        # prox of lam * (l1 conjugate) is the projection onto the weight box
        assert np.allclose(dual_resolvent(l1, x, lam), np.clip(x, -w, w), atol=1e-12)

        wb = np.abs(rng.standard_normal(3)) + 0.2
        l21 = prox_weighted_l21(wb, block_size=2)
        x = 3.0 * rng.standard_normal(6)
        blocks = x.reshape(-1, 2)
        nrm = np.linalg.norm(blocks, axis=1)
        scale = np.minimum(1.0, wb / np.where(nrm > 0, nrm, 1.0))
        proj = (blocks * scale[:, None]).reshape(-1)
        assert np.allclose(dual_resolvent(l21, x, lam), proj, atol=1e-12)

        z = rng.standard_normal(6)
        rho = 0.7
        quad = prox_quadratic(z, rho)
        x = rng.standard_normal(6)
        assert np.allclose(dual_resolvent(quad, x, lam), (x - lam * z) / (1.0 + lam / rho),
                           atol=1e-12)

        anchor = rng.standard_normal(6)
        mask = np.array([True, True, False, False, True, False])
        ind = prox_indicator_point(anchor, mask)
        x = rng.standard_normal(6)
        expect = np.zeros(6)
        expect[mask] = x[mask] - lam * anchor[mask]
        assert np.allclose(dual_resolvent(ind, x, lam), expect, atol=1e-12)


def test_moreau_identity_across_catalogue():
    # x must recompose as prox_{lam F}(x) + lam * prox_{F*/lam}(x/lam),
    # the conjugate prox being reconstructed through dual_resolvent
    rng = np.random.default_rng(9)
    for F in _catalogue():
        for lam in (0.1, 1.0, 10.0):
            for _ in range(10):
                x = 3.0 * rng.standard_normal(F.dim)
                dual_part = lam * dual_resolvent(F, x / lam, 1.0 / lam)
                assert np.linalg.norm(F.prox(x, lam) + dual_part - x) <= 1e-10


def test_prox_is_firmly_nonexpansive():
    rng = np.random.default_rng(4)
    for F in _catalogue():
        for t in (0.5, 2.0):
            for _ in range(25):
                x = 2.0 * rng.standard_normal(F.dim)
                y = 2.0 * rng.standard_normal(F.dim)
                px, py = F.prox(x, t), F.prox(y, t)
                diff = px - py
                assert float(np.dot(diff, diff)) <= float(np.dot(diff, x - y)) + 1e-10
                assert np.linalg.norm(diff) <= np.linalg.norm(x - y) + 1e-10


def test_prox_optimality_probes():
    rng = np.random.default_rng(8)
    for F in _catalogue():
        for _ in range(4):
            x = 2.0 * rng.standard_normal(F.dim)
            t = float(np.exp(rng.uniform(-1.5, 1.5)))
            p = F.prox(x, t)
            base = F.value(p) + np.dot(p - x, p - x) / (2.0 * t)
            for _ in range(25):
                z = p + rng.standard_normal(F.dim) * rng.uniform(0.01, 2.0)
                if F.label == "indicator_point":
                    z = F.prox(z, 1.0)  # probe feasible points too
                cand = F.value(z) + np.dot(z - x, z - x) / (2.0 * t)
                assert base <= cand + 1e-10


def test_error_schedule_validation():
    geometric_schedule(0.5)
    zero_schedule()
    harmonic_schedule()  # declared non-summable: fine
    with pytest.raises(ValueError, match="summable"):
        ErrorSchedule(alpha=lambda k: 1.0 / k, beta=lambda k: 0.0, summable=True)
    with pytest.raises(ValueError):
        geometric_schedule(1.0)
    with pytest.raises(ValueError):
        geometric_schedule(0.5, scale=-1.0)


def test_functional_from_label():
    f = functional_from_label("l1", 4, {"weight": 2.0})
    assert f.label == "l1" and f.dim == 4
    f = functional_from_label("weighted_l21", 6, {"block_size": 2})
    assert f.dim == 6
    f = functional_from_label("quadratic", 3, {"target": [1.0, 2.0, 3.0]})
    assert f.label == "quadratic"
    f = functional_from_label("indicator_point", 2, {"anchor": [0.0, 1.0]})
    assert f.label == "indicator_point"
    assert functional_from_label("zero", 5, {}).label == "zero"
    with pytest.raises(ValueError, match="unknown functional label"):
        functional_from_label("huber", 3, {})
