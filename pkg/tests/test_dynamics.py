import numpy as np
import pytest

from epwind.braidgroup import Perm
from epwind.dynamics import (
    EvolutionConfig,
    dominant_state,
    evolution_csv,
    evolution_summary,
    evolve_loop,
    evolve_states,
    instantaneous_basis,
    project_state,
)
from epwind.errors import InvalidInputError, TieError
from epwind.model_dsl import builtin_paper4
from epwind.paths import circle, constant, polygon
from epwind.tracker import path_perm

F = builtin_paper4()


def test_projection_of_eigenvector():
    lam, r, l, _ = instantaneous_basis(F, 0.5)
    np.testing.assert_allclose(np.abs(project_state(r[:, 1], r, l)), [0, 1, 0, 0], atol=1e-10)


def test_reconstruction():
    lam, r, l, _ = instantaneous_basis(F, 0.5)
    rng = np.random.default_rng(2)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    c = project_state(psi, r, l)
    assert np.linalg.norm(r @ c - psi) <= 1e-8


def test_hermitian_limit_projection_is_orthogonal():
    g = F.with_params(gamma=0.0)
    lam, r, l, _ = instantaneous_basis(g, 0.5)
    psi = np.array([0.3, -0.2j, 0.9, 0.1])
    bi = project_state(psi, r, l)
    plain = project_state(psi, r, l, biorthogonal=False)
    np.testing.assert_allclose(np.abs(bi), np.abs(plain), atol=1e-10)


def test_dominant_state():
    assert dominant_state([0.01, 0.99, 0, 0]) == 2
    with pytest.raises(TieError):
        dominant_state([0.5, 0.5, 0.1, 0])


def test_config_validation():
    with pytest.raises(InvalidInputError):
        EvolutionConfig(omega=0.0)
    with pytest.raises(InvalidInputError):
        evolve_loop(F, constant(0.4), 5)


def test_zero_length_loop():
    r = evolve_loop(F, constant(0.4 - 0.15j), 3, EvolutionConfig(omega=1.0))
    assert r.final_dominant == 3
    np.testing.assert_allclose(np.abs(r.final_coefficients), [0, 0, 1, 0], atol=1e-10)
    assert r.steps == 0


def test_norm_bookkeeping():
    loop = circle(0.4 - 0.15j, 0.05)
    on = evolve_states(F, loop, [1, 4], EvolutionConfig(omega=0.05, renorm=True))
    off = evolve_states(F, loop, [1, 4], EvolutionConfig(omega=0.05, renorm=False))
    for a, b in zip(on, off):
        # the overlap series of a renormalised run times exp(log_norm) is the raw run
        scaled = a.overlap_series * np.exp(a.log_norm)[:, None]
        rel = np.max(np.abs(scaled - b.overlap_series)) / np.max(np.abs(b.overlap_series))
        assert rel <= 1e-6
        assert a.final_dominant == b.final_dominant


def test_hermitian_adiabatic_following():
    # real kappa keeps H Hermitian when gamma = 0; out and back along the axis
    g = F.with_params(gamma=0.0)
    loop = polygon([0.2, 1.4])
    perm = path_perm(g, loop)
    res = evolve_states(g, loop, [1, 2, 3, 4], EvolutionConfig(omega=1e-3))
    for r in res:
        assert r.final_dominant == perm(r.start_state - 1) + 1
        assert r.margin > 100


def test_exports():
    r = evolve_loop(F, circle(0.4 - 0.15j, 0.05), 2, EvolutionConfig(omega=0.1, n_snapshots=10))
    lines = evolution_csv(r).splitlines()
    assert lines[0] == "t,abs_c1,abs_c2,abs_c3,abs_c4,log_norm"
    assert len(lines) == 12
    s = evolution_summary(r, "small")
    assert s["loop"] == "small" and s["start"] == 2 and s["dominant"] == r.final_dominant


@pytest.mark.slow
def test_halving_rtol_is_stable(loops):
    a = evolve_states(F, loops["loop3@k0p"], [1, 2, 3, 4], EvolutionConfig(omega=1e-4, rtol=1e-8))
    b = evolve_states(F, loops["loop3@k0p"], [1, 2, 3, 4], EvolutionConfig(omega=1e-4, rtol=5e-9))
    for x, y in zip(a, b):
        assert x.final_dominant == y.final_dominant
        cx = x.final_coefficients / np.linalg.norm(x.final_coefficients)
        cy = y.final_coefficients / np.linalg.norm(y.final_coefficients)
        assert np.max(np.abs(np.abs(cx) - np.abs(cy))) <= 1e-4
