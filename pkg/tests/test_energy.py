import numpy as np
import pytest

from fracflow import assembly
from fracflow.energy import AdmissibilityError, QuadraticEnergy, SolverError
from fracflow.grid import Domain, builtin_family, make_grid, sample


def _grid(n=32, dom=Domain(-1, 1)):
    return make_grid(dom, n)


def _energies(g, mass="lumped"):
    M = assembly.assemble_mass(g, mass)
    L = 2 * g.domain.length
    return {
        "gagliardo": QuadraticEnergy(assembly.assemble_gagliardo(g, 0.4), M, 0.4),
        "near": QuadraticEnergy(assembly.assemble_near(g, 0.0), M),
        "renormalized": QuadraticEnergy(assembly.assemble_renormalized(g, 0.25), M, 1.0, "R",
                                        L),
        "hat0": QuadraticEnergy(assembly.assemble_hat0(g), M, 1.0, "H0", L),
        "mass": QuadraticEnergy(assembly.assemble_mass(g, mass), M, 1.0),
        "dirichlet": QuadraticEnergy(assembly.assemble_dirichlet(g), M, 0.5),
    }


def test_construction_checks():
    g = _grid()
    M = assembly.assemble_mass(g)
    A = assembly.assemble_gagliardo(g, 0.5)
    with pytest.raises(ValueError):
        QuadraticEnergy(A, A)
    with pytest.raises(ValueError):
        QuadraticEnergy(A, M, c=0.0)
    with pytest.raises(ValueError):
        QuadraticEnergy(assembly.assemble_gagliardo(_grid(33), 0.5), M)
    E = QuadraticEnergy(A, M)
    with pytest.raises(ValueError):
        E.value(np.zeros(5))
    with pytest.raises(ValueError):
        E.value(sample(lambda x: x, _grid(33)))


def test_value_quadratic_and_zero():
    g = _grid()
    rng = np.random.default_rng(0)
    u = rng.normal(size=g.n)
    for E in _energies(g).values():
        assert E.value(np.zeros(g.n)) == 0.0
        assert E.value(2 * u) == pytest.approx(4 * E.value(u), rel=1e-12)


def test_renormalized_negative_on_plateau():
    # far interactions dominate once the plateau is much wider than the unit split radius
    g = _grid(128, Domain(-4, 4))
    u = sample(builtin_family("plateau", g.domain), g)
    E = _energies(g)["renormalized"]
    assert E.value(u) < 0
    assert _energies(_grid(64))["renormalized"].value(sample(
        builtin_family("plateau", Domain(-1, 1)), _grid(64))) > 0


@pytest.mark.parametrize("mass", ["lumped", "consistent"])
def test_gradient_matches_finite_differences(mass):
    g = _grid(24)
    rng = np.random.default_rng(1)
    for E in _energies(g, mass).values():
        for _ in range(20):
            u, v = rng.normal(size=(2, g.n))
            eps = 1e-5
            fd = (E.value(u + eps * v) - E.value(u - eps * v)) / (2 * eps)
            an = E.inner(E.gradient(u), v)
            assert fd == pytest.approx(an, rel=1e-6, abs=1e-9 * abs(E.value(u)))


def test_gradient_of_limit_ode_energy():
    g = _grid()
    M = assembly.assemble_mass(g, "consistent")
    E = QuadraticEnergy(M, M, 1.0)  # d omega_d / 2 = 1 in one dimension
    u = np.random.default_rng(2).normal(size=g.n)
    np.testing.assert_allclose(E.gradient(u), 2.0 * u, rtol=1e-12)
    assert np.all(E.gradient(np.zeros(g.n)) == 0.0)


def test_admissibility_window():
    g = _grid()
    E = _energies(g)["renormalized"]
    E.check_step(0.1)
    with pytest.raises(AdmissibilityError, match=r"1/\(2 lambda\)"):
        E.prox(0.125, np.ones(g.n))
    with pytest.raises(AdmissibilityError, match=r"1/\(16 lambda\)"):
        E.check_step(0.02, strict=True)
    with pytest.raises(AdmissibilityError):
        _energies(g)["gagliardo"].check_step(0.0)
    _energies(g)["gagliardo"].check_step(1e6)


def test_prox_zero_anchor_and_residual():
    g = _grid(40)
    rng = np.random.default_rng(3)
    for name, E in _energies(g, "consistent").items():
        tau = 0.05
        assert np.all(E.prox(tau, np.zeros(g.n)) == 0.0)
        y = rng.normal(size=g.n)
        x = E.prox(tau, y)
        S = E.M.data + 2 * tau * E.c * E.A.data
        b = E.M.data @ y
        assert np.linalg.norm(S @ x - b) <= 1e-12 * np.linalg.norm(b)


def test_prox_closed_form_for_limit_ode():
    g = _grid()
    M = assembly.assemble_mass(g, "lumped")
    E = QuadraticEnergy(M, M, 1.0)
    y = np.random.default_rng(4).normal(size=g.n)
    tau = 0.3
    np.testing.assert_allclose(E.prox(tau, y), y / (1 + 2 * tau), rtol=1e-10)


def test_prox_is_first_order_in_tau():
    g = _grid()
    E = _energies(g)["gagliardo"]
    y = sample(builtin_family("bump", g.domain), g).coeffs
    taus = np.array([1e-2, 1e-3, 1e-4, 1e-5])
    d = [np.sqrt(E.norm2(E.prox(t, y) - y)) for t in taus]
    assert np.polyfit(np.log(taus), np.log(d), 1)[0] >= 0.9


def test_prox_firmly_nonexpansive_for_convex():
    g = _grid()
    rng = np.random.default_rng(5)
    E = _energies(g)["gagliardo"]
    for _ in range(20):
        y1, y2 = rng.normal(size=(2, g.n))
        p1, p2 = E.prox(0.1, y1), E.prox(0.1, y2)
        assert E.norm2(p1 - p2) <= E.norm2(y1 - y2) * (1 + 1e-12)
        assert E.norm2(p1 - p2) <= E.inner(p1 - p2, y1 - y2) * (1 + 1e-10)


def test_subgradient_inequality():
    g = _grid()
    rng = np.random.default_rng(6)
    for E in _energies(g).values():
        lam = E.lambda_modulus + 1e-9
        for _ in range(20):
            x, y = rng.normal(size=(2, g.n))
            lhs = E.value(y) - E.value(x) - E.inner(E.gradient(x), y - x)
            assert lhs >= -0.5 * lam * E.norm2(y - x) - 1e-10 * (1 + abs(E.value(y)))


@pytest.mark.parametrize("mass", ["lumped", "consistent"])
def test_estimate_lambda(mass):
    g = _grid(48)
    es = _energies(g, mass)
    for name in ("gagliardo", "near", "dirichlet"):
        assert es[name].estimate_lambda() <= 1e-8
    assert es["mass"].estimate_lambda() <= 1e-10
    for s in (0.05, 0.25, 0.45):
        M = assembly.assemble_mass(g, mass)
        E = QuadraticEnergy(assembly.assemble_renormalized(g, s), M, 1.0)
        assert E.estimate_lambda() <= 2 * g.domain.length + 1e-6


def test_step_operator_matches_prox():
    g = _grid(20)
    E = _energies(g)["renormalized"]
    y = np.random.default_rng(7).normal(size=g.n)
    np.testing.assert_allclose(E.step_operator(0.05) @ y, E.prox(0.05, y), rtol=1e-10, atol=1e-12)


def test_solver_error_carries_residual():
    err = SolverError("x", residual=0.5)
    assert err.residual == 0.5 and isinstance(err, ArithmeticError)
