import json
import math

import numpy as np
import pytest

from fracflow import assembly
from fracflow.energy import AdmissibilityError, QuadraticEnergy
from fracflow.flows import (
    FAMILIES,
    FlowSpec,
    build_energy,
    exact_reference,
    function_from_config,
    lambda_for,
    solve,
    spectral_reference,
)
from fracflow.grid import Domain, builtin_family, make_grid, sample

BUMP = {"family": "bump"}


def _spec(family, s=None, n=32, tau=0.01, T=0.2, dom=Domain(-1, 1), u0=BUMP, mass="lumped"):
    g = make_grid(dom, n)
    return FlowSpec(family, g, tau, T, function_from_config(u0, g), s=s, mass=mass, u0_config=u0)


def test_spec_validation():
    g = make_grid(Domain(), 16)
    u0 = function_from_config(BUMP, g)
    with pytest.raises(ValueError):
        FlowSpec("Heat", g, 0.1, 1.0, u0)
    with pytest.raises(ValueError):
        FlowSpec("ZeroOrder", g, 0.1, 1.0, u0)
    with pytest.raises(ValueError):
        FlowSpec("LimitODE", g, 0.1, 1.0, u0, s=0.5)
    with pytest.raises(ValueError):
        FlowSpec("BBM", g, 0.1, 1.0, u0, s=1.0)
    with pytest.raises(ValueError):
        FlowSpec("LimitODE", g, -0.1, 1.0, u0)
    with pytest.raises(AdmissibilityError, match=r"1/\(2 lambda\)"):
        FlowSpec("Renormalized", g, 0.2, 1.0, u0, s=0.3)
    with pytest.raises(ValueError):
        FlowSpec("LimitODE", make_grid(Domain(), 17), 0.1, 1.0, u0)


def test_lambda_per_family():
    dom = Domain(-1, 1)
    assert lambda_for("Renormalized", dom) == 4.0
    assert lambda_for("LimitZero", dom) == 4.0
    for fam in ("ZeroOrder", "BBM", "LimitODE", "LimitHeat"):
        assert lambda_for(fam, dom) == 0.0


def test_json_roundtrip(tmp_path):
    spec = _spec("Renormalized", s=0.2)
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(spec.to_dict()))
    back = FlowSpec.from_json(p)
    assert back.to_dict() == spec.to_dict()
    np.testing.assert_array_equal(back.u0.coeffs, spec.u0.coeffs)
    with pytest.raises(ValueError):
        FlowSpec.from_dict({**spec.to_dict(), "colour": 1})
    with pytest.raises(ValueError):
        FlowSpec.from_dict({k: v for k, v in spec.to_dict().items() if k != "tau"})


def test_csv_initial_datum(tmp_path):
    g = make_grid(Domain(0, 1), 12)
    sample(lambda x: np.sin(np.pi * x), g).to_csv(tmp_path / "u0.csv")
    cfg = {"family": "LimitHeat", "domain": {"a": 0, "b": 1}, "n": 12, "tau": 0.01, "T": 0.1,
           "u0": {"csv_path": "u0.csv"}}
    spec = FlowSpec.from_dict(cfg, base_dir=tmp_path)
    np.testing.assert_allclose(spec.u0.coeffs, np.sin(np.pi * g.nodes), rtol=1e-15)
    with pytest.raises(FileNotFoundError):
        FlowSpec.from_dict({**cfg, "u0": {"csv_path": "missing.csv"}}, base_dir=tmp_path)


def test_replace_resamples_datum():
    spec = _spec("ZeroOrder", s=0.3, n=16)
    fine = spec.replace(grid=make_grid(Domain(-1, 1), 33))
    assert fine.u0.grid.n == 33
    assert fine.tau == spec.tau


def test_build_energy_scalings():
    rng = np.random.default_rng(0)
    g = make_grid(Domain(-1, 1), 24)
    u = rng.normal(size=g.n)
    s = 0.3
    zo = build_energy(_spec("ZeroOrder", s=s, n=24))
    ren = build_energy(_spec("Renormalized", s=s, n=24))
    bbm = build_energy(_spec("BBM", s=s, n=24))
    F0 = assembly.assemble_mass(g, "consistent").form(u)
    assert ren.value(u) == pytest.approx(zo.value(u) / s - F0 / s, rel=1e-8)
    assert bbm.value(u) == pytest.approx(zo.value(u) * (1 - s) / s, rel=1e-12)
    assert ren.lambda_modulus == 4.0 and zo.lambda_modulus == 0.0
    ode = build_energy(_spec("LimitODE", n=24))
    np.testing.assert_allclose(ode.gradient(u), 2 * u, rtol=1e-12)
    heat = build_energy(_spec("LimitHeat", n=24))
    assert heat.c == 0.5 and heat.A.kind == "dirichlet"
    assert build_energy(_spec("LimitZero", n=24)).A.kind == "hat0"
    assert math.isfinite(build_energy(_spec("BBM", s=0.5)).value(_spec("BBM", s=0.5).u0))


def test_limit_ode_solution():
    spec = _spec("LimitODE", n=32, tau=1e-3, T=1.0)
    traj = solve(spec)
    ref = spec.u0.coeffs * math.exp(-2.0)
    assert np.linalg.norm(traj.states[-1] - ref) <= 2e-3 * np.linalg.norm(ref)
    np.testing.assert_array_equal(exact_reference(spec, 0.0), spec.u0.coeffs)
    np.testing.assert_allclose(exact_reference(spec, math.log(2) / 2), spec.u0.coeffs / 2, rtol=1e-14)
    with pytest.raises(ValueError):
        exact_reference(spec, 2.0)
    assert exact_reference(_spec("Renormalized", s=0.2)) is None


def test_limit_heat_sine_decay():
    dom = Domain(0, 1)
    spec = _spec("LimitHeat", n=128, tau=1e-4, T=0.1, dom=dom,
                 u0={"family": "sine_mode", "params": {"k": 1}}, mass="consistent")
    traj = solve(spec)
    cont = math.exp(-math.pi ** 2 * 0.1) * np.sin(np.pi * spec.grid.nodes)
    assert np.max(np.abs(traj.states[-1] - cont)) <= 2e-3
    ref = exact_reference(spec, 0.1)
    assert np.max(np.abs(traj.states[-1] - ref)) <= 1e-3


def test_spectral_reference_on_eigenvector():
    spec = _spec("LimitHeat", n=20, dom=Domain(0, 1))
    E = build_energy(spec)
    ref = spectral_reference(E, spec.u0)
    v = ref.eigenvectors[:, 2]
    on_v = spectral_reference(E, v)
    np.testing.assert_allclose(on_v(0.3), math.exp(-ref.eigenvalues[2] * 0.3) * v, atol=1e-12)


@pytest.mark.parametrize("family,s", [("ZeroOrder", 0.3), ("Renormalized", 0.3), ("BBM", 0.7),
                                      ("LimitODE", None), ("LimitZero", None), ("LimitHeat", None)])
def test_zero_datum_flows_stay_zero(family, s):
    traj = solve(_spec(family, s=s, u0={"family": "zero"}))
    assert np.all(traj.states == 0.0)


@pytest.mark.parametrize("mass", ["lumped", "consistent"])
@pytest.mark.parametrize("family,s", [("ZeroOrder", 0.3), ("Renormalized", 0.3), ("BBM", 0.7)])
def test_step_self_adjoint(family, s, mass):
    E = build_energy(_spec(family, s=s, mass=mass))
    P = E.step_operator(0.01)
    rng = np.random.default_rng(1)
    for _ in range(10):
        y1, y2 = rng.normal(size=(2, E.n))
        assert E.inner(P @ y1, y2) == pytest.approx(E.inner(y1, P @ y2), rel=1e-10)


@pytest.mark.parametrize("family,s", [("ZeroOrder", 0.2), ("BBM", 0.5), ("LimitHeat", None)])
def test_maximum_principle_smoke(family, s):
    spec = _spec(family, s=s, tau=0.01)
    traj = solve(spec)
    u0 = spec.u0.coeffs
    assert np.all(traj.states[1] >= -1e-12 * np.max(np.abs(u0)))


def test_renormalized_step_vs_composed_step_second_order():
    # Renormalized prox vs (prox of tau F^s) followed by the explicit factor (1 + 2 tau / s),
    # in the consistent metric where F^0 / s has the scalar gradient (2 / s) u
    g = make_grid(Domain(-1, 1), 24)
    s = 0.3
    M = assembly.assemble_mass(g, "consistent")
    ren = QuadraticEnergy(assembly.assemble_renormalized(g, s), M, 1.0, "R", 4.0)
    gag = QuadraticEnergy(assembly.assemble_gagliardo(g, s), M, 1.0)
    y = np.random.default_rng(2).normal(size=g.n)
    taus = np.array([4e-3, 2e-3, 1e-3, 5e-4])
    gaps = [math.sqrt(M.form(ren.prox(t, y) - (1 + 2 * t / s) * gag.prox(t, y))) for t in taus]
    assert np.polyfit(np.log(taus), np.log(gaps), 1)[0] >= 1.8


def test_families_constant():
    assert set(FAMILIES) == {"ZeroOrder", "Renormalized", "BBM", "LimitODE", "LimitZero",
                             "LimitHeat"}


def test_function_config_errors():
    g = make_grid(Domain(), 8)
    with pytest.raises(ValueError):
        function_from_config({"family": "bump", "colour": 2}, g)
    with pytest.raises(ValueError):
        function_from_config({"csv_path": "x.csv", "family": "bump"}, g)
    with pytest.raises(ValueError):
        function_from_config([1, 2], g)
    u = function_from_config({"family": "bump", "params": {"width": 0.5}}, g)
    np.testing.assert_allclose(u.coeffs, sample(builtin_family("bump", g.domain, width=0.5), g).coeffs)
