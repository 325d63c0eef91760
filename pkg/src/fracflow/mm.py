"""Minimizing movements: implicit Euler steps ``x_{k+1} = prox_{tau E}(x_k)``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import QuadraticEnergy, coeffs_of

__all__ = [
    "DissipationError",
    "Trajectory",
    "run_mm",
    "interpolate",
    "dissipation_report",
    "sample_times",
    "mm_error_vs_reference",
    "n_steps",
]

STEP_RTOL = 1e-10


class DissipationError(ArithmeticError):
    """A step violated ``E(x_{k+1}) + |x_{k+1} - x_k|^2/(2 tau) <= E(x_k)``."""


@dataclass(frozen=True)
class Trajectory:
    label: str
    tau: float
    T: float
    states: np.ndarray = field(repr=False)      # (K+1, n)
    energies: np.ndarray = field(repr=False)    # (K+1,)
    increments: np.ndarray = field(repr=False)  # (K,)   |x_{k+1}-x_k|_M^2 / tau
    lambda_modulus: float = 0.0
    mass: np.ndarray = field(default=None, repr=False)

    @property
    def n_steps(self) -> int:
        return len(self.states) - 1

    @property
    def times(self) -> np.ndarray:
        return self.tau * np.arange(len(self.states))

    def norm(self, v) -> float:
        v = np.asarray(v, dtype=float)
        return math.sqrt(max(float(v @ (self.mass @ v)), 0.0))


def n_steps(T: float, tau: float) -> int:
    """``ceil(T / tau)``, robust to ``T / tau`` landing a hair above an integer."""
    r = T / tau
    k = math.ceil(r - 1e-9 * max(1.0, r))
    return max(k, 1)


def run_mm(E: QuadraticEnergy, tau: float, T: float, u0, strict: bool = False) -> Trajectory:
    """Discrete-in-time evolution of ``E`` from ``u0`` up to time ``T``.

    Every step is checked against the one-step dissipation inequality with a
    relative tolerance of ``1e-10``; a violation raises
    :class:`DissipationError`.
    """
    if not T > 0:
        raise ValueError("horizon T must be positive")
    E.check_step(tau, strict=strict)
    K = n_steps(T, tau)
    x = coeffs_of(u0).astype(float).copy()
    states = np.empty((K + 1, E.n))
    energies = np.empty(K + 1)
    incs = np.empty(K)
    states[0] = x
    energies[0] = E.value(x)
    for k in range(K):
        xn = E.prox(tau, x, x0=x)
        diff = xn - x
        incs[k] = E.norm2(diff) / tau
        en = E.value(xn)
        lhs = en + 0.5 * incs[k]
        if lhs > energies[k] + STEP_RTOL * (1.0 + abs(energies[k])):
            raise DissipationError(
                f"step {k}: E(x_k+1) + |dx|^2/(2 tau) = {lhs!r} exceeds E(x_k) = {energies[k]!r}")
        states[k + 1] = xn
        energies[k + 1] = en
        x = xn
    for a in (states, energies, incs):
        a.setflags(write=False)
    return Trajectory(E.label, float(tau), float(T), states, energies, incs,
                      E.lambda_modulus, E.M.data)


def interpolate(traj: Trajectory, t: float) -> np.ndarray:
    """Piecewise-affine interpolant ``x(t)`` through the step states."""
    t_end = traj.tau * traj.n_steps
    if not (0.0 <= t <= max(traj.T, t_end) * (1 + 1e-12)):
        raise ValueError(f"t = {t} outside [0, {traj.T}]")
    r = t / traj.tau
    k = min(int(math.floor(r + 1e-12)), traj.n_steps - 1)
    if abs(r - round(r)) <= 1e-12 * max(1.0, r) and round(r) <= traj.n_steps:
        return traj.states[int(round(r))].copy()
    theta = r - k
    return traj.states[k] + theta * (traj.states[k + 1] - traj.states[k])


def dissipation_report(traj: Trajectory) -> dict:
    """Summed dissipation against ``2 (E(x_0) + lambda/2 |x_last|^2)``."""
    if traj.n_steps < 1:
        raise ValueError("empty trajectory")
    total = float(np.sum(traj.increments))
    drop = float(traj.energies[0] - traj.energies[-1])
    last = traj.states[-1]
    bound = 2.0 * (traj.energies[0] + 0.5 * traj.lambda_modulus * traj.norm(last) ** 2)
    scale = 1.0 + abs(traj.energies[0]) + total
    per_step = traj.energies[1:] + 0.5 * traj.increments - traj.energies[:-1]
    step_tol = STEP_RTOL * (1.0 + np.abs(traj.energies[:-1]))
    return {
        "total_increment": total,
        "energy_drop": drop,
        "bound": bound,
        "bound_ok": bool(total <= bound + 1e-8 * scale),
        "steps_ok": bool(np.all(per_step <= step_tol)),
        "max_step_excess": float(np.max(per_step / (1.0 + np.abs(traj.energies[:-1])))),
    }


def sample_times(T: float, coarse_tau: float, n_uniform: int = 64) -> np.ndarray:
    """Uniform sample times on ``[0, T]`` merged with the coarse step times."""
    uni = np.linspace(0.0, T, n_uniform)
    steps = coarse_tau * np.arange(n_steps(T, coarse_tau) + 1)
    steps = steps[steps <= T * (1 + 1e-12)]
    return np.unique(np.round(np.concatenate((uni, steps)), 15))


def _reference_at(reference, t):
    if isinstance(reference, Trajectory):
        return interpolate(reference, t)
    return coeffs_of(reference(t))


def mm_error_vs_reference(E: QuadraticEnergy, tau_list, T: float, u0, reference) -> dict:
    """Sup-in-time metric error of the interpolants against ``reference``.

    ``reference`` is a :class:`Trajectory` or a callable ``t -> state``.
    Steps must satisfy ``tau < 1/(16 lambda)``. Returns the per-``tau``
    errors and, with three or more step sizes, the fitted log-log slope.
    """
    if reference is None:
        raise ValueError("reference unavailable")
    taus = [float(t) for t in tau_list]
    times = sample_times(T, max(taus))
    mass = E.M.data
    errors = []
    for tau in taus:
        traj = run_mm(E, tau, T, u0, strict=True)
        err = 0.0
        for t in times:
            d = interpolate(traj, t) - _reference_at(reference, t)
            err = max(err, math.sqrt(max(float(d @ (mass @ d)), 0.0)))
        errors.append(err)
    out = {"tau": taus, "errors": errors, "times": times}
    if len(taus) >= 3 and all(e > 0 for e in errors):
        slope, _ = np.polyfit(np.log(taus), np.log(errors), 1)
        out["slope"] = float(slope)
        out["sqrt_tau_ok"] = bool(slope >= 0.45)
    return out
