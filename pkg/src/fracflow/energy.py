"""Quadratic energies ``c u^T A u`` in the L2 metric given by a mass matrix."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, cg

from .assembly import EnergyMatrix

__all__ = ["AdmissibilityError", "SolverError", "QuadraticEnergy", "coeffs_of"]

CG_RTOL = 1e-12


class AdmissibilityError(ValueError):
    """Time step outside the window where the proximal problem is well posed."""


class SolverError(ArithmeticError):
    """Linear solver failed to reach its tolerance."""

    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


def coeffs_of(u) -> np.ndarray:
    return np.asarray(getattr(u, "coeffs", u), dtype=float)


@dataclass(frozen=True)
class QuadraticEnergy:
    """``E(u) = c u^T A u`` with metric ``<u, v> = u^T M v``.

    ``lambda_modulus`` is the analytic constant for which
    ``E + lambda/2 ||.||^2`` is convex; it sets the admissible time steps.
    """

    A: EnergyMatrix
    M: EnergyMatrix
    c: float = 1.0
    label: str = ""
    lambda_modulus: float = 0.0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.M.kind != "mass":
            raise ValueError("metric must be a mass matrix")
        if self.A.fingerprint != self.M.fingerprint:
            raise ValueError("energy and mass matrices live on different grids")
        if not self.c > 0:
            raise ValueError("scale c must be positive")
        if self.lambda_modulus < 0:
            raise ValueError("lambda modulus must be nonnegative")

    @property
    def grid(self):
        return self.A.grid

    @property
    def n(self) -> int:
        return self.A.grid.n

    def _vec(self, u) -> np.ndarray:
        if hasattr(u, "grid") and u.grid.fingerprint != self.A.fingerprint:
            raise ValueError("grid function lives on a different grid")
        v = coeffs_of(u)
        if v.shape != (self.n,):
            raise ValueError(f"expected a vector of length {self.n}, got {v.shape}")
        return v

    def value(self, u) -> float:
        u = self._vec(u)
        return self.c * float(u @ (self.A.data @ u))

    def norm2(self, u) -> float:
        """Squared metric norm ``u^T M u``."""
        u = self._vec(u)
        return float(u @ (self.M.data @ u))

    def inner(self, u, v) -> float:
        return float(self._vec(u) @ (self.M.data @ self._vec(v)))

    def _mass_factor(self):
        if "chol" not in self._cache:
            self._cache["chol"] = sla.cho_factor(self.M.data)
        return self._cache["chol"]

    def gradient(self, u) -> np.ndarray:
        """L2 Riesz representative ``g`` with ``M g = 2 c A u``."""
        u = self._vec(u)
        rhs = 2.0 * self.c * (self.A.data @ u)
        if self.M.mode == "lumped":
            return rhs / np.diag(self.M.data)
        return sla.cho_solve(self._mass_factor(), rhs)

    def check_step(self, tau: float, strict: bool = False) -> None:
        """Raise unless ``tau < 1/(2 lambda)`` (``1/(16 lambda)`` if strict)."""
        if not tau > 0:
            raise AdmissibilityError(f"time step must be positive, got {tau}")
        lam = self.lambda_modulus
        if lam > 0:
            factor = 16.0 if strict else 2.0
            bound = 1.0 / (factor * lam)
            if not tau < bound:
                window = "1/(16 lambda)" if strict else "1/(2 lambda)"
                raise AdmissibilityError(
                    f"tau = {tau} violates tau < {window} = {bound:.6g} (lambda = {lam:g})")

    def _system(self, tau):
        key = ("sys", float(tau))
        if key not in self._cache:
            S = self.M.data + 2.0 * tau * self.c * self.A.data
            dinv = 1.0 / np.diag(S)
            self._cache[key] = (S, dinv)
        return self._cache[key]

    def prox(self, tau: float, y, x0=None) -> np.ndarray:
        """``argmin_x E(x) + ||x - y||^2 / (2 tau)``.

        Solves ``(M + 2 tau c A) x = M y`` by Jacobi-preconditioned CG to a
        relative residual of ``1e-12``.
        """
        self.check_step(tau)
        y = self._vec(y)
        S, dinv = self._system(tau)
        b = self.M.data @ y
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return np.zeros_like(y)
        n = self.n
        pre = LinearOperator((n, n), matvec=lambda r: dinv * r, dtype=float)
        x = y.copy() if x0 is None else coeffs_of(x0).copy()
        for _ in range(3):
            x, info = cg(S, b, x0=x, rtol=CG_RTOL, atol=0.0, maxiter=10 * n, M=pre)
            res = np.linalg.norm(S @ x - b)
            if res <= CG_RTOL * bnorm:
                return x
            if info < 0:
                break
        raise SolverError(f"CG stalled: relative residual {res / bnorm:.3e}", residual=res / bnorm)

    def step_operator(self, tau: float) -> np.ndarray:
        """Dense matrix of the linear map ``y -> prox(tau, y)``."""
        self.check_step(tau)
        S, _ = self._system(tau)
        return sla.solve(S, self.M.data, assume_a="pos")

    def estimate_lambda(self) -> float:
        """Smallest ``lambda`` making ``E + lambda/2 ||.||^2`` convex.

        ``-2 c mu_min`` with ``mu_min`` the smallest generalised eigenvalue
        of ``(A, M)``.
        """
        mu = sla.eigh(self.A.data, self.M.data, eigvals_only=True, subset_by_index=[0, 0])
        return -2.0 * self.c * float(mu[0])
