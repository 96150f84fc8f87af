"""Bowl translating-soliton profile and its rescaled families.

The profile P(w) is the unique convex solution of

    P_ww / (1 + P_w^2) + (n - 1) P_w / w = 1,      P(0) = P_w(0) = 0,

integrated from a series launch at a small switch radius (the P_w/w term is
0/0 at the origin). Near 0, P = w^2/(2n) + a4 w^4 + O(w^6) with
a4 = 1/(4 n^3 (n+2)), obtained by substituting the series into the ODE.

The interior scalings used downstream:

    F(z)        = A^3/(g+1) P(z (g+1)/A)           (lambda-chart family)
    Ftilde(z)   = P((g+1) At z)/((g+1) At) + C     (y-chart family)
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .geometry import FlowParams

_DEFAULT_W0 = 1e-3


def _series_a4(n: int) -> float:
    return 1.0 / (4.0 * n ** 3 * (n + 2))


def _integrate(n: int, w0: float, w_max: float, rel_tol: float):
    a4 = _series_a4(n)
    y0 = [w0 ** 2 / (2 * n) + a4 * w0 ** 4, w0 / n + 4 * a4 * w0 ** 3]

    def rhs(w, y):
        P, Pw = y
        return [Pw, (1.0 - (n - 1) * Pw / w) * (1.0 + Pw * Pw)]

    sol = solve_ivp(rhs, (w0, w_max), y0, method="DOP853",
                    rtol=rel_tol, atol=rel_tol * 1e-2, dense_output=True)
    if not sol.success:
        raise RuntimeError(
            f"bowl profile integration failed at w = {sol.t[-1]:.6g}: {sol.message}"
        )
    return sol


@dataclass(eq=False)
class SolitonProfile:
    """Tabulated bowl profile with dense evaluation.

    ``w_grid``/``P``/``Pw`` hold the accepted integrator steps; evaluation
    uses the dense output (series below the switch radius ``w0``).
    Arguments beyond the tabulated range trigger a transparent re-extension
    (re-integration to a larger range); extension is not thread-safe.
    """

    n: int
    rel_tol: float
    w0: float
    w_grid: np.ndarray = field(repr=False)
    P: np.ndarray = field(repr=False)
    Pw: np.ndarray = field(repr=False)
    _sol: object = field(repr=False)

    @property
    def w_max(self) -> float:
        return float(self.w_grid[-1])

    def ensure_range(self, w_needed: float):
        if w_needed > self.w_max:
            sol = _integrate(self.n, self.w0, 1.25 * w_needed, self.rel_tol)
            self._sol = sol.sol
            self.w_grid = sol.t
            self.P = sol.y[0]
            self.Pw = sol.y[1]
            self._spl = None

    def _splines(self):
        # cubic splines on a step-refined sample of the dense output:
        # evaluation is then C-fast, with interpolation error far below rel_tol
        if getattr(self, "_spl", None) is None:
            from scipy.interpolate import CubicSpline
            t = self.w_grid
            fine = np.unique(np.concatenate(
                [np.linspace(t[i], t[i + 1], 7) for i in range(len(t) - 1)]))
            vals = self._sol(fine)
            self._spl = (CubicSpline(fine, vals[0]), CubicSpline(fine, vals[1]))
        return self._spl

    def _dense(self, w: np.ndarray, comp: int) -> np.ndarray:
        wc = np.maximum(w, self.w0)
        return self._splines()[comp](wc)

    def P_of(self, w) -> np.ndarray:
        w = np.abs(np.asarray(w, dtype=float))
        self.ensure_range(float(w.max()) if w.size else 0.0)
        a4 = _series_a4(self.n)
        series = w ** 2 / (2 * self.n) + a4 * w ** 4
        return np.where(w > self.w0, self._dense(w, 0), series)

    def Pw_of(self, w) -> np.ndarray:
        wa = np.asarray(w, dtype=float)
        sign = np.sign(wa)
        w = np.abs(wa)
        self.ensure_range(float(w.max()) if w.size else 0.0)
        a4 = _series_a4(self.n)
        series = w / self.n + 4 * a4 * w ** 3
        return sign * np.where(w > self.w0, self._dense(w, 1), series)

    def Pww_of(self, w) -> np.ndarray:
        w = np.abs(np.asarray(w, dtype=float))
        Pw = self.Pw_of(w)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (1.0 - (self.n - 1) * Pw / np.where(w == 0, 1.0, w)) * (1.0 + Pw ** 2)
        return np.where(w < 1e-12, 1.0 / self.n, val)

    def Pwww_of(self, w) -> np.ndarray:
        """Third derivative via differentiating the ODE (exact chain rule)."""
        w = np.abs(np.asarray(w, dtype=float))
        Pw, Pww = self.Pw_of(w), self.Pww_of(w)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = -(self.n - 1) * (Pww * w - Pw) / np.where(w == 0, 1.0, w) ** 2
        val = t1 * (1.0 + Pw ** 2) + (1.0 - (self.n - 1) * np.where(
            w == 0, Pww, Pw / np.where(w == 0, 1.0, w))) * 2.0 * Pw * Pww
        return np.where(w < 1e-12, 0.0, val)

    def ode_residual(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        return self.Pww_of(w) / (1.0 + self.Pw_of(w) ** 2) \
            + (self.n - 1) * self.Pw_of(w) / w - 1.0

    def far_field_asymptote(self, w):
        """Printed two-term far-field law and its O(w^-2) error bar.

        Diagnostic only: the true profile differs from this by a nonzero
        constant (about -0.652 for n = 2), so it must not be used for
        evaluation; out-of-range evaluation re-integrates instead.
        """
        w = np.asarray(w, dtype=float)
        return w ** 2 / (2 * (self.n - 1)) - np.log(w), 1.0 / w ** 2


def solve_bowl(n: int, w_max: float = 250.0, rel_tol: float = 1e-10,
               w0: float = _DEFAULT_W0) -> SolitonProfile:
    """Adaptive high-order integration of the bowl IVP."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if not w_max > 1:
        raise ValueError("w_max must be > 1")
    if not 1e-14 <= rel_tol <= 1e-6:
        raise ValueError("rel_tol must lie in [1e-14, 1e-6]")
    sol = _integrate(n, w0, w_max, rel_tol)
    return SolitonProfile(n=n, rel_tol=rel_tol, w0=w0,
                          w_grid=sol.t, P=sol.y[0], Pw=sol.y[1], _sol=sol.sol)


class FProfile:
    """Interior family F(z) = A^3/(g+1) P(z (g+1)/A), with derivatives.

    F is even; F_z is odd. Second derivative comes from the profile ODE,
    so the family identity F_zz/(1+F_z^2/A^4) + (n-1) F_z/z = (g+1) A is
    exact up to integrator tolerance.
    """

    def __init__(self, profile: SolitonProfile, A: float, gamma: float):
        self.profile = profile
        self.A = A
        self.gamma = gamma
        self._s = (gamma + 1.0) / A

    def F(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self.A ** 3 / (self.gamma + 1.0) * self.profile.P_of(self._s * np.abs(z))

    def Fz(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self.A ** 2 * self.profile.Pw_of(self._s * z)

    def Fzz(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self.A * (self.gamma + 1.0) * self.profile.Pww_of(self._s * np.abs(z))


def F_of_z(z, A: float, params: FlowParams, profile: SolitonProfile) -> np.ndarray:
    return FProfile(profile, A, params.gamma).F(z)


def Ftilde_of_z(z, A_tilde: float, C_tau: float, params: FlowParams,
                profile: SolitonProfile) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    s = (params.gamma + 1.0) * A_tilde
    return profile.P_of(s * np.abs(z)) / s + C_tau


def export_csv(profile: SolitonProfile, path):
    """Write the tabulated profile as (w, P, Pw) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["w", "P", "Pw"])
        for w, p, pw in zip(profile.w_grid, profile.P, profile.Pw):
            writer.writerow([f"{w:.17g}", f"{p:.17g}", f"{pw:.17g}"])
