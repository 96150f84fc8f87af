"""Closed-form formal solutions in both charts, and the exterior corrector.

Exterior (first-order truncation of the flow PDE):

    y~(phi)      = C1 (phi^2 + n - 1)^{(g+1)/2}
    lbar(phi)    = (phi^2 + n - 1)^{-(g+1)/2}          (normalized, > 0)

Corrector psi for the exterior barriers: any solution of

    -(1 + 3g) psi - ((n-1)/phi + phi) psi' = Lam(phi),
    Lam = -((g phi^2 + n - 1)/((g+1) phi^2)) lbar^3 < 0  (phi != 0),

with the printed general solution

    psi = lbar^3 { (1-g)/(2(1+g)) + C1p (phi^2+n-1)
                   + (phi^2+n-1)/(2(n-1)(g+1)) (log phi^2 - log(phi^2+n-1)) }.

Interior (tip-region) formal solution:

    y_form_int(z, tau) = At + e^{-2 g tau} ( C(tau) + P((g+1) At z)/((g+1) At) ).
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import FlowParams
from .soliton import SolitonProfile


def _m(phi, n):
    return phi * phi + (n - 1.0)


def lambda_bar(phi, params: FlowParams, deriv: int = 0) -> np.ndarray:
    """Normalized exterior profile (phi^2+n-1)^{-(g+1)/2} and derivatives."""
    phi = np.asarray(phi, dtype=float)
    n, g = params.n, params.gamma
    k = (g + 1.0) / 2.0
    m = _m(phi, n)
    if deriv == 0:
        return m ** (-k)
    if deriv == 1:
        return -2.0 * k * phi * m ** (-k - 1)
    if deriv == 2:
        return -2.0 * k * m ** (-k - 1) + 4.0 * k * (k + 1) * phi ** 2 * m ** (-k - 2)
    raise ValueError("deriv must be 0, 1 or 2")


def exterior_y(phi, C1: float, params: FlowParams, deriv: int = 0) -> np.ndarray:
    """Exterior formal solution y~ = C1 (phi^2+n-1)^{(g+1)/2} (even in phi)."""
    phi = np.asarray(phi, dtype=float)
    n, g = params.n, params.gamma
    k = (g + 1.0) / 2.0
    m = _m(phi, n)
    if deriv == 0:
        return C1 * m ** k
    if deriv == 1:
        return C1 * 2.0 * k * phi * m ** (k - 1)
    if deriv == 2:
        return C1 * (2.0 * k * m ** (k - 1) + 4.0 * k * (k - 1) * phi ** 2 * m ** (k - 2))
    raise ValueError("deriv must be 0, 1 or 2")


def exterior_lambda(phi, c: float, params: FlowParams, deriv: int = 0) -> np.ndarray:
    """Exterior formal solution in the bounded chart: -c * lbar(phi)."""
    return -c * lambda_bar(phi, params, deriv)


def scaled_lambda_bar_increment(phi, tau: float, params: FlowParams) -> np.ndarray:
    """e^{2 g tau} (lbar(phi) - lbar(0)), fp-stable for phi e^{g tau} = O(1).

    Raw subtraction loses all digits once phi^2 ~ e^{-2 g tau}; expm1/log1p
    keeps full relative precision.
    """
    phi = np.asarray(phi, dtype=float)
    n, g = params.n, params.gamma
    k = (g + 1.0) / 2.0
    return (n - 1.0) ** (-k) * np.exp(2 * g * tau) * np.expm1(
        -k * np.log1p(phi * phi / (n - 1.0)))


def Lambda(phi, params: FlowParams) -> np.ndarray:
    """Corrector source; strictly negative for phi != 0, -inf limit at 0."""
    phi = np.asarray(phi, dtype=float)
    n, g = params.n, params.gamma
    lb3 = lambda_bar(phi, params) ** 3
    with np.errstate(divide="ignore"):
        return -(g * phi ** 2 + n - 1.0) / ((g + 1.0) * phi ** 2) * lb3


class PsiProfile:
    """The exterior corrector psi with analytic derivatives.

    Evaluated for phi != 0 and extended evenly; psi has a log(phi^2)
    singularity at the axis, matching its printed small-phi expansion
    psi/lbar = d0 log(phi^2) + O(1).
    """

    def __init__(self, params: FlowParams, C1_psi: float = 0.0):
        self.params = params
        self.C1_psi = C1_psi
        n, g = params.n, params.gamma
        self._alpha = (1.0 - g) / (2.0 * (1.0 + g))
        self._beta = 1.0 / (2.0 * (n - 1.0) * (g + 1.0))
        self._k3 = 3.0 * (g + 1.0) / 2.0

    # small/large-phi expansion constants of psi/lbar (for tests)
    @property
    def d0(self) -> float:
        n, g = self.params.n, self.params.gamma
        return (n - 1.0) ** (-(g + 1.0)) / (2.0 * (g + 1.0))

    @property
    def c0(self) -> float:
        return self.C1_psi

    def _W(self, phi, deriv):
        n = self.params.n
        m = _m(phi, n)
        with np.errstate(divide="ignore"):
            dlog = np.log(phi * phi) - np.log(m)
        if deriv == 0:
            return self._alpha + self.C1_psi * m + self._beta * m * dlog
        if deriv == 1:
            return 2.0 * phi * (self.C1_psi + self._beta * dlog) \
                + 2.0 * self._beta * (n - 1.0) / phi
        return 2.0 * (self.C1_psi + self._beta * dlog) \
            + 4.0 * self._beta * (n - 1.0) / m \
            - 2.0 * self._beta * (n - 1.0) / phi ** 2

    def psi(self, phi, deriv: int = 0) -> np.ndarray:
        phi = np.abs(np.asarray(phi, dtype=float))
        n = self.params.n
        k = self._k3
        m = _m(phi, n)
        if deriv == 0:
            return m ** (-k) * self._W(phi, 0)
        if deriv == 1:
            return m ** (-k - 1) * (-2.0 * k * phi * self._W(phi, 0) + m * self._W(phi, 1))
        if deriv == 2:
            W0, W1, W2 = self._W(phi, 0), self._W(phi, 1), self._W(phi, 2)
            return (-(k + 1) * 2.0 * phi * m ** (-k - 2) * (-2.0 * k * phi * W0 + m * W1)
                    + m ** (-k - 1) * ((2.0 - 2.0 * k) * phi * W1 - 2.0 * k * W0 + m * W2))
        raise ValueError("deriv must be 0, 1 or 2")

    def Lambda(self, phi) -> np.ndarray:
        return Lambda(phi, self.params)

    def ode_residual(self, phi) -> np.ndarray:
        """Residual of -(1+3g) psi - ((n-1)/phi + phi) psi' = Lam."""
        phi = np.asarray(phi, dtype=float)
        n, g = self.params.n, self.params.gamma
        lhs = -(1.0 + 3.0 * g) * self.psi(phi) \
            - ((n - 1.0) / phi + phi) * self.psi(phi, 1)
        return lhs - self.Lambda(phi)


def psi(phi, C1_psi: float, params: FlowParams, deriv: int = 0) -> np.ndarray:
    return PsiProfile(params, C1_psi).psi(phi, deriv)


def interior_formal_y(z, tau: float, params: FlowParams, profile: SolitonProfile,
                      C_tau: float = 0.0) -> np.ndarray:
    """Tip-region formal solution At + e^{-2 g tau}(C + P((g+1) At z)/((g+1) At))."""
    z = np.asarray(z, dtype=float)
    g, At = params.gamma, params.A_tilde
    s = (g + 1.0) * At
    return At + math.exp(-2.0 * g * tau) * (C_tau + profile.P_of(s * np.abs(z)) / s)


def patch_constant_d(params: FlowParams, C1_psi: float) -> float:
    """The printed seam constant d = (n-1)^{-3(g+1)/2}((1-g)/(2+2g) + C1 (n-1)).

    Reference accessor only; the patching itself solves for E+- numerically,
    and the printed formula omits a -log(n-1)/(2(g+1)) piece of psi's actual
    axis expansion.
    """
    n, g = params.n, params.gamma
    return (n - 1.0) ** (-3.0 * (g + 1.0) / 2.0) * (
        (1.0 - g) / (2.0 + 2.0 * g) + C1_psi * (n - 1.0))


def exterior_y_ode_residual(phi, C1: float, params: FlowParams) -> np.ndarray:
    """Residual of ((n-1)/phi + phi) y_phi - (g+1) y = 0 for y~."""
    phi = np.asarray(phi, dtype=float)
    n, g = params.n, params.gamma
    return ((n - 1.0) / phi + phi) * exterior_y(phi, C1, params, 1) \
        - (g + 1.0) * exterior_y(phi, C1, params)


def lambda_bar_ode_residual(phi, params: FlowParams) -> np.ndarray:
    """Residual of ((n-1)/phi + phi) lbar_phi + (g+1) lbar = 0."""
    phi = np.asarray(phi, dtype=float)
    n, g = params.n, params.gamma
    return ((n - 1.0) / phi + phi) * lambda_bar(phi, params, 1) \
        + (g + 1.0) * lambda_bar(phi, params)
