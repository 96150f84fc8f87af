"""Regional super-/subsolutions, patched global barriers, grid certification.

Interior (tip-region) barriers, for |z| <= R1 and large tau:

    lam_int(z, tau) = -A + e^{-2g tau}(F(z) + B tau + E) + tau e^{-4g tau} D Q(z)

with F the bowl family at parameter A and Q a correction profile built here
(see `build_Q`). Exterior barriers, for |phi| >= R2 e^{-g tau}:

    lam_ext(phi, tau) = -c lbar(phi) + b e^{-2g tau} psi(phi).

Upper barrier: A = A+, c = c+, b = b+ < 0 (supersolution of both operators);
lower barrier mirrors with A- > A+, c- > c+, b- > 0. The patched barrier takes
the interior branch for z <= R2, inf/sup on the overlap, exterior for z >= R1.

Certification is grid-based: the exact quasilinear operators are evaluated on
(z, tau) / (phi, tau) grids with analytic derivatives, and each inequality
must clear zero by more than a grid-refinement (Richardson) estimate. The
exterior operator is certified in an algebraically reduced form normalized by
-Lam > 0 (sign-equivalent, avoids the fp cancellation of the first-order
terms at large phi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.integrate import solve_ivp

from .geometry import FlowParams
from .soliton import SolitonProfile, FProfile
from .formal import PsiProfile, Lambda, lambda_bar, scaled_lambda_bar_increment

UPPER, LOWER = +1, -1
_SIGN_NAME = {UPPER: "upper", LOWER: "lower"}


# ---------------------------------------------------------------------------
# constants

@dataclass
class BarrierConstants:
    """The full constant set of one barrier pair."""

    A_plus: float
    A_minus: float
    B_plus: float
    B_minus: float
    E_plus: float
    E_minus: float
    D_plus: float
    D_minus: float
    c_plus: float
    c_minus: float
    b_plus: float
    b_minus: float
    R1: float
    R2: float
    tau0: float
    beta_tilde: float
    C1_psi: float = 0.0
    M1: float = float("nan")
    M2: float = float("nan")
    delta: float = 0.5

    def validate(self, params: FlowParams):
        n, g = params.n, params.gamma
        s = (n - 1.0) ** (-(g + 1.0) / 2.0)
        def close(a, b):
            return abs(a - b) <= 1e-12 * max(1.0, abs(a), abs(b))
        if not (self.A_minus > self.A_plus > 0):
            raise ValueError("need A_minus > A_plus > 0")
        if not (self.c_minus > self.c_plus > 0):
            raise ValueError("need c_minus > c_plus > 0 (ordered barrier pair)")
        if not (self.b_plus < 0 < self.b_minus):
            raise ValueError("need b_plus < 0 < b_minus")
        if not (close(self.A_plus, self.c_plus * s) and close(self.A_minus, self.c_minus * s)):
            raise ValueError("A+- must equal c+- (n-1)^{-(g+1)/2}")
        bt = (n - 1.0) ** (-3.0 * (g + 1.0) / 2.0) / (g + 1.0)
        if not close(self.beta_tilde, bt):
            raise ValueError("beta_tilde inconsistent with (n, gamma)")
        if not (close(self.B_plus, -g * self.b_plus * self.beta_tilde)
                and close(self.B_minus, -g * self.b_minus * self.beta_tilde)):
            raise ValueError("B+- must equal -g b+- beta_tilde")
        if not (0 < self.R2 < self.R1):
            raise ValueError("need 0 < R2 < R1")
        if np.isfinite(self.M2):
            cap = min(-2.0 * self.c_plus ** 3 / 3.0,
                      -self.c_plus ** 3 / (1.0 + self.c_plus ** 3 * self.M2 / self.R2 ** 2))
            if self.b_plus > cap + 1e-12:
                raise ValueError("b_plus violates the two-zone supersolution bound")

    def check_r1_ratio(self, ratio_bound: float, params: FlowParams) -> bool:
        """100 C R1^-4 < (g + 1/2) At for the measured curvature-ratio bound C."""
        return 100.0 * ratio_bound * self.R1 ** -4 < (params.gamma + 0.5) * params.A_tilde


# ---------------------------------------------------------------------------
# Q correction profile

class QProfile:
    """Even interior correction with Q(0) = Q'(0) = 0.

    Solves the axis-regular linear ODE

        Q''/D0 + ((n-1)/z - 2 F_z F_zz/(A^4 D0^2)) Q' = S(z),
        D0 = 1 + F_z^2/A^4,

    whose left side is the coefficient profile multiplying tau e^{-2g tau} D
    in T_z[lam_int]. The source S = -(1 + |g_res| + |rho_res|) dominates both
    the tau-linear residual g_res and the tau-independent residual rho_res of
    the barrier ansatz, so |D| >= |B| + |E| + 1 certifies the sign with a
    uniform margin (verified on the grid regardless).
    """

    def __init__(self, params: FlowParams, A: float, fprofile: FProfile, R1: float,
                 z0: float = 1e-6, rel_tol: float = 1e-9):
        from scipy.interpolate import CubicSpline

        self.params = params
        self.A = A
        self.fprofile = fprofile
        self.R1 = R1
        self.z0 = z0
        n = params.n

        # spline the (smooth, cheaply vectorized) coefficient profiles first,
        # so the ODE right side does not hit the soliton splines per step
        zf = np.concatenate([np.geomspace(z0, 0.2, 400)[:-1],
                             np.linspace(0.2, 1.3 * R1, 3600)])
        d0_spl = CubicSpline(zf, self._D0(zf))
        x_spl = CubicSpline(zf, self._xterm(zf))
        s_spl = CubicSpline(zf, self.source(zf))

        def rhs(z, y):
            _, V = y
            d0 = d0_spl(z)
            return [V, d0 * (s_spl(z) - ((n - 1) / z - x_spl(z)) * V)]

        S0 = self.source(0.0)
        sol = solve_ivp(rhs, (z0, 1.25 * R1),
                        [0.5 * S0 * z0 ** 2 / n, S0 * z0 / n],
                        method="DOP853", rtol=rel_tol, atol=1e-13, dense_output=True)
        if not sol.success:
            raise RuntimeError(f"Q profile integration failed: {sol.message}")
        self._S0 = S0
        fine = np.unique(np.concatenate(
            [np.linspace(sol.t[i], sol.t[i + 1], 7) for i in range(len(sol.t) - 1)]))
        vals = sol.sol(fine)
        self._spl = (CubicSpline(fine, vals[0]), CubicSpline(fine, vals[1]))

    def _D0(self, z):
        return 1.0 + self.fprofile.Fz(np.abs(z)) ** 2 / self.A ** 4

    def _xterm(self, z):
        f = self.fprofile
        return 2.0 * f.Fz(z) * f.Fzz(z) / (self.A ** 4 * self._D0(z) ** 2)

    def residual_tau_linear(self, z) -> np.ndarray:
        """g_res(z) = -(3g+1) + 4 F_z^2 F_zz / (A^5 D0^2)."""
        g = self.params.gamma
        f = self.fprofile
        return -(3 * g + 1) + 4.0 * f.Fz(z) ** 2 * f.Fzz(z) / (self.A ** 5 * self._D0(z) ** 2)

    def residual_tau_const(self, z) -> np.ndarray:
        """rho_res(z) = F g_res + (g-1) z F_z - 2 F_z^2/(A D0)."""
        g = self.params.gamma
        f = self.fprofile
        return f.F(z) * self.residual_tau_linear(z) + (g - 1) * z * f.Fz(z) \
            - 2.0 * f.Fz(z) ** 2 / (self.A * self._D0(z))

    def source(self, z) -> np.ndarray:
        return -(1.0 + np.abs(self.residual_tau_linear(z))
                 + np.abs(self.residual_tau_const(z)))

    def _dense(self, z, comp):
        zc = np.maximum(z, self.z0)
        return self._spl[comp](zc)

    def Q(self, z) -> np.ndarray:
        z = np.abs(np.asarray(z, dtype=float))
        return np.where(z > self.z0, self._dense(z, 0),
                        0.5 * self._S0 * z ** 2 / self.params.n)

    def Qz(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        za = np.abs(z)
        out = np.where(za > self.z0, self._dense(za, 1), self._S0 * za / self.params.n)
        return np.where(z < 0, -out, out)

    def Qzz(self, z) -> np.ndarray:
        za = np.abs(np.asarray(z, dtype=float))
        V = np.where(za > self.z0, self._dense(za, 1), self._S0 * za / self.params.n)
        n = self.params.n
        d0 = self._D0(za)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = d0 * (self.source(za)
                        - ((n - 1) / np.where(za == 0, 1.0, za) - self._xterm(za)) * V)
        return np.where(za < 1e-12, self._S0 / n, val)


def build_Q(sign: int, params: FlowParams, A: float, f_profile: FProfile,
            R1: float) -> QProfile:
    """Correction profile for one barrier; depends on A and F only."""
    if sign not in (UPPER, LOWER):
        raise ValueError("sign must be +1 (upper) or -1 (lower)")
    return QProfile(params, A, f_profile, R1)


# ---------------------------------------------------------------------------
# operators

@dataclass
class ProfileFn:
    """Profile with the derivatives the parabolic operators need."""

    value: callable
    dx: callable
    dxx: callable
    dtau: callable


def apply_Tz(fn: ProfileFn, z, tau, params: FlowParams) -> np.ndarray:
    """Tip-region operator T_z[lam] (z-chart); the axis uses the even limit
    (n-1) lam_z / z -> (n-1) lam_zz."""
    n, g = params.n, params.gamma
    z = np.asarray(z, dtype=float)
    tau = np.asarray(tau, dtype=float)
    lam = fn.value(z, tau)
    if np.any(lam == 0):
        raise ZeroDivisionError("lambda vanishes on the evaluation grid")
    lz, lzz, lt = fn.dx(z, tau), fn.dxx(z, tau), fn.dtau(z, tau)
    e2 = np.exp(2 * g * tau)
    diff = e2 * (lzz - 2 * lz ** 2 / lam) / (1.0 + e2 ** 2 * lz ** 2 / lam ** 4)
    with np.errstate(divide="ignore", invalid="ignore"):
        adv = e2 * (n - 1) * np.where(z == 0, lzz, lz / np.where(z == 0, 1.0, z))
    return lt - diff - adv + (g - 1) * z * lz - (g + 1) * lam


def apply_Fphi(fn: ProfileFn, phi, tau, params: FlowParams) -> np.ndarray:
    """Exterior operator F_phi[lam] (phi-chart)."""
    n, g = params.n, params.gamma
    phi = np.asarray(phi, dtype=float)
    tau = np.asarray(tau, dtype=float)
    lam = fn.value(phi, tau)
    if np.any(lam == 0):
        raise ZeroDivisionError("lambda vanishes on the evaluation grid")
    lp, lpp, lt = fn.dx(phi, tau), fn.dxx(phi, tau), fn.dtau(phi, tau)
    e2 = np.exp(2 * g * tau)
    diff = (lpp - 2 * lp ** 2 / lam) / (1.0 + e2 * lp ** 2 / lam ** 4)
    with np.errstate(divide="ignore", invalid="ignore"):
        adv = ((n - 1) / np.where(phi == 0, 1.0, phi) + phi) * lp
        adv = np.where(phi == 0, (n - 1) * lpp, adv)
    return lt - diff - adv - (g + 1) * lam


# ---------------------------------------------------------------------------
# barrier

class Barrier:
    """One (upper or lower) patched barrier with analytic evaluators."""

    def __init__(self, sign: int, constants: BarrierConstants, params: FlowParams,
                 profile: SolitonProfile):
        if sign not in (UPPER, LOWER):
            raise ValueError("sign must be +1 (upper) or -1 (lower)")
        self.sign = sign
        self.constants = constants
        self.params = params
        self.profile = profile
        k = constants
        if sign == UPPER:
            self.A, self.B, self.E = k.A_plus, k.B_plus, k.E_plus
            self.D, self.c, self.b = k.D_plus, k.c_plus, k.b_plus
        else:
            self.A, self.B, self.E = k.A_minus, k.B_minus, k.E_minus
            self.D, self.c, self.b = k.D_minus, k.c_minus, k.b_minus
        self.fprofile = FProfile(profile, self.A, params.gamma)
        self.qprofile = QProfile(params, self.A, self.fprofile, k.R1)
        self.psi = PsiProfile(params, k.C1_psi)

    # interior ------------------------------------------------------------
    def lambda_int(self, z, tau, D_override=None):
        g = self.params.gamma
        D = self.D if D_override is None else D_override
        e2 = np.exp(-2 * g * np.asarray(tau, dtype=float))
        z = np.asarray(z, dtype=float)
        return (-self.A + e2 * (self.fprofile.F(z) + self.B * tau + self.E)
                + tau * e2 ** 2 * D * self.qprofile.Q(z))

    def interior_fn(self, D_override=None) -> ProfileFn:
        g, f, q = self.params.gamma, self.fprofile, self.qprofile
        B, E = self.B, self.E
        D = self.D if D_override is None else D_override

        def value(z, tau):
            return self.lambda_int(z, tau, D_override=D)

        def dz(z, tau):
            e2 = np.exp(-2 * g * tau)
            return e2 * f.Fz(z) + tau * e2 ** 2 * D * q.Qz(z)

        def dzz(z, tau):
            e2 = np.exp(-2 * g * tau)
            return e2 * f.Fzz(z) + tau * e2 ** 2 * D * q.Qzz(z)

        def dtau(z, tau):
            e2 = np.exp(-2 * g * tau)
            return (-2 * g * e2 * (f.F(z) + B * tau + E) + B * e2
                    + (1.0 - 4 * g * tau) * e2 ** 2 * D * q.Q(z))

        return ProfileFn(value, dz, dzz, dtau)

    def tz_interior(self, z, tau, D_override=None) -> np.ndarray:
        """Exact T_z applied to the interior barrier (broadcasts z x tau)."""
        return apply_Tz(self.interior_fn(D_override), z, tau, self.params)

    # exterior ------------------------------------------------------------
    def lambda_ext(self, phi, tau, enforce_domain: bool = True):
        g = self.params.gamma
        phi = np.asarray(phi, dtype=float)
        tau = np.asarray(tau, dtype=float)
        if enforce_domain:
            core = np.abs(phi) < self.constants.R2 * np.exp(-g * tau)
            if np.any(core):
                raise ValueError(
                    "exterior barrier evaluated inside the excluded core "
                    f"|phi| < R2 e^(-g tau) (first offender phi={np.asarray(phi)[core].flat[0]:.3e})")
        e2 = np.exp(-2 * g * tau)
        return -self.c * lambda_bar(phi, self.params) + self.b * e2 * self.psi.psi(phi)

    def exterior_fn(self) -> ProfileFn:
        g, c, b, ps = self.params.gamma, self.c, self.b, self.psi
        prm = self.params

        def value(phi, tau):
            return self.lambda_ext(phi, tau, enforce_domain=False)

        def dphi(phi, tau):
            e2 = np.exp(-2 * g * tau)
            return -c * lambda_bar(phi, prm, 1) + b * e2 * ps.psi(phi, 1) * np.sign(phi)

        def dphiphi(phi, tau):
            e2 = np.exp(-2 * g * tau)
            return -c * lambda_bar(phi, prm, 2) + b * e2 * ps.psi(phi, 2)

        def dtau(phi, tau):
            e2 = np.exp(-2 * g * tau)
            return -2 * g * b * e2 * ps.psi(phi)

        return ProfileFn(value, dphi, dphiphi, dtau)

    def fphi_exterior_reduced(self, phi, tau) -> np.ndarray:
        """F_phi[lam_ext] with the first-order/reaction cancellation done
        symbolically: equals b Lam e^{-2g tau} minus the diffusion term."""
        g = self.params.gamma
        phi = np.asarray(phi, dtype=float)
        tau = np.asarray(tau, dtype=float)
        e2 = np.exp(-2 * g * tau)
        fn = self.exterior_fn()
        lam = fn.value(phi, tau)
        lp = fn.dx(phi, tau)
        lpp = fn.dxx(phi, tau)
        diff = (lpp - 2 * lp ** 2 / lam) / (1.0 + lp ** 2 / (e2 * lam ** 4))
        return self.b * e2 * Lambda(phi, self.params) - diff

    def fphi_exterior_normalized(self, phi, tau) -> np.ndarray:
        """e^{2g tau} F_phi[lam_ext] / (-Lam): sign-equivalent, O(1)-scaled."""
        g = self.params.gamma
        e2 = np.exp(2 * g * np.asarray(tau, dtype=float))
        return e2 * self.fphi_exterior_reduced(phi, tau) / (-Lambda(phi, self.params))

    # patching ------------------------------------------------------------
    def crossing(self, z, tau) -> np.ndarray:
        """Reduced seam function on the overlap, fp-stable:

        upper: e^{2g tau}(lam_int - lam_ext); lower: e^{2g tau}(lam_ext - lam_int).
        Strictly increasing from negative to positive in z on (R2, R1) once
        E is patched.
        """
        g = self.params.gamma
        z = np.asarray(z, dtype=float)
        tau = np.asarray(tau, dtype=float)
        phi = z * np.exp(-g * tau)
        e2m = np.exp(-2 * g * tau)
        incr = scaled_lambda_bar_increment(phi, tau, self.params)
        val = (self.c * incr + self.fprofile.F(z) + self.B * tau + self.E
               + tau * e2m * self.D * self.qprofile.Q(z) - self.b * self.psi.psi(phi))
        return val if self.sign == UPPER else -val

    def crossing_count(self, tau: float, nz: int = 801) -> int:
        k = self.constants
        zz = np.linspace(k.R2, k.R1, nz)
        chi = self.crossing(zz, np.full_like(zz, tau))
        return int(np.sum(np.diff(np.sign(chi)) != 0))

    # patched evaluator -----------------------------------------------------
    def __call__(self, phi, tau) -> np.ndarray:
        """Patched barrier lam(phi, tau) on the whole line (even in phi)."""
        g = self.params.gamma
        phi = np.abs(np.asarray(phi, dtype=float))
        tau = np.asarray(tau, dtype=float)
        k = self.constants
        z = phi * np.exp(g * tau)
        z_int = np.minimum(z, 1.2 * k.R1)
        li = self.lambda_int(z_int, tau)
        le = self.lambda_ext(np.where(z >= k.R2, phi, k.R2 * np.exp(-g * tau)), tau,
                             enforce_domain=False)
        both = np.minimum(li, le) if self.sign == UPPER else np.maximum(li, le)
        return np.where(z <= k.R2, li, np.where(z >= k.R1, le, both))


# ---------------------------------------------------------------------------
# constant selection, patching, certification

def measure_M1_M2(params: FlowParams, psi: PsiProfile, c: float,
                  delta: float = 0.5, phi_cap: float = 1e3, n_grid: int = 4000):
    """Numerical sups of the printed big-O quotients.

    M1 bounds max_k |psi^(k)/lbar^(k)| / c on the far zone; M2 bounds the
    same quotients times phi^2 on the near zone, so that on
    phi >= R2 e^{-g tau} the correction ratio is <= b M2 / R2^2.

    lbar'' vanishes at phi = sqrt((n-1)/(g+2)), where the second-derivative
    quotient has a pole (the combined correction stays bounded; only the
    termwise quotients blow up), so the measurement grids avoid a band
    around that zero.
    """
    n, g = params.n, params.gamma
    phi_zero = math.sqrt((n - 1.0) / (g + 2.0))
    far = np.geomspace(max(delta, 1.25 * phi_zero), phi_cap, n_grid)
    near = np.geomspace(1e-8, min(delta, 0.8 * phi_zero), n_grid)

    def quotients(phi):
        qs = [np.abs(psi.psi(phi, k) / lambda_bar(phi, params, k)) for k in range(3)]
        return np.maximum.reduce(qs)

    M1 = float(np.max(quotients(far))) / c
    M2 = float(np.max(quotients(near) * near ** 2)) / c
    return M1, M2


def interior_barrier(sign: int, constants: BarrierConstants, q_profile: QProfile,
                     z, tau, params: FlowParams, profile: SolitonProfile) -> np.ndarray:
    """Four-term interior barrier value (functional form of `Barrier.lambda_int`)."""
    if q_profile is None:
        raise ValueError("missing Q profile: construct one with build_Q first")
    b = Barrier(sign, constants, params, profile)
    b.qprofile = q_profile
    return b.lambda_int(z, tau)


def exterior_barrier(sign: int, constants: BarrierConstants, phi, tau,
                     params: FlowParams, profile: SolitonProfile) -> np.ndarray:
    """Two-term exterior barrier value (functional form of `Barrier.lambda_ext`)."""
    return Barrier(sign, constants, params, profile).lambda_ext(phi, tau)


def patch(sign: int, constants: BarrierConstants, params: FlowParams,
          profile: SolitonProfile, tau_ref: float, z_star: float = None) -> Barrier:
    """Adjust E (affine dependence, solved exactly) so the seam function has
    its single zero at z* = sqrt(R1 R2), then verify the crossing count."""
    k = constants
    if z_star is None:
        z_star = math.sqrt(k.R1 * k.R2)
    bar = Barrier(sign, k, params, profile)
    chi0 = float(bar.crossing(np.array([z_star]), np.array([tau_ref]))[0])
    # d chi / dE = +1 for the upper barrier, -1 for the lower one
    if sign == UPPER:
        k.E_plus -= chi0
    else:
        k.E_minus += chi0
    bar = Barrier(sign, k, params, profile)
    count = bar.crossing_count(tau_ref)
    if count != 1:
        raise RuntimeError(
            f"{_SIGN_NAME[sign]} barrier: no E achieves a single seam crossing at "
            f"tau = {tau_ref:g} (crossing count = {count} on (R2, R1))")
    return bar


def _extreme(vals: np.ndarray, want_min: bool):
    idx = np.unravel_index(np.argmin(vals) if want_min else np.argmax(vals), vals.shape)
    return float(vals[idx]), idx


def _interior_grid_check(bar: Barrier, taus: np.ndarray, nz: int):
    zz = np.linspace(0.0, bar.constants.R1, nz)
    vals = bar.tz_interior(zz[None, :], taus[:, None])
    want_min = bar.sign == UPPER
    ext, idx = _extreme(vals, want_min)
    return ext, (float(taus[idx[0]]), float(zz[idx[1]]))

def _exterior_grid_check(bar: Barrier, taus: np.ndarray, nz: int, phi_cap: float):
    g = bar.params.gamma
    k = bar.constants
    worst, loc, raws = None, None, []
    want_min = bar.sign == UPPER
    for t in taus:
        phis = np.geomspace(k.R2 * math.exp(-g * t), phi_cap, nz)
        vals = bar.fphi_exterior_normalized(phis, np.full_like(phis, t))
        raws.append(bar.fphi_exterior_reduced(phis, np.full_like(phis, t)))
        ext, i = (float(vals.min()), int(np.argmin(vals))) if want_min \
            else (float(vals.max()), int(np.argmax(vals)))
        if worst is None or (ext < worst if want_min else ext > worst):
            worst, loc = ext, (float(t), float(phis[i]))
    raw = np.concatenate(raws)
    raw_ext = float(raw.min()) if want_min else float(raw.max())
    return worst, loc, raw_ext


def certify(lower: Barrier, upper: Barrier, *, tau_start: float, width: float = 5.0,
            nz: int = 401, ntau: int = 51, phi_cap: float = 60.0,
            crossing_nz: int = 801) -> dict:
    """Full certification of one barrier pair on [tau_start, tau_start+width].

    Each sign inequality must clear zero by more than a Richardson estimate
    (difference between the coarse-grid and refined-grid extremes).
    """
    params = upper.params
    k = upper.constants
    g = params.gamma
    taus = np.linspace(tau_start, tau_start + width, ntau)
    taus_f = np.linspace(tau_start, tau_start + width, 2 * ntau - 1)
    checks = {}

    # fp-noise floors: the raw interior operator cancels O((g+1)A) terms;
    # the normalized exterior one is O(1)-conditioned by construction
    eps = np.finfo(float).eps
    floor_int = 64.0 * eps * (g + 1.0) * max(k.A_plus, k.A_minus, 1.0)
    floor_ext = 64.0 * eps * (1.0 + abs(k.b_plus) + abs(k.b_minus)
                              + max(k.c_plus, k.c_minus) ** 3)

    for bar, name in ((upper, "Tz_upper_interior_min"), (lower, "Tz_lower_interior_max")):
        coarse, _ = _interior_grid_check(bar, taus, nz)
        fine, loc = _interior_grid_check(bar, taus_f, 2 * nz - 1)
        rich = max(abs(fine - coarse), floor_int)
        ok = (fine - rich > 0) if bar.sign == UPPER else (fine + rich < 0)
        # O(1)-scaled margin for interpretability: e^{2g tau} Tz / (1 + tau)
        zz = np.linspace(0.0, k.R1, nz)
        sc = bar.tz_interior(zz[None, :], taus[:, None]) \
            * np.exp(2 * g * taus[:, None]) / (1.0 + taus[:, None])
        scaled = float(sc.min()) if bar.sign == UPPER else float(sc.max())
        checks[name] = dict(value=fine, richardson=rich, location=loc, passed=bool(ok),
                            value_scaled=scaled)

    for bar, name in ((upper, "Fphi_upper_exterior_min"), (lower, "Fphi_lower_exterior_max")):
        coarse, _, _ = _exterior_grid_check(bar, taus, nz, phi_cap)
        fine, loc, raw = _exterior_grid_check(bar, taus_f, 2 * nz - 1, phi_cap)
        rich = max(abs(fine - coarse), floor_ext)
        ok = (fine - rich > 0) if bar.sign == UPPER else (fine + rich < 0)
        checks[name] = dict(value=fine, richardson=rich, location=loc, passed=bool(ok),
                            raw_extreme=raw)

    counts = {f"{t:.6g}": dict(upper=upper.crossing_count(t, crossing_nz),
                               lower=lower.crossing_count(t, crossing_nz))
              for t in taus[:: max(1, ntau // 10)]}
    cross_ok = all(v["upper"] == 1 and v["lower"] == 1 for v in counts.values())
    checks["crossing_count"] = dict(counts=counts, passed=bool(cross_ok))

    # seam selection: interior branch active at R2, exterior at R1
    sel = []
    for t in (taus[0], taus[-1]):
        tt = np.array([t])
        sel.append(float(upper.crossing(np.array([k.R2]), tt)[0]) < 0)
        sel.append(float(upper.crossing(np.array([k.R1]), tt)[0]) > 0)
        sel.append(float(lower.crossing(np.array([k.R2]), tt)[0]) < 0)
        sel.append(float(lower.crossing(np.array([k.R1]), tt)[0]) > 0)
    checks["seam_selection"] = dict(passed=bool(all(sel)))

    # global ordering, normalized by lbar so the margin is uniform in phi
    worst = None
    for t in taus[:: max(1, ntau // 10)]:
        phis = np.concatenate([[0.0], np.geomspace(1e-9, phi_cap, 1500)])
        gap = (upper(phis, t) - lower(phis, t)) / lambda_bar(phis, params)
        m = float(gap.min())
        worst = m if worst is None else min(worst, m)
    checks["ordering_margin_normalized"] = dict(value=worst, passed=bool(worst > 0))

    # (B4): patched barriers vanish at spatial infinity like lbar
    edge = []
    for t in (taus[0], taus[-1]):
        phis = np.geomspace(2.0, phi_cap, 400)
        for bar in (upper, lower):
            ratio = np.abs(bar(phis, t)) / lambda_bar(phis, params)
            edge.append(float(np.max(ratio)) <= 2.0 * max(k.c_plus, k.c_minus))
    checks["vanishing_at_infinity"] = dict(passed=bool(all(edge)))

    passed = all(c["passed"] for c in checks.values())
    return dict(
        schema="barrier-certificate-1",
        passed=bool(passed),
        tau_window=[float(tau_start), float(tau_start + width)],
        grid=dict(nz=nz, ntau=ntau, phi_cap=phi_cap),
        constants={kk: (vv if not isinstance(vv, float) or math.isfinite(vv) else None)
                   for kk, vv in asdict(k).items()},
        checks=checks,
    )


def _quick_pass(lower: Barrier, upper: Barrier, tau_start: float, width: float,
                phi_cap: float) -> bool:
    taus = np.linspace(tau_start, tau_start + width, 9)
    a, _ = _interior_grid_check(upper, taus, 141)
    if a <= 0:
        return False
    b, _ = _interior_grid_check(lower, taus, 141)
    if b >= 0:
        return False
    c, _, _ = _exterior_grid_check(upper, taus, 141, phi_cap)
    if c <= 0:
        return False
    d, _, _ = _exterior_grid_check(lower, taus, 141, phi_cap)
    if d >= 0:
        return False
    for t in (taus[0], taus[len(taus) // 2], taus[-1]):
        if upper.crossing_count(t, 401) != 1 or lower.crossing_count(t, 401) != 1:
            return False
    return True


def choose_constants(params: FlowParams, profile: SolitonProfile, *,
                     eps_c: float = 0.1, R1: float = 6.0, R2: float = 2.0,
                     b_plus_scale: float = 1.25, b_minus_scale: float = 0.75,
                     C1_psi: float = 0.0, delta: float = 0.5) -> BarrierConstants:
    """Pick the constant set: c+- = (1 -+ eps_c) c, then the forced relations.

    b+ respects both printed two-zone bounds and the patching slope condition
    b+ < -(c+)^3; b- > 0. D+- and E+- are provisional until `patch` runs.
    """
    n, g = params.n, params.gamma
    c = params.c
    cp, cm = (1 - eps_c) * c, (1 + eps_c) * c
    s = (n - 1.0) ** (-(g + 1.0) / 2.0)
    beta_tilde = (n - 1.0) ** (-3.0 * (g + 1.0) / 2.0) / (g + 1.0)
    psi = PsiProfile(params, C1_psi)
    M1, M2 = measure_M1_M2(params, psi, c, delta=delta)
    b_plus = min(-2.0 * cp ** 3 / 3.0,
                 -cp ** 3 / (1.0 + cp ** 3 * M2 / R2 ** 2),
                 -b_plus_scale * cp ** 3)
    x = cm ** 3 * M2 / R2 ** 2
    b_minus = b_minus_scale * cm ** 3
    if x >= 1.0:
        b_minus = min(b_minus, 0.5 * cm ** 3 / (x - 1.0))
    k = BarrierConstants(
        A_plus=cp * s, A_minus=cm * s,
        B_plus=-g * b_plus * beta_tilde, B_minus=-g * b_minus * beta_tilde,
        E_plus=0.0, E_minus=0.0,
        D_plus=abs(-g * b_plus * beta_tilde) + 1.0,
        D_minus=-(abs(-g * b_minus * beta_tilde) + 1.0),
        c_plus=cp, c_minus=cm, b_plus=b_plus, b_minus=b_minus,
        R1=R1, R2=R2, tau0=float("nan"), beta_tilde=beta_tilde,
        C1_psi=C1_psi, M1=M1, M2=M2, delta=delta)
    k.validate(params)
    return k


def build_barriers(params: FlowParams, profile: SolitonProfile, *,
                   eps_c: float = 0.1, R1: float = 6.0, R2: float = 2.0,
                   window: float = 5.0, phi_cap: float = 60.0,
                   nz: int = 401, ntau: int = 51,
                   tau_scan: tuple = (0.75, 12.0), **const_kw):
    """Full pipeline: constants -> patch -> bisect the certification window
    start -> final certification. Returns (lower, upper, certificate)."""
    k = choose_constants(params, profile, eps_c=eps_c, R1=R1, R2=R2, **const_kw)

    def repatch(tau_ref):
        up = patch(UPPER, k, params, profile, tau_ref)
        lo = patch(LOWER, k, params, profile, tau_ref)
        k.D_plus = abs(k.B_plus) + abs(k.E_plus) + 1.0
        k.D_minus = -(abs(k.B_minus) + abs(k.E_minus) + 1.0)
        up = patch(UPPER, k, params, profile, tau_ref)
        lo = patch(LOWER, k, params, profile, tau_ref)
        return lo, up

    tau_ref = 4.0
    lo, up = repatch(tau_ref)

    # scan up in steps, then bisect the pass/fail boundary
    t_lo, t_hi = tau_scan
    t = max(1.0, t_lo)
    t_fail = None
    while t <= t_hi and not _quick_pass(lo, up, t, window, phi_cap):
        t_fail, t = t, t + 0.5
    if t > t_hi:
        raise RuntimeError("no certification window start found in the scan range")
    if t_fail is not None:
        a, b = t_fail, t
        while b - a > 0.125:
            m = 0.5 * (a + b)
            if _quick_pass(lo, up, m, window, phi_cap):
                b = m
            else:
                a = m
        t = b
    k.tau0 = t
    if abs((t + 2.0) - tau_ref) > 1.5:
        lo, up = repatch(t + 2.0)
        if not _quick_pass(lo, up, t, window, phi_cap):
            t = t + 0.5
            k.tau0 = t
    cert = certify(lo, up, tau_start=k.tau0, width=window, nz=nz, ntau=ntau,
                   phi_cap=phi_cap)
    return lo, up, cert
