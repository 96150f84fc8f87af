"""Measurement of the predicted asymptotics on computed trajectories:
blow-up exponent, tip-profile convergence, exterior growth law, the ratio
principle, and the auxiliary tip supersolution check.

Tip diagnostics for lambda-chart snapshots go through the deviation payload
written by the solver: with v = e^{2 g tau}(lambda + c lbar),

    Y(z) := e^{2 g tau}(y(z) - y(0))
          = (-c e^{2 g tau}(lbar - lbar(0)) + (v - v(0))) / (lam lam(0))

is O(1)-conditioned for the whole run, and the unscaled curvatures are

    kappa_n = e^{(g-1) tau} Y'' / (1 + Y'^2)^{3/2},
    kappa_1 = e^{(g-1) tau} Y' / (z sqrt(1 + Y'^2)),

since dx/du = Y'(z) exactly under the rescaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator

from .fdiff import DerivOperator
from .geometry import Chart, FlowParams, FlowState, CurvatureRecord
from .soliton import SolitonProfile
from .formal import scaled_lambda_bar_increment


# ---------------------------------------------------------------------------
# stable tip pipeline

def stable_Y(state: FlowState, params: FlowParams):
    """(z, Y, lam) for a lambda-chart snapshot; exact for payload states.

    Falls back to raw differences when no deviation payload is present
    (adequate only at moderate tau; documented precision cliff).
    """
    if state.chart is not Chart.LAMBDA_OF_PHI:
        raise ValueError("stable_Y expects a lambda-chart snapshot")
    g = params.gamma
    tau = state.tau
    lam = state.values
    z = state.nodes * math.exp(g * tau)
    if state.meta.get("stable") and "v" in state.meta:
        c_ref = state.meta["c_ref"]
        v = np.asarray(state.meta["v"], dtype=float)
        num = -c_ref * scaled_lambda_bar_increment(state.nodes, tau, params) + (v - v[0])
    else:
        num = math.exp(2 * g * tau) * (lam - lam[0])
    return z, num / (lam * lam[0]), lam


def tip_curvature_fit(z: np.ndarray, Y: np.ndarray, z_fit_max: float = 0.35):
    """Y''(0) by least squares on the even expansion Y = k z^2/2 + c4 z^4 + c6 z^6."""
    m = (z > 0) & (z < z_fit_max)
    if m.sum() < 8:
        raise ValueError("tip not resolved: fewer than 8 nodes inside the fit window")
    zz = z[m]
    basis = np.stack([zz ** 2 / 2.0, zz ** 4, zz ** 6], axis=1)
    coef, *_ = np.linalg.lstsq(basis, Y[m], rcond=None)
    return float(coef[0])


def curvature_record_from_lambda(state: FlowState, params: FlowParams,
                                 z_probe_cap: float = None) -> CurvatureRecord:
    """CurvatureRecord for a lambda-chart snapshot via the Y(z) pipeline."""
    n, g = params.n, params.gamma
    tau = state.tau
    z, Y, lam = stable_Y(state, params)
    scale = math.exp((g - 1.0) * tau)

    # probe grid: skip the sub-resolved core, keep log spacing manageable
    zmax = z[-1] if z_probe_cap is None else min(z[-1], z_probe_cap)
    mask = (z >= max(4.0 * z[1], 1e-3)) & (z <= zmax)
    zp = z[mask]
    op = DerivOperator(zp, npts=5)
    Yp = op.apply(Y[mask], 1)
    Ypp = op.apply(Y[mask], 2)
    k1 = scale * Yp / (zp * np.sqrt(1.0 + Yp ** 2))
    kn = scale * Ypp / (1.0 + Yp ** 2) ** 1.5

    ktip = scale * tip_curvature_fit(z, Y)
    k1_all = np.concatenate([[ktip], k1])
    kn_all = np.concatenate([[ktip], kn])
    h = np.sqrt((n - 1) * k1_all ** 2 + kn_all ** 2)
    amax = int(np.argmax(h))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = kn_all / k1_all
    return CurvatureRecord(
        t=state.t, kappa1_tip=ktip, kappan_tip=ktip,
        sup_h=float(h[amax]), argmax_node=amax,
        ratio_max=float(np.nanmax(ratio)),
        kappa1=k1_all, kappan=kn_all,
        nonconvex=bool(np.any(kn_all[1:-1] <= 0)))


# ---------------------------------------------------------------------------
# blow-up exponent

@dataclass
class FitResult:
    slope: float
    intercept: float
    ci_halfwidth: float
    decades: float
    n_used: int
    prefactor_tip_H: float = float("nan")

    def prefactor_rel_error(self, params: FlowParams) -> float:
        target = (params.gamma + 1.0) * params.A_tilde
        return abs(self.prefactor_tip_H / target - 1.0)


def _ols(x, y):
    n = len(x)
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    se = math.sqrt(np.sum(resid ** 2) / max(n - 2, 1) / sxx)
    return slope, intercept, 2.0 * se


def fit_blowup_exponent(traj, t_window=None, *, transient_frac: float = 0.4,
                        abscissa: str = "2t+1", T_extinct: float = None) -> FitResult:
    """OLS slope of log sup|h| against log(2t+1) (or log(T-t) for finite-
    horizon controls), on the last (1 - transient_frac) of the snapshots."""
    recs = traj.records
    ts = np.array([r.t for r in recs])
    sup_h = np.array([r.sup_h for r in recs])
    if t_window is not None:
        m = (ts >= t_window[0]) & (ts <= t_window[1])
        ts, sup_h, recs = ts[m], sup_h[m], [r for r, k in zip(recs, m) if k]
    k0 = int(len(ts) * transient_frac)
    ts_u, sup_u = ts[k0:], sup_h[k0:]
    if abscissa == "2t+1":
        xs = np.log(2.0 * ts_u + 1.0)
    elif abscissa == "T-t":
        if T_extinct is None:
            raise ValueError("T_extinct required for the T-t abscissa")
        xs = np.log(T_extinct - ts_u)
    else:
        raise ValueError("abscissa must be '2t+1' or 'T-t'")
    decades = (xs.max() - xs.min()) / math.log(10.0)
    if len(xs) < 10:
        raise ValueError(f"need >= 10 snapshots in the fit window (got {len(xs)})")
    if decades < 1.5:
        raise ValueError(f"need >= 1.5 decades of abscissa (got {decades:.2f})")
    slope, intercept, ci = _ols(xs, np.log(sup_u))

    pref = float("nan")
    if abscissa == "2t+1":
        n = traj.params.n
        tipH = np.array([r.tip_mean_curvature(n) for r in recs[k0:]])
        if np.all(np.isfinite(tipH)):
            g = traj.params.gamma
            pref = float(np.exp(np.mean(np.log(tipH) - 0.5 * (g - 1.0) * xs)))
    return FitResult(slope=float(slope), intercept=float(intercept),
                     ci_halfwidth=float(ci), decades=float(decades),
                     n_used=len(xs), prefactor_tip_H=pref)


def argmax_at_tip_after_transient(traj, transient_frac: float = 0.4) -> bool:
    recs = traj.records[int(len(traj.records) * transient_frac):]
    return all(r.argmax_node == 0 for r in recs)


# ---------------------------------------------------------------------------
# tip profile and exterior growth

def tip_profile_error(traj, profile: SolitonProfile, Z_star: float = 2.0,
                      n_probe: int = 81) -> np.ndarray:
    """Per snapshot: sup over z in [0, Z*] of |Y(z) - P((g+1)At z)/((g+1)At)|.

    Returns an array of rows (tau, sup_error)."""
    params = traj.params
    s = (params.gamma + 1.0) * params.A_tilde
    zp = np.linspace(0.0, Z_star, n_probe)
    target = profile.P_of(s * zp) / s
    rows = []
    for st in traj.snapshots:
        z, Y, _ = stable_Y(st, params)
        inside = int(np.sum((z > 0) & (z <= Z_star)))
        if inside < 30:
            raise ValueError(
                f"tip under-resolved at tau={st.tau:.3f}: {inside} nodes with z <= {Z_star}"
                " (refine the grid or lower phi_min)")
        m = z <= max(4.0 * Z_star, 8.0)
        f = PchipInterpolator(z[m], Y[m])
        rows.append((st.tau, float(np.max(np.abs(f(zp) - target)))))
    return np.array(rows)


def exterior_growth(traj, band: tuple = None) -> np.ndarray:
    """Per snapshot: fitted growth constant and relative band dispersion of
    y / (phi^2 + n - 1)^{(g+1)/2}. Rows: (tau, C1_fit, dispersion)."""
    params = traj.params
    n, g = params.n, params.gamma
    if band is None:
        pm = traj.config.phi_max
        band = (0.3 * pm, 0.6 * pm)
    rows = []
    for st in traj.snapshots:
        if st.chart is not Chart.LAMBDA_OF_PHI:
            raise ValueError("exterior growth expects lambda-chart snapshots")
        phi = st.nodes
        m = (phi >= band[0]) & (phi <= band[1])
        if m.sum() < 8:
            raise ValueError("band clipped by the computational window")
        y = -1.0 / st.values[m]
        ratio = y / (phi[m] ** 2 + n - 1.0) ** ((g + 1.0) / 2.0)
        C1f = float(ratio.mean())
        rows.append((st.tau, C1f, float(np.max(np.abs(ratio - C1f)) / C1f)))
    return np.array(rows)


def barrier_bracket_for_C1(lower, upper, band: tuple, tau: float, params: FlowParams):
    """Pointwise bracket for the fitted growth constant implied by trapping:
    -1/lam is between -1/lam^- and -1/lam^+ on the band."""
    n, g = params.n, params.gamma
    phi = np.linspace(band[0], band[1], 200)
    w = (phi ** 2 + n - 1.0) ** ((g + 1.0) / 2.0)
    hi = (-1.0 / lower(phi, tau)) / w
    lo = (-1.0 / upper(phi, tau)) / w
    return float(lo.min()), float(hi.max())


def ratio_principle_report(traj, R1: float = None) -> dict:
    """Max principal-curvature ratio along the run vs its initial value, and
    the outer-region chain kappa_n <= C R1^-4 (2t+1)^{(g-1)/2} < (g+1) At (...)."""
    params = traj.params
    g, At = params.gamma, params.A_tilde
    ratios = np.array([r.ratio_max for r in traj.records])
    out = dict(initial_ratio_max=float(ratios[0]), run_ratio_max=float(ratios.max()),
               within_5pct=bool(ratios.max() <= 1.05 * max(ratios[0], 1.0)))
    if R1 is not None:
        C = float(ratios.max())
        chain_ok, worst = True, 0.0
        for st in traj.snapshots:
            z, Y, _ = stable_Y(st, params)
            scale = math.exp((g - 1.0) * st.tau)
            m = z >= R1
            if m.sum() < 8:
                continue
            zo = z[m]
            op = DerivOperator(zo, npts=5)
            Yp = op.apply(Y[m], 1)
            Ypp = op.apply(Y[m], 2)
            kn_out = float(np.max(scale * Ypp / (1.0 + Yp ** 2) ** 1.5))
            bound = C * R1 ** -4 * scale
            strict = (g + 1.0) * At * scale
            worst = max(worst, kn_out / bound if bound > 0 else math.inf)
            chain_ok &= kn_out <= bound * (1.0 + 1e-6) and bound < strict
        out.update(outer_chain_ok=bool(chain_ok), outer_chain_worst_ratio=float(worst),
                   ratio_bound_C=C)
    return out


# ---------------------------------------------------------------------------
# tip supersolution (auxiliary relaxation-operator check)

@dataclass
class TipSupersolutionReport:
    C1_bound: float
    theta_plus: float
    eta: float
    min_value: float
    argmin: tuple
    passed: bool
    zero_transport_gamma1: bool = False


def _L_corrector(profile: SolitonProfile, theta: float, z_max: float, n: int):
    """L(z) solving L'/(1+Q^2) + ((n-1)/z - 2QQ'/(1+Q^2)^2) L = theta z^2/2,
    L(0) = 0, with Q = P'."""
    def Q(z):
        return profile.Pw_of(np.asarray(z, dtype=float))

    def Qp(z):
        return profile.Pww_of(np.asarray(z, dtype=float))

    def coeff(z):
        q, qp = Q(z), Qp(z)
        return (n - 1) / z - 2.0 * q * qp / (1.0 + q ** 2) ** 2

    def rhs(z, y):
        return [(1.0 + Q(z) ** 2) * (theta * z * z / 2.0 - coeff(z) * y[0])]

    z0 = 1e-6
    sol = solve_ivp(rhs, (z0, z_max), [theta * z0 ** 3 / (2.0 * (n + 2))],
                    method="DOP853", rtol=1e-11, atol=1e-14, dense_output=True)
    if not sol.success:
        raise RuntimeError(f"tip corrector integration failed: {sol.message}")

    def L(z):
        z = np.asarray(z, dtype=float)
        return np.where(z > z0, sol.sol(np.maximum(z, z0).ravel())[0].reshape(z.shape),
                        theta * z ** 3 / (2.0 * (n + 2)))

    def Lp(z):
        z = np.asarray(z, dtype=float)
        return (1.0 + Q(z) ** 2) * (theta * z * z / 2.0 - coeff(z) * L(z))

    def Lpp(z):
        # differentiate Lp analytically via Q, Q', Q''
        z = np.asarray(z, dtype=float)
        q, qp, qpp = Q(z), Qp(z), profile.Pwww_of(z)
        cf = coeff(z)
        dcf = -(n - 1) / z ** 2 - 2.0 * (qp ** 2 + q * qpp) / (1.0 + q ** 2) ** 2 \
            + 8.0 * q ** 2 * qp ** 2 / (1.0 + q ** 2) ** 3
        return 2.0 * q * qp * (theta * z * z / 2.0 - cf * L(z)) \
            + (1.0 + q ** 2) * (theta * z - dcf * L(z) - cf * Lp(z))

    return L, Lp, Lpp


def relaxation_operator(profile: SolitonProfile, params: FlowParams, L_funcs,
                        z, s) -> np.ndarray:
    """B[Q + L/s] where B[q] = q_s + ((g-1)/2g)(z/s) q_z
    - d/dz(q_z/(1+q^2) + (n-1) q/z)."""
    n, g = params.n, params.gamma
    L, Lp, Lpp = L_funcs
    z = np.asarray(z, dtype=float)
    s = np.asarray(s, dtype=float)
    q = profile.Pw_of(z) + L(z) / s
    qz = profile.Pww_of(z) + Lp(z) / s
    qzz = profile.Pwww_of(z) + Lpp(z) / s
    ds = -L(z) / s ** 2
    transport = (g - 1.0) / (2.0 * g) * (z / s) * qz
    div = (qzz * (1.0 + q ** 2) - 2.0 * q * qz ** 2) / (1.0 + q ** 2) ** 2 \
        + (n - 1) * (qz * z - q) / z ** 2
    return ds + transport - div


def tip_supersolution_check(profile: SolitonProfile, params: FlowParams, *,
                            eta: float = 0.05, theta_plus: float = None,
                            s0: float = None, s_span: float = 100.0,
                            nz: int = 200, ns: int = 40) -> TipSupersolutionReport:
    """Certify positivity of B[Q + L/s] on {z_lo <= z <= sqrt(eta s)}.

    C1 bounds |((g-1)/2g) Q'| (finite since Q' = P'' is bounded); the default
    theta is -(C1 + 2). The operator vanishes on the axis, so the grid floor
    z_lo > 0."""
    n, g = params.n, params.gamma
    if g <= 0:
        raise ValueError("the relaxation check needs gamma > 0")
    zs_for_C1 = np.geomspace(1e-4, 100.0, 4000)
    C1 = float(np.max(np.abs((g - 1.0) / (2.0 * g) * profile.Pww_of(zs_for_C1))))
    theta = -(C1 + 2.0) if theta_plus is None else theta_plus
    if s0 is None:
        s0 = math.exp(2.0 * g * 2.0) / (2.0 * g)
    z_max = math.sqrt(eta * s0 * s_span)
    L_funcs = _L_corrector(profile, theta, 1.05 * z_max, n)
    ss = np.geomspace(s0, s0 * s_span, ns)
    worst, arg = math.inf, None
    z_lo = 1e-3 * math.sqrt(eta * s0)
    for s in ss:
        zz = np.linspace(z_lo, math.sqrt(eta * s), nz)
        vals = relaxation_operator(profile, params, L_funcs, zz, np.full_like(zz, s))
        i = int(np.argmin(vals))
        if vals[i] < worst:
            worst, arg = float(vals[i]), (float(zz[i]), float(s))
    return TipSupersolutionReport(
        C1_bound=C1, theta_plus=theta, eta=eta, min_value=worst, argmin=arg,
        passed=bool(worst > 0.0),
        zero_transport_gamma1=bool(abs((g - 1.0) / (2.0 * g)) < 1e-15))


# ---------------------------------------------------------------------------
# report container

@dataclass
class AsymptoticsReport:
    fitted_exponent: float
    fitted_ci: float
    target_exponent: float
    prefactor_tip_H: float
    tip_error_curve: np.ndarray = field(repr=False)
    growth_curve: np.ndarray = field(repr=False)
    ratio_principle_max: float = float("nan")
    argmax_at_tip: bool = False

    @classmethod
    def from_trajectory(cls, traj, profile: SolitonProfile, *, Z_star: float = 2.0,
                        band: tuple = None) -> "AsymptoticsReport":
        params = traj.params
        fit = fit_blowup_exponent(traj)
        tec = tip_profile_error(traj, profile, Z_star=Z_star)
        gc = exterior_growth(traj, band=band)
        rat = ratio_principle_report(traj)
        return cls(fitted_exponent=fit.slope, fitted_ci=fit.ci_halfwidth,
                   target_exponent=(params.gamma - 1.0) / 2.0,
                   prefactor_tip_H=fit.prefactor_tip_H,
                   tip_error_curve=tec, growth_curve=gc,
                   ratio_principle_max=rat["run_ratio_max"],
                   argmax_at_tip=argmax_at_tip_after_transient(traj))
