"""Semi-implicit time stepping of the flow in three charts, trapped initial
data, and the discrete comparison-principle test.

Scheme: backward-Euler IMEX on a tridiagonal system. The diffusion
coefficient is frozen at the old state; diffusion and the first-order terms
go into the implicit solve (the (n-1)/phi advection is CFL-hostile when
explicit, and Crank-Nicolson weighting is not L-stable against the stiff
axis modes); the nonlinear gradient correction and the reaction term stay
explicit. The axis row uses even reflection with the (n-1) lam_phi/phi ->
(n-1) lam_phiphi limit. Step control is Richardson step-doubling.

The lambda chart is evolved in the deviation variable

    v(phi, tau) := e^{2 g tau} (lambda + c lbar(phi)),

which is exactly the same chart reparametrized: the lbar advection/reaction
cancellation is symbolic, the far-field Dirichlet condition becomes v = 0,
and tip diagnostics stay O(1)-conditioned for the whole run (raw lambda
loses the tip second derivative to e^{2 g tau}-amplified roundoff).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .geometry import Chart, FlowParams, FlowState, curvatures
from .soliton import SolitonProfile, FProfile
from .formal import lambda_bar, scaled_lambda_bar_increment
from .barriers import Barrier, BarrierConstants


class FarFieldBC(enum.Enum):
    DIRICHLET_FORMAL = "dirichlet_formal"
    NEUMANN_POWERLAW = "neumann_powerlaw"


@dataclass
class SolverConfig:
    chart: Chart = Chart.LAMBDA_OF_PHI
    phi_max: float = 12.0          # r_max in the unscaled chart
    phi_min: float = 4e-8          # first positive node of the log grading
    nodes: int = 2001
    grading: str = "log"           # "log" | "uniform"
    dtau: float = 2.5e-4
    dtau_min: float = 1e-7
    dtau_max: float = 4e-3
    safety: float = 0.8
    step_tol: float = 3e-6         # per-step Richardson target (solver units)
    adapt: bool = True
    far_field_bc: FarFieldBC = FarFieldBC.DIRICHLET_FORMAL
    tau_end: float = 7.0           # t_end in the unscaled chart

    def __post_init__(self):
        if self.nodes < 201:
            raise ValueError("nodes must be >= 201")
        if not (self.dtau > 0 and self.dtau_min > 0 and self.dtau_max >= self.dtau_min):
            raise ValueError("time step bounds must be positive and ordered")
        if self.grading not in ("log", "uniform"):
            raise ValueError("grading must be 'log' or 'uniform'")
        if isinstance(self.chart, str):
            self.chart = Chart(self.chart)
        if isinstance(self.far_field_bc, str):
            self.far_field_bc = FarFieldBC(self.far_field_bc)

    def check_domain(self, constants: BarrierConstants, params: FlowParams, tau0: float):
        if self.phi_max <= 10.0 * constants.R1 * math.exp(-params.gamma * tau0):
            raise ValueError("phi_max must exceed 10 R1 e^{-g tau0}")

    def grid(self) -> np.ndarray:
        if self.grading == "log":
            return np.concatenate([[0.0],
                                   np.geomspace(self.phi_min, self.phi_max, self.nodes - 1)])
        return np.linspace(0.0, self.phi_max, self.nodes)


@dataclass
class Trajectory:
    """Snapshots plus per-snapshot diagnostics of one run."""

    params: FlowParams
    config: SolverConfig
    snapshots: list
    records: list
    margins: list            # (lower, upper) trapping margins, or None
    lte_cumulative: list     # accumulated Richardson LTE estimate per snapshot
    steps: int
    barrier_constants: BarrierConstants = None

    def taus(self) -> np.ndarray:
        return np.array([s.tau for s in self.snapshots])

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])


def _stencils(x: np.ndarray):
    h1 = x[1:-1] - x[:-2]
    h2 = x[2:] - x[1:-1]
    a2 = 2.0 / (h1 * (h1 + h2)); c2 = 2.0 / (h2 * (h1 + h2)); b2 = -(a2 + c2)
    a1 = -h2 / (h1 * (h1 + h2)); c1 = h1 / (h2 * (h1 + h2)); b1 = -(a1 + c1)
    return (a1, b1, c1), (a2, b2, c2)


def _solve_tridiag(lo, di, up, rhs):
    ab = np.zeros((3, len(di)))
    ab[0, 1:] = up[1:]
    ab[1, :] = di
    ab[2, :-1] = lo[:-1]
    return solve_banded((1, 1), ab, rhs)


class _BaseEvolver:
    """Shared IMEX-BE machinery; subclasses provide coefficients and BCs."""

    def __init__(self, params: FlowParams, config: SolverConfig):
        self.params = params
        self.config = config
        self.x = config.grid()
        self.d1, self.d2 = _stencils(self.x)
        self.axis_co = 2.0 / self.x[1] ** 2

    def _derivs(self, u):
        a1, b1, c1 = self.d1
        a2, b2, c2 = self.d2
        up = np.empty_like(u); upp = np.empty_like(u)
        up[1:-1] = a1 * u[:-2] + b1 * u[1:-1] + c1 * u[2:]
        upp[1:-1] = a2 * u[:-2] + b2 * u[1:-1] + c2 * u[2:]
        up[0] = 0.0
        upp[0] = self.axis_co * (u[1] - u[0])
        up[-1] = (u[-1] - u[-2]) / (self.x[-1] - self.x[-2])
        upp[-1] = 0.0
        return up, upp

    # subclass hooks -------------------------------------------------------
    def coefficients(self, u, tau):
        """-> (Dco, adv, explicit) arrays for du/dtau = Dco u'' + adv u' + explicit."""
        raise NotImplementedError

    def boundary(self, lo, di, up, rhs, u, tau, dt):
        raise NotImplementedError

    # one IMEX-BE step -------------------------------------------------------
    def _raw_step(self, u, tau, dt):
        Dco, adv, expl = self.coefficients(u, tau)
        a1, b1, c1 = self.d1
        a2, b2, c2 = self.d2
        N = len(u)
        lo = np.zeros(N); di = np.ones(N); up = np.zeros(N)
        lo[:-2] = -dt * (Dco[1:-1] * a2 + adv[1:-1] * a1)
        di[1:-1] = 1.0 - dt * (Dco[1:-1] * b2 + adv[1:-1] * b1)
        up[2:] = -dt * (Dco[1:-1] * c2 + adv[1:-1] * c1)
        # axis: even reflection, (n-1) u'/x -> (n-1) u'' => total n * u''
        n = self.params.n
        di[0] = 1.0 + dt * Dco[0] * n * self.axis_co
        up[1] = -dt * Dco[0] * n * self.axis_co
        rhs = u + dt * expl
        self.boundary(lo, di, up, rhs, u, tau, dt)
        return _solve_tridiag(lo, di, up, rhs)

    def step(self, u, tau, dt):
        """One accepted step with Richardson doubling; returns (u, dt_done, est, dt_next).

        Rejections are capped: on very stiff transients the doubling estimate
        grows as dt shrinks (fast modes), so after two halvings the L-stable
        step is accepted and the estimate charged to the LTE budget."""
        cfg = self.config
        if not cfg.adapt:
            return self._raw_step(u, tau, dt), dt, 0.0, dt
        rejections = 0
        while True:
            full = self._raw_step(u, tau, dt)
            half = self._raw_step(u, tau, 0.5 * dt)
            half = self._raw_step(half, tau + 0.5 * dt, 0.5 * dt)
            est = float(np.max(np.abs(half - full)))
            if est <= cfg.step_tol or dt <= cfg.dtau_min * (1 + 1e-9) or rejections >= 2:
                fac = cfg.safety * math.sqrt(cfg.step_tol / max(est, 1e-300))
                dt_next = min(cfg.dtau_max, max(cfg.dtau_min, dt * min(2.0, max(0.3, fac))))
                return half, dt, est, dt_next
            rejections += 1
            dt = max(cfg.dtau_min, 0.5 * dt)


class LambdaPhiEvolver(_BaseEvolver):
    """lambda(phi, tau) chart, evolved in v = e^{2 g tau}(lambda + c lbar)."""

    def __init__(self, params: FlowParams, config: SolverConfig, c_ref: float):
        super().__init__(params, config)
        self.c_ref = c_ref
        self.lb = lambda_bar(self.x, params)
        self.lb2 = lambda_bar(self.x, params, 2)
        self.lb1 = lambda_bar(self.x, params, 1)
        adv = np.empty_like(self.x)
        adv[1:] = (params.n - 1) / self.x[1:] + self.x[1:]
        adv[0] = 0.0
        self._adv = adv

    def lam_of(self, v, tau):
        return -self.c_ref * self.lb + math.exp(-2 * self.params.gamma * tau) * v

    def coefficients(self, v, tau):
        g = self.params.gamma
        e2 = math.exp(2 * g * tau)
        lam = self.lam_of(v, tau)
        vp, _ = self._derivs(v)
        lamp = -self.c_ref * self.lb1 + vp / e2
        s = e2 * lamp ** 2 / lam ** 4
        Dco = 1.0 / (1.0 + s)
        # e^{2gt} * 2 lam_phi^2/lam * Dco == 2 lam^3 s/(1+s), bounded
        nonlin = -2.0 * lam ** 3 * s / (1.0 + s)
        expl = Dco * (e2 * (-self.c_ref * self.lb2)) + nonlin + (3 * g + 1) * v
        return Dco, self._adv, expl

    def boundary(self, lo, di, up, rhs, v, tau, dt):
        if self.config.far_field_bc is FarFieldBC.DIRICHLET_FORMAL:
            di[-1] = 1.0; lo[-2] = 0.0; rhs[-1] = 0.0      # v = 0 <=> lambda = -c lbar
        else:
            # d/dphi (lambda/lbar) = 0  <=>  v/lbar constant across the edge
            di[-1] = 1.0; lo[-2] = -self.lb[-1] / self.lb[-2]; rhs[-1] = 0.0

    def state_of(self, v, tau) -> FlowState:
        lam = self.lam_of(v, tau)
        return FlowState(Chart.LAMBDA_OF_PHI, tau, self.x, lam,
                         meta=dict(v=v.copy(), c_ref=self.c_ref, stable=True))


class YPhiEvolver(_BaseEvolver):
    """y(phi, tau) chart (raw values; for short validation windows)."""

    def __init__(self, params: FlowParams, config: SolverConfig, C1_ref: float):
        super().__init__(params, config)
        self.C1_ref = C1_ref
        adv = np.empty_like(self.x)
        adv[1:] = (params.n - 1) / self.x[1:] + self.x[1:]
        adv[0] = 0.0
        self._adv = adv
        self._m = self.x ** 2 + params.n - 1.0

    def coefficients(self, y, tau):
        g = self.params.gamma
        e2 = math.exp(2 * g * tau)
        yp, _ = self._derivs(y)
        Dco = 1.0 / (1.0 + e2 * yp ** 2)
        expl = -(g + 1) * y
        return Dco, self._adv, expl

    def boundary(self, lo, di, up, rhs, y, tau, dt):
        k = (self.params.gamma + 1.0) / 2.0
        if self.config.far_field_bc is FarFieldBC.DIRICHLET_FORMAL:
            di[-1] = 1.0; lo[-2] = 0.0
            rhs[-1] = self.C1_ref * self._m[-1] ** k
        else:
            di[-1] = 1.0; lo[-2] = -(self._m[-1] / self._m[-2]) ** k; rhs[-1] = 0.0

    def state_of(self, y, tau) -> FlowState:
        return FlowState(Chart.Y_OF_PHI, tau, self.x, y)


class XREvolver(_BaseEvolver):
    """Unscaled radial graph x = X(r, t); benchmark/control chart.

    `bc_value(t)` supplies the Dirichlet boundary value; NEUMANN_POWERLAW
    pins the far-field slope X_r(r_max) to its initial value (the power-law
    ratio is constant for gamma = 0 growth). The tip x-position is tracked
    and the values re-gauged when it drifts past 10% of the window (pure
    translation; keeps magnitudes small)."""

    def __init__(self, params: FlowParams, config: SolverConfig, bc_value=None):
        super().__init__(params, config)
        self.bc_value = bc_value
        adv = np.empty_like(self.x)
        adv[1:] = (params.n - 1) / self.x[1:]
        adv[0] = 0.0
        self._adv = adv
        self.offset = 0.0
        self._slope = None

    def coefficients(self, X, t):
        Xr, _ = self._derivs(X)
        Dco = 1.0 / (1.0 + Xr ** 2)
        return Dco, self._adv, np.zeros_like(X)

    def boundary(self, lo, di, up, rhs, X, t, dt):
        if self.config.far_field_bc is FarFieldBC.DIRICHLET_FORMAL:
            if self.bc_value is None:
                raise ValueError("Dirichlet X-chart run needs a bc_value callable")
            di[-1] = 1.0; lo[-2] = 0.0
            rhs[-1] = self.bc_value(t + dt) - self.offset
        else:
            if self._slope is None:
                self._slope = (X[-1] - X[-2]) / (self.x[-1] - self.x[-2])
            h = self.x[-1] - self.x[-2]
            di[-1] = 1.0; lo[-2] = -1.0
            rhs[-1] = self._slope * h

    def regauge(self, X):
        span = abs(X[-1] - X[0])
        if span > 0 and abs(X[0]) > 0.1 * span:
            self.offset += X[0]
            return X - X[0]
        return X

    def state_of(self, X, t) -> FlowState:
        return FlowState(Chart.X_OF_R_UNSCALED, t, self.x, X + self.offset)


def _make_evolver(params, config, *, c_ref=None, bc_value=None):
    if config.chart is Chart.LAMBDA_OF_PHI:
        return LambdaPhiEvolver(params, config, c_ref if c_ref is not None else params.c)
    if config.chart is Chart.Y_OF_PHI:
        return YPhiEvolver(params, config, params.C1)
    if config.chart is Chart.X_OF_R_UNSCALED:
        return XREvolver(params, config, bc_value=bc_value)
    raise ValueError(f"no solver for chart {config.chart}")


def step(state: FlowState, config: SolverConfig, params: FlowParams,
         bc_value=None) -> FlowState:
    """Advance one accepted semi-implicit step from a FlowState."""
    if state.chart is not config.chart:
        raise ValueError(f"state chart {state.chart} != config chart {config.chart}")
    ev = _make_evolver(params, config, c_ref=state.meta.get("c_ref"), bc_value=bc_value)
    if not np.array_equal(state.nodes, ev.x):
        raise ValueError("state must be sampled on the configured grid")
    if config.chart is Chart.LAMBDA_OF_PHI:
        if "v" in state.meta:
            u = np.asarray(state.meta["v"], dtype=float).copy()
        else:
            u = math.exp(2 * params.gamma * state.tau) * (
                state.values + ev.c_ref * lambda_bar(state.nodes, params))
    else:
        u = state.values.astype(float).copy()
        if config.chart is Chart.X_OF_R_UNSCALED:
            ev.offset = float(u[0])
            u = u - u[0]
    u_new, dt_done, _, _ = ev.step(u, state.tau, config.dtau)
    return ev.state_of(u_new, state.tau + dt_done)


def run(initial: FlowState, config: SolverConfig, params: FlowParams, *,
        barriers: tuple = None, snapshot_taus=None, bc_value=None,
        margin_stride: int = 5) -> Trajectory:
    """Advance from `initial` to config.tau_end, collecting snapshots,
    curvature records, trapping margins (when barriers given) and the
    cumulative local-truncation estimate."""
    chart = config.chart
    if initial.chart is not chart:
        raise ValueError(f"initial state chart {initial.chart} != config chart {chart}")
    ev = _make_evolver(params, config, c_ref=initial.meta.get("c_ref"), bc_value=bc_value)
    if not np.array_equal(initial.nodes, ev.x):
        raise ValueError("initial state must be sampled on the configured grid")

    if chart is Chart.LAMBDA_OF_PHI:
        if "v" in initial.meta:
            u = np.asarray(initial.meta["v"], dtype=float).copy()
        else:
            u = math.exp(2 * params.gamma * initial.tau) * (
                initial.values + ev.c_ref * lambda_bar(initial.nodes, params))
    else:
        u = initial.values.astype(float).copy()
        if chart is Chart.X_OF_R_UNSCALED:
            ev.offset = float(u[0])
            u = u - u[0]

    tau = initial.tau
    tau_end = config.tau_end
    if snapshot_taus is None:
        snapshot_taus = np.linspace(tau, tau_end, 31)
    snapshot_taus = np.asarray(sorted(snapshot_taus))

    lo_bar, up_bar = (barriers if barriers is not None else (None, None))
    if lo_bar is not None and chart is not Chart.LAMBDA_OF_PHI:
        raise ValueError("trapping margins are tracked in the lambda chart only")

    snapshots, records, margins, lte_curve = [], [], [], []
    lte_cum = 0.0
    worst_margin = (math.inf, math.inf)
    dt = config.dtau
    steps = 0
    si = 0

    def emit(u, tau):
        st = ev.state_of(u, tau)
        snapshots.append(st)
        if chart is Chart.LAMBDA_OF_PHI:
            from .asymptotics import curvature_record_from_lambda
            records.append(curvature_record_from_lambda(st, params))
        else:
            records.append(curvatures(st, params))
        margins.append(worst_margin if lo_bar is not None else None)
        lte_curve.append(lte_cum)

    def trapping_margin(u, tau):
        lam = ev.lam_of(u, tau)
        mlo = float(np.min(lam - lo_bar(ev.x, tau)))
        mhi = float(np.min(up_bar(ev.x, tau) - lam))
        return mlo, mhi

    while True:
        while si < len(snapshot_taus) and tau >= snapshot_taus[si] - 1e-12:
            emit(u, tau)
            si += 1
        if tau >= tau_end - 1e-12:
            break
        dt_cap = min(dt, tau_end - tau)
        if si < len(snapshot_taus):
            dt_cap = min(dt_cap, max(snapshot_taus[si] - tau, config.dtau_min))
        u, dt_done, est, dt = ev.step(u, tau, dt_cap)
        tau += dt_done
        if chart is Chart.LAMBDA_OF_PHI:
            est *= math.exp(-2 * params.gamma * tau)   # deviation -> lambda units
        lte_cum += est
        steps += 1
        if chart is Chart.X_OF_R_UNSCALED:
            u = ev.regauge(u)
        if lo_bar is not None and steps % margin_stride == 0:
            m = trapping_margin(u, tau)
            worst_margin = (min(worst_margin[0], m[0]), min(worst_margin[1], m[1]))
    if si < len(snapshot_taus):
        emit(u, tau)

    return Trajectory(params=params, config=config, snapshots=snapshots,
                      records=records, margins=margins, lte_cumulative=lte_curve,
                      steps=steps)


# ---------------------------------------------------------------------------
# initial data

def _bump_weights(npts: int = 24):
    q, w = np.polynomial.legendre.leggauss(npts)
    b = np.where(np.abs(q) < 1, np.exp(-1.0 / np.maximum(1e-300, 1 - q * q)), 0.0) * w
    return q, b / b.sum()


def make_initial_data(params: FlowParams, constants: BarrierConstants,
                      profile: SolitonProfile, tau0: float, config: SolverConfig, *,
                      barriers: tuple = None, smoothing_radius_factor: float = 0.05,
                      perturb_amp: float = 0.0, gap_tol: float = None) -> FlowState:
    """Piecewise-formal trapped initial data, corner-smoothed by a local
    mollification, returned with the well-conditioned deviation payload.

    The profile is the interior family (shifted to match the exterior value
    at z = R1) glued to the exterior formal solution at |z| = R1; the corner
    is smoothed by convolution with a compact bump of radius
    `smoothing_radius_factor * R1 e^{-g tau0}`. `perturb_amp` optionally
    scales the interior deviation by (1 + amp * bump(z/R1)) for measurement
    runs that should start off the attractor; the exterior is untouched.
    """
    g = params.gamma
    A, c = params.A, params.c
    R1 = constants.R1
    fam = FProfile(profile, A, g)
    x = config.grid()
    phi_seam = R1 * math.exp(-g * tau0)
    if x[-1] <= phi_seam * 10:
        raise ValueError("phi_max must exceed 10 R1 e^{-g tau0}")

    FR1 = float(fam.F(np.array([R1]))[0])

    def v_raw(phi):
        # v = e^{2 g tau0}(lam_hat + c lbar); the exterior piece vanishes
        phi = np.asarray(phi, dtype=float)
        z = phi * math.exp(g * tau0)
        seam = np.full_like(phi, phi_seam)
        interior = (c * scaled_lambda_bar_increment(phi, tau0, params)
                    - c * scaled_lambda_bar_increment(seam, tau0, params)
                    + fam.F(np.minimum(np.abs(z), 1.25 * R1)) - FR1)
        if perturb_amp != 0.0:
            zr = np.clip(np.abs(z) / R1, 0.0, 1.0)
            shape = np.where(zr < 1.0, np.exp(1.0 - 1.0 / np.maximum(1e-300, 1 - zr ** 2)), 0.0)
            interior = interior * (1.0 + perturb_amp * shape)
        return np.where(np.abs(z) <= R1, interior, 0.0)

    rho = smoothing_radius_factor * phi_seam
    qs, bw = _bump_weights()
    v0 = v_raw(x)
    near = np.abs(x - phi_seam) < 2.5 * rho
    if near.any():
        sm = (v_raw(x[near][:, None] - rho * qs[None, :]) * bw[None, :]).sum(axis=1)
        d = np.abs(x[near] - phi_seam) / (2.5 * rho)
        chi = 0.5 * (1 + np.cos(np.pi * np.clip((d - 0.4) / 0.6, 0.0, 1.0)))
        v0[near] = chi * sm + (1 - chi) * v0[near]

    lam0 = -c * lambda_bar(x, params) + math.exp(-2 * g * tau0) * v0
    state = FlowState(Chart.LAMBDA_OF_PHI, tau0, x, lam0,
                      meta=dict(v=v0, c_ref=c, tau0=tau0, stable=True))

    if barriers is not None:
        lo_bar, up_bar = barriers
        lo = lo_bar(x, tau0)
        up = up_bar(x, tau0)
        if not (np.all(lam0 > lo) and np.all(lam0 < up)):
            raise ValueError(
                "smoothed initial profile escapes the barrier gap; "
                "increase tau0 or reduce the smoothing radius / perturbation")
        gap = float(np.max(up - lo))
        state.meta["barrier_gap"] = gap
        if gap_tol is not None and gap >= gap_tol:
            raise ValueError(f"barrier gap {gap:.3e} exceeds the configured bound {gap_tol:.3e}")
    return state


def initial_data_from_barrier(bar: Barrier, tau0: float, config: SolverConfig,
                              params: FlowParams, c_ref: float,
                              smoothing_radius_factor: float = 0.05) -> FlowState:
    """Smooth a (piecewise smooth) patched barrier into usable initial data.

    The inf/sup corner at the seam crossing is mollified the same way as
    `make_initial_data`'s corner.
    """
    g = params.gamma
    x = config.grid()
    k = bar.constants
    z_star = math.sqrt(k.R1 * k.R2)
    zz = np.linspace(k.R2, k.R1, 2001)
    chi = bar.crossing(zz, np.full_like(zz, tau0))
    idx = np.flatnonzero(np.diff(np.sign(chi)) != 0)
    z_cross = zz[idx[0]] if idx.size else z_star
    phi_seam = z_cross * math.exp(-g * tau0)
    rho = smoothing_radius_factor * phi_seam

    def raw(phi):
        return bar(phi, tau0)

    vals = raw(x)
    near = np.abs(x - phi_seam) < 2.5 * rho
    if near.any():
        qs, bw = _bump_weights()
        sm = (raw(np.abs(x[near][:, None] - rho * qs[None, :])) * bw[None, :]).sum(axis=1)
        d = np.abs(x[near] - phi_seam) / (2.5 * rho)
        w = 0.5 * (1 + np.cos(np.pi * np.clip((d - 0.4) / 0.6, 0.0, 1.0)))
        vals[near] = w * sm + (1 - w) * vals[near]
    v = math.exp(2 * g * tau0) * (vals + c_ref * lambda_bar(x, params))
    return FlowState(Chart.LAMBDA_OF_PHI, tau0, x, vals,
                     meta=dict(v=v, c_ref=c_ref, tau0=tau0, stable=True))


def ordered_pair_test(state_a: FlowState, state_b: FlowState, config: SolverConfig,
                      params: FlowParams, snapshot_taus=None) -> dict:
    """Evolve an ordered pair with identical configs and report the minimum
    of (B - A) over the run; PASS when it stays above -tolerance.

    Tolerance is 10x the summed Richardson estimates of both runs (plus
    roundoff): the discrete shadow of the comparison principle.
    """
    gap0 = state_b.values - state_a.values
    if not np.all(gap0 > 0) and not np.allclose(state_a.values, state_b.values):
        raise ValueError("initial states must satisfy A < B pointwise (or be identical)")
    ta = run(state_a, config, params, snapshot_taus=snapshot_taus)
    tb = run(state_b, config, params, snapshot_taus=snapshot_taus)
    min_gap = math.inf
    argmin = None
    for sa, sb in zip(ta.snapshots, tb.snapshots):
        gap = sb.values - sa.values
        m = float(gap.min())
        if m < min_gap:
            min_gap = m
            argmin = (float(sa.tau), float(sa.nodes[int(np.argmin(gap))]))
    tol = 10.0 * (ta.lte_cumulative[-1] + tb.lte_cumulative[-1]) + 1e-12
    return dict(min_gap=min_gap, tol=tol, passed=bool(min_gap >= -tol),
                argmin=argmin, initial_gap_min=float(gap0.min()),
                steps=(ta.steps, tb.steps))


# ---------------------------------------------------------------------------
# benchmark initial data (controls)

def sphere_state(R0: float, r_max: float, nodes: int) -> FlowState:
    """Lower hemisphere cap x = -sqrt(R0^2 - r^2) as an unscaled graph."""
    r = np.linspace(0.0, r_max, nodes)
    return FlowState(Chart.X_OF_R_UNSCALED, 0.0, r, -np.sqrt(R0 ** 2 - r ** 2))


def sphere_bc(R0: float, n: int, r_max: float):
    def bc(t):
        R2 = R0 ** 2 - 2.0 * n * t
        return -math.sqrt(R2 - r_max ** 2)
    return bc


def sphere_radius(R0: float, n: int, t) -> np.ndarray:
    return np.sqrt(R0 ** 2 - 2.0 * n * np.asarray(t, dtype=float))


def linear_growth_state(r_max: float, nodes: int, slope: float = 1.0) -> FlowState:
    """Smooth convex graph with asymptotically linear growth (decaying-
    curvature control): x = sqrt(1 + (slope r)^2)/slope."""
    r = np.linspace(0.0, r_max, nodes)
    return FlowState(Chart.X_OF_R_UNSCALED, 0.0, r,
                     np.sqrt(1.0 + (slope * r) ** 2) / slope)
