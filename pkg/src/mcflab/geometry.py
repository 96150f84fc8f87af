"""Coordinate charts, rescalings, and curvature diagnostics.

A rotationally symmetric entire graph r = u(x, t) moving by mean curvature
is tracked in five charts:

    U_OF_X            u as a function of x (unscaled; non-smooth at the tip)
    X_OF_R_UNSCALED   the inverse graph x = X(r) (smooth and even at r = 0)
    Y_OF_PHI          y(phi), y = x (2t+1)^{-(g+1)/2}, phi = u (2t+1)^{-1/2}
    LAMBDA_OF_PHI     lambda(phi) with lambda = -1/y (bounded unknown)
    Y_OF_Z            y(z), z = phi e^{g tau} (tip-region coordinate)

with tau = log sqrt(2t+1). Chart changes are exact node/value transforms
(swap + scale); interpolation happens only in `regrid`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .fdiff import DerivOperator, tip_second_derivative_even


class Chart(enum.Enum):
    U_OF_X = "u_of_x"
    X_OF_R_UNSCALED = "x_of_r_unscaled"
    Y_OF_PHI = "y_of_phi"
    LAMBDA_OF_PHI = "lambda_of_phi"
    Y_OF_Z = "y_of_z"


UNSCALED_CHARTS = (Chart.U_OF_X, Chart.X_OF_R_UNSCALED)


@dataclass(frozen=True)
class FlowParams:
    """Dimension, growth exponent and tip constant, with derived constants.

    gamma > 0 is required; gamma == 0 is admitted only for the decaying-
    curvature (linear-growth) control runs via ``allow_type3=True``.
    """

    n: int
    gamma: float
    A_tilde: float
    allow_type3: bool = False

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2 (got {self.n})")
        if self.gamma < 0 or (self.gamma == 0 and not self.allow_type3):
            raise ValueError(f"gamma must be > 0 (got {self.gamma})")
        if not self.A_tilde > 0:
            raise ValueError(f"A_tilde must be > 0 (got {self.A_tilde})")
        object.__setattr__(self, "n", int(self.n))

    @property
    def A(self) -> float:
        return 1.0 / self.A_tilde

    @property
    def c(self) -> float:
        return self.A * (self.n - 1) ** ((self.gamma + 1) / 2)

    @property
    def C1(self) -> float:
        return self.A_tilde * (self.n - 1) ** (-(self.gamma + 1) / 2)


@dataclass(frozen=True)
class FlowState:
    """Sampled profile in one chart at one time.

    ``tau`` holds the rescaled time, except in the unscaled charts where it
    holds t itself. ``ghost`` tags the axis policy for charts whose first
    node sits on the symmetry axis. ``meta`` carries optional well-
    conditioned payloads (e.g. the solver's deviation variable).
    """

    chart: Chart
    tau: float
    nodes: np.ndarray
    values: np.ndarray
    ghost: str = "even"
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        if nodes.ndim != 1 or nodes.shape != values.shape:
            raise ValueError("nodes and values must be 1-d arrays of equal length")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if self.chart is Chart.LAMBDA_OF_PHI and np.any(values >= 0):
            raise ValueError("lambda chart requires values < 0")

    @property
    def t(self) -> float:
        if self.chart in UNSCALED_CHARTS:
            return self.tau
        return (math.exp(2 * self.tau) - 1.0) / 2.0


@dataclass(frozen=True)
class CurvatureRecord:
    """Pointwise principal curvatures and their grid extremes."""

    t: float
    kappa1_tip: float
    kappan_tip: float
    sup_h: float
    argmax_node: int
    ratio_max: float
    kappa1: np.ndarray = field(compare=False, repr=False, default=None)
    kappan: np.ndarray = field(compare=False, repr=False, default=None)
    nonconvex: bool = False

    def tip_mean_curvature(self, n: int) -> float:
        return (n - 1) * self.kappa1_tip + self.kappan_tip


def tau_of_t(t: float) -> float:
    return math.log(math.sqrt(2.0 * t + 1.0))


def t_of_tau(tau: float) -> float:
    return (math.exp(2.0 * tau) - 1.0) / 2.0


def _require_monotone(values: np.ndarray, what: str):
    if np.any(np.diff(values) <= 0):
        k = int(np.argmin(np.diff(values)))
        raise ValueError(
            f"cannot invert {what}: sampled values are not strictly increasing "
            f"(first violation between nodes {k} and {k + 1})"
        )


def convert(state: FlowState, target: Chart, params: FlowParams) -> FlowState:
    """Exact chart change (no interpolation); time is carried along.

    Unscaled <-> rescaled conversions use t = (e^{2 tau} - 1)/2.
    """
    if state.chart is target:
        return state
    g = params.gamma
    src, nodes, values, tm = state.chart, state.nodes, state.values, state.tau

    if src is Chart.U_OF_X and target is Chart.X_OF_R_UNSCALED:
        _require_monotone(values, "u(x)")
        return FlowState(target, tm, values, nodes, meta=dict(state.meta))
    if src is Chart.X_OF_R_UNSCALED and target is Chart.U_OF_X:
        _require_monotone(values, "x(r)")
        return FlowState(target, tm, values, nodes, meta=dict(state.meta))

    if src in UNSCALED_CHARTS and target in (Chart.Y_OF_PHI, Chart.Y_OF_Z, Chart.LAMBDA_OF_PHI):
        return convert(rescale_forward(state, tm, params), target, params)
    if src not in UNSCALED_CHARTS and target in UNSCALED_CHARTS:
        return rescale_backward(state, params, to=target)

    tau = tm
    if src is Chart.Y_OF_PHI and target is Chart.LAMBDA_OF_PHI:
        if np.any(values <= 0):
            raise ValueError("y values must be positive to form lambda = -1/y")
        return FlowState(target, tau, nodes, -1.0 / values, meta=dict(state.meta))
    if src is Chart.LAMBDA_OF_PHI and target is Chart.Y_OF_PHI:
        return FlowState(target, tau, nodes, -1.0 / values, meta=dict(state.meta))
    if src is Chart.Y_OF_PHI and target is Chart.Y_OF_Z:
        return FlowState(target, tau, nodes * math.exp(g * tau), values, meta=dict(state.meta))
    if src is Chart.Y_OF_Z and target is Chart.Y_OF_PHI:
        return FlowState(target, tau, nodes * math.exp(-g * tau), values, meta=dict(state.meta))
    if src is Chart.LAMBDA_OF_PHI and target is Chart.Y_OF_Z:
        return convert(convert(state, Chart.Y_OF_PHI, params), target, params)
    if src is Chart.Y_OF_Z and target is Chart.LAMBDA_OF_PHI:
        return convert(convert(state, Chart.Y_OF_PHI, params), target, params)
    raise ValueError(f"no conversion path {src} -> {target}")


def rescale_forward(state: FlowState, t: float, params: FlowParams,
                    to: Chart = Chart.Y_OF_PHI) -> FlowState:
    """Unscaled profile at time t -> rescaled chart (Y_OF_PHI or Y_OF_Z)."""
    if state.chart not in UNSCALED_CHARTS:
        raise ValueError("rescale_forward expects an unscaled chart")
    if t < 0:
        raise ValueError("t must be >= 0")
    g = params.gamma
    tau = tau_of_t(t)
    sy = math.exp(-(g + 1) * tau)
    su = math.exp(-tau)
    if state.chart is Chart.U_OF_X:
        _require_monotone(state.values, "u(x)")
        phi = state.values * su
        y = state.nodes * sy
    else:
        phi = state.nodes * su
        y = state.values * sy
    out = FlowState(Chart.Y_OF_PHI, tau, phi, y, meta=dict(state.meta))
    if to is Chart.Y_OF_PHI:
        return out
    return convert(out, to, params)


def rescale_backward(state: FlowState, params: FlowParams,
                     to: Chart = Chart.X_OF_R_UNSCALED) -> FlowState:
    """Rescaled chart -> unscaled profile at t = (e^{2 tau} - 1)/2."""
    st = convert(state, Chart.Y_OF_PHI, params) if state.chart is not Chart.Y_OF_PHI else state
    tau = st.tau
    g = params.gamma
    r = st.nodes * math.exp(tau)
    x = st.values * math.exp((g + 1) * tau)
    out = FlowState(Chart.X_OF_R_UNSCALED, t_of_tau(tau), r, x, meta=dict(state.meta))
    if to is Chart.X_OF_R_UNSCALED:
        return out
    return convert(out, to, params)


def regrid(state: FlowState, new_nodes: np.ndarray) -> FlowState:
    """Resample onto new nodes by monotone cubic (PCHIP) interpolation."""
    from scipy.interpolate import PchipInterpolator

    new_nodes = np.asarray(new_nodes, dtype=float)
    if new_nodes.min() < state.nodes[0] or new_nodes.max() > state.nodes[-1]:
        raise ValueError("new nodes extend beyond the sampled range")
    f = PchipInterpolator(state.nodes, state.values)
    return FlowState(state.chart, state.tau, new_nodes, f(new_nodes), meta=dict(state.meta))


def parabolic_rescale(state: FlowState, s: float) -> FlowState:
    """(x, u, t) -> (s x, s u, s^2 t) on an unscaled chart."""
    if state.chart not in UNSCALED_CHARTS:
        raise ValueError("parabolic rescaling acts on unscaled charts")
    return replace(state, tau=s * s * state.tau, nodes=s * state.nodes,
                   values=s * state.values)


def curvatures(state: FlowState, params: FlowParams) -> CurvatureRecord:
    """Principal curvatures kappa_1 (rotational) and kappa_n (graph direction).

    In X_OF_R the tip (r = 0, if sampled) is handled by the even-extension
    stencil, where kappa_1 = kappa_n = X_rr(0). In U_OF_X the tip is not
    representable; tip fields are NaN there.
    """
    if len(state.nodes) < 5:
        raise ValueError("need at least 5 nodes for curvature stencils")
    n = params.n
    if state.chart is Chart.U_OF_X:
        u, x = state.values, state.nodes
        op = DerivOperator(x)
        ux = op.apply(u, 1)
        uxx = op.apply(u, 2)
        if np.any(u <= 0):
            raise ValueError("u must be positive away from the tip in U_OF_X")
        k1 = 1.0 / (u * np.sqrt(1.0 + ux ** 2))
        kn = -uxx / (1.0 + ux ** 2) ** 1.5
        k1_tip = kn_tip = float("nan")
        tip_sampled = False
    elif state.chart is Chart.X_OF_R_UNSCALED:
        r, X = state.nodes, state.values
        op = DerivOperator(r)
        Xr = op.apply(X, 1)
        Xrr = op.apply(X, 2)
        tip_sampled = r[0] == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            k1 = Xr / (np.where(r == 0, 1.0, r) * np.sqrt(1.0 + Xr ** 2))
        kn = Xrr / (1.0 + Xr ** 2) ** 1.5
        if tip_sampled:
            xrr0 = tip_second_derivative_even(r, X)
            k1_tip = xrr0
            kn_tip = xrr0 / (1.0 + Xr[0] ** 2) ** 1.5
            k1[0] = k1_tip
            kn[0] = kn_tip
        else:
            k1_tip = kn_tip = float("nan")
    else:
        raise ValueError("curvatures expects an unscaled chart")

    interior = slice(1, -1)
    nonconvex = bool(np.any(kn[interior] <= 0))
    h = np.sqrt((n - 1) * k1 ** 2 + kn ** 2)
    kmax = int(np.argmax(h))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(k1 != 0, kn / k1, np.inf)
    return CurvatureRecord(
        t=state.t,
        kappa1_tip=k1_tip,
        kappan_tip=kn_tip,
        sup_h=float(h[kmax]),
        argmax_node=kmax,
        ratio_max=float(np.max(ratio[np.isfinite(ratio)])),
        kappa1=k1,
        kappan=kn,
        nonconvex=nonconvex,
    )


def ratio_R(state: FlowState, params: FlowParams) -> np.ndarray:
    """Pointwise principal-curvature ratio kappa_n / kappa_1 (scale invariant)."""
    rec = curvatures(state, params)
    k1, kn = rec.kappa1, rec.kappan
    zero = np.flatnonzero(k1 == 0)
    if zero.size:
        raise ZeroDivisionError(
            f"kappa_1 vanishes at node {zero[0]} (node value {state.nodes[zero[0]]:g})"
        )
    out = kn / k1
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(out))[0])
        raise FloatingPointError(f"non-finite curvature ratio at node {bad}")
    return out
