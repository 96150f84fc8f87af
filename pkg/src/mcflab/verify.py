"""The acceptance gates: every verification criterion as a checkable gate
with a stable id, shared between the CLI `verify` subcommand and the test
suite. Gate tolerances are fixed here, not configurable.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics, barriers as bar_mod, evolve, geometry, soliton
from .geometry import Chart, FlowParams, FlowState
from .evolve import SolverConfig, FarFieldBC
from .io import RunConfig

GATE_IDS = [
    "AC-1-soliton-small-w",
    "AC-2-soliton-far-field",
    "AC-3-barrier-certificates",
    "AC-4-trapped-evolution",
    "AC-5-blowup-exponent",
    "AC-6-tip-profile",
    "AC-7-exterior-growth",
    "AC-8-comparison-pairs",
    "AC-9-tip-supersolution",
    "AC-10-geometry-suite",
]


@dataclass
class GateResult:
    gate_id: str
    passed: bool
    summary: str
    runtime_s: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{self.gate_id}: {tag} ({self.summary}) [{self.runtime_s:.1f}s]"


class ArtifactCache:
    """Lazily built artifacts shared across gates (profile, barriers, runs)."""

    def __init__(self, config: RunConfig = None):
        self.config = config or RunConfig()
        self._cache = {}

    def _get(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    @property
    def params(self) -> FlowParams:
        return self.config.params

    def profile(self, n: int = None) -> soliton.SolitonProfile:
        n = self.params.n if n is None else n
        return self._get(("profile", n), lambda: soliton.solve_bowl(n, w_max=260.0))

    def barriers(self):
        def build():
            b = self.config.barriers
            return bar_mod.build_barriers(
                self.params, self.profile(), eps_c=b.eps_c, R1=b.r1, R2=b.r2,
                b_plus_scale=b.b_plus_scale, b_minus_scale=b.b_minus_scale,
                C1_psi=b.c1_psi, delta=b.delta, window=b.window,
                phi_cap=b.phi_cap, nz=b.nz_cert, ntau=b.ntau_cert)
        return self._get("barriers", build)

    def trapped_run(self):
        def build():
            lo, up, cert = self.barriers()
            k = up.constants
            tau0 = k.tau0 + 0.5
            cfg = SolverConfig(chart=Chart.LAMBDA_OF_PHI, tau_end=tau0 + 3.0,
                               nodes=self.config.solver.nodes,
                               phi_max=self.config.solver.phi_max,
                               phi_min=self.config.solver.phi_min)
            cfg.check_domain(k, self.params, tau0)
            state = evolve.make_initial_data(self.params, k, self.profile(), tau0, cfg,
                                             barriers=(lo, up))
            taus = np.linspace(tau0, cfg.tau_end, self.config.outputs.snapshots)
            return evolve.run(state, cfg, self.params, barriers=(lo, up),
                              snapshot_taus=taus)
        return self._get("trapped_run", build)

    def measurement_run(self):
        """Perturbed-interior run exposing >= 1.5 transient-free decades."""
        def build():
            lo, up, cert = self.barriers()
            k = up.constants
            tau0 = 1.25
            cfg = SolverConfig(chart=Chart.LAMBDA_OF_PHI, tau_end=tau0 + 3.5,
                               nodes=self.config.solver.nodes,
                               phi_max=self.config.solver.phi_max,
                               phi_min=1e-8)
            state = evolve.make_initial_data(self.params, k, self.profile(), tau0, cfg,
                                             perturb_amp=0.15)
            taus = np.linspace(tau0, cfg.tau_end, 41)
            return evolve.run(state, cfg, self.params, snapshot_taus=taus)
        return self._get("measurement_run", build)

    def sphere_run(self):
        def build():
            R0, r_max, nodes = 2.0, 1.0, 1201
            n = self.params.n
            T = R0 ** 2 / (2.0 * n)
            cfg = SolverConfig(chart=Chart.X_OF_R_UNSCALED, phi_max=r_max, nodes=nodes,
                               grading="uniform", dtau=2e-5, dtau_max=2e-4,
                               step_tol=5e-9, tau_end=0.85 * T)
            st = evolve.sphere_state(R0, r_max, nodes)
            ts = T - np.geomspace(T, T - 0.85 * T, 25)
            return evolve.run(st, cfg, self.params,
                              snapshot_taus=np.sort(ts),
                              bc_value=evolve.sphere_bc(R0, n, r_max)), T
        return self._get("sphere_run", build)

    def linear_growth_run(self):
        def build():
            cfg = SolverConfig(chart=Chart.X_OF_R_UNSCALED, phi_max=60.0, nodes=1501,
                               grading="uniform", dtau=1e-3, dtau_max=0.25,
                               step_tol=2e-6, tau_end=60.0,
                               far_field_bc=FarFieldBC.NEUMANN_POWERLAW)
            st = evolve.linear_growth_state(60.0, 1501)
            ts = (np.geomspace(1.0, 121.0, 25) - 1.0) / 2.0
            return evolve.run(st, cfg, self.params, snapshot_taus=ts)
        return self._get("linear_growth_run", build)


# ---------------------------------------------------------------------------
# gates

def gate_1_soliton_small_w(cache: ArtifactCache) -> GateResult:
    t0 = time.time()
    w = 1e-2
    worst = 0.0
    vals = {}
    for n in (2, 3, 7):
        prof = soliton.solve_bowl(n, w_max=5.0)
        ratio = float(prof.P_of(np.array([w]))[0] / (w * w / (2 * n)))
        vals[n] = ratio
        worst = max(worst, abs(ratio - 1.0))
    ok = worst < 1e-3
    return GateResult("AC-1-soliton-small-w", ok,
                      f"max |P/(w^2/2n) - 1| = {worst:.2e} at w = 1e-2 (tol 1e-3)",
                      time.time() - t0, dict(ratios=vals))


def gate_2_soliton_far_field(cache: ArtifactCache) -> GateResult:
    t0 = time.time()
    prof = cache.profile(2)
    w = np.arange(20.0, 200.0 + 1e-9, 0.5)
    resid = prof.P_of(w) - w ** 2 / 2.0 + np.log(w)
    bound = 5.0 / w ** 2
    margin = np.abs(resid) - bound
    worst = float(margin.max())
    ok = worst < 0.0
    K = float(np.mean(resid[w >= 100.0] + 1.0 / w[w >= 100.0] ** 2))
    adj = float(np.max(np.abs(resid - K) * w ** 2))
    summary = (f"max(|P - w^2/2 + log w| - 5/w^2) = {worst:+.3f}; "
               f"the combination converges to {K:.6f}, not 0; "
               f"after subtracting it, |.|*w^2 <= {adj:.2f} < 5")
    return GateResult("AC-2-soliton-far-field", ok, summary, time.time() - t0,
                      dict(constant=K, adjusted_w2_bound=adj, worst_margin=worst))


def gate_3_barrier_certificates(cache: ArtifactCache) -> GateResult:
    t0 = time.time()
    lo, up, cert = cache.barriers()
    ch = cert["checks"]
    bits = [
        f"min Tz+ = {ch['Tz_upper_interior_min']['value']:.2e}",
        f"max Tz- = {ch['Tz_lower_interior_max']['value']:.2e}",
        f"min F+/(-Lam) = {ch['Fphi_upper_exterior_min']['value']:.2e}",
        f"max F-/(-Lam) = {ch['Fphi_lower_exterior_max']['value']:.2e}",
        f"ordering margin = {ch['ordering_margin_normalized']['value']:.3f}",
        "crossings = 1" if ch["crossing_count"]["passed"] else "crossing count != 1",
    ]
    return GateResult("AC-3-barrier-certificates", bool(cert["passed"]),
                      "; ".join(bits), time.time() - t0, dict(certificate=cert))


def gate_4_trapped_evolution(cache: ArtifactCache) -> GateResult:
    t0 = time.time()
    traj = cache.trapped_run()
    lo_m = min(m[0] for m in traj.margins if m is not None)
    hi_m = min(m[1] for m in traj.margins if m is not None)
    tol = 10.0 * traj.lte_cumulative[-1]
    ok = lo_m >= -tol and hi_m >= -tol
    return GateResult(
        "AC-4-trapped-evolution", ok,
        f"worst margins (lower {lo_m:.3e}, upper {hi_m:.3e}) >= -tol = {-tol:.2e}",
        time.time() - t0,
        dict(margin_lower=lo_m, margin_upper=hi_m, tol=tol, steps=traj.steps))


def gate_5_blowup_exponent(cache: ArtifactCache) -> GateResult:
    t0 = time.time()
    g = cache.params.gamma
    target = (g - 1.0) / 2.0
    traj = cache.measurement_run()
    fit = asymptotics.fit_blowup_exponent(traj)
    tip_ok = asymptotics.argmax_at_tip_after_transient(traj)

    sph, T = cache.sphere_run()
    fit_s = asymptotics.fit_blowup_exponent(sph, abscissa="T-t", T_extinct=T,
                                            transient_frac=0.0)
    lin = cache.linear_growth_run()
    fit_l = asymptotics.fit_blowup_exponent(lin, transient_frac=0.4)

    ok = (abs(fit.slope - target) <= 0.05 and tip_ok
          and abs(fit_s.slope + 0.5) <= 0.02 and abs(fit_l.slope + 0.5) <= 0.05)
    summary = (f"slope = {fit.slope:.3f} (target {target:.2f} +- 0.05, "
               f"{fit.decades:.2f} decades); argmax at tip: {tip_ok}; "
               f"sphere control {fit_s.slope:.3f} (+-0.02); "
               f"linear-growth control {fit_l.slope:.3f} (+-0.05)")
    return GateResult("AC-5-blowup-exponent", ok, summary, time.time() - t0,
                      dict(slope=fit.slope, ci=fit.ci_halfwidth, decades=fit.decades,
                           prefactor_tip_H=fit.prefactor_tip_H,
                           sphere_slope=fit_s.slope, linear_slope=fit_l.slope,
                           argmax_at_tip=tip_ok))


def gate_6_tip_profile(cache: ArtifactCache) -> GateResult:
    t0 = time.time()
    traj = cache.measurement_run()
    prof = cache.profile()
    curve = asymptotics.tip_profile_error(traj, prof, Z_star=2.0)
    params = cache.params
    s = (params.gamma + 1.0) * params.A_tilde
    sup_target = float(np.max(prof.P_of(s * np.linspace(0, 2.0, 81)) / s))
    half = curve[len(curve) // 2:]
    slope, *_ = np.polyfit(half[:, 0], half[:, 1], 1)
    decreasing = slope <= 0 and half[-1, 1] <= half[0, 1]
    final_rel = float(curve[-1, 1] / sup_target)
    ok = decreasing and final_rel < 0.05
    return GateResult(
        "AC-6-tip-profile", ok,
        f"final error = {final_rel:.2%} of target sup (< 5%); "
        f"final-half trend {'decreasing' if decreasing else 'NOT decreasing'} "
        f"(slope {slope:.2e})",
        time.time() - t0,
        dict(final_rel=final_rel, half_slope=float(slope),
             start=float(curve[0, 1]), end=float(curve[-1, 1])))


def gate_7_exterior_growth(cache: ArtifactCache) -> GateResult:
    t0 = time.time()
    traj = cache.measurement_run()
    lo, up, cert = cache.barriers()
    curve = asymptotics.exterior_growth(traj)
    pm = traj.config.phi_max
    band = (0.3 * pm, 0.6 * pm)
    tau_f = traj.snapshots[-1].tau
    br = asymptotics.barrier_bracket_for_C1(lo, up, band, tau_f, cache.params)
    C1f = float(curve[-1, 1])
    disp = float(curve[-1, 2])
    in_bracket = br[0] <= C1f <= br[1]
    ok = in_bracket and disp < 0.05
    return GateResult(
        "AC-7-exterior-growth", ok,
        f"C1_fit = {C1f:.4f} in bracket [{br[0]:.4f}, {br[1]:.4f}]: {in_bracket}; "
        f"final dispersion = {disp:.2e} (< 5e-2)",
        time.time() - t0, dict(C1_fit=C1f, bracket=list(br), dispersion=disp))


def gate_8_comparison_pairs(cache: ArtifactCache) -> GateResult:
    t0 = time.time()
    params = cache.params
    lo, up, cert = cache.barriers()
    k = up.constants
    tau0 = k.tau0 + 0.5
    cfg = SolverConfig(chart=Chart.LAMBDA_OF_PHI, tau_end=tau0 + 1.0, nodes=1201,
                       phi_max=12.0, phi_min=1e-6,
                       far_field_bc=FarFieldBC.NEUMANN_POWERLAW)
    prof = cache.profile()
    base = evolve.make_initial_data(params, k, prof, tau0, cfg)
    from .formal import lambda_bar
    lb = lambda_bar(base.nodes, params)
    shifted = FlowState(Chart.LAMBDA_OF_PHI, tau0, base.nodes,
                        base.values + 0.02 * lb,
                        meta=dict(v=base.meta["v"]
                                  + math.exp(2 * params.gamma * tau0) * 0.02 * lb,
                                  c_ref=base.meta["c_ref"], stable=True))
    lo_state = evolve.initial_data_from_barrier(lo, tau0, cfg, params, params.c)
    up_state = evolve.initial_data_from_barrier(up, tau0, cfg, params, params.c)
    taus = np.linspace(tau0, cfg.tau_end, 9)
    reports = {
        "shifted": evolve.ordered_pair_test(base, shifted, cfg, params, snapshot_taus=taus),
        "barrier_pair": evolve.ordered_pair_test(lo_state, up_state, cfg, params,
                                                 snapshot_taus=taus),
        "identical": evolve.ordered_pair_test(base, base, cfg, params, snapshot_taus=taus),
    }
    ok = all(r["passed"] for r in reports.values())
    bits = [f"{k_}: min gap {r['min_gap']:.2e} (tol {r['tol']:.1e})"
            for k_, r in reports.items()]
    return GateResult("AC-8-comparison-pairs", ok, "; ".join(bits), time.time() - t0,
                      dict(reports=reports))


def gate_9_tip_supersolution(cache: ArtifactCache) -> GateResult:
    t0 = time.time()
    rep = asymptotics.tip_supersolution_check(cache.profile(), cache.params)
    return GateResult(
        "AC-9-tip-supersolution", rep.passed,
        f"min B[Q + L/s] = {rep.min_value:.3e} > 0 on the parabolic wedge "
        f"(C1 = {rep.C1_bound:.3f}, theta+ = {rep.theta_plus:.3f})",
        time.time() - t0, dict(C1=rep.C1_bound, theta=rep.theta_plus,
                               min_value=rep.min_value, argmin=rep.argmin))


def gate_10_geometry_suite(cache: ArtifactCache) -> GateResult:
    t0 = time.time()
    params = cache.params
    n = params.n
    rng = np.random.default_rng(cache.config.outputs.seed)

    # sphere curvature convergence order
    R0 = 2.0
    errs = []
    for nodes in (400, 800, 1600):
        r = np.linspace(0.0, 1.2, nodes)
        st = FlowState(Chart.X_OF_R_UNSCALED, 0.0, r, -np.sqrt(R0 ** 2 - r ** 2))
        rec = geometry.curvatures(st, params)
        errs.append(max(float(np.max(np.abs(rec.kappa1 - 1.0 / R0))),
                        float(np.max(np.abs(rec.kappan - 1.0 / R0)))))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    order = min(orders)

    # scaling invariance of the curvature ratio
    x = np.linspace(0.5, 5.0, 1200)
    u = np.sqrt(1.0 + x ** 2) + 0.1 * x
    st = FlowState(Chart.U_OF_X, 0.0, x, u)
    base = geometry.ratio_R(st, params)
    inv_err = 0.0
    for s in (2.0, 3.0, 0.7):
        sc = geometry.parabolic_rescale(st, s)
        inv_err = max(inv_err, float(np.max(np.abs(geometry.ratio_R(sc, params) - base))))

    # chart round trips (six pairs)
    x = np.linspace(1.0, 6.0, 1000)
    u = np.sqrt(x) + 0.3 * x + 0.01 * rng.random()
    t = 1.3
    st_u = FlowState(Chart.U_OF_X, t, x, u)
    rt_err = 0.0

    def rel_err(a: FlowState, b: FlowState):
        return max(float(np.max(np.abs(a.nodes - b.nodes) / np.maximum(np.abs(a.nodes), 1e-30))),
                   float(np.max(np.abs(a.values - b.values) / np.maximum(np.abs(a.values), 1e-30))))

    st_x = geometry.convert(st_u, Chart.X_OF_R_UNSCALED, params)
    rt_err = max(rt_err, rel_err(st_u, geometry.convert(st_x, Chart.U_OF_X, params)))
    st_y = geometry.rescale_forward(st_u, t, params)
    rt_err = max(rt_err, rel_err(st_u, geometry.rescale_backward(st_y, params, to=Chart.U_OF_X)))
    st_y2 = geometry.rescale_forward(st_x, t, params)
    rt_err = max(rt_err, rel_err(st_x, geometry.rescale_backward(st_y2, params)))
    st_l = geometry.convert(st_y, Chart.LAMBDA_OF_PHI, params)
    rt_err = max(rt_err, rel_err(st_y, geometry.convert(st_l, Chart.Y_OF_PHI, params)))
    st_z = geometry.convert(st_y, Chart.Y_OF_Z, params)
    rt_err = max(rt_err, rel_err(st_y, geometry.convert(st_z, Chart.Y_OF_PHI, params)))
    st_z2 = geometry.convert(st_l, Chart.Y_OF_Z, params)
    rt_err = max(rt_err, rel_err(st_l, geometry.convert(st_z2, Chart.LAMBDA_OF_PHI, params)))

    ok = order >= 1.9 and inv_err < 1e-10 and rt_err < 1e-12
    return GateResult(
        "AC-10-geometry-suite", ok,
        f"sphere convergence order = {order:.2f} (>= 1.9); ratio scaling error = "
        f"{inv_err:.1e} (< 1e-10); worst chart round trip = {rt_err:.1e} (< 1e-12)",
        time.time() - t0, dict(order=order, scaling_error=inv_err, roundtrip=rt_err))


_GATES = {
    "AC-1-soliton-small-w": gate_1_soliton_small_w,
    "AC-2-soliton-far-field": gate_2_soliton_far_field,
    "AC-3-barrier-certificates": gate_3_barrier_certificates,
    "AC-4-trapped-evolution": gate_4_trapped_evolution,
    "AC-5-blowup-exponent": gate_5_blowup_exponent,
    "AC-6-tip-profile": gate_6_tip_profile,
    "AC-7-exterior-growth": gate_7_exterior_growth,
    "AC-8-comparison-pairs": gate_8_comparison_pairs,
    "AC-9-tip-supersolution": gate_9_tip_supersolution,
    "AC-10-geometry-suite": gate_10_geometry_suite,
}


def run_gate(gate_id: str, cache: ArtifactCache) -> GateResult:
    try:
        return _GATES[gate_id](cache)
    except Exception as exc:                      # a crash is a failed gate
        return GateResult(gate_id, False, f"error: {exc}", 0.0,
                          dict(error=repr(exc)))


def run_all(config: RunConfig = None, only=None, printer=print) -> list:
    cache = ArtifactCache(config)
    results = []
    for gid in GATE_IDS:
        if only and gid not in only:
            continue
        res = run_gate(gid, cache)
        results.append(res)
        if printer:
            printer(res.line())
    return results
