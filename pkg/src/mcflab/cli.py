"""Subcommand front-end: build the soliton profile, certify barriers, evolve
trapped data, analyze trajectories, verify the acceptance gates, or run the
whole pipeline. Exit code 0 iff every requested gate/stage passes."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import asymptotics, barriers as bar_mod, evolve, soliton
from .geometry import Chart
from .io import (RunConfig, load_config, save_config, apply_override,
                 save_manifest, emit_trajectory, emit_certificate, emit_report)
from .verify import GATE_IDS, run_all

OUT_DIR_ENV = "MCFLAB_OUT"


def _build_parser():
    p = argparse.ArgumentParser(prog="mcflab",
                                description="rotationally symmetric mean-curvature-flow lab")
    p.add_argument("--config", metavar="PATH", help="run configuration file")
    p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                   dest="overrides", help="override a config field (section.key=value)")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for sweeps")
    q = p.add_mutually_exclusive_group()
    q.add_argument("--quiet", action="store_true")
    q.add_argument("--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("soliton", help="solve the bowl profile and check its laws")
    sub.add_parser("barriers", help="choose constants, patch, certify")
    sub.add_parser("evolve", help="trapped evolution between the barriers")
    sub.add_parser("analyze", help="asymptotics report for a fresh measurement run")
    v = sub.add_parser("verify", help="run the acceptance gates")
    v.add_argument("--gate", action="append", dest="gates", metavar="GATE_ID",
                   help="run only the named gate(s)")
    sub.add_parser("pipeline", help="soliton -> barriers -> evolve -> analyze -> verify")
    return p


def _load(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    for item in args.overrides:
        if "=" not in item:
            raise ValueError(f"--set needs KEY=VALUE (got '{item}')")
        key, val = item.split("=", 1)
        apply_override(config, key.strip(), val.strip())
    return config


def _outdir(args, config: RunConfig) -> str:
    out = args.out or os.environ.get(OUT_DIR_ENV) or config.outputs.out_dir
    os.makedirs(out, exist_ok=True)
    return out


def cmd_soliton(args, config, out, log):
    prof = soliton.solve_bowl(config.params.n, w_max=260.0)
    soliton.export_csv(prof, os.path.join(out, "soliton_profile.csv"))
    w = np.array([1e-2])
    small = float(prof.P_of(w)[0] / (w[0] ** 2 / (2 * prof.n)))
    probes = np.geomspace(0.1, 200.0, 64)
    resid = float(np.max(np.abs(prof.ode_residual(probes))))
    log(f"small-w ratio P/(w^2/2n) at w=1e-2: {small:.8f}")
    log(f"max ODE residual on probes: {resid:.2e}")
    save_manifest(os.path.join(out, "soliton_manifest.json"),
                  dict(kind="soliton", n=prof.n, rel_tol=prof.rel_tol,
                       w_max=prof.w_max, small_w_ratio=small, ode_residual=resid,
                       seed=config.outputs.seed))
    return resid < 10 * prof.rel_tol


def _build_barriers(config):
    prof = soliton.solve_bowl(config.params.n, w_max=260.0)
    b = config.barriers
    lo, up, cert = bar_mod.build_barriers(
        config.params, prof, eps_c=b.eps_c, R1=b.r1, R2=b.r2,
        b_plus_scale=b.b_plus_scale, b_minus_scale=b.b_minus_scale,
        C1_psi=b.c1_psi, delta=b.delta, window=b.window, phi_cap=b.phi_cap,
        nz=b.nz_cert, ntau=b.ntau_cert)
    return prof, lo, up, cert


def cmd_barriers(args, config, out, log):
    prof, lo, up, cert = _build_barriers(config)
    emit_certificate(cert, lo, up, out)
    log(f"certified on tau in [{cert['tau_window'][0]:.3f}, {cert['tau_window'][1]:.3f}]"
        f" -> {'PASS' if cert['passed'] else 'FAIL'}")
    return bool(cert["passed"])


def cmd_evolve(args, config, out, log):
    prof, lo, up, cert = _build_barriers(config)
    k = up.constants
    tau0 = k.tau0 + 0.5
    cfg = config.solver
    if cfg.tau_end <= tau0:
        raise ValueError(f"tau_end = {cfg.tau_end:g} must exceed the start tau0 = {tau0:g}")
    cfg.check_domain(k, config.params, tau0)
    state = evolve.make_initial_data(config.params, k, prof, tau0, cfg, barriers=(lo, up))
    taus = np.linspace(tau0, cfg.tau_end, config.outputs.snapshots)
    traj = evolve.run(state, cfg, config.params, barriers=(lo, up), snapshot_taus=taus)
    emit_trajectory(traj, out)
    lo_m = min(m[0] for m in traj.margins)
    hi_m = min(m[1] for m in traj.margins)
    tol = 10.0 * traj.lte_cumulative[-1]
    log(f"trapping margins: lower {lo_m:.3e}, upper {hi_m:.3e} (tol {tol:.2e})")
    return lo_m >= -tol and hi_m >= -tol


def cmd_analyze(args, config, out, log):
    prof, lo, up, cert = _build_barriers(config)
    k = up.constants
    tau0 = 1.25
    cfg = evolve.SolverConfig(chart=Chart.LAMBDA_OF_PHI, tau_end=tau0 + 3.5,
                              nodes=config.solver.nodes, phi_max=config.solver.phi_max,
                              phi_min=1e-8)
    state = evolve.make_initial_data(config.params, k, prof, tau0, cfg, perturb_amp=0.15)
    traj = evolve.run(state, cfg, config.params,
                      snapshot_taus=np.linspace(tau0, cfg.tau_end, 41))
    report = asymptotics.AsymptoticsReport.from_trajectory(traj, prof)
    emit_report(report, out)
    log(f"fitted exponent {report.fitted_exponent:.3f} "
        f"(target {report.target_exponent:.3f} +- 0.05)")
    return abs(report.fitted_exponent - report.target_exponent) <= 0.05


def cmd_verify(args, config, out, log):
    only = set(args.gates) if getattr(args, "gates", None) else None
    if only:
        unknown = only - set(GATE_IDS)
        if unknown:
            raise ValueError(f"unknown gate id(s): {sorted(unknown)}")
    results = run_all(config, only=only, printer=log)
    save_manifest(os.path.join(out, "verify_report.json"),
                  dict(kind="verify",
                       results=[dict(gate=r.gate_id, passed=r.passed, summary=r.summary,
                                     runtime_s=r.runtime_s) for r in results],
                       failed=[r.gate_id for r in results if not r.passed],
                       seed=config.outputs.seed))
    failed = [r.gate_id for r in results if not r.passed]
    if failed:
        log("failed gates: " + ", ".join(failed))
    return not failed


def cmd_pipeline(args, config, out, log):
    ok = True
    for name, fn in (("soliton", cmd_soliton), ("barriers", cmd_barriers),
                     ("evolve", cmd_evolve), ("analyze", cmd_analyze),
                     ("verify", cmd_verify)):
        log(f"--- {name} ---")
        ok = fn(args, config, os.path.join(out, name), log) and ok
    return ok


_COMMANDS = {
    "soliton": cmd_soliton,
    "barriers": cmd_barriers,
    "evolve": cmd_evolve,
    "analyze": cmd_analyze,
    "verify": cmd_verify,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    log = (lambda *a, **k: None) if args.quiet else print
    try:
        config = _load(args)
        out = _outdir(args, config)
        if args.command == "pipeline":
            for name in _COMMANDS:
                if name != "pipeline":
                    os.makedirs(os.path.join(out, name), exist_ok=True)
        ok = _COMMANDS[args.command](args, config, out, log)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
