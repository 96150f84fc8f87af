"""Run configuration, deterministic serialization, plot-data emission.

Config files are INI-style key=value text with four sections ([params],
[solver], [barriers], [outputs]); numbers are stored as decimal strings with
17 significant digits so a save/load round trip is bit-exact. Unknown
sections or keys are hard errors. JSON manifests are written by a small
canonical emitter (sorted keys, fixed separators, %.17g floats) so identical
inputs produce identical bytes.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .geometry import Chart, FlowParams
from .evolve import SolverConfig, FarFieldBC, Trajectory

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# canonical JSON

def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    if x == int(x) and abs(x) < 1e16:
        return f"{x:.1f}"
    return f"{x:.17g}"


def canonical_json(obj, indent: int = 0) -> str:
    """Deterministic JSON: sorted keys, %.17g floats, stable separators."""
    pad = " " * indent
    if obj is None:
        return "null"
    if obj is True or obj is False:
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        out = obj.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
        return f'"{out}"'
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = [canonical_json(v, indent) for v in list(obj)]
        return "[" + ", ".join(items) + "]"
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return canonical_json(_dataclass_to_plain(obj), indent)
    if isinstance(obj, dict):
        keys = sorted(obj.keys(), key=str)
        items = [f'{pad}"{k}": ' + canonical_json(obj[k], indent) for k in keys]
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, (Chart, FarFieldBC)):
        return canonical_json(obj.value)
    raise TypeError(f"cannot serialize {type(obj)}")


def _dataclass_to_plain(obj):
    out = {}
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, np.ndarray):
            v = v.tolist()
        if isinstance(v, (Chart, FarFieldBC)):
            v = v.value
        out[f.name] = v
    return out


def save_manifest(path, payload: dict):
    payload = dict(payload)
    payload.setdefault("schema_version", SCHEMA_VERSION)
    with open(path, "w") as fh:
        fh.write(canonical_json(payload))
        fh.write("\n")


# ---------------------------------------------------------------------------
# run configuration

@dataclass
class BarrierSearchConfig:
    eps_c: float = 0.1
    r1: float = 6.0
    r2: float = 2.0
    b_plus_scale: float = 1.25
    b_minus_scale: float = 0.75
    delta: float = 0.5
    c1_psi: float = 0.0
    window: float = 5.0
    phi_cap: float = 60.0
    nz_cert: int = 401
    ntau_cert: int = 51

    def __post_init__(self):
        if not 0 < self.eps_c < 1:
            raise ValueError(f"eps_c must lie in (0, 1) (got {self.eps_c})")
        if not 0 < self.r2 < self.r1:
            raise ValueError("need 0 < r2 < r1")
        if self.nz_cert < 400 or self.ntau_cert < 50:
            raise ValueError("certification grids must be at least 400 x 50")


@dataclass
class OutputConfig:
    out_dir: str = "out"
    snapshots: int = 31
    schedule: str = "geometric"    # geometric in (2t+1), i.e. uniform in tau
    seed: int = 20240801

    def __post_init__(self):
        if self.snapshots < 2:
            raise ValueError("need at least 2 snapshots")
        if self.schedule != "geometric":
            raise ValueError(f"unknown snapshot schedule '{self.schedule}'")


@dataclass
class RunConfig:
    params: FlowParams = field(default_factory=lambda: FlowParams(2, 2.0, 1.0))
    solver: SolverConfig = field(default_factory=SolverConfig)
    barriers: BarrierSearchConfig = field(default_factory=BarrierSearchConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)

    def snapshot_taus(self, tau0: float) -> np.ndarray:
        # uniform in tau == geometric in (2t+1)
        return np.linspace(tau0, self.solver.tau_end, self.outputs.snapshots)


_SECTIONS = {
    "params": (FlowParams, ["n", "gamma", "a_tilde"]),
    "solver": (SolverConfig, ["chart", "phi_max", "phi_min", "nodes", "grading",
                              "dtau", "dtau_min", "dtau_max", "safety", "step_tol",
                              "adapt", "far_field_bc", "tau_end"]),
    "barriers": (BarrierSearchConfig, ["eps_c", "r1", "r2", "b_plus_scale",
                                       "b_minus_scale", "delta", "c1_psi", "window",
                                       "phi_cap", "nz_cert", "ntau_cert"]),
    "outputs": (OutputConfig, ["out_dir", "snapshots", "schedule", "seed"]),
}

_FIELD_ALIASES = {"a_tilde": "A_tilde"}
_INT_FIELDS = {"n", "nodes", "snapshots", "seed", "nz_cert", "ntau_cert"}
_BOOL_FIELDS = {"adapt"}
_STR_FIELDS = {"chart", "grading", "far_field_bc", "out_dir", "schedule"}


def _parse_value(key: str, raw: str):
    if key in _STR_FIELDS:
        return raw
    if key in _BOOL_FIELDS:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"field '{key}' must be boolean (got '{raw}')")
    try:
        if key in _INT_FIELDS:
            return int(raw)
        return float(raw)
    except ValueError:
        raise ValueError(f"field '{key}' must be numeric (got '{raw}')") from None


def load_config(path) -> RunConfig:
    """Parse and validate a config file; unknown keys are hard errors."""
    cp = configparser.ConfigParser()
    cp.optionxform = str.lower
    with open(path) as fh:
        cp.read_file(fh)
    kwargs = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ValueError(f"unknown config section [{section}]")
        cls, keys = _SECTIONS[section]
        sec_kwargs = {}
        for key, raw in cp.items(section):
            if key not in keys:
                raise ValueError(f"unknown key '{key}' in section [{section}]")
            sec_kwargs[_FIELD_ALIASES.get(key, key)] = _parse_value(key, raw)
        kwargs[section] = cls(**sec_kwargs)
    return RunConfig(**kwargs)


def save_config(config: RunConfig, path):
    lines = []
    for section, (cls, keys) in _SECTIONS.items():
        obj = getattr(config, section)
        lines.append(f"[{section}]")
        for key in keys:
            v = getattr(obj, _FIELD_ALIASES.get(key, key))
            if isinstance(v, (Chart, FarFieldBC)):
                v = v.value
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = f"{v:.17g}"
            lines.append(f"{key} = {v}")
        lines.append("")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))


def apply_override(config: RunConfig, dotted: str, raw: str):
    """Apply one --set section.key=value override, type-checked."""
    if "." not in dotted:
        raise ValueError(f"override '{dotted}' must look like section.key")
    section, key = dotted.split(".", 1)
    if section not in _SECTIONS:
        raise ValueError(f"unknown config section '{section}'")
    _, keys = _SECTIONS[section]
    if key not in keys:
        raise ValueError(f"unknown key '{key}' in section [{section}]")
    value = _parse_value(key, raw)
    obj = getattr(config, section)
    cls = type(obj)
    fields = {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}
    fields[_FIELD_ALIASES.get(key, key)] = value
    setattr(config, section, cls(**fields))


# ---------------------------------------------------------------------------
# artifact emission

def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, (float, np.floating)) else v
                        for v in row])


def emit_trajectory(traj: Trajectory, outdir, tag: str = "trajectory"):
    """One CSV per snapshot (node, value, kappa1, kappan, ratio) + manifest."""
    os.makedirs(outdir, exist_ok=True)
    names = []
    for i, (st, rec) in enumerate(zip(traj.snapshots, traj.records)):
        name = f"{tag}_snap{i:03d}.csv"
        names.append(name)
        k1 = rec.kappa1 if rec.kappa1 is not None else np.full_like(st.nodes, np.nan)
        kn = rec.kappan if rec.kappan is not None else np.full_like(st.nodes, np.nan)
        m = len(st.nodes)
        if len(k1) != m:      # lambda-chart records live on the probe grid
            k1 = np.full(m, np.nan)
            kn = np.full(m, np.nan)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(k1 != 0, kn / k1, np.nan)
        _write_csv(os.path.join(outdir, name),
                   ["node", "value", "kappa1", "kappan", "ratio"],
                   zip(st.nodes, st.values, k1, kn, ratio))
    manifest = dict(
        kind="trajectory",
        chart=traj.config.chart.value,
        params=_dataclass_to_plain(traj.params),
        solver=_dataclass_to_plain(traj.config),
        snapshots=[dict(file=nm, tau=float(st.tau), t=float(st.t),
                        sup_h=float(rec.sup_h), argmax_node=int(rec.argmax_node),
                        kappa_tip=float(rec.kappa1_tip),
                        margin_lower=(None if mg is None else float(mg[0])),
                        margin_upper=(None if mg is None else float(mg[1])),
                        lte_cumulative=float(lte))
                   for nm, st, rec, mg, lte in zip(names, traj.snapshots, traj.records,
                                                   traj.margins, traj.lte_cumulative)],
        steps=traj.steps,
    )
    save_manifest(os.path.join(outdir, f"{tag}_manifest.json"), manifest)
    return manifest


def emit_certificate(cert: dict, lower, upper, outdir, tag: str = "barriers"):
    """Certificate JSON + CSV dumps of the seam crossing functions."""
    os.makedirs(outdir, exist_ok=True)
    save_manifest(os.path.join(outdir, f"{tag}_certificate.json"), dict(cert))
    k = upper.constants
    t0, t1 = cert["tau_window"]
    zz = np.linspace(k.R2, k.R1, 400)
    for name, t in (("start", t0), ("end", t1)):
        rows = zip(zz,
                   upper.crossing(zz, np.full_like(zz, t)),
                   lower.crossing(zz, np.full_like(zz, t)))
        _write_csv(os.path.join(outdir, f"{tag}_crossing_{name}.csv"),
                   ["z", "upper_crossing", "lower_crossing"], rows)


def emit_report(report, outdir, tag: str = "asymptotics"):
    """AsymptoticsReport JSON + CSV curves + a small markdown summary."""
    os.makedirs(outdir, exist_ok=True)
    payload = _dataclass_to_plain(report)
    save_manifest(os.path.join(outdir, f"{tag}_report.json"), dict(kind=tag, **payload))
    _write_csv(os.path.join(outdir, f"{tag}_tip_error.csv"), ["tau", "sup_error"],
               report.tip_error_curve)
    _write_csv(os.path.join(outdir, f"{tag}_growth.csv"), ["tau", "C1_fit", "dispersion"],
               report.growth_curve)
    lines = [
        "| quantity | value |", "| --- | --- |",
        f"| fitted exponent | {report.fitted_exponent:.4f} +- {report.fitted_ci:.4f} |",
        f"| target exponent | {report.target_exponent:.4f} |",
        f"| tip prefactor (mean curvature) | {report.prefactor_tip_H:.4f} |",
        f"| final tip error | {report.tip_error_curve[-1, 1]:.3e} |",
        f"| final band dispersion | {report.growth_curve[-1, 2]:.3e} |",
        f"| max curvature ratio | {report.ratio_principle_max:.4f} |",
        f"| argmax at tip | {report.argmax_at_tip} |",
    ]
    with open(os.path.join(outdir, f"{tag}_summary.md"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def emit_plot_data(artifact, outdir, tag: str = None):
    """Dispatch: Trajectory, (cert, lower, upper) tuple, or AsymptoticsReport."""
    from .asymptotics import AsymptoticsReport
    if isinstance(artifact, Trajectory):
        return emit_trajectory(artifact, outdir, tag or "trajectory")
    if isinstance(artifact, AsymptoticsReport):
        return emit_report(artifact, outdir, tag or "asymptotics")
    if isinstance(artifact, tuple) and len(artifact) == 3:
        return emit_certificate(artifact[0], artifact[1], artifact[2], outdir,
                                tag or "barriers")
    raise TypeError(f"no plot-data emitter for {type(artifact)}")
