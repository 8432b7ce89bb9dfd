"""Built-in experiments and the declarative experiment runner.

A validated :class:`~liepoisson.config.ExperimentConfig` is executed by
:func:`run_experiment`: build the realization and Hamiltonian, resolve
the initial conditions (lifting dual-space points through the fiber
lift), integrate, and write an orbit CSV per trajectory plus one
diagnostics JSON.  Ten built-in configurations reproduce the package's
reference figures at desk scale; ``builtin_config`` returns them already
validated, and they round-trip through the schema validator like any
user file.

Output files
------------
``<base>.csv`` (``<base>_00.csv``, ... for batches)
    RFC-4180 CSV with a header row.  ``orbit``/``strobe`` columns are
    ``t, w1..wm`` plus ``x1..xn`` when ``include_x`` is set; ``drift``
    columns are ``t`` followed by the signed deviation of each measured
    quantity from its initial value; ``order`` columns are
    ``stages, dt, error``.  Numbers use the shortest round-trip decimal
    representation, so reruns are byte-identical.
``<base>.json``
    Library version, normalized config echo (re-validates against the
    schema), measurement conventions, per-trajectory solver statistics
    and drift reports, and order studies when applicable.
``<base>.gp`` (optional)
    A companion gnuplot script plotting the CSV columns named by
    ``output.plot_columns`` (or a kind-dependent default).

Strobe output contains the samples ``k * period_steps`` for
``k = 1, 2, ...``; the initial sample is not a strobe point.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .config import ExperimentConfig, validate_config
from .diagnostics import (DriftReport, casimir_drift, convergence_order,
                          energy_drift, envelope_slope, invariant_drift,
                          orthant_check)
from .geometry import ConfigurationError, HamiltonianSpec, Realization, lift
from .hamiltonians import build_hamiltonian
from .integrators import IntegratorConfig, Trajectory, integrate
from .realizations import build as build_realization
from .realizations import landmark_collective_hamiltonian

__all__ = [
    "BUILTIN_EXPERIMENTS",
    "ExperimentResult",
    "builtin_config",
    "builtin_descriptions",
    "run_experiment",
]

#: Measurement conventions echoed into every diagnostics JSON.
CONVENTIONS = {
    "drift_normalization":
        "relative deviation divides by max(1, |initial value|)",
    "envelope_slope":
        "least-squares slope through windowed maxima of |deviation|",
    "order_error_norm":
        "Euclidean norm of w(t_end) - w_ref, w_ref from the step-halving "
        "reference solver",
    "order_floor":
        "step-size pairs with either error below "
        "100*eps*sqrt(n_steps)*(1 + |w_ref|) are excluded from order fits",
    "strobe":
        "strobe rows are the samples k*period_steps for k >= 1; the "
        "initial sample is excluded",
    "initial_lift":
        "w initial conditions pass through the realization's fixed "
        "fiber-lift section",
    "drift_sampling":
        "drift reports evaluate at most 100000 evenly strided samples "
        "(first and last always included); the stride is recorded when "
        "it exceeds 1",
    "csv_numbers":
        "shortest round-trip decimal representation of IEEE doubles",
    "csv_line_endings": "CRLF (RFC 4180)",
}


# ----------------------------------------------------------------------
# Built-in experiment catalog
# ----------------------------------------------------------------------

_TWO_PI = 2.0 * math.pi

# Points of the unit sphere with exact rational coordinates
# (3-4-5 style triples), used by the trigonometric demos.
_UNIT_SPHERE_POINTS = [
    [0.6, 0.48, 0.64],
    [0.36, 0.48, 0.8],
    [0.48, 0.6, 0.64],
    [0.8, 0.6, 0.0],
    [0.28, 0.96, 0.0],
    [0.0, 0.28, 0.96],
    [0.64, 0.6, -0.48],
    [-0.48, 0.36, 0.8],
]

# Points on the cone w1 w2 - w3^2 = 0 realized as q parallel to p, and on
# the hyperboloid w1 w2 - w3^2 = 2.5 realized with |q x p|^2 = 2.5.
_SL2_CONE_POINTS = [
    [0.5, 0.0, 0.0, 0.5, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.8, 0.0, 0.0],
    [1.3, 0.0, 0.0, 0.2, 0.0, 0.0],
]
_SL2_HYPERBOLOID_POINTS = [
    [1.0, 0.0, 0.0, 0.0, 1.5811388300841898, 0.0],
    [1.5, 0.0, 0.0, 0.3, 1.0540925533894598, 0.0],
    [0.8, 0.0, 0.0, 0.5, 1.9764235376052373, 0.0],
]

_RIGID_BODY_PARAMS = {"a1": 0.5, "a2": 0.25, "a3": 5.0 / 3.0}

# Initial conditions for the rigid body on the unit sphere: four points
# fanning out from the w3 rotation axis toward the w2 axis, plus two in
# the equator approaching the unstable w1 axis.
_RIGID_BODY_POINTS = [
    [0.0, 0.29552020666133955, 0.955336489125606],
    [0.0, 0.644217687237691, 0.7648421872844885],
    [0.0, 0.8912073600614354, 0.45359612142557737],
    [0.0, 0.9974949866040544, 0.0707372016677029],
    [0.479425538604203, 0.8775825618903728, 0.0],
    [0.8414709848078965, 0.5403023058681398, 0.0],
]

BUILTIN_EXPERIMENTS = {
    "fig1_top": {
        "experiment": "fig1_top",
        "description": "Quartic-well orbits on sl(2)* (cone and "
                       "hyperboloid), collective leapfrog",
        "realization": {"id": "SL2_from_O3invariants", "params": {}},
        "hamiltonian": {"name": "sl2_fig1", "params": {}},
        "initial": {"x_batch": _SL2_CONE_POINTS + _SL2_HYPERBOLOID_POINTS},
        "integrator": {"method": "stormer_verlet", "dt": 0.01,
                       "separable": True},
        "t_span": [0.0, 30.0],
        "output": {"kind": "orbit", "plot_columns": ["w1", "w2", "w3"]},
        "output_path": "fig1_top",
    },
    "fig1_middle": {
        "experiment": "fig1_middle",
        "description": "The fig1_top run in the standard reduced "
                       "variables (w2, w3)",
        "realization": {"id": "SL2_from_O3invariants", "params": {}},
        "hamiltonian": {"name": "sl2_fig1", "params": {}},
        "initial": {"x_batch": _SL2_CONE_POINTS + _SL2_HYPERBOLOID_POINTS},
        "integrator": {"method": "stormer_verlet", "dt": 0.01,
                       "separable": True},
        "t_span": [0.0, 30.0],
        "output": {"kind": "orbit", "plot_columns": ["w2", "w3"]},
        "output_path": "fig1_middle",
    },
    "fig1_bottom": {
        "experiment": "fig1_bottom",
        "description": "Orbits of sum(cos wi) on the sl(2)* cone C = 0, "
                       "collective leapfrog",
        "realization": {"id": "SL2_from_O3invariants", "params": {}},
        "hamiltonian": {"name": "trig_sum", "params": {"k": 1.0}},
        "initial": {"x_batch": [
            [0.7, 0.0, 0.0, 0.7, 0.0, 0.0],
            [1.2, 0.0, 0.0, 0.4, 0.0, 0.0],
            [0.3, 0.0, 0.0, 1.5, 0.0, 0.0],
            [1.6, 0.0, 0.0, 1.0, 0.0, 0.0],
        ]},
        "integrator": {"method": "stormer_verlet", "dt": 0.01},
        "t_span": [0.0, 30.0],
        "output": {"kind": "orbit", "plot_columns": ["w1", "w2", "w3"]},
        "output_path": "fig1_bottom",
    },
    "fig2_rigid_body": {
        "experiment": "fig2_rigid_body",
        "description": "Rigid-body orbits on the momentum sphere, "
                       "collective midpoint on the Hopf realization",
        "realization": {"id": "Hopf_so3", "params": {}},
        "hamiltonian": {"name": "rigid_body", "params": _RIGID_BODY_PARAMS},
        "initial": {"w_batch": _RIGID_BODY_POINTS},
        "integrator": {"method": "midpoint", "dt": 0.04, "solver": "newton"},
        "t_span": [0.0, 20.0],
        "output": {"kind": "orbit", "plot_columns": ["w1", "w2", "w3"]},
        "output_path": "fig2_rigid_body",
    },
    "fig3_gauss_orders": {
        "experiment": "fig3_gauss_orders",
        "description": "Convergence orders 2-10 of the collective Gauss "
                       "methods on the rigid body",
        "realization": {"id": "Hopf_so3", "params": {}},
        "hamiltonian": {"name": "rigid_body", "params": _RIGID_BODY_PARAMS},
        # |w0| = 1.6: fast enough that the coarsest rungs sit inside each
        # method's asymptotic window while the finest stay above roundoff.
        "initial": {"w": [0.8, 0.8, 1.1313708498984762]},
        "integrator": {"method": "gauss", "stages": 1, "dt": 0.1,
                       "solver": "newton"},
        "t_span": [0.0, 4.0],
        "output": {
            "kind": "order",
            "order_groups": [
                {"stages": 1, "dts": [0.1, 0.05, 0.025]},
                {"stages": 2, "dts": [0.1, 0.05, 0.025]},
                {"stages": 3, "dts": [0.1, 0.05, 0.025]},
                {"stages": 4, "dts": [0.4, 0.2, 0.1]},
                {"stages": 5, "dts": [0.8, 0.4, 0.2]},
            ],
            "reference_tol": 1e-13,
        },
        "output_path": "fig3_gauss_orders",
    },
    "fig4_trig": {
        "experiment": "fig4_trig",
        "description": "Orbits of prod(sin 4wi) on the unit sphere, "
                       "collective midpoint on the Hopf realization",
        "realization": {"id": "Hopf_so3", "params": {}},
        "hamiltonian": {"name": "trig_product", "params": {"k": 4.0}},
        "initial": {"w_batch": _UNIT_SPHERE_POINTS},
        "integrator": {"method": "midpoint", "dt": 0.01, "solver": "newton"},
        "t_span": [0.0, 10.0],
        "output": {"kind": "orbit", "plot_columns": ["w1", "w2", "w3"]},
        "output_path": "fig4_trig",
    },
    "fig5_chaotic_web": {
        "experiment": "fig5_chaotic_web",
        "description": "Chaotic web: 16000 points of the one-period "
                       "strobe map of the driven trigonometric system",
        "realization": {"id": "Hopf_so3", "params": {}},
        "hamiltonian": {"name": "driven_trig",
                        "params": {"k": 4.0, "epsilon": 0.01}},
        "initial": {"w": [1.0, 0.0, 0.0]},
        "integrator": {"method": "midpoint", "dt": _TWO_PI / 30.0,
                       "solver": "newton"},
        "t_span": [0.0, 16000.0 * _TWO_PI],
        "output": {"kind": "strobe", "strobe_period_steps": 30,
                   "plot_columns": ["w1", "w2", "w3"]},
        "output_path": "fig5_chaotic_web",
    },
    "affine_orbits": {
        "experiment": "affine_orbits",
        "description": "Half-plane orbits of the affine realization; the "
                       "sign of p is preserved",
        "realization": {"id": "AffineA1", "params": {}},
        "hamiltonian": {"name": "custom_polynomial", "params": {
            "terms": [[1.0, [2, 0]], [0.5, [0, 2]], [1.0, [0, 1]]]}},
        "initial": {"x_batch": [[1.0, 0.5], [0.6, -0.8]]},
        "integrator": {"method": "midpoint", "dt": 0.05},
        "t_span": [0.0, 50.0],
        "output": {"kind": "orbit", "include_x": True,
                   "plot_columns": ["w1", "w2"]},
        "output_path": "affine_orbits",
    },
    "landmark_demo": {
        "experiment": "landmark_demo",
        "description": "Three Gaussian landmarks in the plane; linear and "
                       "angular momentum conserved",
        "realization": {"id": "Landmarks",
                        "params": {"d": 2, "n_landmarks": 3,
                                   "kernel_width": 1.0}},
        "hamiltonian": {"name": "landmark_gaussian",
                        "params": {"d": 2, "n_landmarks": 3,
                                   "kernel_width": 1.0}},
        "initial": {"x": [0.0, 0.0, 1.0, 0.0, 0.3, 0.9,
                          -0.8, -0.55, 1.0, -0.25, 0.0, 0.8]},
        "integrator": {"method": "midpoint", "dt": 0.05,
                       "solver": "newton"},
        "t_span": [0.0, 50.0],
        "output": {"kind": "drift"},
        "output_path": "landmark_demo",
    },
    "bifoliation_demo": {
        "experiment": "bifoliation_demo",
        "description": "Hamiltonian of the four products q_i p_j on "
                       "T*R^2; the transverse invariant q.p is conserved",
        "realization": {"id": "GLnGLk",
                        "params": {"n": 2, "k": 1, "side": "gl_n"}},
        "hamiltonian": {"name": "custom_polynomial", "params": {
            "terms": [[1.0, [0, 1, 0, 0]], [-1.0, [0, 0, 1, 0]],
                      [0.3, [1, 0, 0, 1]]]}},
        "initial": {"x": [1.0, 0.5, 0.3, -0.4]},
        "integrator": {"method": "midpoint", "dt": 0.05},
        "t_span": [0.0, 50.0],
        "output": {"kind": "drift"},
        "output_path": "bifoliation_demo",
    },
}


def builtin_config(name: str) -> ExperimentConfig:
    """Return a built-in experiment, validated through the schema."""
    if name not in BUILTIN_EXPERIMENTS:
        raise ConfigurationError(
            f"unknown built-in experiment {name!r}; known: "
            + ", ".join(sorted(BUILTIN_EXPERIMENTS)))
    return validate_config(BUILTIN_EXPERIMENTS[name],
                           source=f"builtin:{name}")


def builtin_descriptions() -> list:
    """``(name, description)`` pairs for every built-in, sorted by name."""
    return [(name, BUILTIN_EXPERIMENTS[name]["description"])
            for name in sorted(BUILTIN_EXPERIMENTS)]


# ----------------------------------------------------------------------
# Building blocks
# ----------------------------------------------------------------------

def _build_hamiltonian(cfg: ExperimentConfig,
                       r: Realization) -> HamiltonianSpec:
    name, params = cfg.hamiltonian_name, cfg.hamiltonian_params
    if name == "landmark_gaussian":
        required = {"d", "n_landmarks", "kernel_width"}
        if set(params) != required:
            raise ConfigurationError(
                f"hamiltonian 'landmark_gaussian' requires exactly the "
                f"parameters {sorted(required)}, got {sorted(params)}")
        spec = landmark_collective_hamiltonian(
            params["d"], params["n_landmarks"], params["kernel_width"])
        dim = 2 * params["d"] * params["n_landmarks"]
        if dim != r.dim_dual:
            raise ConfigurationError(
                f"landmark_gaussian parameters give a {dim}-dimensional "
                f"dual but realization {r.name!r} has dim {r.dim_dual}")
        return spec
    return build_hamiltonian(name, params, r.dim_dual)


def _initial_points(cfg: ExperimentConfig, r: Realization) -> list:
    """Resolve the initial section to phase-space points, lifting w."""
    init = cfg.initial
    if init.form == "random":
        rng = np.random.default_rng(cfg.seed)
        dim = r.dim_dual if init.space == "w" else r.dim_M
        draws = init.scale * rng.standard_normal((init.count, dim))
        if init.space == "w":
            return [lift(r, w) for w in draws]
        return [np.array(row) for row in draws]
    points = [np.array(p, dtype=float) for p in init.points]
    if init.form in ("w", "w_batch"):
        return [lift(r, w) for w in points]
    return points


# ----------------------------------------------------------------------
# Writers
# ----------------------------------------------------------------------

def _fmt(value: float) -> str:
    return repr(float(value))


def _write_csv(path: str, header: list, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _orbit_header(r: Realization, include_x: bool) -> list:
    header = ["t"] + [f"w{i + 1}" for i in range(r.dim_dual)]
    if include_x:
        header += [f"x{i + 1}" for i in range(r.dim_M)]
    return header


def _orbit_rows(traj: Trajectory, include_x: bool, stride: int = 1,
                skip_first: bool = False):
    start = stride if skip_first else 0
    for i in range(start, len(traj.ts), stride):
        row = [traj.ts[i]] + list(traj.ws[i])
        if include_x:
            row += list(traj.xs[i])
        yield row


def _drift_series(traj: Trajectory, r: Realization, h: HamiltonianSpec):
    """Signed deviation columns for the ``drift`` output kind."""
    columns = [("H", [h.value(t, w) for t, w in zip(traj.ts, traj.ws)])]
    for c in r.casimirs:
        columns.append((c.name, [c(w) for w in traj.ws]))
    for inv in r.quadratic_invariants:
        columns.append((inv.name, [inv(x) for x in traj.xs]))
    header = ["t"] + [name for name, _ in columns]
    series = [np.asarray(vals) - vals[0] for _, vals in columns]
    rows = ([traj.ts[i]] + [s[i] for s in series]
            for i in range(len(traj.ts)))
    return header, rows


def _report_dict(report: DriftReport) -> dict:
    return {
        "name": report.name,
        "initial_value": report.initial_value,
        "max_abs_deviation": report.max_abs_deviation,
        "max_rel_deviation": report.max_rel_deviation,
        "slope": report.slope,
    }


#: Drift reports on longer trajectories are evaluated on an even
#: subsample of at most this many points (endpoint always included).
_DRIFT_MAX_SAMPLES = 100_000


def _drift_view(traj: Trajectory) -> tuple:
    """Trajectory restricted to the drift-evaluation samples.

    Returns ``(view, stride)``; ``stride`` is 1 when the trajectory is
    short enough to evaluate in full.
    """
    n = len(traj.ts)
    stride = -(-n // _DRIFT_MAX_SAMPLES)
    if stride <= 1:
        return traj, 1
    idx = np.arange(0, n, stride)
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    return Trajectory(ts=traj.ts[idx], xs=traj.xs[idx], ws=traj.ws[idx],
                      realization=traj.realization, config=traj.config,
                      stats=traj.stats, failure=traj.failure), stride


def _trajectory_record(index: int, csv_name: str, traj: Trajectory,
                       r: Realization, h: HamiltonianSpec) -> dict:
    view, drift_stride = _drift_view(traj)
    energy = energy_drift(view, h)
    record = {
        "index": index,
        "csv": csv_name,
        "initial_x": [float(v) for v in traj.xs[0]],
        "initial_w": [float(v) for v in traj.ws[0]],
        "samples": len(traj),
        "t_final": float(traj.ts[-1]),
        "solver": dict(traj.stats),
        "failure": dict(traj.failure) if traj.failure else None,
        "drift": {
            "energy": _report_dict(energy),
            "casimirs": [_report_dict(rep)
                         for rep in (casimir_drift(view, r)
                                     if r.casimirs else [])],
            "invariants": [_report_dict(rep)
                           for rep in invariant_drift(view, r)],
        },
    }
    if drift_stride > 1:
        record["drift"]["stride"] = drift_stride
    if len(view.ts) > 1:
        values = [h.value(t, w) for t, w in zip(view.ts, view.ws)]
        record["drift"]["energy"]["envelope_slope"] = envelope_slope(
            view.ts, values)
    if r.orthant_coordinates:
        report = orthant_check(traj, r.orthant_coordinates)
        record["orthant"] = {
            "coordinates": list(r.orthant_coordinates),
            "ok": report.ok,
            "first_violation_time": report.first_violation_time,
            "coordinate": report.coordinate,
        }
    return record


def _study_record(group, study) -> dict:
    return {
        "stages": group.stages,
        "dts": list(study.dts),
        "errors": list(study.errors),
        "observed_orders": [e.order for e in study.estimates],
        "excluded": [e.excluded for e in study.estimates],
        "roundoff_floor": study.floor,
        "conclusive": study.conclusive,
    }


# ----------------------------------------------------------------------
# Gnuplot companion
# ----------------------------------------------------------------------

def _default_columns(cfg: ExperimentConfig, r: Realization) -> list:
    if cfg.output.kind in ("orbit", "strobe"):
        if r.dim_dual >= 3:
            return ["w1", "w2", "w3"]
        return ["t", "w1"]
    return []


def _gnuplot_script(cfg: ExperimentConfig, r: Realization,
                    csv_names: list, header: list) -> str:
    lines = [f"# gnuplot companion for experiment {cfg.name!r}",
             "set datafile separator ','"]
    if cfg.output.kind == "order":
        lines += ["set logscale xy", "set xlabel 'dt'",
                  "set ylabel 'endpoint error'", "set key top left"]
        files = ", ".join(
            f"'{name}' every ::1 using 2:3 with linespoints "
            f"title '{name}'" for name in csv_names)
        lines.append(f"plot {files}")
        lines.append("pause -1")
        return "\n".join(lines) + "\n"
    columns = list(cfg.output.plot_columns) or _default_columns(cfg, r)
    if cfg.output.kind == "drift" and not columns:
        columns = ["t", header[1]] if len(header) > 1 else ["t"]
    indices = []
    for name in columns:
        if name not in header:
            raise ConfigurationError(
                f"plot column {name!r} is not a CSV column; available: "
                + ", ".join(header))
        indices.append(header.index(name) + 1)
    if cfg.output.kind == "drift" and len(indices) < 2:
        raise ConfigurationError(
            "drift plots need two columns: t and one deviation series")
    style = "points pt 7 ps 0.2" if cfg.output.kind == "strobe" else "lines"
    using = ":".join(str(i) for i in indices)
    command = "splot" if len(indices) == 3 else "plot"
    for i, name in enumerate(columns):
        lines.append(f"set {'xyz'[i]}label '{name}'")
    if cfg.output.kind == "drift":
        lines.append("set logscale y")
        lines.append("# drift columns hold signed deviations; plotting "
                     "absolute values")
        plots = ", ".join(
            f"'{name}' every ::1 using {indices[0]}:(abs(column("
            f"{indices[1]}))) with {style} title '{name}'"
            for name in csv_names)
    else:
        plots = ", ".join(
            f"'{name}' every ::1 using {using} with {style} notitle"
            for name in csv_names)
    lines.append(f"{command} {plots}")
    lines.append("pause -1")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# Runner
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentResult:
    """What a run produced: files on disk and in-memory results."""

    config: ExperimentConfig
    files: tuple
    trajectories: tuple
    studies: tuple
    failures: tuple

    @property
    def ok(self) -> bool:
        return not self.failures


def _run_order_experiment(cfg: ExperimentConfig, r: Realization,
                          h: HamiltonianSpec, x0: np.ndarray,
                          output_dir: str, want_gnuplot: bool):
    t0, t_end = cfg.t_span
    studies = []
    rows = []
    for group in cfg.output.order_groups:
        run_cfg = replace(cfg.integrator, method="gauss",
                          stages=group.stages)
        study = convergence_order(r, h, x0, t_end, run_cfg, group.dts,
                                  t0=t0,
                                  reference_tol=cfg.output.reference_tol)
        studies.append(study)
        for dt, err in zip(study.dts, study.errors):
            rows.append([group.stages, dt, err])
    base = cfg.output_path
    csv_path = os.path.join(output_dir, base + ".csv")
    _write_csv(csv_path, ["stages", "dt", "error"], rows)
    files = [csv_path]
    payload = {
        "library": {"name": "liepoisson", "version": __version__},
        "config": cfg.to_dict(),
        "conventions": dict(CONVENTIONS),
        "realization": {"name": r.name, "dim_M": r.dim_M,
                        "dim_dual": r.dim_dual},
        "hamiltonian": h.name,
        "order_studies": [_study_record(g, s) for g, s
                          in zip(cfg.output.order_groups, studies)],
    }
    json_path = os.path.join(output_dir, base + ".json")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    files.append(json_path)
    if want_gnuplot:
        gp_path = os.path.join(output_dir, base + ".gp")
        with open(gp_path, "w", encoding="utf-8") as fh:
            fh.write(_gnuplot_script(cfg, r, [base + ".csv"],
                                     ["stages", "dt", "error"]))
        files.append(gp_path)
    return ExperimentResult(config=cfg, files=tuple(files),
                            trajectories=(), studies=tuple(studies),
                            failures=())


def run_experiment(cfg: ExperimentConfig, output_dir: str = ".",
                   threads: int = 1,
                   gnuplot_script: bool = False) -> ExperimentResult:
    """Execute a validated experiment and write its output files.

    Trajectories of a batch are integrated concurrently when
    ``threads > 1``; files are always written single-threaded, in batch
    order.  A step failure does not raise: the partial trajectory is
    written and recorded in ``failures`` (the CLI maps this to exit
    code 4).  Range errors from lifting initial conditions propagate as
    :class:`~liepoisson.geometry.RangeError`.
    """
    os.makedirs(output_dir, exist_ok=True)
    r = build_realization(cfg.realization_id, **cfg.realization_params)
    h = _build_hamiltonian(cfg, r)
    points = _initial_points(cfg, r)

    if cfg.output.kind == "order":
        return _run_order_experiment(cfg, r, h, points[0], output_dir,
                                     gnuplot_script)

    t0, t_end = cfg.t_span

    def _one(x0):
        return integrate(r, h, x0, t0, t_end, cfg.integrator)

    if threads > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trajectories = list(pool.map(_one, points))
    else:
        trajectories = [_one(x0) for x0 in points]

    base = cfg.output_path
    include_x = cfg.output.include_x
    stride = 1
    skip_first = False
    if cfg.output.kind == "strobe":
        stride = cfg.output.strobe_period_steps
        skip_first = True

    csv_names = []
    files = []
    records = []
    failures = []
    header = None
    for i, traj in enumerate(trajectories):
        name = (f"{base}.csv" if len(trajectories) == 1
                else f"{base}_{i:02d}.csv")
        path = os.path.join(output_dir, name)
        if cfg.output.kind == "drift":
            header, rows = _drift_series(traj, r, h)
            _write_csv(path, header, rows)
        else:
            header = _orbit_header(r, include_x)
            _write_csv(path, header,
                       _orbit_rows(traj, include_x, stride, skip_first))
        csv_names.append(name)
        files.append(path)
        records.append(_trajectory_record(i, name, traj, r, h))
        if traj.failure is not None:
            failures.append((i, traj.failure["message"]))

    payload = {
        "library": {"name": "liepoisson", "version": __version__},
        "config": cfg.to_dict(),
        "conventions": dict(CONVENTIONS),
        "realization": {"name": r.name, "dim_M": r.dim_M,
                        "dim_dual": r.dim_dual},
        "hamiltonian": h.name,
        "trajectories": records,
    }
    json_path = os.path.join(output_dir, base + ".json")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    files.append(json_path)
    if gnuplot_script:
        gp_path = os.path.join(output_dir, base + ".gp")
        with open(gp_path, "w", encoding="utf-8") as fh:
            fh.write(_gnuplot_script(cfg, r, csv_names, header))
        files.append(gp_path)
    return ExperimentResult(config=cfg, files=tuple(files),
                            trajectories=tuple(trajectories),
                            studies=(), failures=tuple(failures))
