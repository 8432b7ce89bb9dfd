"""Declarative experiment configuration: YAML schema and validation.

An experiment file is a single YAML mapping with the sections below.
Unknown keys are rejected everywhere, with the offending field path and
source line in the message; a configuration is either fully valid or
fully rejected before any computation starts.

Schema
------
::

    experiment: fig2_rigid_body        # name (optional; default "experiment")
    description: one-line summary      # optional
    realization:
      id: Hopf_so3                     # catalog id, see realizations module
      params: {}                       # builder parameters, id-specific
    hamiltonian:
      name: rigid_body                 # catalog name, see hamiltonians module
      params: {a1: 0.5, a2: 0.25, a3: 1.6666666666666667}
    initial:                           # exactly one of the five forms
      w: [1.0, 0.0, 0.0]               #   dual point, lifted through the fiber lift
      # x: [...]                       #   phase-space point, used directly
      # w_batch: [[...], [...]]        #   several dual points
      # x_batch: [[...], [...]]        #   several phase-space points
      # random: {count: 10, scale: 1.0, space: x}   # seeded Gaussian batch
    integrator:
      method: midpoint                 # midpoint | gauss | stormer_verlet
      stages: 1                        # gauss only, 1..5
      dt: 0.04
      stage_tol: 1.0e-13
      max_stage_iters: 100
      solver: newton                   # fixed_point | newton
      separable: false                 # stormer_verlet: explicit substeps
    t_span: [0.0, 20.0]
    output:
      kind: orbit                      # orbit | drift | order | strobe
      strobe_period_steps: 30          # strobe only: samples per strobe point
      include_x: false                 # add x columns to orbit/strobe CSV
      plot_columns: [w1, w2, w3]       # optional, for the gnuplot companion
      order_groups:                    # order only: one study per group
        - {stages: 1, dts: [0.1, 0.05, 0.025]}
      reference_tol: 1.0e-13           # order only: oracle tolerance
    seed: 0
    output_path: fig2_rigid_body       # output file base name (default: name)

``w`` initial conditions are mapped to phase space with the
realization's fiber lift (an arbitrary-but-fixed section of the momentum
map); ``x`` initial conditions bypass the lift.  ``random`` batches draw
``count`` standard-normal points scaled by ``scale`` from a generator
seeded with ``seed``, in dual space (``space: w``, lifted) or phase
space (``space: x``, default).

Numbers must be YAML numbers (booleans are not accepted where numbers
are expected), and every section rejects keys it does not define.
:func:`validate_config` accepts an already-parsed mapping, so the
normalized echo written to diagnostics JSON re-validates by
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import yaml

from .geometry import ConfigurationError
from .integrators import IntegratorConfig

__all__ = [
    "ConfigError",
    "InitialSpec",
    "OrderGroup",
    "OutputSpec",
    "ExperimentConfig",
    "load_config",
    "validate_config",
]

_INITIAL_FORMS = ("w", "x", "w_batch", "x_batch", "random")
_OUTPUT_KINDS = ("orbit", "drift", "order", "strobe")
_MISSING = object()


class ConfigError(ConfigurationError):
    """A schema violation, carrying the field path and source line."""

    def __init__(self, message: str, path: str = "",
                 line: Optional[int] = None):
        where = path or "top level"
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"config error at {where}: {message}")
        self.path = path
        self.line = line


# ----------------------------------------------------------------------
# YAML loading with source positions
# ----------------------------------------------------------------------

def _collect(node, path: str, marks: dict):
    """Map field paths like ``integrator.dt`` or ``t_span[1]`` to lines."""
    marks[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        seen = {}
        for key_node, value_node in node.value:
            key = str(key_node.value)
            child = f"{path}.{key}" if path else key
            if key in seen:
                raise ConfigError(
                    f"duplicate key {key!r} (first at line {seen[key]})",
                    path=child, line=key_node.start_mark.line + 1)
            seen[key] = key_node.start_mark.line + 1
            marks[child] = key_node.start_mark.line + 1
            _collect(value_node, child, marks)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _collect(item, f"{path}[{i}]", marks)


def _parse_yaml(text: str, source: str):
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as err:
        line = None
        if err.problem_mark is not None:
            line = err.problem_mark.line + 1
        raise ConfigError(f"not valid YAML in {source}: {err.problem}",
                          line=line) from None
    except yaml.YAMLError as err:
        raise ConfigError(f"not valid YAML in {source}: {err}") from None
    if root is None:
        raise ConfigError(f"{source} is empty")
    marks: dict = {}
    _collect(root, "", marks)
    return data, marks


# ----------------------------------------------------------------------
# Typed field access
# ----------------------------------------------------------------------

class _Section:
    """One mapping level: typed ``take``, then ``finish`` rejects leftovers."""

    def __init__(self, data, marks: dict, path: str):
        if not isinstance(data, dict):
            raise ConfigError(
                f"expected a mapping, got {type(data).__name__}",
                path=path or "top level", line=marks.get(path))
        self.data = dict(data)
        self.marks = marks
        self.path = path

    def _child(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def line(self, key: str):
        return self.marks.get(self._child(key))

    def error(self, key: str, message: str):
        raise ConfigError(message, path=self._child(key),
                          line=self.line(key))

    def take(self, key: str, default=_MISSING):
        if key in self.data:
            return self.data.pop(key)
        if default is _MISSING:
            raise ConfigError(f"missing required key {key!r}",
                              path=self.path or "top level",
                              line=self.marks.get(self.path))
        return default

    def section(self, key: str, required: bool = True):
        value = self.take(key, _MISSING if required else None)
        if value is None:
            return None
        return _Section(value, self.marks, self._child(key))

    def finish(self):
        if self.data:
            key = sorted(self.data)[0]
            self.error(key, f"unknown key {key!r}")


def _as_str(section: _Section, key: str, value):
    if not isinstance(value, str) or not value:
        section.error(key, f"expected a non-empty string, got {value!r}")
    return value


def _as_bool(section: _Section, key: str, value):
    if not isinstance(value, bool):
        section.error(key, f"expected true or false, got {value!r}")
    return value


def _as_int(section: _Section, key: str, value):
    if isinstance(value, bool) or not isinstance(value, int):
        section.error(key, f"expected an integer, got {value!r}")
    return int(value)


def _as_float(section: _Section, key: str, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        section.error(key, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        section.error(key, f"expected a finite number, got {value!r}")
    return value


def _as_vector(section: _Section, key: str, value):
    if not isinstance(value, list) or not value:
        section.error(key, f"expected a non-empty list of numbers, "
                           f"got {value!r}")
    return tuple(_as_float(section, key, v) for v in value)


def _as_params(section: _Section, key: str, value):
    if value is None:
        return {}
    if not isinstance(value, dict):
        section.error(key, f"expected a mapping, got {value!r}")
    bad = [k for k in value if not isinstance(k, str)]
    if bad:
        section.error(key, f"parameter names must be strings, got {bad!r}")
    return dict(value)


# ----------------------------------------------------------------------
# Config dataclasses
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class InitialSpec:
    """Where trajectories start: explicit points or a seeded batch.

    ``form`` is one of ``w``/``x``/``w_batch``/``x_batch``/``random``;
    ``points`` holds the explicit vectors (one per trajectory) for the
    first four forms, and for ``random`` the batch is drawn at run time.
    """

    form: str
    points: tuple = ()
    count: int = 0
    scale: float = 1.0
    space: str = "x"

    def to_dict(self) -> dict:
        if self.form == "random":
            return {"random": {"count": self.count, "scale": self.scale,
                               "space": self.space}}
        if self.form in ("w", "x"):
            return {self.form: list(self.points[0])}
        return {self.form: [list(p) for p in self.points]}


@dataclass(frozen=True)
class OrderGroup:
    """One convergence study: a stage count and its step-size ladder."""

    stages: int
    dts: tuple

    def to_dict(self) -> dict:
        return {"stages": self.stages, "dts": list(self.dts)}


@dataclass(frozen=True)
class OutputSpec:
    """What the run writes: samples, drift series, orders, or a strobe."""

    kind: str
    strobe_period_steps: Optional[int] = None
    include_x: bool = False
    plot_columns: tuple = ()
    order_groups: tuple = ()
    reference_tol: float = 1e-13

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "include_x": self.include_x}
        if self.plot_columns:
            out["plot_columns"] = list(self.plot_columns)
        if self.kind == "strobe":
            out["strobe_period_steps"] = self.strobe_period_steps
        if self.kind == "order":
            out["order_groups"] = [g.to_dict() for g in self.order_groups]
            out["reference_tol"] = self.reference_tol
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully validated experiment: what to build, run, and write."""

    name: str
    description: str
    realization_id: str
    realization_params: dict
    hamiltonian_name: str
    hamiltonian_params: dict
    initial: InitialSpec
    integrator: IntegratorConfig
    t_span: tuple
    output: OutputSpec
    seed: int
    output_path: str

    def to_dict(self) -> dict:
        """Normalized plain mapping; re-validates identically."""
        cfg = self.integrator
        return {
            "experiment": self.name,
            "description": self.description,
            "realization": {"id": self.realization_id,
                            "params": dict(self.realization_params)},
            "hamiltonian": {"name": self.hamiltonian_name,
                            "params": dict(self.hamiltonian_params)},
            "initial": self.initial.to_dict(),
            "integrator": {
                "method": cfg.method, "stages": cfg.stages, "dt": cfg.dt,
                "stage_tol": cfg.stage_tol,
                "max_stage_iters": cfg.max_stage_iters,
                "solver": cfg.solver, "separable": cfg.separable,
            },
            "t_span": [self.t_span[0], self.t_span[1]],
            "output": self.output.to_dict(),
            "seed": self.seed,
            "output_path": self.output_path,
        }


# ----------------------------------------------------------------------
# Section validators
# ----------------------------------------------------------------------

def _validate_initial(section: _Section) -> InitialSpec:
    present = [f for f in _INITIAL_FORMS if f in section.data]
    if len(present) != 1:
        raise ConfigError(
            f"exactly one of {', '.join(_INITIAL_FORMS)} is required"
            + (f"; got {present}" if present else ""),
            path=section.path, line=section.marks.get(section.path))
    form = present[0]
    value = section.take(form)
    section.finish()
    if form in ("w", "x"):
        return InitialSpec(form=form,
                           points=(_as_vector(section, form, value),))
    if form in ("w_batch", "x_batch"):
        if not isinstance(value, list) or not value:
            section.error(form, "expected a non-empty list of vectors")
        points = tuple(_as_vector(section, form, v) for v in value)
        if len({len(p) for p in points}) != 1:
            section.error(form, "all batch vectors must have equal length")
        return InitialSpec(form=form, points=points)
    sub = _Section(value, section.marks, section._child("random"))
    count = _as_int(sub, "count", sub.take("count"))
    if count < 1:
        sub.error("count", f"count must be >= 1, got {count}")
    scale = _as_float(sub, "scale", sub.take("scale", 1.0))
    if scale <= 0:
        sub.error("scale", f"scale must be positive, got {scale}")
    space = _as_str(sub, "space", sub.take("space", "x"))
    if space not in ("w", "x"):
        sub.error("space", f"space must be 'w' or 'x', got {space!r}")
    sub.finish()
    return InitialSpec(form="random", count=count, scale=scale, space=space)


def _validate_integrator(section: _Section) -> IntegratorConfig:
    method = _as_str(section, "method", section.take("method"))
    stages = _as_int(section, "stages", section.take("stages", 1))
    dt = _as_float(section, "dt", section.take("dt"))
    stage_tol = _as_float(section, "stage_tol",
                          section.take("stage_tol", 1e-13))
    max_iters = _as_int(section, "max_stage_iters",
                        section.take("max_stage_iters", 100))
    solver = _as_str(section, "solver", section.take("solver", "fixed_point"))
    separable = _as_bool(section, "separable",
                         section.take("separable", False))
    section.finish()
    try:
        return IntegratorConfig(method=method, stages=stages, dt=dt,
                                stage_tol=stage_tol,
                                max_stage_iters=max_iters, solver=solver,
                                separable=separable)
    except ConfigurationError as err:
        raise ConfigError(str(err), path=section.path,
                          line=section.marks.get(section.path)) from None


def _validate_output(section: _Section) -> OutputSpec:
    kind = _as_str(section, "kind", section.take("kind"))
    if kind not in _OUTPUT_KINDS:
        section.error("kind", f"kind must be one of "
                              f"{', '.join(_OUTPUT_KINDS)}, got {kind!r}")
    period = section.take("strobe_period_steps", None)
    if kind == "strobe":
        if period is None:
            section.error("kind", "kind 'strobe' requires "
                                  "strobe_period_steps")
        period = _as_int(section, "strobe_period_steps", period)
        if period < 1:
            section.error("strobe_period_steps",
                          f"must be >= 1, got {period}")
    elif period is not None:
        section.error("strobe_period_steps",
                      f"only valid for kind 'strobe', not {kind!r}")
    include_x = _as_bool(section, "include_x",
                         section.take("include_x", False))
    columns = section.take("plot_columns", None)
    if columns is None:
        columns = ()
    else:
        if not isinstance(columns, list) or not columns:
            section.error("plot_columns",
                          "expected a non-empty list of column names")
        columns = tuple(_as_str(section, "plot_columns", c) for c in columns)
    groups_raw = section.take("order_groups", None)
    ref_tol_raw = section.take("reference_tol", None)
    groups: tuple = ()
    ref_tol = 1e-13
    if kind == "order":
        if groups_raw is None:
            section.error("kind", "kind 'order' requires order_groups")
        if not isinstance(groups_raw, list) or not groups_raw:
            section.error("order_groups",
                          "expected a non-empty list of groups")
        built = []
        for i, g in enumerate(groups_raw):
            sub = _Section(g, section.marks,
                           f"{section._child('order_groups')}[{i}]")
            stages = _as_int(sub, "stages", sub.take("stages"))
            dts = _as_vector(sub, "dts", sub.take("dts"))
            if len(dts) < 3:
                sub.error("dts", f"need at least 3 step sizes, got "
                                 f"{len(dts)}")
            if any(d <= 0 for d in dts) or any(
                    b >= a for a, b in zip(dts, dts[1:])):
                sub.error("dts", "step sizes must be positive and strictly "
                                 "decreasing")
            sub.finish()
            built.append(OrderGroup(stages=stages, dts=dts))
        groups = tuple(built)
        if ref_tol_raw is not None:
            ref_tol = _as_float(section, "reference_tol", ref_tol_raw)
            if ref_tol < 1e-13:
                section.error("reference_tol",
                              f"must be >= 1e-13, got {ref_tol}")
    else:
        if groups_raw is not None:
            section.error("order_groups",
                          f"only valid for kind 'order', not {kind!r}")
        if ref_tol_raw is not None:
            section.error("reference_tol",
                          f"only valid for kind 'order', not {kind!r}")
    section.finish()
    return OutputSpec(kind=kind, strobe_period_steps=period,
                      include_x=include_x, plot_columns=columns,
                      order_groups=groups, reference_tol=ref_tol)


# ----------------------------------------------------------------------
# Entry points
# ----------------------------------------------------------------------

def validate_config(data, marks: Optional[dict] = None,
                    source: str = "config") -> ExperimentConfig:
    """Validate a parsed mapping against the schema.

    ``marks`` (field path -> source line) enriches error messages when
    the mapping came from a file; programmatic mappings validate without
    line information.
    """
    top = _Section(data, marks or {}, "")
    name = _as_str(top, "experiment", top.take("experiment", "experiment"))
    description = top.take("description", "")
    if description:
        description = _as_str(top, "description", description)

    realization = top.section("realization")
    rid = _as_str(realization, "id", realization.take("id"))
    rparams = _as_params(realization, "params",
                         realization.take("params", None))
    realization.finish()

    hamiltonian = top.section("hamiltonian")
    hname = _as_str(hamiltonian, "name", hamiltonian.take("name"))
    hparams = _as_params(hamiltonian, "params",
                         hamiltonian.take("params", None))
    hamiltonian.finish()

    initial = _validate_initial(top.section("initial"))
    integrator = _validate_integrator(top.section("integrator"))

    span_raw = top.take("t_span")
    if not isinstance(span_raw, list) or len(span_raw) != 2:
        top.error("t_span", f"expected [t0, t_end], got {span_raw!r}")
    t_span = (_as_float(top, "t_span", span_raw[0]),
              _as_float(top, "t_span", span_raw[1]))

    output = _validate_output(top.section("output"))
    if output.kind == "order" and initial.form not in ("w", "x"):
        top.error("output", "kind 'order' requires a single initial "
                            "condition (initial.w or initial.x)")

    seed = _as_int(top, "seed", top.take("seed", 0))
    output_path = _as_str(top, "output_path",
                          top.take("output_path", name))
    top.finish()
    return ExperimentConfig(
        name=name, description=description, realization_id=rid,
        realization_params=rparams, hamiltonian_name=hname,
        hamiltonian_params=hparams, initial=initial, integrator=integrator,
        t_span=t_span, output=output, seed=seed, output_path=output_path)


def load_config(path: str) -> ExperimentConfig:
    """Read and validate an experiment file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read {path!r}: {err.strerror}") from None
    data, marks = _parse_yaml(text, path)
    return validate_config(data, marks, source=path)
