"""Command-line front end: figure reproductions, config-driven runs and the validation report.

    kerrfeedback reproduce fig4 --out out/ --plot
    kerrfeedback run scenario.yaml
    kerrfeedback validate

Every experiment writes one CSV per trace. Each file opens with a block of
``#`` lines recording the software version, parameters, grids, truncation
and solver status, followed by a single header line. Numbers are written
with 17 significant digits and nothing time-dependent is recorded, so a
rerun of the same scenario reproduces the files byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import yaml

from . import __version__, quantum, weak_drive
from .semiclassical import HysteresisError, drive_sweep, hysteresis
from .slh import CircuitParams, QubitParams, kerr_from_qubit
from .validation import FIG3, FIG4, run_validation

EXPERIMENTS = ("bistability", "hysteresis", "g2-ksweep", "g2-map", "g2-drive-sweep",
               "g2-chi-sweep", "weak-drive-compare", "validate")

# grid names each experiment accepts, and those it cannot run without
GRIDS = {
    "bistability": ({"epsilon", "hysteresis_epsilon"}, {"epsilon"}),
    "hysteresis": ({"epsilon"}, {"epsilon"}),
    "g2-ksweep": ({"K", "delta_s"}, {"K"}),
    "g2-map": ({"K", "delta_s"}, {"K", "delta_s"}),
    "g2-drive-sweep": ({"eps_over_kappa", "K", "delta_s"}, {"eps_over_kappa"}),
    "g2-chi-sweep": ({"chi", "delta_qT", "K"}, set()),
    "weak-drive-compare": ({"K"}, {"K"}),
    "validate": (set(), set()),
}

PARAM_KEYS = ("gamma", "gamma_f", "kappa", "chi", "delta_s", "delta", "epsilon")
CONFIG_KEYS = {"experiment", "reproduce", "params", "grids", "output", "truncation",
               "p1_form", "unit_mode", "angular_fields", "workers", "name"}
REPRODUCE_KEYS = {"reproduce", "output", "truncation", "unit_mode", "workers"}

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    params: CircuitParams
    experiment: str
    grids: dict = field(default_factory=dict)
    output: Path = Path("out")
    truncation: Optional[int] = None
    name: str = ""
    p1_form: str = "asymmetric"
    unit_mode: str = "verbatim"
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        allowed, required = GRIDS[self.experiment]
        unknown = set(self.grids) - allowed
        if unknown:
            raise ConfigError(f"experiment {self.experiment} does not take grid(s) {sorted(unknown)}")
        missing = required - set(self.grids)
        if missing:
            raise ConfigError(f"experiment {self.experiment} needs grid(s) {sorted(missing)}")
        if self.experiment == "g2-chi-sweep" and not ({"chi", "delta_qT"} & set(self.grids)):
            raise ConfigError("g2-chi-sweep needs a chi or a delta_qT grid")
        if "delta_qT" in self.grids and self.params.qubit is None:
            raise ConfigError("a delta_qT grid needs a qubit block with g and Omega")
        for key, values in self.grids.items():
            arr = np.asarray(values, dtype=float)
            if arr.ndim != 1 or arr.size == 0 or not np.all(np.isfinite(arr)):
                raise ConfigError(f"grid {key!r} must be a nonempty list of finite numbers")
        if self.truncation is not None and self.truncation < 2:
            raise ConfigError("truncation must be >= 2")
        if self.unit_mode not in ("verbatim", "angular"):
            raise ConfigError(f"unit_mode must be verbatim or angular, got {self.unit_mode!r}")
        if self.p1_form not in ("asymmetric", "symmetric"):
            raise ConfigError(f"p1_form must be asymmetric or symmetric, got {self.p1_form!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        object.__setattr__(self, "grids", {k: tuple(float(v) for v in vals) for k, vals in self.grids.items()})
        object.__setattr__(self, "output", Path(self.output))
        if not self.name:
            object.__setattr__(self, "name", self.experiment)

    @property
    def dims(self) -> Optional[tuple[int, int]]:
        return None if self.truncation is None else (self.truncation, self.truncation)


# --- figure recipes ---------------------------------------------------------

TWO_PI = 2.0 * math.pi


def _angular(p: CircuitParams, fields: Sequence[str]) -> CircuitParams:
    return p.replace(**{f: getattr(p, f) * TWO_PI for f in fields})


def _grid(start, stop, num):
    return tuple(float(x) for x in np.linspace(start, stop, num))


def recipe(fig: str, unit_mode: str = "verbatim") -> list[Scenario]:
    """Scenarios reproducing one figure with its reference parameters."""
    angular = unit_mode == "angular"
    g2_base = FIG4.replace(delta=0.0)
    if angular:
        g2_base = _angular(g2_base, ("gamma", "gamma_f"))
    K_axis = _grid(0.0, 3.0, 61)
    common = dict(unit_mode=unit_mode)
    if fig == "fig3":
        p = _angular(FIG3, ("gamma", "gamma_f", "kappa", "chi", "delta_s", "delta")) if angular else FIG3
        # delta = 2.0 pushes p2 below sqrt(3) p1 for either damping form
        monostable = p.replace(delta=p.delta * 2.0 / 4.9)
        return [
            Scenario(p, "bistability", {"epsilon": _grid(0.0, 2.0, 201),
                                        "hysteresis_epsilon": _grid(0.05, 2.0, 40)}, name="fig3", **common),
            Scenario(monostable, "bistability", {"epsilon": _grid(0.0, 2.0, 201)}, name="fig3_monostable", **common),
        ]
    if fig == "fig4":
        return [Scenario(g2_base, "g2-ksweep", {"K": K_axis, "delta_s": (50.0,)}, name="fig4", **common)]
    if fig == "fig5":
        return [Scenario(g2_base, "g2-ksweep", {"K": K_axis, "delta_s": (50.0, 10.0)}, name="fig5", **common)]
    if fig == "fig6":
        return [Scenario(g2_base, "g2-map", {"K": _grid(0.0, 3.0, 31), "delta_s": _grid(0.0, 60.0, 13)},
                         name="fig6", **common)]
    if fig == "fig7":
        eps = (0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0)
        return [Scenario(g2_base, "g2-drive-sweep", {"eps_over_kappa": eps, "K": (K,), "delta_s": (10.0, 30.0, 50.0)},
                         name=f"fig7{panel}", **common) for panel, K in (("a", 1.0), ("b", 2.0))]
    if fig == "fig8":
        q = QubitParams(g=2000.0, Omega=4000.0, delta_qT=25000.0)
        p = CircuitParams.from_qubit(q, gamma=g2_base.gamma, gamma_f=g2_base.gamma_f, kappa=g2_base.kappa,
                                     delta_s=50.0, epsilon=0.1 * g2_base.kappa)
        return [Scenario(p, "g2-chi-sweep", {"delta_qT": (25000.0, 30000.0, 35000.0, 40000.0, 45000.0), "K": (1.0,)},
                         name="fig8", **common)]
    raise ConfigError(f"unknown figure {fig!r}; choose fig3 ... fig8")


FIGURES = ("fig3", "fig4", "fig5", "fig6", "fig7", "fig8")


# --- config files -------------------------------------------------------------

def _number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    return float(value)


def _parse_grid(value, name: str) -> tuple[float, ...]:
    if isinstance(value, dict):
        unknown = set(value) - {"start", "stop", "num"}
        if unknown or len(value) != 3:
            raise ConfigError(f"grid {name!r} as a mapping needs exactly start, stop, num")
        num = value["num"]
        if isinstance(num, bool) or not isinstance(num, int) or num < 1:
            raise ConfigError(f"grid {name!r}: num must be a positive integer")
        return _grid(_number(value["start"], f"{name}.start"), _number(value["stop"], f"{name}.stop"), num)
    if isinstance(value, list):
        return tuple(_number(v, f"{name}[{i}]") for i, v in enumerate(value))
    return (_number(value, name),)


def _parse_params(block) -> CircuitParams:
    if not isinstance(block, dict):
        raise ConfigError("params must be a mapping")
    unknown = set(block) - set(PARAM_KEYS) - {"qubit"}
    if unknown:
        raise ConfigError(f"unknown parameter(s) {sorted(unknown)}")
    missing = {"gamma", "gamma_f", "kappa"} - set(block)
    if missing:
        raise ConfigError(f"missing required parameter(s) {sorted(missing)}")
    values = {k: _number(v, k) for k, v in block.items() if k != "qubit"}
    try:
        if "qubit" in block:
            qb = block["qubit"]
            if not isinstance(qb, dict) or set(qb) != {"g", "Omega", "delta_qT"}:
                raise ConfigError("qubit block needs exactly g, Omega, delta_qT")
            if "chi" in values:
                raise ConfigError("give either chi or a qubit block, not both")
            q = QubitParams(**{k: _number(v, f"qubit.{k}") for k, v in qb.items()})
            return CircuitParams.from_qubit(q, **values)
        return CircuitParams(**values)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path) -> Scenario:
    """Read a YAML (or JSON) scenario file. Unknown keys are errors."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    unknown = set(doc) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)}")
    overrides = {}
    if "output" in doc:
        overrides["output"] = Path(str(doc["output"]))
    if "truncation" in doc:
        t = doc["truncation"]
        if isinstance(t, bool) or not isinstance(t, int):
            raise ConfigError("truncation must be an integer")
        overrides["truncation"] = t
    if "workers" in doc:
        overrides["workers"] = int(_number(doc["workers"], "workers"))

    if "reproduce" in doc:
        extra = set(doc) - REPRODUCE_KEYS
        if extra:
            raise ConfigError(f"reproduce configs take only {sorted(REPRODUCE_KEYS)}; got {sorted(extra)}")
        scenarios = recipe(str(doc["reproduce"]), str(doc.get("unit_mode", "verbatim")))
        # a figure made of several traces maps onto one scenario per trace; the first is the primary one
        return replace(scenarios[0], **overrides)

    if "experiment" not in doc:
        raise ConfigError("config needs an experiment (or reproduce) key")
    experiment = doc["experiment"]
    if experiment == "validate":
        params = FIG4
    else:
        if "params" not in doc:
            raise ConfigError("missing required field 'params'")
        params = _parse_params(doc["params"])
    unit_mode = str(doc.get("unit_mode", "verbatim"))
    if unit_mode == "angular":
        fields = doc.get("angular_fields", ["gamma", "gamma_f"])
        bad = set(fields) - set(PARAM_KEYS)
        if bad:
            raise ConfigError(f"angular_fields names unknown parameter(s) {sorted(bad)}")
        params = _angular(params, fields)
    grids_doc = doc.get("grids", {}) or {}
    if not isinstance(grids_doc, dict):
        raise ConfigError("grids must be a mapping")
    grids = {k: _parse_grid(v, k) for k, v in grids_doc.items()}
    return Scenario(params, str(experiment), grids, name=str(doc.get("name", "")),
                    p1_form=str(doc.get("p1_form", "asymmetric")), unit_mode=unit_mode, **overrides)


def scenarios_for(path) -> list[Scenario]:
    """All scenarios a config file expands to (figure recipes may hold several traces)."""
    scenario = parse_config(path)
    doc = yaml.safe_load(Path(path).read_text())
    if "reproduce" not in doc:
        return [scenario]
    rest = recipe(str(doc["reproduce"]), scenario.unit_mode)[1:]
    keep = dict(output=scenario.output, truncation=scenario.truncation, workers=scenario.workers)
    return [scenario] + [replace(s, **keep) for s in rest]


# --- tables -----------------------------------------------------------------

@dataclass
class Table:
    name: str
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)
    plot: Optional[dict] = None


def params_hash(d: dict) -> str:
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if isinstance(v, (tuple, list)):
        return "x".join(_fmt(x) for x in v)
    return str(v)


def write_csv(table: Table, scenario: Scenario, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{table.name}.csv"
    head = {
        "software": f"kerrfeedback {__version__}",
        "experiment": scenario.experiment,
        "scenario": scenario.name,
        "unit_mode": scenario.unit_mode,
        "params": json.dumps(scenario.params.as_dict(), sort_keys=True),
        "grids": json.dumps({k: list(v) for k, v in scenario.grids.items()}, sort_keys=True),
        "truncation": "auto" if scenario.truncation is None else _fmt(scenario.dims),
    }
    head.update({k: _fmt(v) if not isinstance(v, str) else v for k, v in table.meta.items()})
    head["status"] = "ok" if not table.failures else f"partial ({len(table.failures)} failed)"
    lines = [f"# {k}: {v}" for k, v in head.items()]
    lines += [f"# failed: {msg}" for msg in table.failures]
    lines.append(",".join(table.columns))
    lines += [",".join(_fmt(v) for v in row) for row in table.rows]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def write_plot(table: Table, out_dir: Path) -> Optional[Path]:
    """Vector-graphics rendering of a table; skipped quietly when matplotlib is missing."""
    if table.plot is None or not table.rows:
        return None
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    matplotlib.rcParams["svg.hashsalt"] = "kerrfeedback"
    spec = table.plot
    cols = {c: i for i, c in enumerate(table.columns)}
    names = [spec["x"], *spec["y"]] + ([spec["group"]] if spec.get("group") else [])
    data = np.array([[float(r[cols[c]]) for c in names] for r in table.rows])
    fig, ax = plt.subplots(figsize=(5, 3.6))
    groups = np.unique(data[:, -1]) if spec.get("group") else [None]
    for g in groups:
        sel = data[:, -1] == g if g is not None else np.ones(len(data), bool)
        for j, y in enumerate(spec["y"], start=1):
            label = y if g is None else f"{y}, {spec['group']}={g:g}"
            style = "o" if spec.get("scatter") else "-"
            ax.plot(data[sel, 0], data[sel, j], style, ms=3, label=label)
    ax.set_xlabel(spec["x"])
    if spec.get("logy"):
        ax.set_yscale("log")
    ax.legend(fontsize=7)
    fig.tight_layout()
    path = out_dir / f"{table.name}.svg"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


# --- experiments --------------------------------------------------------------

def _point_dict(p: CircuitParams, **extra) -> dict:
    d = p.as_dict()
    d.update(extra)
    return d


def _exp_bistability(sc: Scenario, executor) -> list[Table]:
    p = sc.params
    sweep = drive_sweep(p, sc.grids["epsilon"], sc.p1_form)
    t = Table(sc.name, ("epsilon", "root_index", "C0_sq", "A0_sq", "stable", "params_hash"),
              meta={"p1": sweep.p1, "p2": sweep.p2, "p1_form": sc.p1_form,
                    "threshold_eps": sweep.threshold_eps, "regime": sweep.results[0].regime,
                    "three_root_window": "none" if sweep.window is None else _fmt(sweep.window)},
              plot={"x": "epsilon", "y": ("A0_sq",), "scatter": True})
    for eps, k, X, A0_sq, stable in sweep.rows():
        t.rows.append((eps, k, X, A0_sq, stable, params_hash(_point_dict(p.replace(epsilon=eps), p1_form=sc.p1_form))))
    tables = [t]
    if "hysteresis_epsilon" in sc.grids:
        hs = replace(sc, experiment="hysteresis", name=f"{sc.name}_hysteresis",
                     grids={"epsilon": sc.grids["hysteresis_epsilon"]})
        tables += _exp_hysteresis(hs, executor)
    return tables


def _exp_hysteresis(sc: Scenario, executor) -> list[Table]:
    p = sc.params
    t = Table(sc.name, ("epsilon", "A0_sq_up", "A0_sq_down", "C0_sq_up", "C0_sq_down", "params_hash"),
              plot={"x": "epsilon", "y": ("A0_sq_up", "A0_sq_down")})
    try:
        h = hysteresis(p, sc.grids["epsilon"])
    except HysteresisError as exc:
        t.failures.append(f"epsilon={exc.epsilon:.17g}: {exc}")
        return [t]
    for k, eps in enumerate(h.epsilon):
        t.rows.append((eps, h.up[k], h.down[k], abs(h.up_states[k].C) ** 2, abs(h.down_states[k].C) ** 2,
                       params_hash(_point_dict(p.replace(epsilon=eps)))))
    t.meta["max_split"] = float(np.max(h.split))
    return [t]


def _g2_point(p: CircuitParams, dims, check: bool):
    """(g2_a, g2_c, mean photon a, dims, converged, residual) or an error string."""
    dims = tuple(dims) if dims is not None else quantum.default_dims(p)
    try:
        state = quantum.solve_circuit(p, dims)
        ga = quantum.g2(state, "a")
        gc = quantum.g2(state, "c")
        converged = None
        if check:
            big = quantum.solve_circuit(p, tuple(d + 2 for d in dims))
            ga2, gc2 = quantum.g2(big, "a").g2, quantum.g2(big, "c").g2
            converged = bool(abs(ga2 - ga.g2) < quantum.CONVERGENCE_RTOL * abs(ga2)
                             and abs(gc2 - gc.g2) < quantum.CONVERGENCE_RTOL * abs(gc2))
        return ga.g2, gc.g2, ga.mean_photon, dims, converged, state.residual
    except (quantum.SteadyStateError, quantum.VacuumStateError, ValueError) as exc:
        return f"{type(exc).__name__}: {exc}"


def _map(executor: Optional[Executor], fn: Callable, items: list):
    return list(executor.map(fn, items)) if executor is not None else [fn(i) for i in items]


def _exp_ksweep(sc: Scenario, executor, as_map: bool = False) -> list[Table]:
    base = sc.params
    ds_grid = sc.grids.get("delta_s", (base.delta_s,))
    points = [base.replace(delta_s=ds).with_K(K) for ds in ds_grid for K in sc.grids["K"]]
    results = _map(executor, partial(_g2_point, dims=sc.dims, check=True), points)
    if as_map:
        cols = ("delta_s", "K", "g2", "truncation", "converged", "params_hash")
        plot = {"x": "K", "y": ("g2",), "group": "delta_s", "logy": True}
    else:
        cols = ("K", "g2_numeric", "g2_analytic", "delta_s", "g2_c", "mean_photon_a", "truncation",
                "converged", "residual", "params_hash")
        plot = {"x": "K", "y": ("g2_numeric", "g2_analytic"), "group": "delta_s", "logy": True}
    t = Table(sc.name, cols, plot=plot)
    worst = 0.0
    for p, res in zip(points, results):
        K = p.K
        if isinstance(res, str):
            t.failures.append(f"delta_s={p.delta_s:.17g}, K={K:.17g}: {res}")
            continue
        ga, gc, n, dims, conv, resid = res
        worst = max(worst, resid)
        h = params_hash(_point_dict(p))
        if as_map:
            t.rows.append((p.delta_s, K, ga, dims, conv, h))
        else:
            try:
                analytic = weak_drive.g2_closed_form(p)
            except ZeroDivisionError:
                analytic = math.nan
            t.rows.append((K, ga, analytic, p.delta_s, gc, n, dims, conv, resid, h))
    t.meta["max_residual"] = worst
    return [t]


def _drive_point(p: CircuitParams, dims, cap: int):
    try:
        r = quantum.converged_g2(p, "a", dims, cap=cap)
        return r.g2, r.mean_photon, r.truncation_used, bool(r.converged)
    except (quantum.SteadyStateError, quantum.VacuumStateError, ValueError) as exc:
        return f"{type(exc).__name__}: {exc}"


def _exp_drive(sc: Scenario, executor) -> list[Table]:
    base = sc.params
    Ks = sc.grids.get("K", (base.K,))
    ds_grid = sc.grids.get("delta_s", (base.delta_s,))
    eps = sc.grids["eps_over_kappa"]
    if any(x <= 0 for x in eps):
        raise ConfigError("eps_over_kappa must be > 0: the undriven circuit is in vacuum and g2 is undefined")
    points = [base.replace(delta_s=ds, epsilon=x * base.kappa).with_K(K) for K in Ks for ds in ds_grid for x in eps]
    results = _map(executor, partial(_drive_point, dims=sc.dims, cap=max(quantum.TRUNCATION_CAP, sc.truncation or 0)),
                   points)
    t = Table(sc.name, ("K", "delta_s", "eps_over_kappa", "g2", "mean_photon", "truncation", "converged", "params_hash"),
              plot={"x": "eps_over_kappa", "y": ("g2",), "group": "delta_s"})
    flagged = 0
    for p, res in zip(points, results):
        x = p.epsilon / p.kappa
        if isinstance(res, str):
            t.failures.append(f"K={p.K:.17g}, delta_s={p.delta_s:.17g}, eps/kappa={x:.17g}: {res}")
            continue
        g, n, dims, conv = res
        flagged += not conv
        t.rows.append((p.K, p.delta_s, x, g, n, dims, conv, params_hash(_point_dict(p))))
    t.meta["unconverged_rows"] = flagged
    return [t]


def _exp_chi(sc: Scenario, executor) -> list[Table]:
    base = sc.params
    K = sc.grids.get("K", (1.0,))[0]
    points, extra = [], []
    if "delta_qT" in sc.grids:
        q = base.qubit
        for dq in sc.grids["delta_qT"]:
            est = kerr_from_qubit(q.g, q.Omega, dq, warn=False)
            qb = QubitParams(q.g, q.Omega, dq)
            points.append(base.replace(chi=est.chi, qubit=qb).with_K(K))
            extra.append((dq, est.valid, est.rabi_ratio, est.dispersive_ratio))
    else:
        for chi in sc.grids["chi"]:
            points.append(base.replace(chi=chi, qubit=None).with_K(K))
            extra.append((math.nan, True, math.nan, math.nan))
    results = _map(executor, partial(_g2_point, dims=sc.dims, check=True), points)
    t = Table(sc.name, ("delta_qT", "chi", "g2", "kerr_valid", "rabi_ratio", "dispersive_ratio", "truncation",
                        "converged", "params_hash"),
              plot={"x": "chi", "y": ("g2",)})
    for p, (dq, valid, rr, dr), res in zip(points, extra, results):
        if isinstance(res, str):
            t.failures.append(f"chi={p.chi:.17g}: {res}")
            continue
        ga, _, _, dims, conv, _ = res
        t.rows.append((dq, p.chi, ga, valid, rr, dr, dims, conv, params_hash(_point_dict(p))))
    return [t]


def _exp_weak(sc: Scenario, executor) -> list[Table]:
    base = sc.params
    points = [base.with_K(K) for K in sc.grids["K"]]
    results = _map(executor, partial(_g2_point, dims=sc.dims, check=False), points)
    t = Table(sc.name, ("K", "g2_quantum", "g2_amplitudes", "g2_closed_form", "g2_collective", "P1", "P2",
                        "P1_leading", "P1_skeleton", "P2_skeleton", "params_hash"),
              plot={"x": "K", "y": ("g2_quantum", "g2_amplitudes", "g2_closed_form"), "logy": True})
    for p, res in zip(points, results):
        if isinstance(res, str):
            t.failures.append(f"K={p.K:.17g}: {res}")
            continue
        try:
            P1, P2 = weak_drive.occupations(weak_drive.solve_amplitudes(p))
            coll = weak_drive.weak_drive_g2(p, "collective")
            closed = weak_drive.g2_closed_form(p)
        except (ValueError, ZeroDivisionError) as exc:
            t.failures.append(f"K={p.K:.17g}: {type(exc).__name__}: {exc}")
            continue
        sP1, sP2 = weak_drive.skeleton_leading_order(p)
        t.rows.append((p.K, res[0], weak_drive.g2_from_occupations(P1, P2), closed, coll, P1, P2,
                       weak_drive.leading_order_p1(p), sP1, sP2, params_hash(_point_dict(p))))
    return [t]


def _exp_validate(sc: Scenario, executor) -> list[Table]:
    report = run_validation()
    t = Table(sc.name, ("check", "status", "value", "detail"))
    for c in report.checks:
        t.rows.append((c.name.replace(",", ";"), c.status, c.value, c.detail.replace(",", ";")))
        if c.passed is False:
            t.failures.append(c.name)
    sc.output.mkdir(parents=True, exist_ok=True)
    (sc.output / f"{sc.name}.txt").write_text(report.to_text() + "\n")
    return [t]


RUNNERS = {
    "bistability": _exp_bistability,
    "hysteresis": _exp_hysteresis,
    "g2-ksweep": _exp_ksweep,
    "g2-map": partial(_exp_ksweep, as_map=True),
    "g2-drive-sweep": _exp_drive,
    "g2-chi-sweep": _exp_chi,
    "weak-drive-compare": _exp_weak,
    "validate": _exp_validate,
}


def run(scenario: Scenario, plot: bool = False, log=print) -> int:
    """Run one scenario, write its tables, return the exit status."""
    executor = ProcessPoolExecutor(scenario.workers) if scenario.workers > 1 else None
    try:
        tables = RUNNERS[scenario.experiment](scenario, executor)
    finally:
        if executor is not None:
            executor.shutdown()
    status = EXIT_OK
    for t in tables:
        path = write_csv(t, scenario, scenario.output)
        log(f"wrote {path} ({len(t.rows)} rows{', %d failed' % len(t.failures) if t.failures else ''})")
        if plot:
            svg = write_plot(t, scenario.output)
            if svg is not None:
                log(f"wrote {svg}")
        if t.failures:
            status = EXIT_PARTIAL
    return status


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kerrfeedback", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"kerrfeedback {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--truncation", type=int, help="photon cutoff per mode (overrides the automatic choice)")
    common.add_argument("--plot", action="store_true", help="also write an SVG per table")
    common.add_argument("--unit-mode", choices=("verbatim", "angular"), default=None,
                        help="angular multiplies the /2pi-annotated reference values by 2pi")
    common.add_argument("--workers", type=int, default=None, help="processes for grid points")
    sub = ap.add_subparsers(dest="command", required=True)
    rp = sub.add_parser("reproduce", parents=[common], help="recompute one figure's traces")
    rp.add_argument("figure", choices=FIGURES)
    rn = sub.add_parser("run", parents=[common], help="run a scenario file (YAML or JSON)")
    rn.add_argument("config", type=Path)
    sub.add_parser("validate", parents=[common], help="write the cross-check report")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "reproduce":
            scenarios = recipe(args.figure, args.unit_mode or "verbatim")
            default_out = Path("out") / args.figure
        elif args.command == "run":
            scenarios = scenarios_for(args.config)
            if args.unit_mode is not None and args.unit_mode != scenarios[0].unit_mode:
                raise ConfigError("set unit_mode inside the config file")
            default_out = None
        else:
            scenarios = [Scenario(FIG4, "validate", name="validation")]
            default_out = Path("out") / "validate"
        overrides = {}
        if args.out is not None:
            overrides["output"] = args.out
        elif default_out is not None:
            overrides["output"] = default_out
        if args.truncation is not None:
            overrides["truncation"] = args.truncation
        if args.workers is not None:
            overrides["workers"] = args.workers
        scenarios = [replace(s, **overrides) for s in scenarios]
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status = EXIT_OK
    for sc in scenarios:
        try:
            status = max(status, run(sc, plot=args.plot))
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    return status


if __name__ == "__main__":
    sys.exit(main())
