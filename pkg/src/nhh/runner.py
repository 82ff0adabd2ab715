"""Batch runner behind the ``nhh`` command.

A run is described by one JSON document (see ``config_schema.json``). Every
run writes ``<stem>.csv`` with one row per output time and
``<stem>.summary.json`` with per-invariant residuals, pass/fail flags and the
normalized configuration. Both files are byte-for-byte reproducible for a
fixed configuration, so wall time goes to the console instead.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .errors import ConfigError, NHHError, PhysicsError
from .evolution import (
    coriolis_from_map,
    integrate_dyson,
    integrate_heisenberg_pair,
    make_compatible_initial,
    p_space_expectations as dyson_p_expectations,
    s_space_expectations,
)
from .integrate import TimeGrid
from .linalg import as_matrix, dag, fro, hermitian_part, rel_diff, right_divide, sorted_spectrum
from .metric import (
    Hamiltonian,
    cross_picture_expectation,
    dyson_from_metric,
    hermitize,
    intertwining_residual,
    isospectrality_gap,
    quasi_herm_residual,
    solve_metric,
    to_f_space,
)
from .models import HamiltonianSchedule, ModelSpec, build_model, preset_observable
from .stationary import (
    StationaryScenario,
    observable_at,
    omega_at,
    p_space_expectations,
    partner_h_at,
    theta_at,
)

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_IO = 4

CSV_COLUMNS = (
    "t",
    "expectation_S",
    "expectation_P",
    "r_quasi_herm",
    "r_conj_consistency",
    "r_metric_const",
    "r_partner_const",
    "r_metric_factorization",
    "r_h_observability",
    "theta_min_eig",
)

DEFAULT_TOLERANCES = {
    "real_spectrum": 1e-9,
    "intertwining": 1e-10,
    "dyson_factorization": 1e-10,
    "partner_hermiticity": 1e-9,
    "isospectrality": 1e-9,
    "cross_picture": 1e-9,
    "metric_const": 1e-8,
    "partner_const": 1e-8,
    "spectrum_constancy": 1e-9,
    "expectation_stationary": 1e-8,
    "expectation_general": 1e-6,
    "heisenberg_closed_form": 1e-6,
    "closed_form_vs_ode": 1e-7,
    "quasi_herm": 1e-6,
    "conj_consistency": 1e-6,
    "metric_factorization": 1e-6,
    "coriolis_fd": 1e-5,
}

N_CROSS_PICTURE_SAMPLES = 100


def _schema() -> dict:
    return json.loads(resources.files("nhh").joinpath("config_schema.json").read_text(encoding="utf-8"))


def matrix_literal(m) -> list:
    """Encode a complex matrix as nested ``[re, im]`` pairs."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in a]
    return [matrix_literal(row) for row in a]


def from_literal(lit, name: str) -> np.ndarray:
    try:
        a = np.asarray(lit, dtype=float)
    except ValueError:
        raise ConfigError(f"{name}: ragged matrix literal") from None
    if a.shape[-1:] != (2,):
        raise ConfigError(f"{name}: entries must be [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


@dataclass(frozen=True, eq=False)
class RunConfig:
    name: str
    model: ModelSpec
    scenario: str
    t0: float
    t_end: float
    output_grid_step: float
    integrator_dt: float
    metric_weights: tuple | None
    dyson_mode: str
    observable: Any
    state: Any
    tolerances: dict
    seed: int
    output_path: str | None
    echo: dict = field(repr=False)


def parse_config(doc: dict, name: str = "run", *, scenario: str | None = None,
                 output: str | None = None, dt: float | None = None) -> RunConfig:
    """Validate a config document, apply overrides and fill defaults.

    Raises
    ------
    ConfigError
        Naming the offending field.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    doc = copy.deepcopy(doc)
    if scenario is not None:
        doc["scenario"] = scenario
    if output is not None:
        doc["output_path"] = output
    if dt is not None:
        doc["integrator_dt"] = dt
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config field '{where}': {e.message}") from None

    echo = {
        "name": doc.get("name", name),
        "model": {"kind": doc["model"]["kind"], "params": dict(doc["model"].get("params", {}))},
        "scenario": doc["scenario"],
        "t0": doc.get("t0", 0.0),
        "t_end": doc.get("t_end", 2.0),
        "output_grid_step": doc.get("output_grid_step", 0.01),
        "integrator_dt": doc.get("integrator_dt", 1e-3),
        "metric_weights": doc.get("metric_weights"),
        "dyson_mode": doc.get("dyson_mode", "positive-root"),
        "observable": doc.get("observable"),
        "state": doc.get("state"),
        "tolerances": {**DEFAULT_TOLERANCES, **doc.get("tolerances", {})},
        "seed": doc.get("seed", 0),
    }
    for key in ("dim", "matrix"):
        if key in doc["model"]:
            echo["model"][key] = doc["model"][key]
    if "output_path" in doc:
        echo["output_path"] = doc["output_path"]

    if not echo["t_end"] > echo["t0"]:
        raise ConfigError("config field 't_end': must exceed t0")
    if not echo["integrator_dt"] <= echo["output_grid_step"]:
        raise ConfigError("config field 'integrator_dt': must not exceed output_grid_step")
    matrix = echo["model"].get("matrix")
    model = ModelSpec(
        echo["model"]["kind"],
        echo["model"]["params"],
        echo["model"].get("dim"),
        None if matrix is None else from_literal(matrix, "model/matrix"),
    )
    obs = echo["observable"]
    return RunConfig(
        name=echo["name"],
        model=model,
        scenario=echo["scenario"],
        t0=float(echo["t0"]),
        t_end=float(echo["t_end"]),
        output_grid_step=float(echo["output_grid_step"]),
        integrator_dt=float(echo["integrator_dt"]),
        metric_weights=None if echo["metric_weights"] is None else tuple(echo["metric_weights"]),
        dyson_mode=echo["dyson_mode"],
        observable=from_literal(obs, "observable") if isinstance(obs, list) else obs,
        state=None if echo["state"] is None else from_literal(echo["state"], "state"),
        tolerances=echo["tolerances"],
        seed=int(echo["seed"]),
        output_path=echo.get("output_path"),
        echo=echo,
    )


def load_config(path, **overrides) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {p} is not valid JSON: {e}") from None
    return parse_config(doc, p.stem, **overrides)


def output_stem(cfg: RunConfig, root: str | os.PathLike | None = None) -> Path:
    """Resolve the output stem; relative paths go under ``root`` or ``$NHH_OUTPUT_DIR``."""
    p = Path(cfg.output_path or cfg.name)
    if p.suffix in (".csv", ".json"):
        p = p.with_suffix("")
    if not p.is_absolute():
        p = Path(root or os.environ.get("NHH_OUTPUT_DIR") or ".") / p
    return p


class Checks:
    """Ordered invariant ledger for one run."""

    def __init__(self, tolerances: dict):
        self.tol = tolerances
        self.items: list[dict] = []
        self.prefix = ""

    def below(self, name: str, measured: float, key: str | None = None):
        thr = self.tol[key or name]
        m = float(measured)
        ok = math.isfinite(m) and m < thr
        self.items.append({"name": self.prefix + name, "measured": m if math.isfinite(m) else None, "comparison": "<",
                           "threshold": thr, "passed": bool(ok)})

    def above(self, name: str, measured: float, threshold: float = 0.0):
        m = float(measured)
        ok = math.isfinite(m) and m > threshold
        self.items.append({"name": self.prefix + name, "measured": m if math.isfinite(m) else None, "comparison": ">",
                           "threshold": threshold, "passed": bool(ok)})

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.items)


@dataclass
class RunReport:
    exit_code: int
    summary: dict
    rows: list = field(default_factory=list)

    @property
    def status(self) -> str:
        return self.summary["status"]


# -- scenario helpers ------------------------------------------------------


def _observable(cfg: RunConfig, dim: int) -> np.ndarray:
    obs = cfg.observable
    if obs is None:
        obs = "sigma_z" if dim == 2 else "site_occupation(1)"
    if isinstance(obs, str):
        return preset_observable(obs, dim).matrix
    return preset_observable("custom", dim, obs).matrix


def _state(cfg: RunConfig, dim: int) -> np.ndarray:
    if cfg.state is not None:
        v = np.asarray(cfg.state)
        if v.shape != (dim,):
            raise ConfigError(f"config field 'state': expected {dim} entries, got {v.size}")
        if not np.linalg.norm(v) > 0:
            raise ConfigError("config field 'state': must be nonzero")
        return v
    rng = np.random.default_rng([cfg.seed, 0])
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _grid(cfg: RunConfig) -> TimeGrid:
    return TimeGrid.uniform(cfg.t0, cfg.t_end, cfg.output_grid_step)


def _metric_and_map(cfg: RunConfig, H0: np.ndarray):
    theta = solve_metric(H0, cfg.metric_weights, cfg.tolerances["real_spectrum"])
    return theta, dyson_from_metric(theta.theta, cfg.dyson_mode)


def _spectrum_info(cfg: RunConfig, H0: np.ndarray) -> dict:
    w = sorted_spectrum(np.linalg.eigvals(H0))
    rho = float(np.max(np.abs(w)))
    real = bool(np.all(np.abs(w.imag) < cfg.tolerances["real_spectrum"] * (rho + 1)))
    return {"eigenvalues": matrix_literal(w), "spectral_radius": rho, "phase": "unbroken" if real else "broken"}


def _metric_checks(cfg: RunConfig, H0, theta, omega, checks: Checks) -> dict:
    partner = hermitize(H0, omega.omega, cfg.tolerances["partner_hermiticity"])
    checks.below("intertwining", intertwining_residual(H0, theta.theta))
    checks.above("theta_min_eig", theta.min_eig)
    checks.below("dyson_factorization", rel_diff(omega.metric, theta.theta))
    checks.below("partner_hermiticity", partner.herm_residual)
    checks.below("isospectrality", isospectrality_gap(H0, partner.h))
    return {
        "theta": matrix_literal(theta.theta),
        "omega": matrix_literal(omega.omega),
        "partner_h": matrix_literal(partner.h),
        "theta_min_eig": theta.min_eig,
    }


def _cross_picture_samples(cfg: RunConfig, theta, omega, checks: Checks):
    rng = np.random.default_rng([cfg.seed, 1])
    d = theta.dim
    gap = imag = 0.0
    for _ in range(N_CROSS_PICTURE_SAMPLES):
        psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        a = hermitian_part(x)
        vs, vp = cross_picture_expectation(psi, to_f_space(a, omega.omega), a, theta.theta, omega.omega)
        gap = max(gap, abs(vs - vp))
        imag = max(imag, abs(vs.imag), abs(vp.imag))
    checks.below("cross_picture", gap)
    checks.below("cross_picture_imag", imag, "cross_picture")


def _spectrum_gap(a: np.ndarray, ops: np.ndarray) -> float:
    ref = np.linalg.eigvalsh(hermitian_part(a))
    return max(float(np.max(np.abs(sorted_spectrum(np.linalg.eigvals(A)) - ref))) for A in ops)


def _row(t, es, ep, rq, rc, rm, rp, rf, rh, mn) -> dict:
    return dict(zip(CSV_COLUMNS, (t, es.real, ep.real, rq, rc, rm, rp, rf, rh, mn)))


def _stationary_block(cfg: RunConfig, H0, theta, omega, a, psi, checks: Checks) -> tuple[list, dict]:
    sc = StationaryScenario(Hamiltonian(H0), omega, theta, cfg.t0)
    grid = _grid(cfg)
    times = grid.points
    th0 = theta.theta
    h0 = sc.partner0.h
    omegas = np.stack([omega_at(sc, t).omega for t in times])
    thetas = np.stack([theta_at(sc, t).theta for t in times])
    partners = [partner_h_at(sc, t) for t in times]
    A_closed = np.stack([observable_at(sc, a, t).matrix for t in times])
    pair = integrate_heisenberg_pair(A_closed[0], th0, HamiltonianSchedule.constant(H0), grid, cfg.integrator_dt)

    es = s_space_expectations(np.broadcast_to(th0, A_closed.shape), A_closed, psi)
    ep = p_space_expectations(sc, a, psi, times)
    r_metric = np.array([rel_diff(th, th0) for th in thetas])
    r_partner = np.array([rel_diff(p.h, h0) for p in partners])
    r_herm = np.array([p.herm_residual for p in partners])
    r_quasi = np.array([quasi_herm_residual(A, th0) for A in A_closed])
    r_fact = np.array([fro(pth - th) / fro(th0) for pth, th in zip(pair.theta, thetas)])
    r_hobs = np.array([quasi_herm_residual(H0, th) for th in thetas])
    mins = np.linalg.eigvalsh(thetas)[:, 0]
    closed_gap = float(np.max(np.linalg.norm(pair.a_op - A_closed, axis=(1, 2))))

    checks.below("metric_constancy", r_metric.max(), "metric_const")
    checks.below("partner_constancy", r_partner.max(), "partner_const")
    checks.below("partner_hermiticity_over_run", r_herm.max(), "partner_hermiticity")
    checks.below("stationary_expectation_cross_picture", np.max(np.abs(es - ep)), "expectation_stationary")
    checks.below("observable_spectrum_constancy", _spectrum_gap(a, A_closed), "spectrum_constancy")
    checks.below("observable_quasi_hermiticity", r_quasi.max(), "quasi_herm")
    checks.below("heisenberg_vs_closed_form", closed_gap, "heisenberg_closed_form")
    checks.below("pair_conj_consistency", pair.residuals["conj_consistency"].max(), "conj_consistency")
    checks.below("metric_identity_factorization", r_fact.max(), "metric_factorization")
    checks.above("theta_min_eig_over_run", mins.min())

    rows = [
        _row(t, es[i], ep[i], r_quasi[i], pair.residuals["conj_consistency"][i], r_metric[i], r_partner[i],
             r_fact[i], r_hobs[i], mins[i])
        for i, t in enumerate(times)
    ]
    return rows, {"omega_final": matrix_literal(omegas[-1]), "n_points": int(times.size)}


def _general_block(cfg: RunConfig, sched, theta, omega, a, psi, checks: Checks) -> tuple[list, dict]:
    grid = _grid(cfg)
    times = grid.points
    th0 = theta.theta
    dyson = integrate_dyson(omega.omega, sched, grid, cfg.integrator_dt)
    A0 = make_compatible_initial(a, omega.omega)
    pair = integrate_heisenberg_pair(A0.matrix, th0, sched, grid, cfg.integrator_dt)

    es = s_space_expectations(pair.theta, pair.a_op, psi)
    ep = dyson_p_expectations(dyson.omega, a, psi)
    partners = [right_divide(om @ h, om) for om, h in zip(dyson.omega, dyson.sigma)]
    r_metric = np.array([rel_diff(th, th0) for th in pair.theta])
    r_partner = np.array([rel_diff(p, partners[0]) for p in partners])
    r_fact = np.array([fro(pth - th) / fro(th0) for pth, th in zip(pair.theta, dyson.theta)])
    r_quasi = pair.residuals["quasi_herm"]
    r_conj = pair.residuals["conj_consistency"]
    mins = pair.residuals["theta_min_eig"]

    checks.below("pair_quasi_hermiticity", r_quasi.max(), "quasi_herm")
    checks.below("pair_conj_consistency", r_conj.max(), "conj_consistency")
    checks.below("metric_identity_factorization", r_fact.max(), "metric_factorization")
    checks.below("heisenberg_expectation_cross_picture", np.max(np.abs(es - ep)), "expectation_general")
    checks.below("observable_spectrum_constancy", _spectrum_gap(a, pair.a_op), "spectrum_constancy")
    checks.above("theta_min_eig_over_run", mins.min())

    rows = [
        _row(t, es[i], ep[i], r_quasi[i], r_conj[i], r_metric[i], r_partner[i], r_fact[i],
             pair.residuals["h_observability"][i], mins[i])
        for i, t in enumerate(times)
    ]
    info = {
        "omega_final": matrix_literal(dyson.omega[-1]),
        "n_points": int(times.size),
        "max_h_observability": float(pair.residuals["h_observability"].max()),
        "max_metric_drift": float(r_metric.max()),
    }
    return rows, info


def _closed_form_check(cfg: RunConfig, H0, theta, omega, checks: Checks):
    sc = StationaryScenario(Hamiltonian(H0), omega, theta, cfg.t0)
    grid = _grid(cfg)
    traj = integrate_dyson(omega.omega, HamiltonianSchedule.constant(H0), grid, cfg.integrator_dt)
    gap = max(rel_diff(om, omega_at(sc, t).omega) for om, t in zip(traj.omega, grid.points))
    checks.below("closed_form_vs_ode", gap, "closed_form_vs_ode")


def _coriolis_check(cfg: RunConfig, sched, omega, checks: Checks):
    fine = TimeGrid.uniform(cfg.t0, cfg.t_end, cfg.integrator_dt)
    traj = integrate_dyson(omega.omega, sched, fine, cfg.integrator_dt)
    gap = max(fro(coriolis_from_map(traj, i, "finite-difference") - sched(float(t)))
              for i, t in enumerate(traj.times))
    checks.below("coriolis_finite_difference", gap, "coriolis_fd")


def _execute(cfg: RunConfig, checks: Checks) -> tuple[list, dict]:
    sched, _ = build_model(cfg.model)
    H0 = sched(cfg.t0)
    results: dict = {"model": sched.label, "dim": sched.dim}
    if cfg.scenario == "spectrum":
        results.update(_spectrum_info(cfg, H0))
        return [], results

    theta, omega = _metric_and_map(cfg, H0)
    a = _observable(cfg, sched.dim)
    psi = _state(cfg, sched.dim)
    results.update(_spectrum_info(cfg, H0))

    if cfg.scenario == "metric":
        results.update(_metric_checks(cfg, H0, theta, omega, checks))
        _cross_picture_samples(cfg, theta, omega, checks)
        A = to_f_space(a, omega.omega)
        vs, vp = cross_picture_expectation(psi, A, a, theta.theta, omega.omega)
        row = _row(cfg.t0, vs, vp, quasi_herm_residual(A, theta.theta), 0.0, 0.0, 0.0,
                   rel_diff(omega.metric, theta.theta), quasi_herm_residual(H0, theta.theta), theta.min_eig)
        return [row], results

    if cfg.scenario == "stationary":
        if not sched.is_constant:
            raise ConfigError("config field 'scenario': stationary evolution needs a time-independent model")
        rows, info = _stationary_block(cfg, H0, theta, omega, a, psi, checks)
        results["stationary"] = info
        return rows, results

    if cfg.scenario == "general":
        rows, info = _general_block(cfg, sched, theta, omega, a, psi, checks)
        results["general"] = info
        return rows, results

    # verify: every invariant that applies to the configured model
    results["metric"] = _metric_checks(cfg, H0, theta, omega, checks)
    _cross_picture_samples(cfg, theta, omega, checks)
    # time-independent invariants are checked on H frozen at t0
    checks.prefix = "stationary/"
    _closed_form_check(cfg, H0, theta, omega, checks)
    s_rows, s_info = _stationary_block(cfg, H0, theta, omega, a, psi, checks)
    results["stationary"] = s_info
    if sched.is_constant:
        return s_rows, results
    checks.prefix = "general/"
    rows, info = _general_block(cfg, sched, theta, omega, a, psi, checks)
    _coriolis_check(cfg, sched, omega, checks)
    results["general"] = info
    return rows, results


def run(cfg: RunConfig) -> RunReport:
    """Execute the configured scenario; nothing is written to disk.

    Raises
    ------
    ConfigError
        For inconsistencies only detectable while building the model.
    """
    checks = Checks(cfg.tolerances)
    rows: list = []
    try:
        rows, results = _execute(cfg, checks)
    except PhysicsError as e:
        summary = {
            "status": "physics_error",
            "error": {"type": type(e).__name__, "message": str(e)},
            "invariants": checks.items,
            "config": cfg.echo,
        }
        return RunReport(EXIT_PHYSICS, summary, [])
    except ConfigError:
        raise
    except NHHError as e:
        raise ConfigError(str(e)) from None

    max_res = {c: float(max(r[c] for r in rows)) for c in CSV_COLUMNS[3:9]} if rows else {}
    ok = checks.passed
    summary = {
        "status": "pass" if ok else "tolerance_fail",
        "scenario": cfg.scenario,
        "invariants": checks.items,
        "max_residuals": max_res,
        "results": results,
        "config": cfg.echo,
    }
    return RunReport(EXIT_OK if ok else EXIT_TOLERANCE, summary, rows)


def verify_suite(cfg: RunConfig) -> RunReport:
    """Run the full invariant suite against the configured model."""
    if cfg.scenario != "verify":
        cfg = parse_config(cfg.echo, cfg.name, scenario="verify")
    return run(cfg)


def csv_text(rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([repr(float(r[c])) for c in CSV_COLUMNS])
    return buf.getvalue()


def summary_text(summary: dict) -> str:
    return json.dumps(summary, indent=2, allow_nan=False) + "\n"


def write_outputs(report: RunReport, stem: Path) -> tuple[Path, Path]:
    csv_path = stem.parent / (stem.name + ".csv")
    json_path = stem.parent / (stem.name + ".summary.json")
    stem.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(report.rows))
    with open(json_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(summary_text(report.summary))
    return csv_path, json_path
