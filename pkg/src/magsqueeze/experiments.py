"""Scenario runner: reproduces the protocol's headline studies as data files.

Scenarios
---------
timeseries         driven-frame and rotating-frame branches evolved from the
                   same initial state -> timeseries_full.csv, timeseries_rabi.csv
kappa_sweep        squeezing vs time for a list of magnon loss rates
                   -> sweep_kappa.csv (+ _summary.csv)
temperature_sweep  same for a list of bath temperatures -> sweep_temperature.csv
rate_grid          max squeezing over a kappa x gamma grid (optimized over
                   time and angle) -> grid_maxS.csv, plus the Wigner function
                   at the operating cell's optimal time -> wigner.csv
phase_sweep        squeezing vs time and relative drive phase (driven model
                   only; the phase exists nowhere else) -> phase_sweep.csv
single             one model branch -> trajectory_<model>.csv

Every scenario writes manifest.json first (status "running") and rewrites it
last (status "complete"); a missing completion marks a crashed run.  All file
writes are atomic (temp + rename).  CSV values carry 9 significant digits;
the time column t_ns always comes first.  Sweep cells run on a bounded
process pool; results are merged by sweep index, so fixed-step outputs are
byte-identical for any worker count.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, parse_config
from .hamiltonians import (
    TimeDependentHamiltonian,
    build_effective_np,
    build_quadratic_magnon,
)
from .lindblad import (
    IntegratorSettings,
    LindbladModel,
    Trajectory,
    build_full_master,
    build_rabi_master,
    evolve,
    magnon_collapse,
    rabi_frame_collapse,
)
from .observables import partial_trace_magnon, wigner
from .operators import HilbertSpec, basis_state, fock_projector, product_state, thermal_state
from .params import check_regime, derive

__all__ = [
    "ScenarioError",
    "build_model",
    "initial_state",
    "run_single_model",
    "find_max_squeezing",
    "run_scenario",
    "trajectory_rows",
    "TRAJECTORY_COLUMNS",
]

TRAJECTORY_COLUMNS = (
    "t_ns", "V_min", "theta_opt", "S_dB", "mean_occ", "V11", "V22", "V12", "trace_error",
)


class ScenarioError(RuntimeError):
    """A scenario cell failed; the message names the branch/cell."""


# ---------------------------------------------------------------------------
# model assembly
# ---------------------------------------------------------------------------


def build_model(kind: str, cfg: RunConfig) -> LindbladModel:
    p = cfg.system
    d = derive(p)
    n = cfg.numerics.fock_dim
    if kind == "full":
        return build_full_master(p, d, HilbertSpec(n))
    if kind == "rabi":
        return build_rabi_master(p, d, HilbertSpec(n))
    if kind == "effective":
        spec = HilbertSpec(n)
        return LindbladModel(
            TimeDependentHamiltonian(build_effective_np(d, spec)),
            rabi_frame_collapse(p, d, spec),
            spec,
            label="effective",
        )
    if kind == "quadratic":
        spec = HilbertSpec(n, qubit_present=False)
        return LindbladModel(
            TimeDependentHamiltonian(build_quadratic_magnon(d, n)),
            magnon_collapse(p, d, n),
            spec,
            label="quadratic",
        )
    raise ConfigError(f"unknown model kind {kind!r}")


def initial_state(cfg: RunConfig, spec: HilbertSpec) -> np.ndarray:
    """Magnon thermal/vacuum/Fock state, qubit ground when present."""
    d = derive(cfg.system)
    kind = cfg.scenario.initial_state
    n = spec.fock_dim
    if kind == "thermal":
        rho_m = thermal_state(d.nbar_m, n)
    elif kind == "vacuum":
        rho_m = fock_projector(0, n)
    else:
        rho_m = fock_projector(int(kind.split(":", 1)[1]), n)
    if not spec.qubit_present:
        return rho_m
    return product_state(rho_m, basis_state("qubit_ground", spec))


def integrator_settings(cfg: RunConfig, record_spectrum: bool = True) -> IntegratorSettings:
    num = cfg.numerics
    return IntegratorSettings(
        rtol=num.rtol,
        atol=num.atol,
        fixed_step_us=None if num.fixed_step_ns is None else num.fixed_step_ns * 1e-3,
        record_spectrum=record_spectrum,
    )


def run_single_model(cfg: RunConfig, model_kind: str,
                     checkpoint_times_us=()) -> Trajectory:
    model = build_model(model_kind, cfg)
    rho0 = initial_state(cfg, model.spec)
    return evolve(
        model,
        rho0,
        cfg.numerics.horizon_ns * 1e-3,
        cfg.numerics.output_dt_ns * 1e-3,
        integrator_settings(cfg),
        checkpoint_times_us=checkpoint_times_us,
    )


def find_max_squeezing(traj: Trajectory) -> tuple[float, float, float]:
    """(t_opt_ns, S_max_dB, theta_opt at the max); ties break to the
    earliest grid time."""
    if len(traj.times_ns) == 0:
        raise ValueError("empty trajectory")
    i = int(np.argmax(traj.s_db))
    return float(traj.times_ns[i]), float(traj.s_db[i]), float(traj.theta_opt[i])


# ---------------------------------------------------------------------------
# file output
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def trajectory_rows(traj: Trajectory):
    cols = (traj.times_ns, traj.v_min, traj.theta_opt, traj.s_db,
            traj.mean_occupation, traj.v11, traj.v22, traj.v12, traj.trace_error)
    return np.column_stack(cols)


def write_trajectory_csv(path: Path, traj: Trajectory) -> None:
    write_csv(path, list(TRAJECTORY_COLUMNS), trajectory_rows(traj))


class _Manifest:
    def __init__(self, out_dir: Path, cfg: RunConfig, scenario: str):
        self.path = out_dir / "manifest.json"
        d = derive(cfg.system)
        self.data = {
            "status": "running",
            "scenario": scenario,
            "package_version": __version__,
            "created_utc": datetime.now(timezone.utc).isoformat(),
            "completed_utc": None,
            "config": cfg.to_dict(),
            "derived": dataclasses.asdict(d),
            "regime_warnings": check_regime(d, cfg.system),
            "files": [],
            "runs": [],
            "summary": {},
        }
        self._t0 = time.monotonic()
        self.flush()

    def add_run(self, label: str, stats: dict) -> None:
        self.data["runs"].append({"label": label, "stats": stats})

    def flush(self) -> None:
        _atomic_write(self.path, json.dumps(self.data, indent=2, default=str) + "\n")

    def complete(self, files: list[str], summary: dict | None = None) -> None:
        self.data["files"] = files
        if summary:
            self.data["summary"] = summary
        self.data["wall_seconds"] = round(time.monotonic() - self._t0, 3)
        self.data["completed_utc"] = datetime.now(timezone.utc).isoformat()
        self.data["status"] = "complete"
        self.flush()


# ---------------------------------------------------------------------------
# parallel execution
# ---------------------------------------------------------------------------


def _pool_init():
    # workers run dense matmuls on small matrices: no BLAS oversubscription
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, "1")


def _result_from_trajectory(payload: dict, traj: Trajectory) -> dict:
    return {
        "label": payload["label"],
        "index": payload["index"],
        "rows": trajectory_rows(traj),
        "s_db": traj.s_db,
        "times_ns": traj.times_ns,
        "theta_opt": traj.theta_opt,
        "v_min": traj.v_min,
        "mean_occupation": traj.mean_occupation,
        "trace_error": traj.trace_error,
        "herm_residual": traj.herm_residual,
        "min_eigenvalue": traj.min_eigenvalue,
        "stats": traj.stats,
        "checkpoints": traj.checkpoints,
    }


def _execute_task(payload: dict) -> dict:
    cfg = parse_config(payload["config"])
    try:
        traj = run_single_model(cfg, payload["model"],
                                checkpoint_times_us=payload.get("checkpoints", ()))
    except Exception as exc:
        raise ScenarioError(f"{payload['label']}: {exc}") from exc
    return _result_from_trajectory(payload, traj)


def _execute_chunk(payloads: list[dict]) -> list[dict]:
    """Run a group of cells, integrating same-structure models in lockstep.

    Cells whose models cannot share a batch (different term structure, e.g.
    a T = 0 member of a temperature sweep) fall back to solo integration.
    In fixed-step mode batching is bit-neutral, so sweep output does not
    depend on how cells are grouped across workers.
    """
    from .lindblad import batch_signature, evolve_batch

    if len(payloads) == 1 or any(p.get("checkpoints") for p in payloads):
        return [_execute_task(p) for p in payloads]

    prepared = []
    for p in payloads:
        cfg = parse_config(p["config"])
        try:
            model = build_model(p["model"], cfg)
            rho0 = initial_state(cfg, model.spec)
        except Exception as exc:
            raise ScenarioError(f"{p['label']}: {exc}") from exc
        prepared.append((p, cfg, model, rho0))

    groups: dict[tuple, list] = {}
    for item in prepared:
        p, cfg, model, _ = item
        key = (batch_signature(model), cfg.numerics.horizon_ns, cfg.numerics.output_dt_ns,
               cfg.numerics.rtol, cfg.numerics.atol, cfg.numerics.fixed_step_ns)
        groups.setdefault(key, []).append(item)

    results = []
    for group in groups.values():
        cfg0 = group[0][1]
        try:
            trajs = evolve_batch(
                [g[2] for g in group],
                [g[3] for g in group],
                cfg0.numerics.horizon_ns * 1e-3,
                cfg0.numerics.output_dt_ns * 1e-3,
                integrator_settings(cfg0),
            )
        except Exception as exc:
            labels = ", ".join(g[0]["label"] for g in group)
            raise ScenarioError(f"[{labels}]: {exc}") from exc
        for (p, _, _, _), traj in zip(group, trajs):
            results.append(_result_from_trajectory(p, traj))
    return results


def _run_tasks(payloads: list[dict], jobs: int) -> list[dict]:
    jobs = max(1, min(jobs, len(payloads)))
    if jobs == 1:
        results = _execute_chunk(payloads)
    else:
        chunks = [payloads[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs, initializer=_pool_init) as pool:
            results = [r for chunk in pool.map(_execute_chunk, chunks) for r in chunk]
    return sorted(results, key=lambda r: r["index"])


def _payload(cfg: RunConfig, model: str, label: str, index: int = 0,
             system_updates: dict | None = None, checkpoints=()) -> dict:
    doc = cfg.to_dict()
    if system_updates:
        doc["system"].update(system_updates)
    return {
        "config": doc,
        "model": model,
        "label": label,
        "index": index,
        "checkpoints": tuple(checkpoints),
    }


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------


def run_scenario(cfg: RunConfig, jobs: int = 1, output_dir: str | None = None) -> list[Path]:
    """Dispatch on cfg.scenario.kind; returns the written file paths."""
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    kind = cfg.scenario.kind
    runner = {
        "single": _scenario_single,
        "timeseries": _scenario_timeseries,
        "kappa_sweep": _scenario_kappa_sweep,
        "temperature_sweep": _scenario_temperature_sweep,
        "rate_grid": _scenario_rate_grid,
        "phase_sweep": _scenario_phase_sweep,
    }.get(kind)
    if runner is None:
        raise ConfigError(f"unknown scenario kind {kind!r}")
    return runner(cfg, out, jobs)


def _scenario_single(cfg: RunConfig, out: Path, jobs: int) -> list[Path]:
    model = cfg.scenario.model
    manifest = _Manifest(out, cfg, "single")
    res = _run_tasks([_payload(cfg, model, model)], jobs)[0]
    path = out / f"trajectory_{model}.csv"
    write_csv(path, list(TRAJECTORY_COLUMNS), res["rows"])
    manifest.add_run(model, res["stats"])
    t_opt, s_max, theta = _max_from_result(res)
    manifest.complete([path.name], {"S_max_dB": s_max, "t_opt_ns": t_opt, "theta_opt_rad": theta})
    return [path, manifest.path]


def _scenario_timeseries(cfg: RunConfig, out: Path, jobs: int) -> list[Path]:
    manifest = _Manifest(out, cfg, "timeseries")
    payloads = [
        _payload(cfg, "full", "full", 0),
        _payload(cfg, "rabi", "rabi", 1),
    ]
    results = _run_tasks(payloads, jobs)
    paths = []
    summary = {}
    for res in results:
        path = out / f"timeseries_{res['label']}.csv"
        write_csv(path, list(TRAJECTORY_COLUMNS), res["rows"])
        manifest.add_run(res["label"], res["stats"])
        t_opt, s_max, theta = _max_from_result(res)
        summary[res["label"]] = {"S_max_dB": s_max, "t_opt_ns": t_opt, "theta_opt_rad": theta}
        paths.append(path)
    manifest.complete([p.name for p in paths], summary)
    return paths + [manifest.path]


def _max_from_result(res: dict) -> tuple[float, float, float]:
    i = int(np.argmax(res["s_db"]))
    return float(res["times_ns"][i]), float(res["s_db"][i]), float(res["theta_opt"][i])


def _sweep(cfg: RunConfig, out: Path, jobs: int, *, axis_name: str, values,
           system_field: str, file_stem: str, column_prefix: str, model: str) -> list[Path]:
    manifest = _Manifest(out, cfg, f"{axis_name}_sweep")
    payloads = [
        _payload(cfg, model, f"{axis_name}={v:g}", i, system_updates={system_field: v})
        for i, v in enumerate(values)
    ]
    results = _run_tasks(payloads, jobs)
    t_ns = results[0]["times_ns"]
    header = ["t_ns"] + [f"{column_prefix}{v:g}" for v in values]
    matrix = np.column_stack([t_ns] + [r["s_db"] for r in results])
    path = out / f"{file_stem}.csv"
    write_csv(path, header, matrix)

    summary_rows = []
    summary = {}
    for v, res in zip(values, results):
        manifest.add_run(res["label"], res["stats"])
        t_opt, s_max, theta = _max_from_result(res)
        summary_rows.append((v, s_max, t_opt, theta))
        summary[f"{axis_name}={v:g}"] = {"S_max_dB": s_max, "t_opt_ns": t_opt}
    spath = out / f"{file_stem}_summary.csv"
    write_csv(spath, [axis_name, "S_max_dB", "t_opt_ns", "theta_opt_rad"], summary_rows)
    manifest.complete([path.name, spath.name], summary)
    return [path, spath, manifest.path]


def _scenario_kappa_sweep(cfg: RunConfig, out: Path, jobs: int) -> list[Path]:
    return _sweep(
        cfg, out, jobs,
        axis_name="kappa", values=cfg.scenario.kappa_values_mhz, system_field="kappa",
        file_stem="sweep_kappa", column_prefix="S_dB_kappa_", model=cfg.scenario.model,
    )


def _scenario_temperature_sweep(cfg: RunConfig, out: Path, jobs: int) -> list[Path]:
    return _sweep(
        cfg, out, jobs,
        axis_name="T", values=cfg.scenario.temperature_values_k, system_field="T",
        file_stem="sweep_temperature", column_prefix="S_dB_T_", model=cfg.scenario.model,
    )


def _scenario_rate_grid(cfg: RunConfig, out: Path, jobs: int) -> list[Path]:
    manifest = _Manifest(out, cfg, "rate_grid")
    kappas = cfg.scenario.kappa_values_mhz
    gammas = cfg.scenario.gamma_values_mhz
    payloads = []
    cells = []
    for i, kap in enumerate(kappas):
        for j, gam in enumerate(gammas):
            idx = i * len(gammas) + j
            cells.append((kap, gam))
            payloads.append(_payload(
                cfg, cfg.scenario.model, f"kappa={kap:g},gamma={gam:g}", idx,
                system_updates={"kappa": kap, "gamma": gam},
            ))
    results = _run_tasks(payloads, jobs)

    grid_rows = []
    for (kap, gam), res in zip(cells, results):
        manifest.add_run(res["label"], res["stats"])
        t_opt, s_max, theta = _max_from_result(res)
        grid_rows.append((kap, gam, s_max, t_opt, theta))
    gpath = out / "grid_maxS.csv"
    write_csv(gpath, ["kappa", "gamma", "S_max", "t_opt", "theta_opt"], grid_rows)

    # Wigner function at the operating point's own optimal time
    p = cfg.system
    op_idx = min(
        range(len(cells)),
        key=lambda k: (cells[k][0] - p.kappa) ** 2 + (cells[k][1] - p.gamma) ** 2,
    )
    kap, gam = cells[op_idx]
    t_opt_ns = _max_from_result(results[op_idx])[0]
    wiggle = _run_tasks(
        [_payload(cfg, cfg.scenario.model, f"wigner@kappa={kap:g},gamma={gam:g}", 0,
                  system_updates={"kappa": kap, "gamma": gam},
                  checkpoints=(t_opt_ns * 1e-3,))],
        jobs=1,
    )[0]
    rho = next(iter(wiggle["checkpoints"].values()))
    model = build_model(cfg.scenario.model, cfg)
    rho_m = partial_trace_magnon(rho, model.spec)
    grid = wigner(rho_m, extent=cfg.scenario.wigner_extent, points=cfg.scenario.wigner_points)
    wrows = []
    for iy, im in enumerate(grid.im_axis):
        for ix, re in enumerate(grid.re_axis):
            wrows.append((re, im, grid.values[iy, ix]))
    wpath = out / "wigner.csv"
    write_csv(wpath, ["re_alpha", "im_alpha", "W"], wrows)

    manifest.complete(
        [gpath.name, wpath.name],
        {
            "wigner_cell": {"kappa": kap, "gamma": gam, "t_opt_ns": t_opt_ns},
            "wigner_warnings": grid.warnings,
        },
    )
    return [gpath, wpath, manifest.path]


def _scenario_phase_sweep(cfg: RunConfig, out: Path, jobs: int) -> list[Path]:
    # the relative drive phase exists only in the driven two-tone model
    manifest = _Manifest(out, cfg, "phase_sweep")
    n_phi = cfg.scenario.phase_points
    phis = np.linspace(0.0, 2.0 * math.pi, n_phi)
    payloads = [
        _payload(cfg, "full", f"dphi={phi:.10g}", i, system_updates={"delta_phi": float(phi)})
        for i, phi in enumerate(phis)
    ]
    results = _run_tasks(payloads, jobs)
    header = ["t_ns"] + [f"S_dB_dphi_{phi:.10g}" for phi in phis]
    matrix = np.column_stack([results[0]["times_ns"]] + [r["s_db"] for r in results])
    path = out / "phase_sweep.csv"
    write_csv(path, header, matrix)

    summary = {}
    best = None
    for phi, res in zip(phis, results):
        manifest.add_run(res["label"], res["stats"])
        t_opt, s_max, theta = _max_from_result(res)
        summary[f"dphi={phi:.10g}"] = {"S_max_dB": s_max, "t_opt_ns": t_opt}
        if best is None or s_max > best[1]:
            best = (float(phi), s_max, t_opt)
    summary["best"] = {"delta_phi_rad": best[0], "S_max_dB": best[1], "t_opt_ns": best[2]}
    manifest.complete([path.name], summary)
    return [path, manifest.path]
