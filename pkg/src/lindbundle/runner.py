"""Run orchestration: single scenarios, M-convergence studies, scaling benchmarks."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import io
from .config import ScenarioConfig
from .dissipator import DaviesDissipator, RandomVectorKind, build_bundled
from .errors import ConfigError, ParameterError
from .model import initial_amplitudes
from .propagator import PropagationConfig, Trajectory, _Stepper, evolve, evolve_combined
from .spectral import BohrDecomposition, EigenSystem, eigendecompose, enumerate_bohr
from .stats import JACKKNIFE_WEIGHTS, ensemble_stats, fit_power_law, max_rmse

log = logging.getLogger(__name__)

OBSERVABLES = ("energy", "position", "purity")
TIMING_SPREAD_WARN = 0.25


@dataclass(frozen=True)
class PreparedSystem:
    """Model, eigenbasis and Davies decomposition for one configuration."""

    model: object
    eig: EigenSystem
    decomp: BohrDecomposition
    rho0: np.ndarray

    @property
    def energies(self) -> np.ndarray:
        return self.eig.energies

    @property
    def x_eigen(self) -> np.ndarray:
        return self.decomp.x_eigen

    @property
    def dim(self) -> int:
        return self.eig.dim


def prepare(cfg: ScenarioConfig) -> PreparedSystem:
    model = cfg.build_model()
    eig = eigendecompose(model.hamiltonian)
    decomp = enumerate_bohr(eig, model.x_operator, bin_tol=cfg.bin_tol).with_rates(cfg.coupling())
    c = initial_amplitudes(eig.energies, cfg.xi)
    rho0 = np.outer(c, c.conj()).astype(complex)
    return PreparedSystem(model=model, eig=eig, decomp=decomp, rho0=rho0)


@lru_cache(maxsize=4)
def _prepare_cached(cfg_json: str) -> PreparedSystem:
    return prepare(ScenarioConfig.from_dict(json.loads(cfg_json)))


def _cfg_key(cfg: ScenarioConfig) -> str:
    return json.dumps(cfg.to_dict(), sort_keys=True)


def deterministic_trajectory(system: PreparedSystem, prop: PropagationConfig) -> Trajectory:
    diss = DaviesDissipator(system.decomp)
    return evolve(system.rho0, system.energies, diss, prop, system.x_eigen)


def stochastic_trajectories(system, cfg: ScenarioConfig, realization: int, m: int, modes) -> dict:
    """Trajectories of one realization for each requested mode at bundle count ``m``.

    Jackknife modes propagate the full set and both halves in lockstep and
    combine density matrices at every record time.
    """
    modes = list(modes)
    bd = build_bundled(system.decomp, m, RandomVectorKind(cfg.rng_kind),
                       seed=cfg.seed, realization=realization)
    if any(md in ("jk1", "jk2") for md in modes):
        half_a, half_b = bd.halves()
        dissipators = [bd, half_a, half_b]
        combos = {md: JACKKNIFE_WEIGHTS[md] for md in modes}
    else:
        dissipators = [bd]
        combos = {md: (1.0,) for md in modes}
    return evolve_combined(system.rho0, system.energies, dissipators, cfg.propagation(),
                           system.x_eigen, combos=combos)


def _realization_task(args):
    cfg_json, realization, m_values, modes_by_m = args
    system = _prepare_cached(cfg_json)
    cfg = ScenarioConfig.from_dict(json.loads(cfg_json))
    out = {}
    for m in m_values:
        trajs = stochastic_trajectories(system, cfg, realization, m, modes_by_m[m])
        out[m] = {md: {o: t.observable(o) for o in OBSERVABLES} for md, t in trajs.items()}
    return realization, out


def _map_realizations(cfg, realizations, m_values, modes_by_m, threads):
    key = _cfg_key(cfg)
    tasks = [(key, r, tuple(m_values), modes_by_m) for r in realizations]
    if threads <= 1:
        for t in tasks:
            yield _realization_task(t)
        return
    with ProcessPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(_realization_task, tasks)


def _seed_records(cfg: ScenarioConfig, m: int) -> list[dict]:
    return [
        {"realization": r, "master_seed": cfg.seed, "kind": cfg.rng_kind,
         "bundles": list(range(m)),
         "stream": f"SeedSequence({cfg.seed}, spawn_key=({r}, bundle))"}
        for r in range(cfg.realizations)
    ]


def _manifest(cfg, system, kind, **extra) -> dict:
    m = {
        "kind": kind,
        "config": cfg.to_dict(),
        "derived": {
            "N": system.dim,
            "N_B": system.decomp.n_bohr,
            "coupled_pairs": int(len(system.decomp.rows)),
            "operator_count": system.decomp.n_bohr if cfg.mode == "full" else cfg.bundles,
        },
        "software": io.software_versions(),
        "warnings": [],
    }
    m.update(extra)
    return m


@dataclass
class RunResult:
    out_dir: Path
    files: list[Path]
    manifest: dict
    reference: Trajectory | None = None
    stats: dict = field(default_factory=dict)


def run_scenario(cfg: ScenarioConfig, threads: int = 1, out_dir=None) -> RunResult:
    """Run one scenario and write CSVs plus ``manifest.json``.

    ``full`` mode writes ``reference.csv``.  Stochastic modes write one
    ``realization_NNNN.csv`` per realization and, when statistics are
    enabled, ``reference.csv`` and ``stats_<observable>.csv``.
    """
    cfg.validate()
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    t0 = time.perf_counter()
    system = prepare(cfg)
    timings["prepare_s"] = time.perf_counter() - t0
    prop = cfg.propagation()
    files = []
    reference = None

    if not cfg.stochastic or cfg.compute_stats:
        t0 = time.perf_counter()
        reference = deterministic_trajectory(system, prop)
        timings["reference_s"] = time.perf_counter() - t0
        files.append(io.write_trajectory(out / "reference.csv", reference))

    stats = {}
    manifest_extra = {}
    if cfg.stochastic:
        t0 = time.perf_counter()
        obs = {o: np.empty((cfg.realizations, prop.n_records)) for o in OBSERVABLES}
        modes_by_m = {cfg.bundles: (cfg.mode,)}
        for r, res in _map_realizations(cfg, range(cfg.realizations), [cfg.bundles], modes_by_m, threads):
            data = res[cfg.bundles][cfg.mode]
            for o in OBSERVABLES:
                obs[o][r] = data[o]
        times = prop.record_every * np.arange(prop.n_records)
        for r in range(cfg.realizations):
            rows = zip(times, obs["energy"][r], obs["position"][r], obs["purity"][r])
            files.append(io.write_rows(out / f"realization_{r:04d}.csv", io.TRAJECTORY_COLUMNS, rows))
        timings["realizations_s"] = time.perf_counter() - t0
        if cfg.compute_stats:
            for o in OBSERVABLES:
                st = ensemble_stats(obs[o], reference.observable(o), times, observable=o)
                stats[o] = st
                files.append(io.write_stats(out / f"stats_{o}.csv", st))
            manifest_extra["max_rmse"] = {
                o: dict(zip(("value", "t"), max_rmse(st))) for o, st in stats.items()
            }
        manifest_extra["seeds"] = _seed_records(cfg, cfg.bundles)

    manifest = _manifest(cfg, system, "run", timings=timings, files=[f.name for f in files],
                         **manifest_extra)
    if reference is not None:
        manifest["diagnostics"] = {
            "max_trace_error": float(np.max(np.abs(reference.trace - 1.0))),
            "hermiticity_drift": reference.hermiticity_drift,
        }
    io.write_manifest(out / "manifest.json", manifest)
    return RunResult(out_dir=out, files=files, manifest=manifest, reference=reference, stats=stats)


# -- convergence in M ---------------------------------------------------------


@dataclass
class ConvergenceResult:
    rows: list[dict]
    fits: list[dict]
    stats: dict
    reference: object


def run_convergence_study(
    base_cfg: ScenarioConfig,
    m_values,
    modes=("bundled",),
    threads: int = 1,
    out_dir=None,
    observables=("energy", "position"),
    simulate=None,
    reference=None,
) -> ConvergenceResult:
    """Max-RMSE of each observable versus bundle count ``M`` and mode.

    ``modes`` is either one list used for every ``M`` or a mapping from
    ``M`` to its list of modes.  ``simulate(m, modes, realization)`` may
    replace the propagation; it must return ``{mode: {observable: array}}``.
    ``reference`` (anything with ``times`` and the observable attributes)
    then skips the deterministic run.  Both hooks exist for harness
    self-tests.
    """
    m_values = [int(m) for m in m_values]
    if isinstance(modes, dict):
        modes_by_m = {int(m): tuple(v) for m, v in modes.items()}
    else:
        modes_by_m = {m: tuple(modes) for m in m_values}
    problems = []
    if set(modes_by_m) != set(m_values):
        problems.append(("modes", "mode mapping must cover exactly the requested M values"))
    all_modes = list(dict.fromkeys(md for v in modes_by_m.values() for md in v))
    for md in all_modes:
        if md not in JACKKNIFE_WEIGHTS:
            problems.append(("modes", f"unknown stochastic mode {md!r}"))
    for m in m_values:
        if m < 1:
            problems.append(("m_values", f"bundle counts must be positive, got {m}"))
    if base_cfg.realizations < 2:
        problems.append(("realizations", "statistics need at least 2 realizations"))
    if problems:
        raise ConfigError(problems)
    odd = [m for m, v in modes_by_m.items() if m % 2 and any(md in ("jk1", "jk2") for md in v)]
    if odd:
        raise ConfigError([("m_values", f"jackknife needs even M, got {sorted(odd)}")])
    if len(m_values) != len(set(m_values)) or sorted(m_values) != m_values:
        raise ConfigError([("m_values", "must be strictly increasing")])

    cfg = base_cfg.with_overrides(mode=all_modes[0], bundles=m_values[0])
    system = None
    if reference is None:
        system = prepare(cfg)
        reference = deterministic_trajectory(system, cfg.propagation())
    times = np.asarray(reference.times, dtype=float)
    n_t = len(times)
    R = cfg.realizations
    keys = [(m, md) for m in m_values for md in modes_by_m[m]]
    data = {(m, md, o): np.empty((R, n_t)) for m, md in keys for o in observables}

    if simulate is None:
        results = _map_realizations(cfg, range(R), m_values, modes_by_m, threads)
    else:
        results = ((r, {m: simulate(m, modes_by_m[m], r) for m in m_values}) for r in range(R))
    for r, res in results:
        for m, md in keys:
            for o in observables:
                data[(m, md, o)][r] = res[m][md][o]

    spin = float(cfg.s)
    rows, stats = [], {}
    for m, md in keys:
        for o in observables:
            st = ensemble_stats(data[(m, md, o)], getattr(reference, o), times, observable=o)
            stats[(m, md, o)] = st
            value, t_max = max_rmse(st)
            i = int(np.argmax(st.rmse))
            rows.append({"s": spin, "M": m, "mode": md, "observable": o, "max_rmse": value,
                         "t_max": t_max, "bias_at_max": float(st.bias[i]),
                         "std_at_max": float(st.std[i])})
    fits = []
    for md in all_modes:
        for o in observables:
            pts = [(r["M"], r["max_rmse"]) for r in rows if r["mode"] == md and r["observable"] == o]
            if len(pts) >= 2 and all(y > 0 for _, y in pts):
                f = fit_power_law(*zip(*pts))
                fits.append({"s": spin, "mode": md, "observable": o, "exponent": f.exponent,
                             "prefactor": f.prefactor, "r_squared": f.r_squared})

    if out_dir is not None:
        out = Path(out_dir)
        io.write_rows(out / "convergence.csv", io.CONVERGENCE_COLUMNS,
                      ([r[c] for c in io.CONVERGENCE_COLUMNS] for r in rows))
        io.write_rows(out / "convergence_fits.csv", io.FIT_COLUMNS,
                      ([f[c] for c in io.FIT_COLUMNS] for f in fits))
        for (m, md, o), st in stats.items():
            io.write_stats(out / f"stats_M{m}_{md}_{o}.csv", st)
        if system is not None:
            manifest = _manifest(cfg, system, "converge", m_values=m_values,
                                 modes={str(m): list(v) for m, v in modes_by_m.items()},
                                 seeds=_seed_records(cfg, max(m_values)))
            io.write_manifest(out / "manifest.json", manifest)
    return ConvergenceResult(rows=rows, fits=fits, stats=stats, reference=reference)


# -- wall-time scaling ----------------------------------------------------------


@dataclass
class ScalingResult:
    rows: list[dict]
    fits: dict
    warnings: list[str]


def time_steps(system: PreparedSystem, diss, dt: float, steps: int = 1, repeats: int = 3,
               min_seconds: float = 0.2) -> list[float]:
    """Seconds per propagation step for each repeat.

    A discarded warm-up run sizes the batch: each repeat takes at least
    ``steps`` steps and enough steps to last roughly ``min_seconds``.
    """
    stepper = _Stepper(system.energies, diss, dt, True)

    def batch(n):
        rho = system.rho0.copy()
        t0 = time.perf_counter()
        for k in range(n):
            rho, _ = stepper.step(rho, k)
        return (time.perf_counter() - t0) / n

    warm = batch(steps)
    n = max(steps, int(np.ceil(min_seconds / max(warm, 1e-9))))
    return [batch(n) for _ in range(repeats)]


def run_scaling_benchmark(
    spins,
    m: int = 8,
    base_cfg: ScenarioConfig | None = None,
    repeats: int = 3,
    steps: int = 1,
    kernel: str = "dense",
    out_dir=None,
    timer=None,
) -> ScalingResult:
    """Time one propagation step of the full and the bundled dissipator versus N.

    ``timer(system, mode)`` may replace the wall-clock measurement and
    return seconds per step directly (harness self-test hook).
    """
    spins = sorted(float(s) for s in spins)
    if len(spins) < 3:
        raise ConfigError([("spins", f"need at least 3 spin values, got {len(spins)}")])
    if repeats < 3 and timer is None:
        raise ConfigError([("repeats", "need at least 3 timing repeats")])
    base = base_cfg or ScenarioConfig.preset("custom")
    rows, warnings = [], []
    for s in spins:
        cfg = base.with_overrides(scenario="custom", s=s)
        system = prepare(cfg)
        for mode in ("full", "bundled"):
            if timer is not None:
                sec = float(timer(system, mode))
            else:
                if mode == "full":
                    diss = DaviesDissipator(system.decomp, kernel=kernel)
                else:
                    diss = build_bundled(system.decomp, m, cfg.rng_kind, seed=cfg.seed)
                samples = time_steps(system, diss, cfg.dt, steps=steps, repeats=repeats)
                sec = float(np.median(samples))
                spread = (max(samples) - min(samples)) / sec
                if spread > TIMING_SPREAD_WARN:
                    warnings.append(f"N={system.dim} mode={mode}: timing spread {spread:.0%} of median")
            label = "full" if mode == "full" else f"bundled({m})"
            rows.append({"N": system.dim, "N_B": system.decomp.n_bohr, "mode": label,
                         "seconds_per_step": sec})
            log.info("N=%d N_B=%d %s: %.4g s/step", system.dim, system.decomp.n_bohr, label, sec)
    fits = {}
    for label in ("full", f"bundled({m})"):
        pts = [(r["N"], r["seconds_per_step"]) for r in rows if r["mode"] == label]
        sizes, secs = zip(*pts)
        fits[label] = fit_power_law(sizes, secs)
    if out_dir is not None:
        out = Path(out_dir)
        io.write_rows(out / "scaling.csv", io.SCALING_COLUMNS,
                      ([r[c] for c in io.SCALING_COLUMNS] for r in rows))
        io.write_rows(out / "scaling_fit.csv", ("mode", "exponent", "prefactor", "r_squared"),
                      ([k, f.exponent, f.prefactor, f.r_squared] for k, f in fits.items()))
        io.write_manifest(out / "manifest.json", {
            "kind": "scale",
            "config": base.to_dict(),
            "spins": spins,
            "bundles": m,
            "kernel": kernel,
            "repeats": repeats,
            "steps": steps,
            "warnings": warnings,
            "software": io.software_versions(),
        })
    if warnings:
        for w in warnings:
            log.warning(w)
    return ScalingResult(rows=rows, fits=fits, warnings=warnings)


def check_mode(mode: str) -> None:
    if mode not in ("full", "bundled", "jk1", "jk2"):
        raise ParameterError(f"unknown mode {mode!r}")
