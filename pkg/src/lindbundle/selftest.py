"""Analytic-identity checks run by ``lindbundle validate``.

Every check is cheap (well under a second on the benchmark models) and
compares against a closed-form value rather than a stored number.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .dissipator import DaviesDissipator, LindbladSet, build_bundled
from .propagator import rk4_step
from .spectral import coupling_gamma, eigendecompose, enumerate_bohr, gibbs_weights
from .stats import fit_power_law, jackknife1, jackknife2


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""


def _systems():
    out = {}
    for label, scenario in (("s=0", "cooling"), ("s=1/2", "heating")):
        cfg = ScenarioConfig.preset(scenario)
        model = cfg.build_model()
        eig = eigendecompose(model.hamiltonian)
        dec = enumerate_bohr(eig, model.x_operator).with_rates(cfg.coupling())
        out[label] = (cfg, model, eig, dec)
    return out


def check_dimensions(systems):
    dims = {k: v[1].dim for k, v in systems.items()}
    ok = dims == {"s=0": 31, "s=1/2": 62}
    return CheckResult("model dimensions 31 / 62", ok, 0.0, 0.0, str(dims))


def check_detailed_balance(systems, rng):
    worst = 0.0
    for kbt in (0.25, 1.0):
        cp = ScenarioConfig.preset("custom", kbt=kbt).coupling()
        w = rng.uniform(-3.0, 3.0, 100)
        g, gm = coupling_gamma(w, cp), coupling_gamma(-w, cp)
        worst = max(worst, float(np.max(np.abs(g - np.exp(w / kbt) * gm) / g)))
    return CheckResult("detailed balance gamma(w) = e^(w/kT) gamma(-w)", worst <= 1e-12, worst, 1e-12)


def check_davies_completeness(systems):
    worst_sum = worst_adj = 0.0
    for _, model, eig, dec in systems.values():
        total = sum(dec.lindblad(k) for k in range(dec.n_bohr))
        x_e = eig.to_eigenbasis(model.x_operator)
        worst_sum = max(worst_sum, float(np.max(np.abs(total - x_e))))
        mir = dec.mirror
        for k in range(dec.n_bohr):
            if mir[k] >= 0:
                d = np.max(np.abs(dec.lindblad(mir[k]) - dec.lindblad(k).conj().T))
                worst_adj = max(worst_adj, float(d))
    return [
        CheckResult("sum_w L_w = V^dag X V", worst_sum <= 1e-10, worst_sum, 1e-10),
        CheckResult("L_{-w} = L_w^dag", worst_adj <= 1e-10, worst_adj, 1e-10),
    ]


def check_dissipator_identities(systems, rng):
    cfg, _, eig, dec = systems["s=0"]
    n = eig.dim
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    diss = DaviesDissipator(dec)
    d = diss(rho)
    tr = abs(np.trace(d))
    herm = float(np.max(np.abs(d - d.conj().T)))
    gibbs = np.diag(gibbs_weights(eig.energies, cfg.kbt)).astype(complex)
    stat = float(np.max(np.abs(diss(gibbs))))
    dense = float(np.max(np.abs(DaviesDissipator(dec, kernel="dense")(rho) - d)))
    return [
        CheckResult("Tr D(rho) = 0", tr <= 1e-12, tr, 1e-12),
        CheckResult("D(rho) Hermitian", herm <= 1e-12, herm, 1e-12),
        CheckResult("D(rho_Gibbs) = 0", stat <= 1e-12, stat, 1e-12),
        CheckResult("sparse kernel = dense kernel", dense <= 1e-12, dense, 1e-12),
    ]


def check_bundled_orthogonal_design(rng):
    # Fourier rows satisfy sum_m r_m^a conj(r_m^b) / M = delta_ab, so M = K
    # bundles reproduce the full dissipator exactly.
    k, n = 6, 4
    ops = rng.normal(size=(k, n, n)) + 1j * rng.normal(size=(k, n, n))
    src = LindbladSet(ops, rng.uniform(0.1, 1.0, k))
    vec = np.exp(2j * np.pi * np.outer(np.arange(k), np.arange(k)) / k)
    bd = build_bundled(src, k, vectors=vec)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    err = float(np.max(np.abs(bd(rho) - DaviesDissipator(src)(rho))))
    return CheckResult("bundled = full for an orthogonal design", err <= 1e-12, err, 1e-12)


def check_rk4_order():
    # two-level Rabi problem, exact solution known in closed form
    omega = 1.0
    h = 0.5 * omega * np.array([[0, 1], [1, 0]], dtype=complex)
    rho0 = np.array([[1, 0], [0, 0]], dtype=complex)
    t_end = 2.0

    def run(dt):
        rho = rho0
        for k in range(int(round(t_end / dt))):
            rho = rk4_step(rho, lambda t, r: -1j * (h @ r - r @ h), dt, k * dt)
        return rho[0, 0].real

    exact = np.cos(0.5 * omega * t_end) ** 2
    e1, e2 = abs(run(0.2) - exact), abs(run(0.1) - exact)
    ratio = e1 / e2
    return CheckResult("RK4 error ratio on halving dt in [8, 32]", 8 <= ratio <= 32, ratio, 0.0)


def check_jackknife_exactness():
    # a + b/M is extrapolated exactly by both estimators
    a, b, m = 0.7, 1.9, 8
    full, half = a + b / m, a + b / (m // 2)
    e1 = abs(float(jackknife1(full, half)) - a)
    e2 = abs(float(jackknife2(full, half, half)) - a)
    err = max(e1, e2)
    return CheckResult("jackknife cancels a 1/M bias", err <= 1e-14, err, 1e-14)


def check_power_law_fit():
    sizes = np.array([31.0, 62.0])
    fit = fit_power_law(sizes, 2.5e-9 * sizes**3)
    err = abs(fit.exponent - 3.0)
    return CheckResult("power-law fit recovers N^3", err <= 1e-12, err, 1e-12)


def run_all(seed: int = 12345) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    systems = _systems()
    results = [
        check_dimensions(systems),
        check_detailed_balance(systems, rng),
        *check_davies_completeness(systems),
        *check_dissipator_identities(systems, rng),
        check_bundled_orthogonal_design(rng),
        check_rk4_order(),
        check_jackknife_exactness(),
        check_power_law_fit(),
    ]
    return results


def format_table(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  value"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.value:.3e}"
                     + (f"  {r.detail}" if r.detail else ""))
    return "\n".join(lines)
