"""Fixed-step RK4 propagation of the Lindblad master equation.

States are propagated in the eigenbasis of H.  There the Hamiltonian part
is elementwise, ``-i (e_n - e_m) rho_nm``, and by default each RK4 step is
taken in the interaction picture of H: the free phases over the step are
applied exactly and RK4 only integrates the rotated dissipator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import HermiticityDriftError, IntegrationError, ParameterError

OBSERVABLE_IMAG_TOL = 1e-10


@dataclass(frozen=True)
class PropagationConfig:
    dt: float = 0.125
    record_every: float = 1.0
    t_final: float = 1000.0
    interaction_picture: bool = True
    track_positivity: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt!r}")
        if not self.record_every > 0:
            raise ParameterError(f"record_every must be positive, got {self.record_every!r}")
        if self.t_final < 0:
            raise ParameterError(f"t_final must be non-negative, got {self.t_final!r}")
        ratio = self.record_every / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ParameterError("record_every must be an integer multiple of dt")
        nrec = self.t_final / self.record_every
        if abs(nrec - round(nrec)) > 1e-9 * max(1.0, nrec):
            raise ParameterError("t_final must be an integer multiple of record_every")

    @property
    def steps_per_record(self) -> int:
        return int(round(self.record_every / self.dt))

    @property
    def n_records(self) -> int:
        return int(round(self.t_final / self.record_every)) + 1


@dataclass
class Trajectory:
    """Recorded observables at ``t_n = n * record_every``.

    ``trace`` and ``min_eigenvalue`` are diagnostics; the latter is NaN
    unless positivity tracking was requested.  ``hermiticity_drift`` is the
    largest anti-Hermitian part produced by any RK4 update before it was
    symmetrized away.
    """

    times: np.ndarray
    energy: np.ndarray
    position: np.ndarray
    purity: np.ndarray
    trace: np.ndarray
    final_rho: np.ndarray
    min_eigenvalue: np.ndarray
    hermiticity_drift: float = 0.0
    snapshots: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def observable(self, name: str) -> np.ndarray:
        if name not in ("energy", "position", "purity"):
            raise KeyError(name)
        return getattr(self, name)


def _commutator_term(rho, h):
    h = np.asarray(h)
    if h.ndim == 1:
        return -1j * (h[:, None] - h[None, :]) * rho
    return -1j * (h @ rho - rho @ h)


def lme_rhs(rho, h, diss=None):
    """``-i[H, rho] + D rho``.

    ``h`` is either a matrix or a 1-D array of eigenvalues (rho then lives
    in the eigenbasis).  ``diss`` is any callable dissipator or ``None``.
    """
    out = _commutator_term(rho, h)
    if diss is not None:
        out = out + diss(rho)
    return out


def _rk4_raw(rho, rhs_fn, dt, t, step):
    # overflow is reported below as an IntegrationError, not as warnings
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = rhs_fn(t, rho)
        k2 = rhs_fn(t + 0.5 * dt, rho + 0.5 * dt * k1)
        k3 = rhs_fn(t + 0.5 * dt, rho + 0.5 * dt * k2)
        k4 = rhs_fn(t + dt, rho + dt * k3)
        new = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(new)):
        raise IntegrationError(
            f"non-finite density matrix at step {step}", step=step, time=t + dt
        )
    return new


def rk4_step(rho, rhs_fn, dt: float, t: float = 0.0, step: int | None = None):
    """One classical RK4 step of ``drho/dt = rhs_fn(t, rho)``.

    The result is re-symmetrized; its trace is left alone so that drift
    remains visible.
    """
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt!r}")
    new = _rk4_raw(rho, rhs_fn, dt, t, step)
    return 0.5 * (new + new.conj().T)


def observables(rho, h, x_op) -> tuple[float, float, float]:
    """Energy ``Tr[rho H]``, position ``Tr[rho X]`` and purity ``Tr[rho^2]``."""
    rho = np.asarray(rho)
    h = np.asarray(h)
    with np.errstate(over="ignore", invalid="ignore"):
        if h.ndim == 1:
            energy = np.sum(h * np.diagonal(rho))
        else:
            energy = np.sum(rho * h.T)
        position = np.sum(rho * np.asarray(x_op).T)
        purity = np.sum(rho * rho.T)
    out = []
    for name, v in (("energy", energy), ("position", position), ("purity", purity)):
        if not np.isfinite(v):
            raise IntegrationError(f"{name} is not finite")
        if abs(v.imag) > OBSERVABLE_IMAG_TOL * max(1.0, abs(v.real)):
            raise HermiticityDriftError(
                f"{name} has imaginary residue {v.imag:.3e}; density matrix lost Hermiticity"
            )
        out.append(float(v.real))
    return tuple(out)


class _Stepper:
    """Advances one state by ``dt`` under a fixed H and dissipator."""

    def __init__(self, h, diss, dt, interaction_picture):
        self.h = np.asarray(h)
        self.diss = diss
        self.dt = dt
        self.ip = interaction_picture and self.h.ndim == 1
        if self.ip:
            gaps = self.h[:, None] - self.h[None, :]
            self.half = np.exp(0.5j * dt * gaps)
            self.full = np.exp(1j * dt * gaps)
            self._phase = {0.0: None, 0.5 * dt: self.half, dt: self.full}

    def _rhs_ip(self, tau, rho_i):
        p = self._phase[tau]
        if self.diss is None:
            return np.zeros_like(rho_i)
        if p is None:
            return self.diss(rho_i)
        return p * self.diss(p.conj() * rho_i)

    def _rhs(self, tau, rho):
        return lme_rhs(rho, self.h, self.diss)

    def step(self, rho, k):
        """Return the new state and the anti-Hermitian residue removed from it."""
        if self.ip:
            # local interaction picture anchored at the start of the step
            new = self.full.conj() * _rk4_raw(rho, self._rhs_ip, self.dt, 0.0, k)
        else:
            new = _rk4_raw(rho, self._rhs, self.dt, 0.0, k)
        drift = float(np.max(np.abs(new - new.conj().T)))
        return 0.5 * (new + new.conj().T), drift


def evolve_combined(
    rho0,
    h,
    dissipators,
    cfg: PropagationConfig,
    x_op,
    combos: dict | None = None,
    snapshot_times=(),
) -> dict:
    """Propagate one initial state under several dissipators in lockstep.

    ``combos`` maps a label to one weight per dissipator; at each record
    time the weighted sum of the propagated density matrices is formed and
    its observables recorded.  Without ``combos`` each dissipator gets its
    own trajectory keyed by position.  Jackknife estimators are affine
    combinations of this kind, evaluated at the density-matrix level.
    """
    dissipators = list(dissipators)
    k = len(dissipators)
    if combos is None:
        combos = {i: np.eye(k)[i] for i in range(k)}
    combos = {label: np.asarray(w, dtype=float) for label, w in combos.items()}
    for label, w in combos.items():
        if w.shape != (k,):
            raise ParameterError(f"combo {label!r} needs {k} weights")

    rho0 = np.asarray(rho0, dtype=complex)
    steppers = [_Stepper(h, d, cfg.dt, cfg.interaction_picture) for d in dissipators]
    states = [rho0.copy() for _ in dissipators]
    nrec = cfg.n_records
    every = cfg.steps_per_record
    snap_idx = {int(round(t / cfg.record_every)): t for t in snapshot_times}

    rec = {
        label: {
            "energy": np.empty(nrec),
            "position": np.empty(nrec),
            "purity": np.empty(nrec),
            "trace": np.empty(nrec),
            "min_eig": np.full(nrec, np.nan),
            "snap": {},
        }
        for label in combos
    }
    drift = 0.0
    step = 0
    for n in range(nrec):
        if n:
            for _ in range(every):
                for i, stp in enumerate(steppers):
                    try:
                        new, d = stp.step(states[i], step)
                    except IntegrationError as exc:
                        raise IntegrationError(
                            f"integration blew up at step {step} (t = {step * cfg.dt:g})",
                            step=step,
                            time=step * cfg.dt,
                        ) from exc
                    states[i] = new
                    drift = max(drift, d)
                step += 1
        for label, w in combos.items():
            rho = sum(wi * s for wi, s in zip(w, states) if wi != 0.0)
            r = rec[label]
            try:
                r["energy"][n], r["position"][n], r["purity"][n] = observables(rho, h, x_op)
            except IntegrationError as exc:
                raise IntegrationError(f"{exc} at t = {step * cfg.dt:g}", step=step,
                                       time=step * cfg.dt) from exc
            r["trace"][n] = np.trace(rho).real
            if cfg.track_positivity:
                r["min_eig"][n] = np.linalg.eigvalsh(rho)[0]
            if n in snap_idx:
                r["snap"][snap_idx[n]] = rho.copy()
            if n == nrec - 1:
                r["final"] = rho

    times = cfg.record_every * np.arange(nrec)
    return {
        label: Trajectory(
            times=times,
            energy=r["energy"],
            position=r["position"],
            purity=r["purity"],
            trace=r["trace"],
            final_rho=r["final"],
            min_eigenvalue=r["min_eig"],
            hermiticity_drift=drift,
            snapshots=r["snap"],
        )
        for label, r in rec.items()
    }


def evolve(rho0, h, diss, cfg: PropagationConfig, x_op, snapshot_times=()) -> Trajectory:
    """Propagate ``rho0`` to ``cfg.t_final``, recording every ``cfg.record_every``."""
    return evolve_combined(rho0, h, [diss], cfg, x_op, snapshot_times=snapshot_times)[0]
