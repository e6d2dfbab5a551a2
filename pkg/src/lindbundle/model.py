"""Discretized Morse oscillator coupled to a spin-s qudit.

All quantities are in atomic units (hbar = m_e = E_h = 1).  The oscillator
lives on a uniform grid with hard walls; the kinetic energy uses the
seven-point sixth-order stencil for the second derivative.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DegenerateStateError, ParameterError

# seven-point second-derivative stencil, central coefficient first
STENCIL = (
    Fraction(-49, 18),
    Fraction(3, 2),
    Fraction(-3, 20),
    Fraction(1, 90),
)

MAX_DIMENSION = 8192


@dataclass(frozen=True)
class Grid:
    x0: float
    dx: float
    n_points: int
    points: np.ndarray

    @property
    def nx(self) -> int:
        return self.n_points - 1


@dataclass(frozen=True)
class MorseParams:
    v_inf: float = 4.0
    a: float = 0.2
    u_max: float = 6.0
    mass: float = 1.0

    def __post_init__(self):
        for name in ("v_inf", "a", "u_max", "mass"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)!r}")


@dataclass(frozen=True)
class SpinSector:
    s: float
    sigma0: np.ndarray
    sigmaz: np.ndarray
    sigmax: np.ndarray

    @property
    def dim(self) -> int:
        return self.sigma0.shape[0]


@dataclass(frozen=True)
class SpinOscillatorModel:
    grid: Grid
    morse: MorseParams
    spin: SpinSector
    gap: float
    coupling: float
    hamiltonian: np.ndarray
    x_operator: np.ndarray

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


def build_grid(x0: float, dx: float, nx: int) -> Grid:
    """Uniform grid ``x_n = x0 + n*dx`` for ``n = 0..nx``."""
    if not dx > 0:
        raise ParameterError(f"grid spacing must be positive, got {dx!r}")
    if int(nx) != nx or nx < 0:
        raise ParameterError(f"nx must be a non-negative integer, got {nx!r}")
    nx = int(nx)
    points = x0 + dx * np.arange(nx + 1, dtype=float)
    points.setflags(write=False)
    return Grid(x0=float(x0), dx=float(dx), n_points=nx + 1, points=points)


def morse_potential(x, p: MorseParams):
    """Morse potential capped from above at ``p.u_max``.

    Works elementwise on arrays.  The cap only bites on the repulsive wall
    (x < 0) because ``u_max > v_inf`` for the benchmark parameters.
    """
    x = np.asarray(x, dtype=float)
    raw = p.v_inf * (-np.expm1(-p.a * x)) ** 2
    out = np.minimum(p.u_max, raw)
    return out if out.ndim else float(out)


def second_derivative_matrix(grid: Grid) -> np.ndarray:
    """Banded D2 with psi = 0 outside the grid."""
    n = grid.n_points
    if n < len(STENCIL) * 2 - 1:
        raise ParameterError(
            f"seven-point stencil needs at least 7 grid points, got {n}"
        )
    d2 = np.zeros((n, n))
    for k, c in enumerate(STENCIL):
        band = np.full(n - k, float(c))
        d2 += np.diag(band, k)
        if k:
            d2 += np.diag(band, -k)
    return d2 / grid.dx**2


def kinetic_matrix(grid: Grid, mass: float) -> np.ndarray:
    if not mass > 0:
        raise ParameterError(f"mass must be positive, got {mass!r}")
    return -0.5 / mass * second_derivative_matrix(grid)


def spin_matrices(s) -> SpinSector:
    """sigma_0, sigma_z, sigma_x for spin ``s`` (dimension 2s+1).

    ``sigma_z`` has evenly spaced diagonal entries from -1 to 1, ``sigma_x``
    ones on both off-diagonals.  For s = 0 the sector is one-dimensional
    with both sigma_z and sigma_x equal to zero.
    """
    twice = Fraction(s).limit_denominator(1000) * 2
    if twice.denominator != 1 or twice < 0 or abs(float(twice) - 2 * float(s)) > 1e-12:
        raise ParameterError(f"spin must be a non-negative half-integer, got {s!r}")
    dim = int(twice) + 1
    sigma0 = np.eye(dim)
    if dim == 1:
        sigmaz = np.zeros((1, 1))
        sigmax = np.zeros((1, 1))
    else:
        sigmaz = np.diag(np.linspace(-1.0, 1.0, dim))
        sigmax = np.eye(dim, k=1) + np.eye(dim, k=-1)
    for m in (sigma0, sigmaz, sigmax):
        m.setflags(write=False)
    return SpinSector(s=float(twice) / 2, sigma0=sigma0, sigmaz=sigmaz, sigmax=sigmax)


def build_model(
    grid: Grid,
    morse: MorseParams,
    s=0,
    gap: float = 0.1,
    alpha: float = 0.1225,
) -> SpinOscillatorModel:
    """Assemble H = 1 (x) (K + U) + (gap/2) sz (x) 1 + alpha sx (x) X0.

    The spin index is the slow (outer) index of the product basis, so basis
    state ``i * n_points + n`` is spin level ``i`` at grid point ``n``.
    """
    spin = spin_matrices(s)
    n = grid.n_points
    dim = spin.dim * n
    if dim > MAX_DIMENSION:
        raise ParameterError(f"Hilbert space dimension {dim} exceeds {MAX_DIMENSION}")

    x = grid.points
    h0 = kinetic_matrix(grid, morse.mass) + np.diag(morse_potential(x, morse))
    x0 = np.diag(x)
    eye_osc = np.eye(n)

    h = (
        np.kron(spin.sigma0, h0)
        + 0.5 * gap * np.kron(spin.sigmaz, eye_osc)
        + alpha * np.kron(spin.sigmax, x0)
    )
    xop = np.kron(spin.sigma0, x0)
    h.setflags(write=False)
    xop.setflags(write=False)
    return SpinOscillatorModel(
        grid=grid,
        morse=morse,
        spin=spin,
        gap=float(gap),
        coupling=float(alpha),
        hamiltonian=h,
        x_operator=xop,
    )


def initial_amplitudes(energies, xi: float) -> np.ndarray:
    """Normalized eigenbasis amplitudes ``C_k ~ e_k exp(-e_k^2 / 2 xi^2)``."""
    if not xi > 0:
        raise ParameterError(f"xi must be positive, got {xi!r}")
    e = np.asarray(energies, dtype=float)
    c = e * np.exp(-(e**2) / (2.0 * xi**2))
    norm = np.linalg.norm(c)
    if norm == 0.0:
        raise DegenerateStateError("all initial-state amplitudes vanish")
    return c / norm


def initial_state(eigensystem, xi: float) -> np.ndarray:
    """Pure initial density matrix in the basis of the eigenvectors' rows.

    ``eigensystem`` is anything with ``energies`` and ``kets`` attributes,
    or an ``(energies, kets)`` pair.
    """
    if isinstance(eigensystem, tuple):
        energies, kets = eigensystem
    else:
        energies, kets = eigensystem.energies, eigensystem.kets
    psi = np.asarray(kets) @ initial_amplitudes(energies, xi)
    return hermitize(np.outer(psi, psi.conj()))


def hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def validate_density_matrix(rho, herm_tol=1e-10, trace_tol=1e-8) -> None:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ParameterError(f"density matrix must be square, got shape {rho.shape}")
    drift = np.max(np.abs(rho - rho.conj().T)) if rho.size else 0.0
    if drift > herm_tol:
        raise ParameterError(f"density matrix not Hermitian (max deviation {drift:.3e})")
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise ParameterError(f"density matrix trace {tr.real:.12g} differs from 1")
