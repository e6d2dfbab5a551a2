"""Eigenbasis, Bohr frequencies and Davies Lindblad operators.

Everything downstream of :func:`enumerate_bohr` works in the eigenbasis of
the system Hamiltonian.  There a Davies operator ``L_w`` is just the coupling
matrix restricted to the index pairs whose energy gap equals ``w``, so the
operators are stored sparsely as one partition of the coupled ``(n, m)``
pairs rather than as ``N_B`` dense matrices.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ContractViolation, ParameterError

HERMITIAN_TOL = 1e-10
DEFAULT_BIN_RTOL = 1e-9
DEFAULT_DROP_RTOL = 1e-14


@dataclass(frozen=True)
class EigenSystem:
    energies: np.ndarray
    kets: np.ndarray

    @property
    def dim(self) -> int:
        return self.energies.shape[0]

    def to_eigenbasis(self, op) -> np.ndarray:
        """Return ``V^dagger op V``."""
        v = self.kets
        return v.conj().T @ np.asarray(op) @ v

    def from_eigenbasis(self, op) -> np.ndarray:
        v = self.kets
        return v @ np.asarray(op) @ v.conj().T


@dataclass(frozen=True)
class CouplingParams:
    gamma_star: float
    omega_c: float
    kbt: float

    def __post_init__(self):
        for name in ("gamma_star", "omega_c", "kbt"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)!r}")


def _canonical_phases(vecs: np.ndarray, rtol: float = 1e-8) -> np.ndarray:
    # first component above rtol*max made real-positive, so results do not
    # depend on the LAPACK build's sign choices
    mags = np.abs(vecs)
    first = np.argmax(mags > rtol * mags.max(axis=0), axis=0)
    pivot = vecs[first, np.arange(vecs.shape[1])]
    return vecs * (np.abs(pivot) / pivot)


def eigendecompose(h, herm_tol: float = HERMITIAN_TOL) -> EigenSystem:
    """Ascending eigenvalues and orthonormal eigenvectors of a Hermitian matrix.

    Raises :class:`ContractViolation` when ``h`` is not Hermitian to within
    ``herm_tol * max|h|``.  Real symmetric input gives real eigenvectors.
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ContractViolation(f"Hamiltonian must be square, got shape {h.shape}")
    scale = max(np.max(np.abs(h)), 1.0) if h.size else 1.0
    asym = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if asym > herm_tol * scale:
        raise ContractViolation(f"matrix is not Hermitian (max |H - H^dagger| = {asym:.3e})")
    if np.iscomplexobj(h) and not np.any(h.imag):
        h = h.real
    energies, kets = np.linalg.eigh(0.5 * (h + h.conj().T))
    kets = _canonical_phases(kets)
    energies.setflags(write=False)
    kets.setflags(write=False)
    return EigenSystem(energies=energies, kets=kets)


def coupling_gamma(omega, p: CouplingParams):
    """Rate ``g* exp(-(w/wc)^2 / 2) exp(w / 2kT)``; satisfies detailed balance."""
    w = np.asarray(omega, dtype=float)
    out = p.gamma_star * np.exp(-0.5 * (w / p.omega_c) ** 2 + 0.5 * w / p.kbt)
    return out if out.ndim else float(out)


def gibbs_weights(energies, kbt: float) -> np.ndarray:
    if not kbt > 0:
        raise ParameterError(f"kbt must be positive, got {kbt!r}")
    e = np.asarray(energies, dtype=float)
    w = np.exp(-(e - e.min()) / kbt)
    return w / w.sum()


def thermal_state(h, kbt: float) -> np.ndarray:
    """Gibbs state ``exp(-H/kT) / Z`` in the basis ``h`` is written in."""
    eig = eigendecompose(h)
    p = gibbs_weights(eig.energies, kbt)
    v = eig.kets
    rho = (v * p) @ v.conj().T
    return 0.5 * (rho + rho.conj().T)


@dataclass(frozen=True)
class BohrDecomposition:
    """Partition of the coupled eigenpairs by Bohr frequency.

    Pairs are stored sorted by group: group ``k`` owns the slice
    ``offsets[k]:offsets[k+1]`` of ``rows``, ``cols`` and ``values``, where
    ``values`` holds ``<n|X|m>``.  ``L_k`` is the matrix with those entries
    and zeros elsewhere.  ``rates`` stays ``None`` until
    :meth:`with_rates` is called.
    """

    energies: np.ndarray
    x_eigen: np.ndarray
    frequencies: np.ndarray
    offsets: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    bin_tol: float
    drop_tol: float
    rates: np.ndarray | None = None
    coupling: CouplingParams | None = field(default=None, compare=False)

    @property
    def dim(self) -> int:
        return self.energies.shape[0]

    @property
    def n_bohr(self) -> int:
        return self.frequencies.shape[0]

    @property
    def n_channels(self) -> int:
        return self.n_bohr

    @property
    def group_sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    @cached_property
    def group_of_pair(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_bohr), self.group_sizes)

    @property
    def pair_groups(self) -> list[list[tuple[int, int]]]:
        out = []
        for k in range(self.n_bohr):
            sl = slice(self.offsets[k], self.offsets[k + 1])
            out.append(list(zip(self.rows[sl].tolist(), self.cols[sl].tolist())))
        return out

    @cached_property
    def mirror(self) -> np.ndarray:
        """Index of the group at ``-w`` for every group (``-1`` if absent)."""
        f = self.frequencies
        idx = np.searchsorted(f, -f)
        idx = np.clip(idx, 0, len(f) - 1)
        ok = np.abs(f[idx] + f) <= max(self.bin_tol, 0.0) + 1e-300
        return np.where(ok, idx, -1)

    def lindblad(self, k: int) -> np.ndarray:
        """Dense ``L_k`` in the eigenbasis."""
        out = np.zeros((self.dim, self.dim), dtype=self.values.dtype)
        sl = slice(self.offsets[k], self.offsets[k + 1])
        out[self.rows[sl], self.cols[sl]] = self.values[sl]
        return out

    def with_rates(self, coupling: CouplingParams) -> "BohrDecomposition":
        rates = np.asarray(coupling_gamma(self.frequencies, coupling), dtype=float)
        rates.setflags(write=False)
        return replace(self, rates=rates, coupling=coupling)

    def _require_rates(self) -> np.ndarray:
        if self.rates is None:
            raise ContractViolation("decomposition has no rates; call with_rates() first")
        return self.rates

    def weighted_combination(self, coeffs) -> np.ndarray:
        """Dense ``sum_k coeffs[j, k] sqrt(gamma_k) L_k`` for every row ``j``.

        Each eigenpair belongs to exactly one group, so the sum is a scatter
        with no collisions: O(rows * N^2) regardless of the number of groups.
        """
        rates = self._require_rates()
        coeffs = np.atleast_2d(coeffs)
        if coeffs.shape[1] != self.n_bohr:
            raise ContractViolation(
                f"need {self.n_bohr} coefficients per row, got {coeffs.shape[1]}"
            )
        w = coeffs * np.sqrt(rates)
        out = np.zeros((coeffs.shape[0], self.dim, self.dim), dtype=np.result_type(w, self.values))
        out[:, self.rows, self.cols] = w[:, self.group_of_pair] * self.values
        return out

    def weighted_operators(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        """Dense stack ``sqrt(gamma_k) L_k`` for groups ``start..stop-1``."""
        rates = self._require_rates()
        stop = self.n_bohr if stop is None else min(stop, self.n_bohr)
        k = np.arange(start, stop)
        lo, hi = self.offsets[start], self.offsets[stop]
        out = np.zeros((len(k), self.dim, self.dim), dtype=self.values.dtype)
        g = self.group_of_pair[lo:hi]
        out[g - start, self.rows[lo:hi], self.cols[lo:hi]] = np.sqrt(rates[g]) * self.values[lo:hi]
        return out

    @cached_property
    def decay_matrix(self) -> np.ndarray:
        """``sum_k gamma_k L_k^dagger L_k`` (time independent, built once)."""
        rates = self._require_rates()
        n = self.dim
        out = np.zeros((n, n), dtype=self.values.dtype)
        # (L^dag L)_{m m'} = sum_n conj(X_nm) X_nm' over pairs sharing row n
        # within the same group
        key = self.group_of_pair.astype(np.int64) * n + self.rows
        order = np.argsort(key, kind="stable")
        key = key[order]
        starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
        ends = np.r_[starts[1:], len(key)]
        single = ends - starts == 1
        i = order[starts[single]]
        np.add.at(out, (self.cols[i], self.cols[i]),
                  rates[self.group_of_pair[i]] * np.abs(self.values[i]) ** 2)
        for a, b in zip(starts[~single], ends[~single]):
            idx = order[a:b]
            v = self.values[idx]
            c = self.cols[idx]
            out[np.ix_(c, c)] += rates[self.group_of_pair[idx[0]]] * np.outer(v.conj(), v)
        return out

    @cached_property
    def sandwich_superoperator(self) -> sp.csr_matrix:
        """Sparse map vec(rho) -> vec(sum_k gamma_k L_k rho L_k^dagger).

        Row-major vec: entry ``(n, n')`` of the output sits at ``n*N + n'``.
        Group ``k`` contributes ``size_k^2`` nonzeros.
        """
        rates = self._require_rates()
        n = self.dim
        sizes = self.group_sizes
        r_parts, c_parts, v_parts = [], [], []
        single = sizes == 1
        if np.any(single):
            s = self.offsets[:-1][single]
            rr, cc, vv = self.rows[s], self.cols[s], self.values[s]
            r_parts.append(rr * n + rr)
            c_parts.append(cc * n + cc)
            v_parts.append(rates[single] * np.abs(vv) ** 2)
        for k in np.flatnonzero(~single):
            sl = slice(self.offsets[k], self.offsets[k + 1])
            rr, cc, vv = self.rows[sl], self.cols[sl], self.values[sl]
            r_parts.append((rr[:, None] * n + rr[None, :]).ravel())
            c_parts.append((cc[:, None] * n + cc[None, :]).ravel())
            v_parts.append((rates[k] * np.outer(vv, vv.conj())).ravel())
        vals = np.concatenate(v_parts) if v_parts else np.zeros(0)
        rows = np.concatenate(r_parts) if r_parts else np.zeros(0, int)
        cols = np.concatenate(c_parts) if c_parts else np.zeros(0, int)
        return sp.csr_matrix((vals, (rows, cols)), shape=(n * n, n * n))

    def source_hash(self) -> str:
        h = hashlib.sha256()
        for arr in (self.frequencies, self.offsets, self.rows, self.cols, self.values):
            h.update(np.ascontiguousarray(arr).tobytes())
        if self.rates is not None:
            h.update(np.ascontiguousarray(self.rates).tobytes())
        return h.hexdigest()[:16]


def _cluster(sorted_values: np.ndarray, tol: float) -> np.ndarray:
    """Labels for a sorted array, splitting wherever a step exceeds ``tol``."""
    if sorted_values.size == 0:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate([[0], np.cumsum(np.diff(sorted_values) > tol)])


def enumerate_bohr(
    eig: EigenSystem,
    x,
    bin_tol: float | None = None,
    drop_tol: float | None = None,
) -> BohrDecomposition:
    """Group the coupled eigenpairs of ``x`` by Bohr frequency.

    Parameters
    ----------
    eig
        Eigensystem of the system Hamiltonian.
    x
        Coupling operator in the *original* basis.
    bin_tol
        Gap threshold for merging energy differences into one frequency.
        Defaults to ``1e-9 * (e_max - e_min)``.
    drop_tol
        Matrix elements with ``|<n|X|m>| <= drop_tol`` are treated as zero.
        Defaults to ``1e-14 * max|X|``.

    Returns
    -------
    BohrDecomposition
        Without rates; call :meth:`BohrDecomposition.with_rates`.
    """
    x = np.asarray(x)
    n = eig.dim
    if x.shape != (n, n):
        raise ContractViolation(f"coupling operator shape {x.shape} does not match dimension {n}")
    e = eig.energies
    spread = float(e[-1] - e[0]) if n else 0.0
    if bin_tol is None:
        bin_tol = DEFAULT_BIN_RTOL * spread
    if drop_tol is None:
        drop_tol = DEFAULT_DROP_RTOL * (np.max(np.abs(x)) if x.size else 0.0)

    xe = eig.to_eigenbasis(x)
    xe = 0.5 * (xe + xe.conj().T)
    if not np.iscomplexobj(eig.kets) and not np.iscomplexobj(x):
        xe = xe.real

    rows, cols = np.nonzero(np.abs(xe) > drop_tol)
    # gap e_m - e_n for <n|X|m>: antisymmetric exactly in floating point
    gaps = e[cols] - e[rows]
    order = np.lexsort((cols, rows, gaps))
    rows, cols, gaps = rows[order], cols[order], gaps[order]
    labels = _cluster(gaps, bin_tol)
    n_groups = int(labels[-1]) + 1 if labels.size else 0
    offsets = np.searchsorted(labels, np.arange(n_groups + 1))
    lo = gaps[offsets[:-1]] if n_groups else np.zeros(0)
    hi = gaps[offsets[1:] - 1] if n_groups else np.zeros(0)
    # midpoint keeps frequencies of mirrored groups exactly opposite
    freqs = 0.5 * (lo + hi)

    values = xe[rows, cols]
    for arr in (freqs, offsets, rows, cols, values, xe):
        arr.setflags(write=False)
    return BohrDecomposition(
        energies=e,
        x_eigen=xe,
        frequencies=freqs,
        offsets=offsets,
        rows=rows,
        cols=cols,
        values=values,
        bin_tol=float(bin_tol),
        drop_tol=float(drop_tol),
    )


def lindblad_operators(eig: EigenSystem, x, groups) -> list[np.ndarray]:
    """Dense eigenbasis ``L_w`` for explicit ``groups`` of ``(n, m)`` pairs.

    ``groups`` may be a :class:`BohrDecomposition` or any sequence of pair
    lists.  A pair appearing in two groups is a contract violation.
    """
    if isinstance(groups, BohrDecomposition):
        groups = groups.pair_groups
    xe = eig.to_eigenbasis(x)
    xe = 0.5 * (xe + xe.conj().T)
    seen = set()
    ops = []
    for g in groups:
        op = np.zeros_like(xe)
        for n, m in g:
            if (n, m) in seen:
                raise ContractViolation(f"pair {(n, m)} assigned to more than one frequency")
            seen.add((n, m))
            op[n, m] = xe[n, m]
        ops.append(op)
    return ops


def davies_decomposition(
    h,
    x,
    coupling: CouplingParams,
    bin_tol: float | None = None,
    drop_tol: float | None = None,
) -> tuple[EigenSystem, BohrDecomposition]:
    """Convenience: diagonalize ``h`` and build the rated decomposition."""
    eig = eigendecompose(h)
    decomp = enumerate_bohr(eig, x, bin_tol=bin_tol, drop_tol=drop_tol).with_rates(coupling)
    return eig, decomp
