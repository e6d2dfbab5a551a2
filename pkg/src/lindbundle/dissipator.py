"""Full and stochastically bundled Lindblad dissipators.

Two kinds of channel sources are accepted wherever a dissipator is built:

* :class:`~lindbundle.spectral.BohrDecomposition` -- sparse Davies
  operators in the eigenbasis (the production path), and
* :class:`LindbladSet` -- an explicit dense stack of operators and rates,
  handy for small hand-made instances.

Both provide ``dim``, ``n_channels``, ``weighted_combination`` and
``source_hash``.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ContractViolation, ParameterError
from .spectral import BohrDecomposition

DENSE_CHUNK_BYTES = 64 * 2**20


class RandomVectorKind(str, enum.Enum):
    RADEMACHER = "rademacher"
    UNIT_CIRCLE = "unit_circle"


@dataclass(frozen=True)
class LindbladSet:
    """Explicit operators ``L_k`` (stacked ``(K, N, N)``) with rates ``gamma_k``."""

    operators: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        ops = np.asarray(self.operators)
        rates = np.asarray(self.rates, dtype=float)
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise ContractViolation(f"operators must have shape (K, N, N), got {ops.shape}")
        if rates.shape != (ops.shape[0],):
            raise ContractViolation("need exactly one rate per operator")
        if np.any(rates < 0):
            raise ParameterError("rates must be non-negative")
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "rates", rates)

    @property
    def dim(self) -> int:
        return self.operators.shape[1]

    @property
    def n_channels(self) -> int:
        return self.operators.shape[0]

    def weighted_operators(self, start=0, stop=None) -> np.ndarray:
        sl = slice(start, stop)
        return np.sqrt(self.rates[sl])[:, None, None] * self.operators[sl]

    def weighted_combination(self, coeffs) -> np.ndarray:
        coeffs = np.atleast_2d(coeffs)
        return np.einsum("jk,kab->jab", coeffs * np.sqrt(self.rates), self.operators)

    @cached_property
    def decay_matrix(self) -> np.ndarray:
        w = self.weighted_operators()
        return np.einsum("kba,kbc->ac", w.conj(), w)

    def source_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.operators).tobytes())
        h.update(np.ascontiguousarray(self.rates).tobytes())
        return h.hexdigest()[:16]


def lindblad_form(ops: np.ndarray, rho: np.ndarray, gram: np.ndarray | None = None) -> np.ndarray:
    """``sum_k (A_k rho A_k^dag - {A_k^dag A_k, rho}/2)`` for a stack ``ops``.

    Equal to ``1/2 sum_k ([A_k rho, A_k^dag] + [A_k, rho A_k^dag])``.
    ``gram`` may carry a precomputed ``sum_k A_k^dag A_k``.
    """
    if gram is None:
        gram = np.einsum("kba,kbc->ac", ops.conj(), ops)
    return _sandwich_stacked(rho, *_stacks(ops)) - 0.5 * (gram @ rho + rho @ gram)


def _stacks(ops):
    """``[A_1; ...; A_K]`` and ``[A_1^dag; ...; A_K^dag]`` as ``(K N, N)`` blocks."""
    k, n, _ = ops.shape
    return ops.reshape(k * n, n), np.ascontiguousarray(ops.conj().transpose(0, 2, 1)).reshape(k * n, n)


def _sandwich_stacked(rho, down, down_adj):
    # sum_k A_k rho A_k^dag as one (N, K N) x (K N, N) product
    n = rho.shape[0]
    k = down.shape[0] // n
    left = (down @ rho).reshape(k, n, n).transpose(1, 0, 2).reshape(n, k * n)
    return left @ down_adj


class DaviesDissipator:
    """The deterministic dissipator ``sum_w gamma(w) (L rho L^dag - {L^dag L, rho}/2)``.

    ``kernel="sparse"`` applies the sandwich term through the sparse
    superoperator assembled from the eigenpair partition (cheap, exact).
    ``kernel="dense"`` multiplies every weighted operator explicitly, in
    chunks, which costs ``O(N_B N^3)`` per application; this is the generic
    algorithm whose cost the scaling benchmark measures.
    """

    def __init__(self, source, kernel: str = "sparse"):
        if kernel not in ("sparse", "dense"):
            raise ParameterError(f"unknown dissipator kernel {kernel!r}")
        if kernel == "sparse" and not isinstance(source, BohrDecomposition):
            kernel = "dense"
        self.source = source
        self.kernel = kernel
        self.dim = source.dim
        self.decay = np.asarray(source.decay_matrix)
        self._decay_diag = None
        if not np.any(self.decay - np.diag(np.diagonal(self.decay))):
            self._decay_diag = np.diagonal(self.decay).copy()
        if kernel == "sparse":
            self._superop = source.sandwich_superoperator
        else:
            per_op = 16 * self.dim**2
            self._chunk = max(1, DENSE_CHUNK_BYTES // per_op)
            if isinstance(source, LindbladSet) or source.n_channels <= self._chunk:
                self._cached = _stacks(source.weighted_operators())
            else:
                self._cached = None

    @property
    def n_operators(self) -> int:
        return self.source.n_channels

    def _anticommutator(self, rho):
        if self._decay_diag is not None:
            d = self._decay_diag
            return 0.5 * (d[:, None] + d[None, :]) * rho
        return 0.5 * (self.decay @ rho + rho @ self.decay)

    def _sandwich(self, rho):
        n = self.dim
        if self.kernel == "sparse":
            return (self._superop @ rho.reshape(n * n)).reshape(n, n)
        if self._cached is not None:
            return _sandwich_stacked(rho, *self._cached)
        out = np.zeros((n, n), dtype=complex)
        total = self.source.n_channels
        for start in range(0, total, self._chunk):
            w = self.source.weighted_operators(start, start + self._chunk)
            lr = w @ rho
            out += np.matmul(lr, w.conj().transpose(0, 2, 1)).sum(axis=0)
        return out

    def apply(self, rho):
        rho = np.asarray(rho)
        return self._sandwich(rho) - self._anticommutator(rho)

    __call__ = apply


def apply_full_dissipator(rho, decomp, kernel: str = "sparse") -> np.ndarray:
    """One-shot application of the full dissipator (see :class:`DaviesDissipator`)."""
    return DaviesDissipator(decomp, kernel=kernel).apply(rho)


# -- random vectors ---------------------------------------------------------


def bundle_rng(master_seed: int, realization: int, bundle: int) -> np.random.Generator:
    """Independent stream for one bundle of one realization.

    The stream is ``SeedSequence(master_seed, spawn_key=(realization, bundle))``
    feeding PCG64, so any single bundle can be regenerated from the three
    integers alone.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(realization), int(bundle)))
    return np.random.Generator(np.random.PCG64(ss))


def sample_random_vector(n: int, kind=RandomVectorKind.UNIT_CIRCLE, rng=None) -> np.ndarray:
    """i.i.d. entries with zero mean and ``E|r|^2 = 1``; always ``|r| = 1``."""
    if n < 1:
        raise ParameterError(f"vector length must be >= 1, got {n}")
    kind = RandomVectorKind(kind)
    rng = np.random.default_rng() if rng is None else rng
    if kind is RandomVectorKind.RADEMACHER:
        return (2.0 * rng.integers(0, 2, size=n) - 1.0).astype(complex)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return np.exp(1j * theta)


@dataclass(frozen=True)
class SeedRecord:
    master_seed: int | None
    realization: int | None
    kind: str
    bundles: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "realization": self.realization,
            "kind": self.kind,
            "bundles": list(self.bundles),
        }


@dataclass(frozen=True)
class BundledDissipator:
    """``M`` bundled operators ``R_m = sum_w r_m^w sqrt(gamma_w) L_w / sqrt(M)``.

    ``vectors`` keeps the raw random vectors (one row per bundle) so that any
    subset of bundles can be re-normalized into a smaller dissipator, as the
    jackknife estimators need.
    """

    m: int
    operators: np.ndarray
    vectors: np.ndarray
    seed_record: SeedRecord
    source_hash: str
    source: object = field(repr=False, compare=False, default=None)

    @property
    def dim(self) -> int:
        return self.operators.shape[1]

    @cached_property
    def gram(self) -> np.ndarray:
        r = self.operators
        return np.einsum("mba,mbc->ac", r.conj(), r)

    @cached_property
    def _stacked(self):
        return _stacks(self.operators)

    def apply(self, rho):
        rho = np.asarray(rho)
        g = self.gram
        return _sandwich_stacked(rho, *self._stacked) - 0.5 * (g @ rho + rho @ g)

    __call__ = apply

    def subset(self, bundles) -> "BundledDissipator":
        """Dissipator from the given bundle indices (0-based), renormalized."""
        bundles = np.asarray(bundles, dtype=int)
        if self.source is None:
            raise ContractViolation("subset() needs the channel source")
        return _assemble(
            self.source,
            self.vectors[bundles],
            SeedRecord(
                self.seed_record.master_seed,
                self.seed_record.realization,
                self.seed_record.kind,
                tuple(self.seed_record.bundles[i] for i in bundles),
            ),
        )

    def halves(self) -> tuple["BundledDissipator", "BundledDissipator"]:
        if self.m % 2:
            raise ParameterError(f"jackknife halves need an even bundle count, got {self.m}")
        h = self.m // 2
        return self.subset(range(h)), self.subset(range(h, self.m))


def _assemble(source, vectors, record) -> BundledDissipator:
    m = vectors.shape[0]
    ops = source.weighted_combination(vectors / np.sqrt(m))
    ops.setflags(write=False)
    return BundledDissipator(
        m=m,
        operators=ops,
        vectors=vectors,
        seed_record=record,
        source_hash=source.source_hash(),
        source=source,
    )


def build_bundled(
    source,
    m: int,
    kind=RandomVectorKind.UNIT_CIRCLE,
    seed: int = 0,
    realization: int = 0,
    vectors=None,
) -> BundledDissipator:
    """Draw ``m`` bundled operators from the channel ``source``.

    Bundle ``j`` takes its random vector from ``bundle_rng(seed,
    realization, j)``.  Passing ``vectors`` (shape ``(m, n_channels)``)
    bypasses sampling entirely; this is the deterministic test hook.
    """
    if int(m) != m or m < 1:
        raise ParameterError(f"bundle count must be a positive integer, got {m!r}")
    m = int(m)
    if source.n_channels < 1:
        raise ParameterError("cannot bundle an empty set of Lindblad operators")
    kind = RandomVectorKind(kind)
    if vectors is None:
        vectors = np.stack(
            [sample_random_vector(source.n_channels, kind, bundle_rng(seed, realization, j))
             for j in range(m)]
        )
        record = SeedRecord(int(seed), int(realization), kind.value, tuple(range(m)))
    else:
        vectors = np.asarray(vectors, dtype=complex)
        if vectors.shape != (m, source.n_channels):
            raise ContractViolation(
                f"vectors must have shape {(m, source.n_channels)}, got {vectors.shape}"
            )
        record = SeedRecord(None, None, "explicit", tuple(range(m)))
    vectors.setflags(write=False)
    return _assemble(source, vectors, record)


def apply_bundled(rho, bd: BundledDissipator) -> np.ndarray:
    return bd.apply(rho)
