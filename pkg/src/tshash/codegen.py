"""Binary code inference by cyclic per-bit quadratic updates.

One sweep visits every bit column in order. With all other bits frozen, the
pairwise code loss restricted to bit k collapses to a quadratic form
z.T A z over the n column entries (see loss.quadratic_coeffs); that
instance is relaxed twice (sphere, then box), the relaxed solutions are
sign-rounded, and the best of {rounded candidates, current column} is kept,
so the training objective never increases.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import sparse

from .data import PairSupervision
from .loss import LossKind, pair_loss, quadratic_coeffs

__all__ = [
    "CodeMatrix",
    "BqpInstance",
    "TrainConfig",
    "TraceEntry",
    "assemble_bqp",
    "spectral_relax",
    "box_relax",
    "round_and_select",
    "learn_codes",
    "pairwise_objective",
]

# Dense eigendecomposition is cheap and exact below this size; larger
# instances fall back to shifted power iteration on the sparse matrix.
_DENSE_EIG_CUTOFF = 600


@dataclass
class CodeMatrix:
    """n x m matrix of {-1, +1} codes, one row per training point."""

    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=np.int8)
        if self.bits.ndim != 2:
            raise ValueError("bits must be 2-D")
        if not np.isin(self.bits, (-1, 1)).all():
            raise ValueError("code entries must be -1 or +1")
        self.bits.flags.writeable = False

    @property
    def n(self) -> int:
        return self.bits.shape[0]

    @property
    def m(self) -> int:
        return self.bits.shape[1]


@dataclass
class BqpInstance:
    """Symmetric coefficient matrix of one per-bit binary quadratic problem."""

    matrix: sparse.csr_matrix

    def __post_init__(self):
        if not sparse.issparse(self.matrix):
            self.matrix = sparse.csr_matrix(np.asarray(self.matrix, dtype=np.float64))
        self.matrix = self.matrix.tocsr().astype(np.float64)
        if self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("coefficient matrix must be square")
        asym = self.matrix - self.matrix.T
        if asym.nnz and abs(asym).max() > 1e-12:
            raise ValueError("coefficient matrix must be symmetric")
        if self.matrix.diagonal().any():
            raise ValueError("coefficient matrix must have a zero diagonal")

    @classmethod
    def from_dense(cls, a: np.ndarray) -> "BqpInstance":
        return cls(sparse.csr_matrix(np.asarray(a, dtype=np.float64)))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def quad(self, z: np.ndarray) -> float:
        """Quadratic objective z.T A z."""
        z = np.asarray(z, dtype=np.float64)
        return float(z @ (self.matrix @ z))

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def gershgorin_bound(self) -> float:
        """Upper bound on the spectral radius (max absolute row sum)."""
        if self.matrix.nnz == 0:
            return 0.0
        return float(abs(self.matrix).sum(axis=1).max())


class TraceEntry(NamedTuple):
    sweep: int
    bit: int
    objective: float


@dataclass
class TrainConfig:
    """Settings for code inference."""

    m: int
    loss: LossKind
    sweeps: int = 1
    seed: int = 0
    box_max_iters: int = 200
    box_tol: float = 1e-6

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.loss.m != self.m:
            raise ValueError(f"loss is configured for m={self.loss.m}, expected {self.m}")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.box_max_iters < 1:
            raise ValueError("box_max_iters must be >= 1")
        if not self.box_tol > 0:
            raise ValueError("box_tol must be positive")


def _pair_products(bits: np.ndarray, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Inner products of code rows i and j (one value per stored pair)."""
    return np.sum(bits[i] * bits[j], axis=1, dtype=np.int64)


def pairwise_objective(sup: PairSupervision, codes: CodeMatrix, kind: LossKind) -> float:
    """Total loss over all defined ordered pairs (each stored pair twice)."""
    if codes.n != sup.n:
        raise ValueError("code matrix and supervision cover different point counts")
    i, j, y = sup.arrays()
    if i.size == 0:
        return 0.0
    s = _pair_products(codes.bits, i, j)
    return 2.0 * float(np.sum(pair_loss(kind, s, y)))


def _coefficient_matrix(
    n: int, i: np.ndarray, j: np.ndarray, a: np.ndarray
) -> sparse.csr_matrix:
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])
    vals = np.concatenate([a, a])
    return sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def assemble_bqp(sup: PairSupervision, codes: CodeMatrix, k: int, kind: LossKind) -> BqpInstance:
    """Coefficient matrix for updating bit column k with all others fixed.

    A[i, j] = A[j, i] = (l(+1,+1) - l(-1,+1)) / 2 for each defined pair, so
    that z.T A z plus the per-pair constants reproduces the ordered-pair
    restricted loss.
    """
    if not 0 <= k < codes.m:
        raise ValueError(f"bit index {k} out of range for m={codes.m}")
    if codes.n != sup.n:
        raise ValueError("code matrix and supervision cover different point counts")
    i, j, y = sup.arrays()
    if i.size == 0:
        return BqpInstance(sparse.csr_matrix((sup.n, sup.n), dtype=np.float64))
    s = _pair_products(codes.bits, i, j)
    sbar = s - codes.bits[i, k].astype(np.int64) * codes.bits[j, k]
    a, _ = quadratic_coeffs(kind, sbar, y)
    return BqpInstance(_coefficient_matrix(sup.n, i, j, a))


def spectral_relax(
    bqp: BqpInstance,
    *,
    tol: float = 1e-8,
    max_iters: int = 5000,
    seed: int = 0,
    method: str = "auto",
) -> np.ndarray:
    """Minimizer of z.T A z over the sphere ||z||^2 = n.

    The solution is the minimum-eigenvalue eigenvector scaled to squared
    norm n. Small instances use a full symmetric eigendecomposition; large
    ones run shifted power iteration, which needs only matrix-vector
    products. If power iteration fails to converge within max_iters, a
    seeded random vector of the right norm is returned instead (with a
    warning); the caller's rounding guard makes this safe.
    """
    n = bqp.n
    if method not in ("auto", "dense", "power"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        method = "dense" if n <= _DENSE_EIG_CUTOFF else "power"

    radius = bqp.gershgorin_bound()
    if radius == 0.0:
        return np.ones(n)

    if method == "dense":
        eigvals, eigvecs = np.linalg.eigh(bqp.dense())
        v = eigvecs[:, 0]
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        return v * np.sqrt(n)

    # Shifted power iteration: the dominant eigenvector of (radius*I - A)
    # is the minimum-eigenvalue eigenvector of A.
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    mat = bqp.matrix
    for _ in range(max_iters):
        bx = radius * x - mat @ x
        nb = np.linalg.norm(bx)
        if nb == 0.0:
            x = rng.standard_normal(n)
            x /= np.linalg.norm(x)
            continue
        x = bx / nb
        ax = mat @ x
        lam = float(x @ ax)
        if np.linalg.norm(ax - lam * x) <= tol * max(1.0, abs(lam)):
            if x[np.argmax(np.abs(x))] < 0:
                x = -x
            return x * np.sqrt(n)
    warnings.warn(
        f"power iteration did not converge in {max_iters} iterations; "
        "falling back to a random start vector",
        RuntimeWarning,
    )
    fallback = np.random.default_rng(seed).standard_normal(n)
    return fallback * (np.sqrt(n) / np.linalg.norm(fallback))


def box_relax(
    bqp: BqpInstance, init: np.ndarray, max_iters: int = 200, tol: float = 1e-6
) -> np.ndarray:
    """Projected-gradient descent on z.T A z over the box [-1, 1]^n.

    Starts from init clamped into the box; every accepted step satisfies an
    Armijo decrease condition, so the returned objective never exceeds the
    clamped start's. Terminates when the unit-step projected gradient drops
    below tol in max norm.
    """
    init = np.asarray(init, dtype=np.float64)
    if init.shape != (bqp.n,):
        raise ValueError(f"init must have shape ({bqp.n},)")
    if not np.isfinite(init).all():
        raise ValueError("init entries must be finite")

    z = np.clip(init, -1.0, 1.0)
    lipschitz = 2.0 * bqp.gershgorin_bound()
    if lipschitz == 0.0:
        return z

    mat = bqp.matrix
    f = bqp.quad(z)
    step = 1.0 / lipschitz
    max_step = 1e6 / lipschitz
    for _ in range(max_iters):
        grad = 2.0 * (mat @ z)
        if np.max(np.abs(np.clip(z - grad, -1.0, 1.0) - z)) <= tol:
            break
        moved = False
        for _ in range(80):
            z_new = np.clip(z - step * grad, -1.0, 1.0)
            decrease = float(grad @ (z_new - z))
            f_new = bqp.quad(z_new)
            if decrease < 0.0 and f_new <= f + 0.1 * decrease:
                moved = True
                break
            step *= 0.5
        if not moved:
            break  # no further float-representable descent
        z, f = z_new, f_new
        step = min(step * 2.0, max_step)
    return z


def _sign_round(v: np.ndarray) -> np.ndarray:
    """Sign rounding with the convention sign(0) = +1."""
    return np.where(np.asarray(v, dtype=np.float64) >= 0.0, 1, -1).astype(np.int8)


def round_and_select(
    bqp: BqpInstance, candidates: Sequence[np.ndarray], incumbent: np.ndarray
) -> np.ndarray:
    """Best sign vector among rounded candidates and the incumbent.

    Candidates are rounded by sign, scored by the quadratic objective, and
    the incumbent wins all ties, so the returned column never scores worse
    than the current one.
    """
    if len(candidates) == 0:
        raise ValueError("need at least one candidate")
    best = np.asarray(incumbent, dtype=np.int8).copy()
    if not np.isin(best, (-1, 1)).all():
        raise ValueError("incumbent must be a sign vector")
    best_val = bqp.quad(best)
    for cand in candidates:
        rounded = _sign_round(cand)
        val = bqp.quad(rounded)
        if val < best_val:
            best, best_val = rounded, val
    return best


def _spectral_seed(seed: int, sweep: int, k: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(sweep, k)).generate_state(1)[0])


def learn_codes(
    sup: PairSupervision, cfg: TrainConfig
) -> tuple[CodeMatrix, list[TraceEntry]]:
    """Infer the code matrix by cyclic per-bit updates (the inference step).

    Returns the codes together with an objective trace holding the total
    pairwise loss after every bit update. Each update scores the incumbent
    column and both rounded relaxation candidates with the same exact
    pipeline used for the trace, and keeps the incumbent on ties, so the
    trace is non-increasing by construction.
    """
    n = sup.n
    kind = cfg.loss
    rng = np.random.default_rng(cfg.seed)
    bits = (rng.integers(0, 2, size=(n, cfg.m), dtype=np.int8) * 2 - 1).astype(np.int8)

    i, j, y = sup.arrays()
    trace: list[TraceEntry] = []
    if i.size == 0:
        for sweep in range(cfg.sweeps):
            for k in range(cfg.m):
                trace.append(TraceEntry(sweep, k, 0.0))
        return CodeMatrix(bits), trace

    def column_objective(sbar: np.ndarray, col: np.ndarray) -> tuple[float, np.ndarray]:
        s_col = sbar + col[i].astype(np.int64) * col[j]
        return 2.0 * float(np.sum(pair_loss(kind, s_col, y))), s_col

    s = _pair_products(bits, i, j)
    for sweep in range(cfg.sweeps):
        for k in range(cfg.m):
            sbar = s - bits[i, k].astype(np.int64) * bits[j, k]
            a, _ = quadratic_coeffs(kind, sbar, y)
            bqp = BqpInstance(_coefficient_matrix(n, i, j, a))
            v0 = spectral_relax(bqp, seed=_spectral_seed(cfg.seed, sweep, k))
            v1 = box_relax(bqp, v0, cfg.box_max_iters, cfg.box_tol)

            best_col = bits[:, k].copy()
            best_obj, best_s = column_objective(sbar, best_col)
            for cand in (v0, v1):
                col = _sign_round(cand)
                obj, s_cand = column_objective(sbar, col)
                if obj < best_obj:
                    best_col, best_obj, best_s = col, obj, s_cand
            bits[:, k] = best_col
            s = best_s
            trace.append(TraceEntry(sweep, k, best_obj))
    return CodeMatrix(bits), trace
