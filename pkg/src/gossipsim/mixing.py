"""Mixing matrices over a communication graph and their spectral analysis.

Dense symmetric doubly stochastic matrices, built with the
Metropolis-Hastings rule from the graph's degrees, plus the lazy
convex combination (1-gamma)*I + gamma*W used by the momentum
variants, and the 2n x 2n augmented operator that drives the
momentum recursion. Matrices are dense row-major float64; at desk
scale (n up to a few hundred) dense eigensolves are cheap and exact
enough, so there is no sparse cleverness here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph, is_connected

__all__ = [
    "MixingMatrix",
    "AugmentedMatrix",
    "Spectrum",
    "MixingError",
    "NumericError",
    "metropolis_hastings",
    "lazy_mix",
    "spectrum",
    "deviation_norm",
    "build_augmented",
    "power_contraction",
    "write_matrix_csv",
]

ROW_SUM_TOL = 1e-12
LEAD_EIGENVALUE_TOL = 1e-9


class MixingError(ValueError):
    """Invalid mixing-matrix construction."""


class NumericError(RuntimeError):
    """Eigensolver failure."""


@dataclass(frozen=True)
class MixingMatrix:
    """Symmetric doubly stochastic matrix with positive diagonal."""

    entries: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.entries, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise MixingError(f"expected a square matrix, got shape {w.shape}")
        if not np.array_equal(w, w.T):
            raise MixingError("matrix is not exactly symmetric")
        if np.any(w < 0.0) or np.any(w > 1.0):
            raise MixingError("entries must lie in [0, 1]")
        rows = w.sum(axis=1)
        if np.max(np.abs(rows - 1.0)) > ROW_SUM_TOL:
            raise MixingError(
                f"rows are not stochastic within {ROW_SUM_TOL} (worst {np.max(np.abs(rows - 1.0)):.3e})"
            )
        if np.any(np.diag(w) <= 0.0):
            raise MixingError("diagonal entries must be positive")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "entries", w)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class AugmentedMatrix:
    """Block operator [[(1+sigma)A, -sigma*A], [I, 0]] of size 2n."""

    entries: np.ndarray
    source: MixingMatrix
    sigma: float

    @property
    def n(self) -> int:
        return self.source.n


@dataclass(frozen=True)
class Spectrum:
    """Real eigenvalues sorted by descending magnitude, and the gap 1 - |lambda_2|."""

    eigenvalues: np.ndarray
    spectral_gap: float


def metropolis_hastings(g: Graph) -> MixingMatrix:
    """Mixing matrix with W_ij = 1/max(deg_i + 1, deg_j + 1) on edges.

    The diagonal absorbs the remaining row mass, which keeps every row
    stochastic and the diagonal strictly positive. Requires a connected
    graph.
    """
    if not is_connected(g):
        raise MixingError("graph must be connected to build a mixing matrix")
    adj = g.adjacency()
    closed_deg = [len(adj[i]) + 1 for i in range(g.n)]
    w = np.zeros((g.n, g.n))
    for i, j in g.edges:
        v = 1.0 / max(closed_deg[i], closed_deg[j])
        w[i, j] = v
        w[j, i] = v
    off_row_sums = w.sum(axis=1)
    np.fill_diagonal(w, 1.0 - off_row_sums)
    return MixingMatrix(w)


def lazy_mix(w: MixingMatrix, gamma: float) -> MixingMatrix:
    """Convex combination (1-gamma)*I + gamma*W for gamma in (0, 1].

    Scales the spectral gap by gamma; for gamma <= 1/2 every row is
    diagonally dominant (diagonal at least 1/2).
    """
    if not (0.0 < gamma <= 1.0):
        raise MixingError(f"gamma must be in (0, 1], got {gamma}")
    m = gamma * w.entries
    np.fill_diagonal(m, (1.0 - gamma) + gamma * np.diag(w.entries))
    return MixingMatrix(m)


def spectrum(w: MixingMatrix) -> Spectrum:
    """Full eigenvalue list (symmetric solve) and gap 1 - |lambda_2|."""
    try:
        vals = np.linalg.eigvalsh(w.entries)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"symmetric eigensolver failed: {exc}") from exc
    order = np.argsort(-np.abs(vals), kind="stable")
    vals = vals[order]
    if abs(vals[0] - 1.0) > LEAD_EIGENVALUE_TOL:
        raise NumericError(
            f"leading eigenvalue {vals[0]!r} deviates from 1 beyond {LEAD_EIGENVALUE_TOL}"
        )
    gap = 1.0 if w.n == 1 else 1.0 - abs(vals[1])
    vals.setflags(write=False)
    return Spectrum(eigenvalues=vals, spectral_gap=float(gap))


def deviation_norm(w: MixingMatrix) -> float:
    """Matrix 2-norm of W - I; equals max_i |eig_i(W) - 1| for symmetric W."""
    try:
        vals = np.linalg.eigvalsh(w.entries)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"symmetric eigensolver failed: {exc}") from exc
    return float(np.max(np.abs(vals - 1.0)))


def build_augmented(a: MixingMatrix, sigma: float) -> AugmentedMatrix:
    """Stack the momentum recursion into one 2n x 2n linear operator."""
    if not (0.0 <= sigma < 1.0):
        raise MixingError(f"sigma must be in [0, 1), got {sigma}")
    n = a.n
    b = np.zeros((2 * n, 2 * n))
    b[:n, :n] = (1.0 + sigma) * a.entries
    b[:n, n:] = -sigma * a.entries
    b[n:, :n] = np.eye(n)
    b.setflags(write=False)
    return AugmentedMatrix(entries=b, source=a, sigma=float(sigma))


def power_contraction(b: AugmentedMatrix, v: np.ndarray, t_max: int) -> np.ndarray:
    """Norms of the residual of iterated applications of the operator.

    Returns an array of length t_max + 1 whose entry t is
    ||B^t v - v_bar||, where v_bar replicates the mean of the top half
    of v across both halves (the consensus fixed point). For a zero-mean
    top half with a zero bottom half this reduces to plain ||B^t v||.
    Powers are accumulated by repeated matrix-vector products, never by
    eigendecomposition.
    """
    v = np.asarray(v, dtype=float)
    n2 = b.entries.shape[0]
    if v.shape != (n2,):
        raise MixingError(f"vector length {v.shape} does not match operator size {n2}")
    if t_max < 1:
        raise MixingError(f"t_max must be >= 1, got {t_max}")
    n = n2 // 2
    mean = v[:n].mean()
    vbar = np.full(n2, mean)
    norms = np.empty(t_max + 1)
    cur = v.copy()
    for t in range(t_max + 1):
        norms[t] = np.linalg.norm(cur - vbar)
        if t < t_max:
            cur = b.entries @ cur
    return norms


def write_matrix_csv(w: MixingMatrix, path) -> None:
    """Dump the matrix as n rows of comma-separated full-precision floats."""
    with open(path, "w") as fh:
        for row in w.entries:
            fh.write(",".join(format(x, ".17g") for x in row) + "\n")
