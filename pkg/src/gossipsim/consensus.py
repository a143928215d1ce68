"""Synchronous gossip state machine with compression and momentum.

One round, written over the stacked (n, d) iterate matrices:

    Xhat <- Xhat + Q(X - Xhat)        row-wise, one stream per agent
    Ynew <- X + gamma * (W - I) Xhat
    Xnew <- (1 + sigma) * Ynew - sigma * Y

The four named variants are parameter specializations of this single
recursion: EG (sigma = 0, identity Q), CG (sigma = 0), SEG (momentum
sigma, identity Q), SCG (momentum sigma, compressed Q). Message
exchange is modeled as simultaneous and lossless on a global clock;
bit accounting still charges one message per directed edge per round.
(config, topology, seed) fully determine every iterate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import compression, theory
from .graph import Graph
from .mixing import MixingMatrix

__all__ = [
    "VARIANTS",
    "AlgorithmConfig",
    "ConsensusState",
    "ConfigError",
    "DivergenceError",
    "RoundReport",
    "RunTrace",
    "init",
]

VARIANTS = ("EG", "CG", "SEG", "SCG")

DIVERGENCE_FACTOR = 1e12  # psi above this multiple of psi(0) counts as divergence


class ConfigError(ValueError):
    """Invalid algorithm configuration."""


class DivergenceError(RuntimeError):
    """The consensus error blew up or went non-finite."""

    def __init__(self, round_index: int, psis: list[float], bits: list[int]):
        super().__init__(f"divergence detected at round {round_index}")
        self.round_index = round_index
        self.psis = psis
        self.bits = bits


@dataclass(frozen=True)
class RoundReport:
    """Consensus error after the round and bits sent during it."""

    psi: float
    bits_sent_total: int


@dataclass(frozen=True)
class AlgorithmConfig:
    """Variant label plus step-size, compressor spec, and optional momentum override.

    sigma=None resolves at init time: 0 for EG/CG, the network-size
    formula for SEG/SCG. An explicit sigma is accepted for SEG/SCG
    experiments and flagged in run metadata.
    """

    variant: str
    gamma: float
    compressor: str = "identity"
    sigma: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        hi = 0.5 if self.variant in ("SEG", "SCG") else 1.0
        if not (0.0 < self.gamma <= hi):
            raise ConfigError(
                f"{self.variant} requires gamma in (0, {hi}], got {self.gamma}"
            )
        kind, _ = compression.parse_compressor_spec(self.compressor)
        if self.variant in ("EG", "SEG") and kind != "identity":
            raise ConfigError(f"{self.variant} is exact gossip; compressor must be identity")
        if self.sigma is not None:
            if self.variant in ("EG", "CG") and self.sigma != 0.0:
                raise ConfigError(f"{self.variant} requires sigma = 0, got {self.sigma}")
            if not (0.0 <= self.sigma < 1.0):
                raise ConfigError(f"sigma must be in [0, 1), got {self.sigma}")

    @property
    def sigma_overridden(self) -> bool:
        return self.sigma is not None and self.variant in ("SEG", "SCG")

    def resolved_sigma(self, n: int) -> float:
        if self.sigma is not None:
            return float(self.sigma)
        if self.variant in ("EG", "CG"):
            return 0.0
        return theory.momentum_sigma(n, self.gamma)


@dataclass
class RunTrace:
    """Per-round record of one run: psi and cumulative bits, by round index."""

    metadata: dict
    psis: np.ndarray
    bits_cumulative: np.ndarray
    converged: bool
    rounds_to_eps: int | None = None

    @property
    def rows(self) -> list[tuple[int, float, int]]:
        return [
            (t, float(p), int(b))
            for t, (p, b) in enumerate(zip(self.psis, self.bits_cumulative))
        ]


def _psi_of(x: np.ndarray) -> float:
    dev = x - x.mean(axis=0)
    return float(np.sqrt(np.einsum("ij,ij->", dev, dev)))


class ConsensusState:
    """Mutable per-run state; strictly sequential, one owner per run."""

    def __init__(
        self,
        x0: np.ndarray,
        g: Graph,
        w: MixingMatrix,
        cfg: AlgorithmConfig,
        seed: int,
    ):
        x0 = np.asarray(x0, dtype=float)
        if x0.ndim != 2 or x0.shape[0] != g.n or x0.shape[1] < 1:
            raise ConfigError(f"x0 must be ({g.n}, d>=1), got shape {x0.shape}")
        if w.n != g.n:
            raise ConfigError(f"mixing matrix size {w.n} does not match graph size {g.n}")
        _check_sparsity(w, g)
        if seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {seed}")

        self.graph = g
        self.w = w
        self.config = cfg
        self.seed = int(seed)
        self.n, self.d = x0.shape
        self.gamma = float(cfg.gamma)
        self.sigma = cfg.resolved_sigma(self.n)

        kind, k = compression.parse_compressor_spec(cfg.compressor)
        agent_seeds = [self.seed ^ i for i in range(self.n)]
        self.bank = compression.CompressorBank(kind, k, self.d, agent_seeds)

        self.t = 0
        self.X = x0.copy()
        self.Y = x0.copy()
        self.Xhat = np.zeros_like(x0)
        self.target_mean = x0.mean(axis=0)
        self.psi0 = _psi_of(x0)
        self.bits_per_round = 2 * len(g.edges) * self.bank.bits_per_message
        self._w_minus_i = sp.csr_matrix(w.entries - np.eye(self.n))

    def metadata(self) -> dict:
        return {
            "variant": self.config.variant,
            "topology": self.graph.label,
            "n": self.n,
            "d": self.d,
            "gamma": self.gamma,
            "sigma": self.sigma,
            "sigma_overridden": self.config.sigma_overridden,
            "compressor": self.bank.spec,
            "omega": self.bank.omega,
            "seed": self.seed,
        }

    def step(self) -> RoundReport:
        """Advance one synchronous round; raises on non-finite consensus error."""
        self.Xhat += self.bank.compress_rows(self.X - self.Xhat)
        y_new = self.X + self.gamma * (self._w_minus_i @ self.Xhat)
        x_new = (1.0 + self.sigma) * y_new - self.sigma * self.Y
        self.Y = y_new
        self.X = x_new
        self.t += 1
        p = _psi_of(self.X)
        if not np.isfinite(p):
            raise DivergenceError(self.t, [], [])
        return RoundReport(psi=p, bits_sent_total=self.bits_per_round)

    def run(self, epsilon: float, max_rounds: int) -> RunTrace:
        """Step until psi <= epsilon or the round budget is exhausted.

        Raises DivergenceError (carrying the partial trace) when psi
        goes non-finite or exceeds 1e12 times its initial value.
        """
        if epsilon <= 0.0:
            raise ConfigError(f"epsilon must be positive, got {epsilon}")
        if max_rounds < 0:
            raise ConfigError(f"max_rounds must be nonnegative, got {max_rounds}")
        if self.t != 0:
            raise ConfigError("run() must start from a fresh state (t = 0)")
        psis = [self.psi0]
        bits = [0]
        blow_up = DIVERGENCE_FACTOR * self.psi0
        converged = self.psi0 <= epsilon
        while not converged and self.t < max_rounds:
            try:
                report = self.step()
            except DivergenceError:
                raise DivergenceError(self.t, psis, bits) from None
            psis.append(report.psi)
            bits.append(bits[-1] + report.bits_sent_total)
            if report.psi > blow_up:
                raise DivergenceError(self.t, psis, bits)
            converged = report.psi <= epsilon
        meta = self.metadata()
        meta["epsilon"] = epsilon
        meta["max_rounds"] = max_rounds
        return RunTrace(
            metadata=meta,
            psis=np.asarray(psis),
            bits_cumulative=np.asarray(bits, dtype=np.int64),
            converged=converged,
            rounds_to_eps=self.t if converged else None,
        )


def _check_sparsity(w: MixingMatrix, g: Graph) -> None:
    allowed = np.eye(g.n, dtype=bool)
    for i, j in g.edges:
        allowed[i, j] = True
        allowed[j, i] = True
    if np.any((w.entries != 0.0) & ~allowed):
        raise ConfigError("mixing matrix has support outside the graph's edges")


def init(
    x0: np.ndarray, g: Graph, w: MixingMatrix, cfg: AlgorithmConfig, seed: int
) -> ConsensusState:
    """Fresh state at round 0 with Y = X = x0 and public estimates at zero."""
    return ConsensusState(x0, g, w, cfg, seed)
