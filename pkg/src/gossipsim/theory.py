"""Closed-form constants and bounds for the gossip algorithm family.

Pure functions of (n, gamma, sigma, ...) used to cross-check measured
behavior: the momentum coefficient, the worst-case contraction factors
for the exact and compressed momentum schemes, the operator norms of
the 2x2 blocks that appear in the momentum error recursion, the
feasible compression-ratio bound, and the lazy-matrix spectral-gap
floor gamma / (25 n^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

__all__ = [
    "TheoryError",
    "TheoryBundle",
    "momentum_sigma",
    "rate_lambda",
    "rate_lambda_tilde",
    "kappa_constants",
    "momentum_block_matrices",
    "omega_feasibility_bound",
    "gap_lower_bound",
    "theory_bundle",
]


class TheoryError(ValueError):
    """Parameter outside a formula's validity range."""


def _check_n(n: int) -> None:
    if not isinstance(n, int) or n < 2:
        raise TheoryError(f"n must be an integer >= 2, got {n!r}")


def _check_gamma_half(gamma: float) -> None:
    if not (0.0 < gamma <= 0.5):
        raise TheoryError(f"gamma must be in (0, 1/2], got {gamma}")


def momentum_sigma(n: int, gamma: float) -> float:
    """Momentum coefficient (5n - sqrt(gamma)) / (5n + sqrt(gamma))."""
    _check_n(n)
    _check_gamma_half(gamma)
    s = math.sqrt(gamma)
    return (5 * n - s) / (5 * n + s)


def rate_lambda(n: int, gamma: float) -> float:
    """Per-round contraction factor 1 - sqrt(gamma)/(5n) of exact momentum gossip."""
    _check_n(n)
    _check_gamma_half(gamma)
    return 1.0 - math.sqrt(gamma) / (5 * n)


def rate_lambda_tilde(n: int, gamma: float) -> float:
    """Per-round contraction factor 1 - sqrt(gamma)/(10n) of compressed momentum gossip.

    Satisfies sqrt(rate_lambda(n, gamma)) <= rate_lambda_tilde(n, gamma).
    """
    _check_n(n)
    _check_gamma_half(gamma)
    return 1.0 - math.sqrt(gamma) / (10 * n)


def kappa_constants(sigma: float) -> tuple[float, float]:
    """2-norms of the momentum blocks: sqrt(2s^2+2s+1) and sqrt(2s^2+2)."""
    if not (0.0 <= sigma < 1.0):
        raise TheoryError(f"sigma must be in [0, 1), got {sigma}")
    kappa2 = math.sqrt(2 * sigma**2 + 2 * sigma + 1)
    kappa3 = math.sqrt(2 * sigma**2 + 2)
    return kappa2, kappa3


def momentum_block_matrices(sigma: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The 2x2 blocks of the stacked two-step recursion.

    T1 propagates the state pair, T2 weights the mixing term, T3 is the
    deviation block; ||T2|| and ||T3|| are the kappa constants.
    """
    if not (0.0 <= sigma < 1.0):
        raise TheoryError(f"sigma must be in [0, 1), got {sigma}")
    t1 = np.array([[1 + sigma, -sigma], [1.0, 0.0]])
    t2 = np.array([[1 + sigma, -sigma], [0.0, 0.0]])
    t3 = np.array([[sigma, -sigma], [1.0, -1.0]])
    return t1, t2, t3


def omega_feasibility_bound(
    gamma: float, beta: float, sigma: float, lam: float, c_constant: float = 1.0
) -> float:
    """Largest compression ratio the linear-rate guarantee tolerates.

    1 / (2 (k3 + g*b*k2) (lam^-1/2 + g*b*k2*C * lam^-1 (1 - lam^1/2)^-2)),
    evaluated for a caller-supplied C > 0 (the guarantee proves such a C
    exists but gives no value). Decreasing in C and, through lam and
    sigma, decreasing in n. Asymptotically Theta(1/((1+gamma) n^2)).
    """
    if not (0.0 < lam < 1.0):
        raise TheoryError(f"lam must be in (0, 1), got {lam}")
    if c_constant <= 0.0:
        raise TheoryError(f"C must be positive, got {c_constant}")
    if beta < 0.0:
        raise TheoryError(f"beta must be nonnegative, got {beta}")
    if gamma <= 0.0:
        raise TheoryError(f"gamma must be positive, got {gamma}")
    kappa2, kappa3 = kappa_constants(sigma)
    sqrt_lam = math.sqrt(lam)
    gbk2 = gamma * beta * kappa2
    inner = 1.0 / sqrt_lam + gbk2 * c_constant / (lam * (1.0 - sqrt_lam) ** 2)
    return 1.0 / (2.0 * (kappa3 + gbk2) * inner)


def gap_lower_bound(n: int, gamma: float) -> float:
    """Spectral-gap floor gamma / (25 n^2) for the lazy mixing matrix."""
    _check_n(n)
    if not (0.0 < gamma <= 1.0):
        raise TheoryError(f"gamma must be in (0, 1], got {gamma}")
    return gamma / (25.0 * n**2)


@dataclass(frozen=True)
class TheoryBundle:
    """Every closed-form quantity for one (n, gamma, beta, C) instance."""

    n: int
    gamma: float
    sigma: float
    lam: float
    lam_tilde: float
    kappa2: float
    kappa3: float
    beta: float
    gap_lower_bound: float
    omega_bound: float
    c_constant: float

    def to_json_dict(self) -> dict:
        d = asdict(self)
        # JSON keys use the plain names; lam avoids the reserved word only in code
        d["lambda"] = d.pop("lam")
        d["lambda_tilde"] = d.pop("lam_tilde")
        return d


def theory_bundle(n: int, gamma: float, beta: float, c_constant: float = 1.0) -> TheoryBundle:
    """Assemble all constants for one configuration; beta is ||W - I||."""
    sigma = momentum_sigma(n, gamma)
    lam = rate_lambda(n, gamma)
    lam_tilde = rate_lambda_tilde(n, gamma)
    if not (0.0 < lam < lam_tilde < 1.0):
        raise TheoryError(f"inconsistent rates lam={lam}, lam_tilde={lam_tilde}")
    kappa2, kappa3 = kappa_constants(sigma)
    return TheoryBundle(
        n=n,
        gamma=gamma,
        sigma=sigma,
        lam=lam,
        lam_tilde=lam_tilde,
        kappa2=kappa2,
        kappa3=kappa3,
        beta=beta,
        gap_lower_bound=gap_lower_bound(n, gamma),
        omega_bound=omega_feasibility_bound(gamma, beta, sigma, lam, c_constant),
        c_constant=c_constant,
    )
