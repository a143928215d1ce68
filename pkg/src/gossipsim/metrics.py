"""Consensus-error measurement, rate fitting, and scaling-exponent estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["MetricsError", "RateFit", "psi", "fit_linear_rate", "scaling_exponent"]

BURN_IN_FRACTION = 0.1  # early rounds are estimate warm-up, not the asymptotic rate
MIN_FIT_POINTS = 20


class MetricsError(ValueError):
    """Invalid input to a metric computation."""


def psi(x: np.ndarray) -> float:
    """Frobenius norm of the row deviations from the column means."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise MetricsError(f"expected an (n, d) matrix, got shape {x.shape}")
    dev = x - x.mean(axis=0)
    return float(np.sqrt(np.einsum("ij,ij->", dev, dev)))


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log(psi) versus round index."""

    rho: float
    r_squared: float
    burn_in: int
    n_points: int


def fit_linear_rate(trace) -> RateFit:
    """Per-round contraction factor fitted on log(psi) after burn-in.

    Accepts a run trace (anything with a .psis array) or a bare psi
    series. The first 10% of rounds are discarded (public-estimate
    warm-up pollutes the asymptotic slope) and exact zeros are
    excluded; at least 20 positive points must remain.
    """
    psis = np.asarray(getattr(trace, "psis", trace), dtype=float)
    if psis.ndim != 1:
        raise MetricsError(f"expected a 1-D psi series, got shape {psis.shape}")
    burn = int(BURN_IN_FRACTION * psis.size)
    t = np.arange(psis.size)[burn:]
    y = psis[burn:]
    keep = y > 0.0
    t, y = t[keep], y[keep]
    if t.size < MIN_FIT_POINTS:
        raise MetricsError(
            f"need at least {MIN_FIT_POINTS} positive points after burn-in, got {t.size}"
        )
    logy = np.log(y)
    slope, intercept = np.polyfit(t, logy, 1)
    fitted = slope * t + intercept
    ss_res = float(np.sum((logy - fitted) ** 2))
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(rho=math.exp(slope), r_squared=r2, burn_in=burn, n_points=int(t.size))


def scaling_exponent(points: list[tuple[int, float | None]]) -> float:
    """Slope of log(rounds-to-epsilon) versus log(n) by least squares.

    Every point must come from a converged run; a None round count is
    rejected naming the offending n.
    """
    if len(points) < 4:
        raise MetricsError(f"need at least 4 points, got {len(points)}")
    for n, rounds in points:
        if rounds is None:
            raise MetricsError(f"point n={n} did not converge; cannot fit a scaling exponent")
        if rounds <= 0:
            raise MetricsError(f"point n={n} has non-positive rounds {rounds}")
    ns = np.log([float(n) for n, _ in points])
    rs = np.log([float(r) for _, r in points])
    slope, _ = np.polyfit(ns, rs, 1)
    return float(slope)
