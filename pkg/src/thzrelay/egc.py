"""Equal-gain combining: exact sum moments and a single-branch surrogate.

An N-antenna receiver that co-phases and adds branch envelopes sees the sum
Z = R_1 + ... + R_N.  Z has no closed-form density, but every integer moment
is exact (a binomial fold over independent branches), and the alpha-mu family
is flexible enough to absorb sums of its own members: matching the scale-free
ratios m2/m1**2 and m4/m2**2 pins (alpha, mu), after which m1 fixes the
scale.  The matched surrogate feeds the analytic pipeline; the Monte Carlo
path keeps the exact branch sum, which is what the cross-validation between
the two leans on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, root
from scipy.special import gammaln

from thzrelay.channels import AlphaMuParams

__all__ = [
    "EgcApproximation",
    "egc_combine",
    "sum_envelope_moments",
    "moment_match_sum",
]


def egc_combine(branch_snrs, axis: int = -1):
    """Post-combiner SNR of equal-gain reception: (sum_i sqrt(g_i))**2 / N.

    ``branch_snrs`` holds per-branch instantaneous SNRs along ``axis``.  A
    single branch passes through unchanged; N equal branches g combine to
    N*g, the full array gain.
    """
    g = np.asarray(branch_snrs, dtype=float)
    if g.shape == ():
        raise ValueError("branch_snrs must have a branch axis")
    if np.any(g < 0):
        raise ValueError("branch SNRs must be nonnegative")
    n = g.shape[axis]
    if n == 1:
        return np.squeeze(g, axis=axis)
    s = np.sqrt(g).sum(axis=axis)
    return s * s / n


def sum_envelope_moments(branches: Sequence[AlphaMuParams], order: int) -> float:
    """Exact E[(R_1 + ... + R_N)**order] for independent branches, integer order.

    Multinomial expansion folded one branch at a time:
    m_new[j] = sum_i C(j, i) m_prev[i] E[R^(j-i)].
    """
    if not branches:
        raise ValueError("at least one branch is required")
    if order != int(order) or order < 0:
        raise ValueError(f"order must be a nonnegative integer, got {order!r}")
    order = int(order)
    moments = [branches[0].envelope_moment(k) for k in range(order + 1)]
    for params in branches[1:]:
        cur = [params.envelope_moment(k) for k in range(order + 1)]
        moments = [
            math.fsum(
                math.comb(j, i) * moments[i] * cur[j - i] for i in range(j + 1)
            )
            for j in range(order + 1)
        ]
    return moments[order]


@dataclass(frozen=True)
class EgcApproximation:
    """Matched single-branch stand-in for an envelope sum.

    ``matched`` reproduces the exact first, second and fourth sum moments to
    within ``moment_residual`` (largest relative moment error, at most 1e-6).
    """

    matched: AlphaMuParams
    moment_residual: float
    n_branches: int


def _log_ratio(alpha: float, mu: float, k: int) -> float:
    """ln of E[R^(2k)] E[1] / E[R^k]**2 for an alpha-mu envelope (scale-free)."""
    return (
        gammaln(mu + 2.0 * k / alpha)
        + gammaln(mu)
        - 2.0 * gammaln(mu + k / alpha)
    )


def _mu_for_ratio(alpha: float, target_log_r2: float) -> float:
    """Unique mu with _log_ratio(alpha, mu, 1) = target (decreasing in mu)."""
    lo, hi = 1e-3, 1e3
    while _log_ratio(alpha, lo, 1) < target_log_r2:
        lo *= 0.1
        if lo < 1e-12:
            raise ValueError("second-moment ratio too large to bracket")
    while _log_ratio(alpha, hi, 1) > target_log_r2:
        hi *= 10.0
        if hi > 1e12:
            raise ValueError("second-moment ratio too close to 1 to bracket")
    return brentq(
        lambda m: _log_ratio(alpha, m, 1) - target_log_r2, lo, hi, xtol=1e-14
    )


def _solve_shape(
    log_r2: float, log_r4: float, alpha0: float, mu0: float
) -> tuple[float, float]:
    """Invert the two scale-free ratios for (alpha, mu).

    A quasi-Newton solve in log-parameters from the supplied guess is tried
    first; if it stalls, fall back to nesting: mu(alpha) from the second-order
    ratio by bisection, then a bracketed root in alpha for the fourth-order
    ratio.
    """

    def residual(log_params):
        a, m = math.exp(log_params[0]), math.exp(log_params[1])
        return [
            _log_ratio(a, m, 1) - log_r2,
            _log_ratio(a, m, 2) - log_r4,
        ]

    sol = root(residual, [math.log(alpha0), math.log(mu0)], method="hybr")
    if sol.success:
        a, m = math.exp(sol.x[0]), math.exp(sol.x[1])
        if max(abs(r) for r in residual(sol.x)) < 1e-9:
            return a, m

    def fourth_gap(a: float) -> float:
        return _log_ratio(a, _mu_for_ratio(a, log_r2), 2) - log_r4

    grid = alpha0 * np.logspace(-2.2, 2.2, 45)
    values = []
    for a in grid:
        try:
            values.append(fourth_gap(float(a)))
        except ValueError:
            values.append(math.nan)
    for i in range(len(grid) - 1):
        f0, f1 = values[i], values[i + 1]
        if math.isnan(f0) or math.isnan(f1) or f0 * f1 > 0:
            continue
        a = brentq(fourth_gap, float(grid[i]), float(grid[i + 1]), xtol=1e-13)
        return a, _mu_for_ratio(a, log_r2)
    raise RuntimeError(
        "moment match failed: no (alpha, mu) reproduces ratios "
        f"r2={math.exp(log_r2):.6g}, r4={math.exp(log_r4):.6g}"
    )


def moment_match_sum(branches: Sequence[AlphaMuParams]) -> EgcApproximation:
    """Fit one alpha-mu envelope to the sum of independent branches.

    Matches E[Z], E[Z**2] and E[Z**4] exactly (up to the solver tolerance).
    A single branch is returned unchanged.
    """
    branches = tuple(branches)
    if not branches:
        raise ValueError("at least one branch is required")
    if len(branches) == 1:
        return EgcApproximation(branches[0], 0.0, 1)

    m1 = sum_envelope_moments(branches, 1)
    m2 = sum_envelope_moments(branches, 2)
    m4 = sum_envelope_moments(branches, 4)
    log_r2 = math.log(m2) - 2.0 * math.log(m1)
    log_r4 = math.log(m4) - 2.0 * math.log(m2)

    alpha0 = sum(p.alpha for p in branches) / len(branches)
    mu0 = sum(p.mu for p in branches)
    alpha, mu = _solve_shape(log_r2, log_r4, alpha0, mu0)

    log_omega = (
        math.log(m1)
        + math.log(mu) / alpha
        + gammaln(mu)
        - gammaln(mu + 1.0 / alpha)
    )
    matched = AlphaMuParams(alpha, mu, math.exp(log_omega))

    residual = max(
        abs(matched.envelope_moment(1) / m1 - 1.0),
        abs(matched.envelope_moment(2) / m2 - 1.0),
        abs(matched.envelope_moment(4) / m4 - 1.0),
    )
    if residual > 1e-6:
        raise RuntimeError(
            f"moment match residual {residual:.3e} exceeds 1e-6 for "
            f"branches {branches}"
        )
    min_mu = min(p.mu for p in branches)
    if matched.mu < min_mu:
        raise RuntimeError(
            f"matched mu {matched.mu:.6g} fell below the smallest branch mu "
            f"{min_mu:.6g}; the surrogate would understate diversity"
        )
    return EgcApproximation(matched, residual, len(branches))
