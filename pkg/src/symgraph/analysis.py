"""Thickness, condition number, resolution and the concentration/sandwich bounds.

All logarithms are natural.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError
from .graphspace import Partition

__all__ = [
    "DiagnosticsReport",
    "thickness",
    "condition_number",
    "resolution",
    "concentration_bound",
    "sandwich_delta",
    "entropy_decay_bound",
    "well_conditioned_parts",
    "unimodality_distance",
    "samp_flip_failure_bound",
    "diagnose",
    "DegenerateThicknessError",
]


class DegenerateThicknessError(InvalidInputError):
    """Raised when a quantity needs positive thickness but the optimizer touches the boundary."""


def thickness(m_star, part: Partition) -> tuple[float, np.ndarray]:
    """Per-part distance from the trivial boundary and its minimum.

    Returns ``(mu, tilde_m)`` with ``tilde_m_i = min(m*_i, p_i - m*_i)``.
    """
    m = part.check_profile(m_star)
    tilde = np.minimum(m, part.part_sizes - m)
    return float(tilde.min()), tilde


def condition_number(mu: float, k: int, n: int) -> float:
    """``5 k ln(n) / mu``."""
    if not mu > 0:
        raise DegenerateThicknessError(f"condition number needs positive thickness, got mu={mu}")
    return 5.0 * k * math.log(n) / mu


def resolution(lambda_cond: float) -> float:
    """Positive root ``r`` of ``r^2 / (1 + r) = lambda_cond``."""
    if lambda_cond < 0:
        raise InvalidInputError(f"condition number must be nonnegative, got {lambda_cond}")
    lam = lambda_cond
    return 0.5 * (lam + math.sqrt(lam * lam + 4.0 * lam))


def _exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else float("inf")


def concentration_bound(eps: float, mu: float, lambda_cond: float) -> tuple[float, bool]:
    """Upper bound on ``P(exists i: |m_i - m*_i| > eps * tilde_m*_i)`` under the uniform measure.

    Returns ``(bound, valid)``; the bound is only guaranteed for
    ``eps > resolution(lambda_cond)`` but is evaluated regardless.
    """
    value = _exp(-mu * (eps * eps / (1.0 + eps) - lambda_cond))
    return value, eps > resolution(lambda_cond)


def sandwich_delta(eps: float, mu: float, lambda_cond: float) -> tuple[float, bool]:
    """Failure probability ``2 exp(-mu (eps^2/12 - lambda))`` of the sandwich coupling.

    ``valid`` is ``eps > sqrt(12 lambda)``.
    """
    delta = 2.0 * _exp(-mu * (eps * eps / 12.0 - lambda_cond))
    return delta, eps > math.sqrt(12.0 * lambda_cond)


def samp_flip_failure_bound(m: float, delta: float) -> float:
    """``2 exp(-delta^2 m / (3 (1 + delta)))``: failure bound of the single-part subset/Bernoulli coupling."""
    return 2.0 * math.exp(-delta * delta * m / (3.0 * (1.0 + delta)))


def entropy_decay_bound(w, m_star, part: Partition) -> float:
    """Upper bound on ``Ent(w) - Ent(m*)``.

    ``-sum_i (w_i - m*_i)^2 / max(tilde_m*_i, tilde_w_i) + 3 k ln n``; parts
    where both thicknesses vanish contribute nothing.
    """
    w = part.check_profile(w)
    m = part.check_profile(m_star)
    p = part.part_sizes
    denom = np.maximum(np.minimum(m, p - m), np.minimum(w, p - w))
    dev = (w - m) ** 2
    quad = np.divide(dev, denom, out=np.zeros_like(dev), where=denom > 0)
    return float(-quad.sum() + 3.0 * part.k * math.log(part.n))


def well_conditioned_parts(m_star, part: Partition) -> list[int]:
    """Parts whose own thickness is at least ``5 k ln n``, ascending."""
    _, tilde = thickness(m_star, part)
    threshold = 5.0 * part.k * math.log(part.n)
    return np.flatnonzero(tilde >= threshold).tolist()


def unimodality_distance(m_star, feasible_profiles, part: Partition | None = None) -> tuple[float, float]:
    """L1 distance from ``m*`` to the nearest feasible integer profile.

    Returns ``(delta, adjusted_condition)`` where the adjusted condition
    number is ``(2 delta + 3k) ln(n) / mu``; it is ``nan`` when ``part`` is
    not given or the thickness is zero.
    """
    F = np.asarray(list(feasible_profiles) if not isinstance(feasible_profiles, np.ndarray) else feasible_profiles,
                   dtype=float)
    if F.size == 0:
        raise InvalidInputError("feasible profile set is empty")
    F = F.reshape(F.shape[0], -1)
    m = np.asarray(m_star, dtype=float)
    delta = float(np.min(np.abs(F - m).sum(axis=1)))
    adjusted = float("nan")
    if part is not None:
        mu, _ = thickness(m, part)
        if mu > 0:
            adjusted = (2.0 * delta + 3.0 * part.k) * math.log(part.n) / mu
    return delta, adjusted


@dataclass(frozen=True)
class DiagnosticsReport:
    """Thickness, condition number and resolution of a solved instance.

    ``lambda_cond`` and ``resolution`` are ``None`` when the thickness is
    zero; ``well_conditioned`` is always reported.
    """

    mu: float
    tilde_m: np.ndarray
    lambda_cond: float | None
    resolution: float | None
    well_conditioned: list
    n: int
    k: int
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mu": float(self.mu),
            "tilde_m": [float(x) for x in self.tilde_m],
            "lambda_cond": None if self.lambda_cond is None else float(self.lambda_cond),
            "resolution": None if self.resolution is None else float(self.resolution),
            "well_conditioned": [int(i) for i in self.well_conditioned],
            "n": self.n,
            "k": self.k,
            "flags": dict(self.flags),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def diagnose(m_star, part: Partition, eps: float | None = None) -> DiagnosticsReport:
    """Diagnostics for an optimizer; with ``eps`` also flags the side conditions of the bounds.

    Flags (only with ``eps``): ``concentration_valid`` (eps > r),
    ``sandwich_valid`` (eps > sqrt(12 lambda)), ``eps_below_half`` and
    ``log2k_over_mu_le_lambda``, the last two being extra assumptions used in
    deriving the sandwich bound.
    """
    mu, tilde = thickness(m_star, part)
    lam = r = None
    flags = {}
    if mu > 0:
        lam = condition_number(mu, part.k, part.n)
        r = resolution(lam)
    if eps is not None:
        flags["eps_below_half"] = eps < 0.5
        if lam is not None:
            flags["concentration_valid"] = eps > r
            flags["sandwich_valid"] = eps > math.sqrt(12.0 * lam)
            flags["log2k_over_mu_le_lambda"] = math.log(2 * part.k) / mu <= lam
        else:
            flags["concentration_valid"] = False
            flags["sandwich_valid"] = False
    return DiagnosticsReport(
        mu=mu,
        tilde_m=tilde,
        lambda_cond=lam,
        resolution=r,
        well_conditioned=well_conditioned_parts(m_star, part),
        n=part.n,
        k=part.k,
        flags=flags,
    )
