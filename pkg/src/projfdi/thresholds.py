"""Residual-driven threshold formulas and detection decisions.

All thresholds share one shape: a fault-free residual of an uncertain
system with uncertainty radius delta < 1 satisfies

    ||r||^2 <= delta^2 (||data||^2)  and hence
    ||r||   <= delta / sqrt(1 - delta^2) * sqrt(||data||^2 - ||r||^2),

so the right-hand side is a no-false-alarm threshold that *shrinks* as the
residual grows.  The normalized variants divide by the data norm.  Ties
resolve to fault-free: the threshold is a supremum over fault-free
behavior.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .exceptions import ThresholdDomainError

__all__ = [
    "ThresholdReport", "adaptive_threshold", "normalized_detect",
    "kernel_scheme_threshold", "loop_threshold_factor",
]

ENERGY_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class ThresholdReport:
    """Residual norm, threshold values and the verdict they imply."""

    J: float
    J_th: float
    J_N: float
    J_thN: float
    delta: float
    verdict: str    # "fault-free" or "faulty"

    @property
    def faulty(self) -> bool:
        return self.verdict == "faulty"

    @property
    def ratio(self) -> float:
        return self.J_N / self.J_thN if self.J_thN > 0 else math.inf

    def to_json(self) -> dict:
        return {
            "J": self.J, "J_th": self.J_th, "J_N": self.J_N,
            "J_thN": self.J_thN, "delta": self.delta, "verdict": self.verdict,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    def table_row(self) -> str:
        return (f"{self.J:12.6g} {self.J_th:12.6g} {self.J_N:12.6g} "
                f"{self.J_thN:12.6g} {self.verdict:>10s}")

    @staticmethod
    def table_header() -> str:
        return f"{'J':>12s} {'J_th':>12s} {'J_N':>12s} {'J_thN':>12s} {'verdict':>10s}"


def _check_inputs(delta: float, data_norm_sq: float, residual_norm_sq: float):
    if not 0.0 < delta < 1.0:
        raise ThresholdDomainError(f"delta must lie in (0, 1), got {delta}")
    if data_norm_sq < 0 or residual_norm_sq < 0:
        raise ThresholdDomainError("energies must be nonnegative")
    if residual_norm_sq > data_norm_sq * (1.0 + ENERGY_SLACK) + ENERGY_SLACK:
        raise ThresholdDomainError(
            "residual energy exceeds data energy; inconsistent inputs")


def adaptive_threshold(delta: float, data_norm_sq: float, residual_norm_sq: float,
                       truncation_bound: float = 0.0) -> ThresholdReport:
    """Residual-driven threshold for the projection residual.

    residual_norm_sq is reduced by the certified truncation bound before use,
    biasing the decision toward no-false-alarm.
    """
    _check_inputs(delta, data_norm_sq, residual_norm_sq)
    r_sq = max(residual_norm_sq - truncation_bound, 0.0)
    r_sq = min(r_sq, data_norm_sq)
    J = math.sqrt(r_sq)
    factor = delta / math.sqrt(1.0 - delta * delta)
    J_th = factor * math.sqrt(max(data_norm_sq - r_sq, 0.0))
    if data_norm_sq > 0:
        J_N = J / math.sqrt(data_norm_sq)
        J_thN = factor * math.sqrt(max(1.0 - r_sq / data_norm_sq, 0.0))
    else:
        J_N, J_thN = 0.0, factor
    verdict = "faulty" if J > J_th else "fault-free"
    return ThresholdReport(J=J, J_th=J_th, J_N=J_N, J_thN=J_thN,
                           delta=delta, verdict=verdict)


def normalized_detect(delta: float, data_norm_sq: float, residual_norm_sq: float,
                      truncation_bound: float = 0.0):
    """Normalized residual, normalized threshold, their ratio and the verdict."""
    rep = adaptive_threshold(delta, data_norm_sq, residual_norm_sq, truncation_bound)
    return rep.J_N, rep.J_thN, rep.ratio, rep.verdict


def kernel_scheme_threshold(delta_K: float, data_norm_sq: float,
                            r0_norm_sq: float,
                            truncation_bound: float = 0.0) -> ThresholdReport:
    """Threshold for the kernel-projection scheme.

    Driven by the observer residual alone (no past term): with left-factor
    uncertainty of radius delta_K the observer residual energy is everything
    the data has outside the nominal kernel subspace.
    """
    return adaptive_threshold(delta_K, data_norm_sq, r0_norm_sq, truncation_bound)


def loop_threshold_factor(gamma: float, b: float) -> float:
    """Constant gamma*b / sqrt(1 - (1+gamma^2) b^2) of the feedback-loop schemes."""
    if b < 0 or gamma < 0:
        raise ThresholdDomainError("gamma and b must be nonnegative")
    dom = 1.0 - (1.0 + gamma * gamma) * b * b
    if dom <= 0.0:
        raise ThresholdDomainError(
            f"(1 + gamma^2) b^2 = {(1.0 + gamma * gamma) * b * b:.4g} >= 1; "
            "threshold undefined for this uncertainty level")
    return gamma * b / math.sqrt(dom)
