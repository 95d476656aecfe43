"""Gradient-noise-scale relations between batch size, learning rate, and
the steps/data trade-off.

All functions are closed-form in the noise parameters; nothing here is
estimated from gradients.  Batch sizes are in tokens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ValidationError

# the classic seven-column trade-off grid; 1/9 prints as the familiar
# (e = 1.1, s = 10) column
TABLE_B_RATIOS = (1.0 / 9.0, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0)


@dataclass(frozen=True)
class NoiseParams:
    """Noise-scale parameters of one optimizer family.

    SGD-style and Adam-style updates use different effective (eta_max,
    B_noise) values; keep separate instances per family rather than
    converting between them.
    """

    eta_max: float
    B_noise: float
    dL_max: float = 1.0
    gamma_tradeoff: float = 1.0

    def __post_init__(self) -> None:
        if min(self.eta_max, self.B_noise, self.dL_max, self.gamma_tradeoff) <= 0:
            raise ValidationError("all NoiseParams fields must be positive")


@dataclass(frozen=True)
class TradeoffRow:
    """One point on the iso-loss steps/data trade-off curve."""

    e_ratio: float  # E/E_min: data overhead
    s_ratio: float  # S/S_min: step overhead
    b_ratio: float  # B/B_crit


def eta_opt_sgd(B: float, params: NoiseParams) -> float:
    """Optimal SGD-style learning rate at batch size B: eta_max/(1 + B_noise/B)."""
    if B <= 0:
        raise ValidationError("B must be positive")
    return params.eta_max / (1.0 + params.B_noise / B)


def delta_loss_opt(B: float, params: NoiseParams) -> float:
    """Best per-step loss improvement at batch size B: dL_max/(1 + B_noise/B)."""
    if B <= 0:
        raise ValidationError("B must be positive")
    return params.dL_max / (1.0 + params.B_noise / B)


def eta_opt_adam(B: float, params: NoiseParams) -> float:
    """Optimal sign-style (Adam-family) learning rate at batch size B.

    eta_max / (0.5*(sqrt(B_noise/B) + sqrt(B/B_noise))); peaks at exactly
    B = B_noise and falls off with +-1/2 log-log slope far from it.
    """
    if B <= 0:
        raise ValidationError("B must be positive")
    r = params.B_noise / B
    return params.eta_max / (0.5 * (math.sqrt(r) + 1.0 / math.sqrt(r)))


def solve_tradeoff(b_ratio: float, gamma: float = 1.0) -> TradeoffRow:
    """Data and step overheads of training at B = b_ratio * B_crit.

    Fixing the batch size closes the trade-off (s - 1)(e - 1) = gamma with
    s = e/b, giving the quadratic e^2 - (1+b)e + b(1-gamma) = 0; the larger
    root is the physical branch (e > 1 and e > b for any gamma > 0).
    """
    if b_ratio <= 0 or gamma <= 0:
        raise ValidationError("b_ratio and gamma must be positive")
    b = b_ratio
    disc = (1.0 + b) ** 2 - 4.0 * b * (1.0 - gamma)
    assert disc > 0, "discriminant (1-b)^2 + 4*b*gamma is positive for gamma > 0"
    e = 0.5 * ((1.0 + b) + math.sqrt(disc))
    assert e > 1.0 and e > b
    return TradeoffRow(e_ratio=e, s_ratio=e / b, b_ratio=b)


def tradeoff_table(
    gamma: float, b_ratios: Sequence[float] = TABLE_B_RATIOS
) -> list[TradeoffRow]:
    """One trade-off row per B/B_crit ratio, in the given order."""
    return [solve_tradeoff(b, gamma) for b in b_ratios]


def critical_batch(E_min: float, S_min: float) -> float:
    """Critical batch size B_crit = E_min/S_min (tokens per step)."""
    if E_min <= 0 or S_min <= 0:
        raise ValidationError("E_min and S_min must be positive")
    return E_min / S_min
