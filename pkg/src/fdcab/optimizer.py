"""Optimal training durations and spectral-efficiency loss bounds.

The closed forms balance a Maclaurin expansion of the data-phase loss,
which is a natural-log quantity, against a rate loss. Their constants are
therefore evaluated in nats (``rate_bits * ln 2``); the loss bounds are
computed in nats and returned in bits like every other rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig, round_to_cycle
from .rates import (
    LN2,
    LOG2E,
    RateBreakdown,
    analytic_breakdown,
    ar_cab,
    ar_cab_curve,
    ar_hd,
    ar_hd_curve,
)

STRATEGIES = {"cab": (ar_cab, ar_cab_curve), "hd": (ar_hd, ar_hd_curve)}


@dataclass(frozen=True)
class TrainingPlan:
    strategy: str
    t_star_exact: int
    t_star_approx: float
    ar_at_exact: float
    ar_at_approx: float
    t_approx_rounded: int  # t_star_approx snapped to whole cycles


def quadratic_root(c: float, T: int) -> float:
    """Positive root of ``c t^2 + t - T = 0``."""
    if c <= 0:
        return float(T)
    # rationalised form avoids cancellation when 4cT is small
    return 2.0 * T / (math.sqrt(4.0 * c * T + 1.0) + 1.0)


def cab_constant(cfg: SystemConfig, rb: RateBreakdown) -> float:
    return cfg.f * rb.delta_r_ini_inv * LN2 / cfg.M


def hd_constant(cfg: SystemConfig, rb: RateBreakdown) -> float:
    return cfg.f * rb.r_zf * LN2 / (cfg.M - 1)


def t_cab_approx(cfg: SystemConfig, rb: RateBreakdown | None = None) -> float:
    """Closed-form CAB training duration; ``T - M`` when there is no INI."""
    rb = analytic_breakdown(cfg) if rb is None else rb
    c = cab_constant(cfg, rb)
    if c <= 0:
        return float(cfg.T - cfg.M)
    return quadratic_root(c, cfg.T)


def t_cab_approx_simplified(cfg: SystemConfig, rb: RateBreakdown | None = None) -> float:
    """Large-``T`` form ``sqrt(T / c)``."""
    rb = analytic_breakdown(cfg) if rb is None else rb
    c = cab_constant(cfg, rb)
    return math.inf if c <= 0 else math.sqrt(cfg.T / c)


def t_hd_approx(cfg: SystemConfig, rb: RateBreakdown | None = None) -> float:
    rb = analytic_breakdown(cfg) if rb is None else rb
    if rb.r_zf <= 0:
        raise ValueError("genie rate must be positive")
    return quadratic_root(hd_constant(cfg, rb), cfg.T)


def t_hd_approx_simplified(cfg: SystemConfig, rb: RateBreakdown | None = None) -> float:
    rb = analytic_breakdown(cfg) if rb is None else rb
    return math.sqrt(cfg.T / hd_constant(cfg, rb))


def approx_duration(strategy: str, cfg: SystemConfig, rb: RateBreakdown | None = None) -> float:
    return {"cab": t_cab_approx, "hd": t_hd_approx}[strategy](cfg, rb)


def grid_argmax(values: np.ndarray) -> int:
    """Index of the maximum; ties go to the smallest index."""
    return int(np.flatnonzero(values == values.max())[0])


def brute_force_optimum(cfg: SystemConfig, strategy: str = "cab",
                        rb: RateBreakdown | None = None) -> TrainingPlan:
    """Exhaustive search over every multiple of M in ``[M, T - M]``.

    ``rb`` selects the objective: analytic tables by default, or a
    simulated breakdown from :mod:`fdcab.montecarlo`.
    """
    rb = analytic_breakdown(cfg) if rb is None else rb
    rate_fn, curve_fn = STRATEGIES[strategy]
    t, values = curve_fn(cfg, rb)
    i = grid_argmax(values)
    t_apx = approx_duration(strategy, cfg, rb)
    t_rounded = round_to_cycle(t_apx, cfg.M, cfg.T)
    return TrainingPlan(
        strategy=strategy,
        t_star_exact=int(t[i]),
        t_star_approx=t_apx,
        ar_at_exact=float(values[i]),
        ar_at_approx=rate_fn(t_rounded, cfg, rb),
        t_approx_rounded=t_rounded,
    )


def loss_bound_cab(cfg: SystemConfig, rb: RateBreakdown | None = None) -> float:
    """Asymptotic CAB loss bound ``2 sqrt(M dR_inv / (f T))`` (remainder dropped)."""
    rb = analytic_breakdown(cfg) if rb is None else rb
    nat = 2.0 * math.sqrt(cfg.M * rb.delta_r_ini_inv * LN2 / (cfg.f * cfg.T))
    return nat * LOG2E


def cab_bound_slack(cfg: SystemConfig, rb: RateBreakdown | None = None) -> float:
    """Finite-``T`` head term ``2 M r_zf / T`` dropped from the CAB bound."""
    rb = analytic_breakdown(cfg) if rb is None else rb
    return 2.0 * cfg.M * rb.r_zf / cfg.T


def loss_bound_hd(cfg: SystemConfig, rb: RateBreakdown | None = None) -> float:
    rb = analytic_breakdown(cfg) if rb is None else rb
    nat = 2.0 * math.sqrt((cfg.M - 1) * rb.r_zf * LN2 / (cfg.f * cfg.T))
    return nat * LOG2E


def gain_slack(cfg: SystemConfig, t_tr: int, rb: RateBreakdown | None = None) -> float:
    """Explicit finite-``T`` remainder of the full-duplex gain bound."""
    rb = analytic_breakdown(cfg) if rb is None else rb
    M, T, f = cfg.M, cfg.T, cfg.f
    head = 2.0 * M / T * rb.r_zf
    jensen = (t_tr / T) * ((M - 1) / (M * f)) * math.log2(t_tr - 1) / (t_tr - 2)
    return head + jensen


def gain_lower_bound(cfg: SystemConfig, t_tr: int, rb: RateBreakdown | None = None) -> float:
    """Lower bound on ``ar_cab(t_tr) - ar_hd(t_tr)``."""
    rb = analytic_breakdown(cfg) if rb is None else rb
    if t_tr % cfg.M or not 2 * cfg.M <= t_tr < cfg.T:
        raise ValueError(f"t_tr={t_tr} must be a multiple of M in [2M, T)")
    return (t_tr / cfg.T) * (rb.r_zf - rb.delta_r_ini_inv) - gain_slack(cfg, t_tr, rb)


def optimize(cfg: SystemConfig, rb: RateBreakdown | None = None) -> dict[str, TrainingPlan]:
    return {s: brute_force_optimum(cfg, s, rb) for s in STRATEGIES}

