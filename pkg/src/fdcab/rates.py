"""Per-user rates, rate-loss bounds and block spectral efficiencies.

All rates are in bits/s/Hz. A :class:`RateBreakdown` tabulates, for every
pilot count ``beta`` (pilots received per user), the per-symbol rate during
the data phase, at the user's own pilot symbol and at the other users'
pilot symbols. :func:`ar_cab` and :func:`ar_hd` aggregate those tables over
one coherence block, so the same code serves the analytic tables (genie
rate minus the loss bounds, floored at zero) and the Monte Carlo ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import exp1

from .channel import complex_normal
from .config import SystemConfig
from .precoding import gain_matrix, split_powers, zf_beams

LOG2E = math.log2(math.e)
LN2 = math.log(2.0)


def scaled_exp1(x):
    """``exp(x) * E1(x)`` for ``x > 0`` without overflow at large ``x``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x <= 500.0
    out[small] = np.exp(x[small]) * exp1(x[small])
    xl = x[~small]
    if xl.size:
        # asymptotic series; truncation error < 6!/x^7 relative
        inv = 1.0 / xl
        out[~small] = inv * (1 - inv * (1 - 2 * inv * (1 - 3 * inv * (1 - 4 * inv * (1 - 5 * inv)))))
    return out if out.ndim else float(out)


def r_zf_closed_form(M: int, P: float) -> float:
    """Genie-aided ZF rate ``E[log2(1 + g P/M)]`` with ``g ~ Exp(1)``."""
    return LOG2E * float(scaled_exp1(M / P))


def genie_gains(H: np.ndarray) -> np.ndarray:
    """Effective gains ``|h_k v_k|^2`` of perfect-CSI ZF, shape ``H.shape[:-1]``."""
    V, _ = zf_beams(H, check=False)
    return np.abs(np.diagonal(H @ V, axis1=-2, axis2=-1)) ** 2


def genie_rate_samples(cfg: SystemConfig, trials: int, rng: np.random.Generator) -> np.ndarray:
    """Per-block user-averaged genie rates for ``trials`` fresh blocks."""
    H = complex_normal(rng, (trials, cfg.M, cfg.M))
    return np.log2(1.0 + genie_gains(H) * cfg.P / cfg.M).mean(axis=-1)


def r_zf(cfg: SystemConfig, trials: int, rng: np.random.Generator) -> float:
    """Monte Carlo estimate of the genie-aided per-user rate."""
    if trials < 1:
        raise ValueError("trials must be ≥ 1")
    return float(genie_rate_samples(cfg, trials, rng).mean())


def delta_r_data(T_tr, cfg: SystemConfig):
    """Data-phase rate-loss bound after ``T_tr`` training symbols."""
    M, P = cfg.M, cfg.P
    T_tr = np.asarray(T_tr, dtype=float)
    return np.log2(1.0 + (P / M) * (M - 1) / (1.0 + T_tr * cfg.f * P / M))


def delta_r_ini(beta, cfg: SystemConfig):
    """Training-phase loss bound (IBI after ``beta`` pilots plus INI)."""
    M, P = cfg.M, cfg.P
    beta = np.asarray(beta, dtype=float)
    a = cfg.ini_power
    num = 1.0 + (P / M) * (M - 1) / (1.0 + beta * cfg.f * P) + a
    return np.log2(num / (1.0 + a / (1.0 + P / M)))


def delta_r_ini_inv(cfg: SystemConfig) -> float:
    """INI loss that remains once IBI has vanished (``beta -> inf``)."""
    a = cfg.ini_power
    return float(np.log2((1.0 + a) / (1.0 + a / (1.0 + cfg.P / cfg.M))))


@dataclass(frozen=True, eq=False)
class RateBreakdown:
    """Per-pilot-count rate tables for one scenario.

    ``data[b]``, ``noini[b]`` and ``ini[b]`` hold the per-user rate when the
    base station has ``b`` pilots per user, for ``b = 0 .. T // M``.
    """

    cfg: SystemConfig
    r_zf: float
    delta_r_ini_inv: float
    data: np.ndarray
    noini: np.ndarray
    ini: np.ndarray
    mode: str = "analytic"
    tables: object = field(default=None, repr=False)  # per-block Monte Carlo tables, simulated mode

    def delta_r_data(self, T_tr):
        return delta_r_data(T_tr, self.cfg)

    def delta_r_ini(self, beta):
        return delta_r_ini(beta, self.cfg)


@lru_cache(maxsize=256)
def analytic_breakdown(cfg: SystemConfig) -> RateBreakdown:
    """Bound-based tables: genie rate minus each loss bound, floored at zero."""
    r = r_zf_closed_form(cfg.M, cfg.P)
    beta = np.arange(cfg.n_cycles + 1)
    data = np.maximum(r - delta_r_data(beta * cfg.M, cfg), 0.0)
    ini = np.maximum(r - delta_r_ini(beta, cfg), 0.0)
    ini[0] = 0.0
    for arr in (data, ini):
        arr.setflags(write=False)
    return RateBreakdown(
        cfg=cfg,
        r_zf=r,
        delta_r_ini_inv=delta_r_ini_inv(cfg),
        data=data,
        noini=data,
        ini=ini,
    )


def _check_duration(t: int, cfg: SystemConfig, lo: int) -> int:
    if int(t) != t or t % cfg.M:
        raise ValueError(f"training duration {t} is not a multiple of M={cfg.M}")
    if not lo <= t < cfg.T:
        raise ValueError(f"training duration {t} outside [{lo}, {cfg.T})")
    return int(t) // cfg.M


def training_sum(rb: RateBreakdown) -> np.ndarray:
    """``S[n]`` = summed training-symbol rates of cycles 2..n (pilot counts 1..n-1)."""
    M = rb.cfg.M
    per_cycle = rb.noini + (M - 1) * rb.ini
    per_cycle = np.concatenate([[0.0], per_cycle[:-1]])
    per_cycle[1] = 0.0  # cycle 1 has no CSI and carries no downlink data
    return np.cumsum(per_cycle)


def ar_cab(T_cab: int, cfg: SystemConfig, rb: RateBreakdown | None = None) -> float:
    """CAB spectral efficiency with ``T_cab`` training symbols.

    Accepts ``T_cab = M`` (a single silent cycle followed by data) so that
    brute-force searches can share one grid with the half-duplex case.
    """
    rb = analytic_breakdown(cfg) if rb is None else rb
    n = _check_duration(T_cab, cfg, cfg.M)
    T = cfg.T
    return float(((T - T_cab) * rb.data[n] + training_sum(rb)[n]) / T)


def ar_hd(T_hd: int, cfg: SystemConfig, rb: RateBreakdown | None = None) -> float:
    """Half-duplex spectral efficiency with ``T_hd`` silent training symbols."""
    rb = analytic_breakdown(cfg) if rb is None else rb
    n = _check_duration(T_hd, cfg, cfg.M)
    return float((cfg.T - T_hd) / cfg.T * rb.data[n])


def training_grid(cfg: SystemConfig) -> np.ndarray:
    """Every whole-cycle training duration in ``[M, T - M]``."""
    return np.arange(cfg.M, cfg.T - cfg.M + 1, cfg.M)


def ar_cab_curve(cfg: SystemConfig, rb: RateBreakdown | None = None) -> tuple[np.ndarray, np.ndarray]:
    rb = analytic_breakdown(cfg) if rb is None else rb
    t = training_grid(cfg)
    n = t // cfg.M
    return t, ((cfg.T - t) * rb.data[n] + training_sum(rb)[n]) / cfg.T


def ar_hd_curve(cfg: SystemConfig, rb: RateBreakdown | None = None) -> tuple[np.ndarray, np.ndarray]:
    rb = analytic_breakdown(cfg) if rb is None else rb
    t = training_grid(cfg)
    return t, (cfg.T - t) / cfg.T * rb.data[t // cfg.M]


def sinr_rates(H: np.ndarray, H_hat: np.ndarray, cfg: SystemConfig, ini_power) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Instantaneous ``log2(1 + SINR)`` per user, without and with INI.

    Returns ``(rate_noini, rate_ini, ok)``; ``ini_power`` broadcasts against
    the per-user SINR denominator. ``ok`` flags well-conditioned estimates.
    """
    V, ok = zf_beams(H_hat)
    signal, ibi = split_powers(gain_matrix(H, V, cfg.P))
    noini = np.log2(1.0 + signal / (1.0 + ibi))
    ini = np.log2(1.0 + signal / (1.0 + ibi + ini_power))
    return noini, ini, ok
