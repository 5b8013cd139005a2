"""Zero-forcing precoders and the per-user powers they deliver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelBlock, ChannelEstimate
from .config import SystemConfig

MAX_CONDITION = 1e12


class SingularEstimateError(np.linalg.LinAlgError):
    """The channel estimate is too ill-conditioned to invert; resample the block."""


@dataclass(frozen=True)
class Precoder:
    V: np.ndarray  # (M, M), column k is the unit-norm beam of user k


@dataclass(frozen=True)
class LinkPowers:
    signal: np.ndarray
    ibi: np.ndarray


def zf_beams(H_hat: np.ndarray, check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Unit-norm ZF beams for a (batch of) square estimate(s).

    Returns ``(V, ok)`` where ``ok`` flags estimates whose condition number
    (Frobenius estimate, an upper bound on the 2-norm one) stays below
    ``MAX_CONDITION`` and whose beams really invert them. Beams of entries
    with ``ok`` false are not meaningful.
    """
    H_hat = np.asarray(H_hat)
    M = H_hat.shape[-1]
    if H_hat.shape[-2] != M:
        raise ValueError("ZF expects as many users as antennas")
    eye = np.broadcast_to(np.eye(M, dtype=H_hat.dtype), H_hat.shape)
    with np.errstate(all="ignore"):
        try:
            V = np.linalg.solve(H_hat, eye)
        except np.linalg.LinAlgError:
            V = np.linalg.pinv(H_hat)
        norms = np.linalg.norm(V, axis=-2, keepdims=True)
        ok = np.ones(H_hat.shape[:-2], dtype=bool)
        if check:
            cond = np.linalg.norm(H_hat, axis=(-2, -1)) * np.linalg.norm(V, axis=(-2, -1))
            # a pinv fallback on a rank-deficient entry is finite but does not invert it
            resid = np.abs(H_hat @ V - eye).max(axis=(-2, -1))
            ok = np.isfinite(cond) & (cond < MAX_CONDITION) & (resid < 1e-6)
        V = V / norms
    return V, ok


def zf(estimate: ChannelEstimate | np.ndarray) -> Precoder:
    """Normalized columns of the right pseudo-inverse of the estimate."""
    H_hat = estimate.H_hat if isinstance(estimate, ChannelEstimate) else np.asarray(estimate)
    V, ok = zf_beams(H_hat)
    if not np.all(ok):
        raise SingularEstimateError("channel estimate condition number exceeds 1e12")
    return Precoder(V=V)


def gain_matrix(H: np.ndarray, V: np.ndarray, P: float) -> np.ndarray:
    """``|h_k v_j|^2 P/M`` for every user k (axis -2) and beam j (axis -1)."""
    M = H.shape[-1]
    return np.abs(H @ V) ** 2 * (P / M)


def split_powers(gains: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    M = gains.shape[-1]
    signal = np.diagonal(gains, axis1=-2, axis2=-1).copy()
    ibi = np.where(np.eye(M, dtype=bool), 0.0, gains).sum(axis=-1)
    return signal, ibi


def link_powers(truth: ChannelBlock | np.ndarray, pre: Precoder, cfg: SystemConfig) -> LinkPowers:
    H = truth.H if isinstance(truth, ChannelBlock) else np.asarray(truth)
    if H.shape[-1] != pre.V.shape[-2]:
        raise ValueError("channel and precoder dimensions disagree")
    signal, ibi = split_powers(gain_matrix(H, pre.V, cfg.P))
    return LinkPowers(signal=signal, ibi=ibi)
