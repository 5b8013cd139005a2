"""Rayleigh block fading and MMSE estimation from accumulated uplink pilots.

Channels are stored with users along rows: ``H[i]`` is user i's downlink
row vector, so the noiseless received signal of user i is ``H[i] @ x``.
Every sampler takes a ``numpy.random.Generator`` and may carry leading
batch dimensions; one coherence block is the ``(M, M)`` slice.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import SystemConfig


@dataclass(frozen=True)
class ChannelBlock:
    H: np.ndarray  # (M, M) downlink channel, row i = user i
    G: np.ndarray  # (M, M) user-to-user channels, G[i, k] = h_ik; diagonal unused

    @property
    def M(self) -> int:
        return self.H.shape[-1]


@dataclass(frozen=True)
class ChannelEstimate:
    H_hat: np.ndarray
    beta: int
    err_var: float


def block_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for ``(seed, *key)``, e.g. one per Monte Carlo chunk."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly symmetric CN(0, var) samples."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_block(cfg: SystemConfig, rng: np.random.Generator) -> ChannelBlock:
    M = cfg.M
    H = complex_normal(rng, (M, M))
    G = complex_normal(rng, (M, M))
    return ChannelBlock(H=H, G=G)


def mmse_error_variance(beta, pilot_energy: float):
    """Per-entry posterior error variance after ``beta`` pilots of energy ``pilot_energy``."""
    return 1.0 / (1.0 + np.asarray(beta, dtype=float) * pilot_energy)


def pilot_noise(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance receiver noise for one pilot cycle (one entry per user and antenna)."""
    return complex_normal(rng, shape)


def mmse_from_statistic(acc: np.ndarray, beta: int, pilot_energy: float) -> np.ndarray:
    r"""MMSE estimate from the accumulated pilot statistic.

    ``acc`` is :math:`\sum_{c=1}^{\beta} (\sqrt{fP}\,h + n_c)`, i.e. the sum of
    ``beta`` unit-noise observations. Its posterior mean given a CN(0, 1) prior is
    :math:`\sqrt{fP}\,acc / (1 + \beta fP)`.
    """
    if beta == 0:
        return np.zeros_like(acc)
    return (np.sqrt(pilot_energy) / (1.0 + beta * pilot_energy)) * acc


def mmse_update(
    true_h: ChannelBlock, beta: int, cfg: SystemConfig, rng: np.random.Generator
) -> ChannelEstimate:
    """Simulate ``beta`` pilot cycles on ``true_h`` and return the MMSE estimate."""
    if beta < 0:
        raise ValueError("beta must be ≥ 0")
    H = true_h.H
    fp = cfg.pilot_energy
    # the sum of beta unit-noise observations has noise variance beta
    acc = beta * np.sqrt(fp) * H + complex_normal(rng, H.shape, var=float(beta)) if beta else np.zeros_like(H)
    H_hat = mmse_from_statistic(acc, beta, fp)
    return ChannelEstimate(H_hat=H_hat, beta=beta, err_var=float(mmse_error_variance(beta, fp)))


# Binary dump: little-endian uint64 M, uint64 count, then per block H then G,
# each row-major with interleaved (real, imag) float64.
_HEADER = struct.Struct("<QQ")


def dump_blocks(path: str | Path, blocks: Sequence[ChannelBlock]) -> None:
    blocks = list(blocks)
    M = blocks[0].M if blocks else 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(M, len(blocks)))
        for b in blocks:
            for mat in (b.H, b.G):
                if mat.shape != (M, M):
                    raise ValueError("all blocks must share the same M")
                fh.write(np.ascontiguousarray(mat, dtype="<c16").tobytes())


def load_blocks(path: str | Path) -> list[ChannelBlock]:
    raw = Path(path).read_bytes()
    M, count = _HEADER.unpack_from(raw)
    body = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size)
    if body.size != count * 2 * M * M:
        raise ValueError(f"{path}: expected {count} blocks of M={M}, got {body.size} entries")
    mats = body.reshape(count, 2, M, M).astype(np.complex128)
    return [ChannelBlock(H=m[0].copy(), G=m[1].copy()) for m in mats]


def sample_blocks(cfg: SystemConfig, rng: np.random.Generator, count: int) -> Iterable[ChannelBlock]:
    for _ in range(count):
        yield sample_block(cfg, rng)
