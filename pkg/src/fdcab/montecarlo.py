"""Block-by-block Monte Carlo of the CAB and half-duplex protocols.

Each coherence block draws its channels once, then accumulates one pilot
per user per cycle. After ``b`` cycles the base station holds the MMSE
estimate from ``b`` pilots; that estimate's ZF precoder serves cycle ``b+1``
(or the data phase if training stopped). Rates come from the SINR of the
sampled channels, interference treated as noise.

Blocks are grouped into fixed chunks of ``CHUNK`` blocks; chunk ``c`` always
draws from the stream ``(seed, stream, c)``. Results therefore depend only on
``(seed, cfg, trials)`` and never on how many workers ran the chunks.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .channel import block_rng, complex_normal, mmse_from_statistic, pilot_noise
from .config import SystemConfig
from .precoding import gain_matrix, split_powers, zf_beams
from .rates import (
    RateBreakdown,
    delta_r_data,
    delta_r_ini,
    delta_r_ini_inv,
    genie_gains,
    r_zf_closed_form,
)

CHUNK = 64
INI_MODELS = ("deterministic", "sampled")


@dataclass(frozen=True)
class BlockTrace:
    per_cycle_rates_noini: np.ndarray  # entry j-2 <-> cycle j >= 2
    per_cycle_rates_ini: np.ndarray
    data_rate: float


@dataclass(frozen=True)
class CycleRateTables:
    """Per-block rates for every pilot count ``b = 0 .. n_cycles``.

    ``noini[:, b]`` / ``ini[:, b]`` are user-averaged rates when the precoder
    is built from ``b`` pilots per user (column 0 is the silent first cycle).
    With ``per_user=True`` a trailing user axis is kept.
    """

    genie: np.ndarray
    noini: np.ndarray
    ini: np.ndarray

    @property
    def n_blocks(self) -> int:
        return self.genie.shape[0]

    @property
    def n_cycles(self) -> int:
        return self.noini.shape[1] - 1


class Efficiency(NamedTuple):
    mean: float
    se: float


def _ini_rates(signal, ibi, G, cfg: SystemConfig, ini_model: str) -> np.ndarray:
    if ini_model == "deterministic":
        return np.log2(1.0 + signal / (1.0 + ibi + cfg.ini_power))
    # sampled: user i hears pilot k != i through h_ik; average over the M-1 symbols
    M = cfg.M
    ini = cfg.alpha * cfg.pilot_energy * np.abs(G) ** 2
    r = np.log2(1.0 + signal[..., None] / (1.0 + ibi[..., None] + ini))
    off = ~np.eye(M, dtype=bool)
    return (r * off).sum(axis=-1) / (M - 1)


def _simulate(cfg: SystemConfig, n_cycles: int, n_blocks: int, rng: np.random.Generator,
              ini_model: str, per_user: bool):
    M, P, fp = cfg.M, cfg.P, cfg.pilot_energy
    H = complex_normal(rng, (n_blocks, M, M))
    G = complex_normal(rng, (n_blocks, M, M))
    genie = np.log2(1.0 + genie_gains(H) * P / M)
    shape = (n_blocks, n_cycles + 1, M) if per_user else (n_blocks, n_cycles + 1)
    noini = np.zeros(shape)
    ini = np.zeros(shape)
    ok = np.ones(n_blocks, dtype=bool)
    acc = np.zeros_like(H)
    pilot = np.sqrt(fp) * H
    for b in range(1, n_cycles + 1):
        acc += pilot + pilot_noise(rng, H.shape)
        V, ok_b = zf_beams(mmse_from_statistic(acc, b, fp))
        ok &= ok_b
        signal, ibi = split_powers(gain_matrix(H, V, P))
        r0 = np.log2(1.0 + signal / (1.0 + ibi))
        r1 = _ini_rates(signal, ibi, G, cfg, ini_model)
        if per_user:
            noini[:, b], ini[:, b] = r0, r1
        else:
            noini[:, b], ini[:, b] = r0.mean(axis=-1), r1.mean(axis=-1)
    if not per_user:
        genie = genie.mean(axis=-1)
    return genie, noini, ini, ok


def _simulate_resampling(cfg, n_cycles, n_blocks, rng, ini_model, per_user):
    """Run ``n_blocks`` blocks, redrawing any whose estimate was near-singular."""
    genie, noini, ini, ok = _simulate(cfg, n_cycles, n_blocks, rng, ini_model, per_user)
    todo = np.flatnonzero(~ok)
    while todo.size:
        g2, n2, i2, ok2 = _simulate(cfg, n_cycles, todo.size, rng, ini_model, per_user)
        genie[todo[ok2]], noini[todo[ok2]], ini[todo[ok2]] = g2[ok2], n2[ok2], i2[ok2]
        todo = todo[~ok2]
    return genie, noini, ini


def _run_chunk(args):
    cfg, n_cycles, start, size, seed, stream, ini_model, per_user = args
    rng = block_rng(seed, stream, start // CHUNK)
    return _simulate_resampling(cfg, n_cycles, size, rng, ini_model, per_user)


def cycle_rate_tables(
    cfg: SystemConfig,
    n_cycles: int | None = None,
    trials: int | None = None,
    seed: int | None = None,
    workers: int = 1,
    ini_model: str = "deterministic",
    per_user: bool = False,
    stream: int = 0,
) -> CycleRateTables:
    """Simulate ``trials`` blocks with up to ``n_cycles`` pilot cycles each."""
    if ini_model not in INI_MODELS:
        raise ValueError(f"ini_model must be one of {INI_MODELS}")
    n_cycles = cfg.n_cycles if n_cycles is None else n_cycles
    trials = cfg.trials if trials is None else trials
    seed = cfg.seed if seed is None else seed
    jobs = [
        (cfg, n_cycles, start, min(CHUNK, trials - start), seed, stream, ini_model, per_user)
        for start in range(0, trials, CHUNK)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(job) for job in jobs]
    genie, noini, ini = (np.concatenate(p) for p in zip(*parts))
    return CycleRateTables(genie=genie, noini=noini, ini=ini)


def _single_block(cfg, n_cycles, rng, ini_model) -> tuple[np.ndarray, np.ndarray]:
    _, noini, ini = _simulate_resampling(cfg, n_cycles, 1, rng, ini_model, per_user=False)
    return noini[0], ini[0]


def trace_from_row(noini: np.ndarray, ini: np.ndarray, n: int, strategy: str = "cab") -> BlockTrace:
    if strategy == "cab":
        return BlockTrace(noini[1:n].copy(), ini[1:n].copy(), float(noini[n]))
    if strategy == "hd":
        return BlockTrace(np.zeros(n - 1), np.zeros(n - 1), float(noini[n]))
    raise ValueError(f"unknown strategy {strategy!r}")


def _cycles(T_tr: int, cfg: SystemConfig, lo: int) -> int:
    if T_tr % cfg.M or not lo <= T_tr < cfg.T:
        raise ValueError(f"training duration {T_tr} must be a multiple of M in [{lo}, {cfg.T})")
    return T_tr // cfg.M


def simulate_cab(cfg: SystemConfig, T_cab: int, rng: np.random.Generator,
                 ini_model: str = "deterministic") -> BlockTrace:
    """One coherence block of CAB with ``T_cab`` training symbols."""
    n = _cycles(T_cab, cfg, 2 * cfg.M)
    noini, ini = _single_block(cfg, n, rng, ini_model)
    return trace_from_row(noini, ini, n, "cab")


def simulate_hd(cfg: SystemConfig, T_hd: int, rng: np.random.Generator) -> BlockTrace:
    """One coherence block of half-duplex training; the downlink is silent while training."""
    n = _cycles(T_hd, cfg, cfg.M)
    noini, ini = _single_block(cfg, n, rng, "deterministic")
    return trace_from_row(noini, ini, n, "hd")


def simulate_traces(cfg: SystemConfig, T_tr: int, strategy: str = "cab", trials: int | None = None,
                    seed: int | None = None, workers: int = 1,
                    ini_model: str = "deterministic") -> list[BlockTrace]:
    n = _cycles(T_tr, cfg, 2 * cfg.M if strategy == "cab" else cfg.M)
    tables = cycle_rate_tables(cfg, n, trials, seed, workers, ini_model)
    return [trace_from_row(tables.noini[i], tables.ini[i], n, strategy) for i in range(tables.n_blocks)]


def block_efficiency(trace: BlockTrace, cfg: SystemConfig, T_tr: int) -> float:
    """Time-weighted per-user rate of one block (training cycles weighted per symbol; silent for HD)."""
    M, T = cfg.M, cfg.T
    training = math.fsum(trace.per_cycle_rates_noini) + (M - 1) * math.fsum(trace.per_cycle_rates_ini)
    return ((T - T_tr) * trace.data_rate + training) / T


def ergodic_efficiency(traces: Sequence[BlockTrace], cfg: SystemConfig, T_tr: int) -> Efficiency:
    """Ensemble spectral efficiency and its standard error across blocks."""
    if len(traces) < 2:
        raise ValueError("need at least 2 traces")
    values = np.array([block_efficiency(tr, cfg, T_tr) for tr in traces])
    return Efficiency(float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size)))


def efficiency_samples(tables: CycleRateTables, cfg: SystemConfig, T_tr: int, strategy: str = "cab") -> np.ndarray:
    """Per-block efficiencies straight from the tables (vectorised twin of block_efficiency)."""
    M, T = cfg.M, cfg.T
    n = T_tr // M
    data = (T - T_tr) * tables.noini[:, n]
    if strategy == "hd":
        return data / T
    training = tables.noini[:, 1:n].sum(axis=1) + (M - 1) * tables.ini[:, 1:n].sum(axis=1)
    return (data + training) / T


def simulated_breakdown(cfg: SystemConfig, trials: int | None = None, seed: int | None = None,
                        workers: int = 1, ini_model: str = "deterministic") -> RateBreakdown:
    """Monte Carlo rate tables on the same aggregation skeleton as the analytic ones."""
    tables = cycle_rate_tables(cfg, cfg.n_cycles, trials, seed, workers, ini_model)
    noini = tables.noini.mean(axis=0)
    ini = tables.ini.mean(axis=0)
    return RateBreakdown(
        cfg=cfg,
        r_zf=r_zf_closed_form(cfg.M, cfg.P),
        delta_r_ini_inv=delta_r_ini_inv(cfg),
        data=noini,
        noini=noini,
        ini=ini,
        mode="simulated",
        tables=tables,
    )


@dataclass(frozen=True)
class LossPoint:
    beta: int
    loss_ini: float
    se_ini: float
    bound_ini: float
    loss_data: float
    se_data: float
    bound_data: float

    @property
    def ini_ok(self) -> bool:
        return self.loss_ini <= self.bound_ini + 3 * self.se_ini

    @property
    def data_ok(self) -> bool:
        return self.loss_data <= self.bound_data + 3 * self.se_data


def measured_losses(cfg: SystemConfig, betas: Iterable[int], trials: int | None = None,
                    seed: int | None = None, workers: int = 1) -> list[LossPoint]:
    """Paired Monte Carlo rate losses against the genie rate, with their bounds."""
    betas = list(betas)
    tables = cycle_rate_tables(cfg, max(betas), trials, seed, workers)
    out = []
    sqrt_n = math.sqrt(tables.n_blocks)
    for b in betas:
        li = tables.genie - tables.ini[:, b]
        ld = tables.genie - tables.noini[:, b]
        out.append(LossPoint(
            beta=b,
            loss_ini=float(li.mean()), se_ini=float(li.std(ddof=1) / sqrt_n),
            bound_ini=float(delta_r_ini(b, cfg)),
            loss_data=float(ld.mean()), se_data=float(ld.std(ddof=1) / sqrt_n),
            bound_data=float(delta_r_data(b * cfg.M, cfg)),
        ))
    return out


def write_traces_csv(path: str | Path, traces: Sequence[BlockTrace]) -> None:
    """``block_id, cycle, rate_noini, rate_ini, data_rate``; cycles start at 2."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["block_id", "cycle", "rate_noini", "rate_ini", "data_rate"])
        for i, tr in enumerate(traces):
            for j, (r0, r1) in enumerate(zip(tr.per_cycle_rates_noini, tr.per_cycle_rates_ini), start=2):
                w.writerow([i, j, repr(float(r0)), repr(float(r1)), repr(tr.data_rate)])
