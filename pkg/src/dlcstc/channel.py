"""Quasi-static Rayleigh channel realizations and receiver noise levels.

Every gain is an i.i.d. circularly-symmetric unit-variance complex
Gaussian held constant over one frame.  Draws are a pure function of the
seed path, so parallel trials reproduce exactly regardless of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DelayProfile


def rng_for(seed: int, *path: int) -> np.random.Generator:
    """Deterministic generator for a (seed, sub-stream...) path."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, *[int(p) & 0xFFFFFFFF for p in path]])


@dataclass(frozen=True)
class NoiseSpec:
    """Receiver noise variances (linear) and per-symbol energy."""

    sigma2_relay: float
    sigma2_dest: float
    symbol_energy: float = 1.0

    def __post_init__(self):
        if self.sigma2_relay < 0 or self.sigma2_dest < 0:
            raise ValueError("noise variances must be non-negative")
        if self.symbol_energy <= 0:
            raise ValueError("symbol energy must be positive")


@dataclass(frozen=True)
class ChannelRealization:
    """One quasi-static draw of every link gain and timing offset.

    ``h_cross[0]`` couples relay 1's transmitter into relay 2's receiver
    and ``h_cross[1]`` the reverse; the direct source->destination branch
    is always drawn so that the three-branch schemes see the same random
    stream as the two-branch ones.
    """

    h_sr: np.ndarray  # source -> relay k
    h_rd: np.ndarray  # relay k -> destination
    h_loop: np.ndarray  # relay k transmitter -> own receiver
    h_cross: np.ndarray  # (relay1->relay2, relay2->relay1)
    src_lags: np.ndarray  # source -> relay k, symbol periods
    dst_lags: np.ndarray  # relay k -> destination arrival offset
    h_direct: complex
    direct_lag: int

    def incoming_cross(self, k: int) -> complex:
        """Cross-talk gain seen at relay ``k``'s receiver."""
        return complex(self.h_cross[1 - k])


def _cn01(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def draw_realizations(seed_rng, count: int, profile: DelayProfile) -> dict:
    """Stacked arrays of ``count`` independent realizations (batched form
    used by the Monte Carlo engine).  Field layout matches
    :class:`ChannelRealization` with a leading batch axis."""
    rng = seed_rng if isinstance(seed_rng, np.random.Generator) else rng_for(seed_rng)
    choices = np.asarray(profile.src_lag_choices, dtype=np.int64)
    return {
        "h_sr": _cn01(rng, (count, 2)),
        "h_rd": _cn01(rng, (count, 2)),
        "h_loop": _cn01(rng, (count, 2)),
        "h_cross": _cn01(rng, (count, 2)),
        "src_lags": choices[rng.integers(0, choices.size, (count, 2))],
        "dst_lags": rng.integers(0, profile.max_lag, (count, 2)),
        "h_direct": _cn01(rng, count),
        "direct_lag": rng.integers(0, profile.max_lag, count),
    }


def realization_from_batch(batch: dict, i: int) -> ChannelRealization:
    return ChannelRealization(
        h_sr=batch["h_sr"][i].copy(),
        h_rd=batch["h_rd"][i].copy(),
        h_loop=batch["h_loop"][i].copy(),
        h_cross=batch["h_cross"][i].copy(),
        src_lags=batch["src_lags"][i].copy(),
        dst_lags=batch["dst_lags"][i].copy(),
        h_direct=complex(batch["h_direct"][i]),
        direct_lag=int(batch["direct_lag"][i]),
    )


def draw_realization(seed: int, profile: DelayProfile | None = None) -> ChannelRealization:
    """One quasi-static realization, deterministic in ``seed``."""
    profile = profile or DelayProfile()
    return realization_from_batch(draw_realizations(seed, 1, profile), 0)


def noise_variance_from_snr(snr_db: float, symbol_energy: float = 1.0) -> float:
    """Linear noise variance for a receive SNR in dB."""
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    if symbol_energy <= 0:
        raise ValueError("symbol energy must be positive")
    return symbol_energy / (10.0 ** (snr_db / 10.0))
