"""Sample-by-sample relay simulation.

Three engines: the cross-talk feedback recursion (relays re-amplify each
other's transmissions), the loop-channel scheme with residual
cancellation, and the naive full-cancellation demonstration in which both
relays try to subtract the cross-talk using their own symbol estimates.

All engines are written over a leading batch axis (independent trials)
and exposed through single-trial wrappers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, NoiseSpec, rng_for
from .codegen import AmplifierSolution
from .config import SchemeConfig
from .modem import Frame

SNR_CEILING_DB = 200.0


@dataclass(frozen=True)
class RelayTrace:
    """Per-trial relay signals: ``transmitted[k]`` and the received stream
    after exact self-loop removal, both over the frame window."""

    transmitted: np.ndarray  # (2, frame_len)
    received_clean: np.ndarray  # (2, frame_len)
    per_index_snr: np.ndarray | None = None


def _cn01(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def draw_relay_noise(rng, count: int, streams: int, length: int, sigma2: float) -> np.ndarray:
    return np.sqrt(sigma2) * _cn01(rng, (count, streams, length))


def _shifted_source(x: np.ndarray, lags: np.ndarray, i: int) -> np.ndarray:
    """x[b, i - lag[b, k]] with zero fill, shape (B, K)."""
    idx = i - lags
    take = np.take_along_axis(x, np.clip(idx, 0, x.shape[1] - 1), axis=1)
    return np.where(idx >= 0, take, 0.0)


def crosstalk_recursion_batch(x, h_sr, h_in, lags, beta, w, proc_delay: int):
    """Batched cross-talk relay recursion.

    ``x``: (B, L) padded source frames; ``h_in[:, k]`` is the cross gain
    into relay k's receiver; ``w``: (B, 2, L) receiver noise.  Returns
    transmitted and cleaned-received arrays of shape (B, 2, L).
    """
    B, L = x.shape
    t = np.zeros((B, 2, L), dtype=np.complex128)
    rc = np.zeros((B, 2, L), dtype=np.complex128)
    for i in range(L):
        if i >= proc_delay:
            t[:, :, i] = beta * rc[:, :, i - proc_delay]
        rc[:, :, i] = h_sr * _shifted_source(x, lags, i) + h_in * t[:, ::-1, i] + w[:, :, i]
    return t, rc


def simulate_crosstalk_relays(
    frame: Frame,
    ch: ChannelRealization,
    amps: AmplifierSolution,
    noise: NoiseSpec,
    cfg: SchemeConfig,
    seed: int | None = None,
    relay_noise: np.ndarray | None = None,
) -> RelayTrace:
    """One trial of the cross-talk scheme.  The relays stay silent for the
    first ``proc_delay`` samples, then amplify-and-forward the cleaned
    received samples; the self-loop term is removed exactly.

    ``relay_noise`` (2, frame_len) overrides the drawn noise streams.
    """
    L = frame.padded.size
    if cfg.proc_delay < int(max(ch.src_lags)) + 1:
        raise ValueError("processing delay must exceed the largest source lag")
    if frame.pad_len < 2 * cfg.proc_delay - 1:
        raise ValueError("guard length must be at least 2*proc_delay - 1")
    if relay_noise is None:
        rng = rng_for(0 if seed is None else seed, 0x7E1A)
        relay_noise = draw_relay_noise(rng, 1, 2, L, noise.sigma2_relay)[0]
    w = np.asarray(relay_noise, dtype=np.complex128)[None, :, :]
    h_in = np.array([[ch.incoming_cross(0), ch.incoming_cross(1)]])
    t, rc = crosstalk_recursion_batch(
        frame.padded[None, :],
        np.asarray(ch.h_sr)[None, :],
        h_in,
        np.asarray(ch.src_lags)[None, :],
        np.asarray(amps.beta)[None, :],
        w,
        cfg.proc_delay,
    )
    return RelayTrace(transmitted=t[0], received_clean=rc[0])


def loop_recursion_batch(x, h_sr, h_loop, lags, beta, w, proc_delay: int, code_len: int):
    """Batched loop-relay recursion with residual cancellation.

    Maintains the clean estimate stream (received minus the known loop
    term) and subtracts the b-step-old echo so the transmission is a
    length-``code_len`` tap filter applied to that stream.  ``x``: (B, L),
    per-relay arrays are (B,).  Returns transmitted (B, L).
    """
    B, L = x.shape
    t = np.zeros((B, L), dtype=np.complex128)
    xs = np.zeros((B, L), dtype=np.complex128)  # clean estimate stream
    echo = (h_loop * beta) ** code_len
    for i in range(L):
        if i >= proc_delay:
            prev = xs[:, i - proc_delay] + h_loop * t[:, i - proc_delay]
            back = i - (code_len + 1) * proc_delay
            cancel = echo * xs[:, back] if back >= 0 else 0.0
            t[:, i] = beta * (prev - cancel)
        src = i - lags
        contrib = np.where(src >= 0, np.take_along_axis(x, np.clip(src, 0, L - 1)[:, None], axis=1)[:, 0], 0.0)
        xs[:, i] = h_sr * contrib + w[:, i]
    return t


def simulate_loop_relay(
    frame: Frame,
    relay_index: int,
    ch: ChannelRealization,
    amps: AmplifierSolution,
    noise: NoiseSpec,
    cfg: SchemeConfig,
    seed: int | None = None,
    relay_noise: np.ndarray | None = None,
) -> np.ndarray:
    """One trial of a single loop-channel relay; returns its transmission
    over the frame window."""
    if cfg.code_len < 2:
        raise ValueError("loop scheme needs code_len >= 2")
    L = frame.padded.size
    if relay_noise is None:
        rng = rng_for(0 if seed is None else seed, 0x100B, relay_index)
        relay_noise = draw_relay_noise(rng, 1, 1, L, noise.sigma2_relay)[0, 0]
    w = np.asarray(relay_noise, dtype=np.complex128)[None, :]
    t = loop_recursion_batch(
        frame.padded[None, :],
        np.asarray([ch.h_sr[relay_index]]),
        np.asarray([ch.h_loop[relay_index]]),
        np.asarray([ch.src_lags[relay_index]], dtype=np.int64),
        np.asarray([amps.beta[min(relay_index, amps.beta.size - 1)]]),
        w,
        cfg.proc_delay,
        cfg.code_len,
    )
    return t[0]


# ---------------------------------------------------------------------------
# naive full-cancellation demonstration


def _estimate(samples, h_sr, sigma2, es, estimator):
    if estimator == "zf":
        return samples / h_sr
    if estimator == "mmse":
        return np.conj(h_sr) * samples / (np.abs(h_sr) ** 2 + sigma2 / es)
    raise ValueError(f"unknown estimator {estimator!r}")


def naive_cancellation_recursion(x, h_sr, h_in, lags, w, proc_delay: int, sigma2: float, es: float, estimator: str):
    """Both relays amplify-and-forward their cleaned samples while trying
    to subtract the cross-talk, reproducing the other relay's transmission
    from their own symbol estimates.  Returns transmitted (B, 2, L)."""
    B, L = x.shape
    t = np.zeros((B, 2, L), dtype=np.complex128)
    rc = np.zeros((B, 2, L), dtype=np.complex128)
    xhat = np.zeros((B, 2, L), dtype=np.complex128)  # symbol-time estimates
    lag_rev = lags[:, ::-1]
    for i in range(L):
        if i >= proc_delay:
            t[:, :, i] = rc[:, :, i - proc_delay]
        # reproduce the other relay's current transmission from own estimates
        m = i - proc_delay - lag_rev  # symbol index the other relay forwards
        rep = np.where(
            m >= 0,
            np.take_along_axis(xhat, np.clip(m, 0, L - 1)[:, None, :], axis=2)[:, 0, :],
            0.0,
        )
        rep = h_sr[:, ::-1] * rep
        residual = t[:, ::-1, i] - rep
        rc[:, :, i] = h_sr * _shifted_source(x, lags, i) + h_in * residual + w[:, :, i]
        sym = i - lags
        est = _estimate(rc[:, :, i], h_sr, sigma2, es, estimator)
        np.put_along_axis(
            xhat, np.clip(sym, 0, L - 1)[:, None, :], np.where(sym >= 0, est, 0.0)[:, None, :], axis=2
        )
    return t


def naive_cancellation_powers(
    trials: int,
    cfg: SchemeConfig,
    noise: NoiseSpec,
    estimator: str,
    block_len: int,
    seed: int,
):
    """Pooled per-index signal and propagated-noise powers of the naive
    demo over independent trials.  The noise part is measured as the
    difference between matched noisy and noiseless recursions."""
    if block_len < 2:
        raise ValueError("block_len must be >= 2")
    rng = rng_for(seed, 0xF162)
    from .channel import draw_realizations
    from .modem import qpsk_modulate

    batch = draw_realizations(rng, trials, cfg.delays)
    if estimator == "zf" and np.any(np.abs(batch["h_sr"]) == 0.0):
        raise ZeroDivisionError("zero source gain with zero-forcing estimation")
    bits = rng.integers(0, 2, (trials, 2 * block_len))
    x = qpsk_modulate(bits.reshape(-1)).reshape(trials, block_len)
    w = draw_relay_noise(rng, trials, 2, block_len, noise.sigma2_relay)
    h_in = np.stack([batch["h_cross"][:, 1], batch["h_cross"][:, 0]], axis=1)
    args = (x, batch["h_sr"], h_in, batch["src_lags"], w, cfg.proc_delay)
    kw = dict(sigma2=noise.sigma2_relay, es=noise.symbol_energy, estimator=estimator)
    t_noisy = naive_cancellation_recursion(*args, **kw)
    t_clean = naive_cancellation_recursion(*args[:4], np.zeros_like(w), cfg.proc_delay, **kw)
    sig = np.abs(t_clean) ** 2
    err = np.abs(t_noisy - t_clean) ** 2
    return sig.mean(axis=(0, 1)), err.mean(axis=(0, 1))


def powers_to_snr_db(sig: np.ndarray, err: np.ndarray, ceiling_db: float = SNR_CEILING_DB) -> np.ndarray:
    """Linear power ratio to dB with a ceiling for noiseless indices;
    silent indices (no signal, no noise) come out as NaN."""
    out = np.full(sig.shape, np.nan)
    ceiling = 10.0 ** (ceiling_db / 10.0)
    active = sig > 0
    ratio = np.where(err > 0, sig / np.maximum(err, 1e-300), ceiling)
    ratio = np.minimum(ratio, ceiling)
    out[active] = 10.0 * np.log10(ratio[active])
    return out


def simulate_naive_cancellation(
    ch: ChannelRealization,
    cfg: SchemeConfig,
    noise: NoiseSpec,
    estimator: str,
    block_len: int,
    seed: int,
) -> np.ndarray:
    """Per-index transmit SNR (dB) of one naive-cancellation trial on the
    given channel draw; the harness pools powers across trials instead of
    averaging these per-trial traces."""
    if block_len < 2:
        raise ValueError("block_len must be >= 2")
    if estimator == "zf" and np.any(np.abs(ch.h_sr) == 0.0):
        raise ZeroDivisionError("zero source gain with zero-forcing estimation")
    rng = rng_for(seed, 0xF163)
    from .modem import qpsk_modulate

    bits = rng.integers(0, 2, 2 * block_len)
    x = qpsk_modulate(bits)[None, :]
    w = draw_relay_noise(rng, 1, 2, block_len, noise.sigma2_relay)
    h_in = np.array([[ch.incoming_cross(0), ch.incoming_cross(1)]])
    args = (x, np.asarray(ch.h_sr)[None, :], h_in, np.asarray(ch.src_lags)[None, :], w, cfg.proc_delay)
    kw = dict(sigma2=noise.sigma2_relay, es=noise.symbol_energy, estimator=estimator)
    t_noisy = naive_cancellation_recursion(*args, **kw)
    t_clean = naive_cancellation_recursion(*args[:4], np.zeros_like(w), cfg.proc_delay, **kw)
    sig = (np.abs(t_clean) ** 2).mean(axis=(0, 1))
    err = (np.abs(t_noisy - t_clean) ** 2).mean(axis=(0, 1))
    return powers_to_snr_db(sig, err)
