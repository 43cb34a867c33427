"""Destination-side processing: signal assembly, the exact equivalent
linear model (channel matrix plus full noise covariance), block MMSE-DFE
detection, and an exhaustive ML oracle for tiny frames.

The destination observes a window of ``frame_len + max_lag - 1`` samples;
branch transmissions are truncated to the frame window before their
arrival offsets apply, matching the per-frame relay silencing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, NoiseSpec, rng_for
from .codegen import GeneratorMatrix
from .config import SchemeConfig
from .corelin import hermitian_solve
from .modem import QPSK_POINTS
from .relaysim import RelayTrace, _cn01


@dataclass(frozen=True)
class EquivalentModel:
    """Linear model of one frame: ``y = h_matrix @ s + n`` with
    ``n ~ CN(0, noise_cov)`` over the receive window."""

    h_matrix: np.ndarray
    noise_cov: np.ndarray
    window_len: int


def superpose(signals, gains, lags, sigma2_dest: float, window_len: int, rng) -> np.ndarray:
    """Delayed superposition of branch signals plus destination noise."""
    y = np.zeros(window_len, dtype=np.complex128)
    for sig, gain, lag in zip(signals, gains, lags):
        sig = np.asarray(sig, dtype=np.complex128)
        if lag + sig.size > window_len:
            raise ValueError("branch arrival falls outside the receive window")
        y[lag : lag + sig.size] += gain * sig
    if sigma2_dest > 0:
        y += np.sqrt(sigma2_dest) * _cn01(rng, window_len)
    return y


def assemble_destination(
    trace: RelayTrace,
    ch: ChannelRealization,
    noise: NoiseSpec,
    cfg: SchemeConfig,
    seed: int | None = None,
) -> np.ndarray:
    """Destination observation of a two-relay trace."""
    if int(max(ch.dst_lags)) >= cfg.delays.max_lag:
        raise ValueError("arrival lag outside the configured spread")
    rng = rng_for(0 if seed is None else seed, 0xDE57)
    return superpose(
        [trace.transmitted[0], trace.transmitted[1]],
        [ch.h_rd[0], ch.h_rd[1]],
        [int(ch.dst_lags[0]), int(ch.dst_lags[1])],
        noise.sigma2_dest,
        cfg.window_len,
        rng,
    )


def conv_matrices_batch(rows: np.ndarray, in_len: int, keep_len: int, window_len: int, lags) -> np.ndarray:
    """Batched banded matrices: output (B, window_len, in_len) where entry
    [b, lag_b + i, j] = rows[b, i - j], rows truncated to ``keep_len``."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.complex128))
    B, Lr = rows.shape
    lags = np.broadcast_to(np.asarray(lags, dtype=np.int64), (B,))
    d = np.arange(keep_len)[:, None] - np.arange(in_len)[None, :]
    valid = (d >= 0) & (d < Lr)
    block = np.where(valid[None, :, :], rows[:, np.clip(d, 0, Lr - 1)], 0.0)
    out = np.zeros((B, window_len, in_len), dtype=np.complex128)
    rows_idx = lags[:, None] + np.arange(keep_len)[None, :]
    if np.any(rows_idx >= window_len):
        raise ValueError("branch arrival falls outside the receive window")
    out[np.arange(B)[:, None], rows_idx, :] = block
    return out


def model_from_parts(sig_parts, noise_parts, stream_len: int, noise: NoiseSpec, window_len: int, n_data: int):
    """Assemble batched (H, R) from per-branch pieces.

    ``sig_parts``: iterable of (rows, gain, lags); ``noise_parts``:
    iterable of (rows, gain, lags, stream).  Contributions of the same
    noise stream are summed before forming the covariance so that
    cross-branch correlation (both relays forwarding the same stream) is
    kept exactly.
    """
    keep = stream_len
    h = 0.0
    for rows, gain, lags in sig_parts:
        t = conv_matrices_batch(rows, n_data, keep, window_len, lags)
        h = h + np.asarray(gain, dtype=np.complex128)[:, None, None] * t
    B = h.shape[0]
    r = np.zeros((B, window_len, window_len), dtype=np.complex128)
    if noise.sigma2_relay > 0 and noise_parts:
        per_stream = {}
        for rows, gain, lags, stream in noise_parts:
            g = conv_matrices_batch(rows, stream_len, keep, window_len, lags)
            g = np.asarray(gain, dtype=np.complex128)[:, None, None] * g
            per_stream[stream] = per_stream.get(stream, 0.0) + g
        for g in per_stream.values():
            r += noise.sigma2_relay * (g @ g.conj().transpose(0, 2, 1))
    r += noise.sigma2_dest * np.eye(window_len)[None, :, :]
    r = 0.5 * (r + r.conj().transpose(0, 2, 1))
    return h, r


def _branch_dest(branch, ch: ChannelRealization):
    if branch.kind == "relay":
        return complex(ch.h_rd[branch.relay]), int(ch.dst_lags[branch.relay])
    return complex(ch.h_direct), int(ch.direct_lag)


def equivalent_model(
    gen: GeneratorMatrix, ch: ChannelRealization, noise: NoiseSpec, cfg: SchemeConfig
) -> EquivalentModel:
    """Exact per-frame linear model of the whole pipeline for one draw."""
    L = cfg.frame_len
    w_len = cfg.window_len
    sig_parts = []
    noise_parts = []
    for branch in gen.branches:
        dest, lag = _branch_dest(branch, ch)
        sig_parts.append((branch.row[None, :], [branch.src_gain * dest], [lag]))
        for stream, nrow in branch.noise_rows.items():
            noise_parts.append((nrow[None, :], [dest], [lag], stream))
    h, r = model_from_parts(sig_parts, noise_parts, L, noise, w_len, cfg.n_data)
    return EquivalentModel(h_matrix=h[0], noise_cov=r[0], window_len=w_len)


# ---------------------------------------------------------------------------
# detection


def _slice_to(constellation: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Nearest constellation point; ties resolve to the first (points are
    ordered lexicographically by (real, imag))."""
    idx = np.argmin(np.abs(values[..., None] - constellation), axis=-1)
    return constellation[idx]


def _unit_lower_factor(a: np.ndarray) -> np.ndarray:
    """Unit-lower L with a = L^H d L (reverse-permuted Cholesky); the rows
    of L decorrelate the MMSE error so decided earlier symbols can be
    subtracted exactly."""
    flip = a[..., ::-1, ::-1]
    upper = np.linalg.cholesky(flip)[..., ::-1, ::-1]  # a = U U^H, U upper
    diag = np.einsum("...ii->...i", upper)
    unit_upper = upper / diag[..., None, :]
    return unit_upper.conj().swapaxes(-1, -2)


def mmse_dfe_detect(
    y: np.ndarray,
    model: EquivalentModel,
    constellation: np.ndarray = QPSK_POINTS,
    feedback: str = "decision",
    true_symbols: np.ndarray | None = None,
    symbol_energy: float = 1.0,
) -> np.ndarray:
    """Block MMSE decision-feedback detection.

    Whitens by the Cholesky factor of the noise covariance, forms the
    regularized normal matrix A = Hw^H Hw + I/Es, factors A = L^H D L with
    unit-lower L, and refines the linear MMSE estimate symbol by symbol in
    index order, subtracting already-decided symbols through the strictly
    triangular part of L before slicing (the code is causal, so decided
    symbols are exactly the ones interfering).  ``feedback='genie'``
    substitutes the true symbols in the feedback path (error-propagation
    bound); it requires ``true_symbols``.
    """
    y = np.asarray(y, dtype=np.complex128)
    h = model.h_matrix
    n = h.shape[1]
    try:
        chol = np.linalg.cholesky(model.noise_cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError("noise covariance is not positive definite") from exc
    y_w = np.linalg.solve(chol, y)
    h_w = np.linalg.solve(chol, h)
    a = h_w.conj().T @ h_w + np.eye(n) / symbol_energy
    z = hermitian_solve(a, h_w.conj().T @ y_w)
    feed = _unit_lower_factor(a)
    if feedback == "genie":
        if true_symbols is None:
            raise ValueError("genie feedback requires the true symbols")
        ref = np.asarray(true_symbols, dtype=np.complex128)
    elif feedback != "decision":
        raise ValueError(f"unknown feedback mode {feedback!r}")
    decided = np.zeros(n, dtype=np.complex128)
    delta = np.zeros(n, dtype=np.complex128)
    for i in range(n):
        corr = feed[i, :i] @ delta[:i]
        decided[i] = _slice_to(constellation, np.asarray(z[i] - corr))
        fb = ref[i] if feedback == "genie" else decided[i]
        delta[i] = fb - z[i]
    return decided


def mmse_dfe_detect_batch(y, h, r, symbol_energy: float = 1.0, slicer=None):
    """Batched decision-feedback detection used by the Monte Carlo engine.

    ``y``: (B, w), ``h``: (B, w, n), ``r``: (B, w, w).  Returns decisions
    (B, n).  QPSK slicing by default.
    """
    from .modem import slice_qpsk

    slicer = slicer or slice_qpsk
    B, w, n = h.shape
    chol = np.linalg.cholesky(r)
    y_w = np.linalg.solve(chol, y[..., None])
    h_w = np.linalg.solve(chol, h)
    hh = h_w.conj().transpose(0, 2, 1)
    a = hh @ h_w + (np.eye(n) / symbol_energy)[None, :, :]
    z = np.linalg.solve(a, hh @ y_w)[..., 0]
    feed = _unit_lower_factor(a)
    decided = np.zeros((B, n), dtype=np.complex128)
    delta = np.zeros((B, n), dtype=np.complex128)
    for i in range(n):
        corr = np.einsum("bj,bj->b", feed[:, i, :i], delta[:, :i])
        decided[:, i] = slicer(z[:, i] - corr)
        delta[:, i] = decided[:, i] - z[:, i]
    return decided


def ml_detect(
    y: np.ndarray,
    model: EquivalentModel,
    constellation: np.ndarray = QPSK_POINTS,
) -> np.ndarray:
    """Exhaustive maximum-likelihood oracle: minimizes the noise-whitened
    residual over every candidate symbol sequence.  Guarded to tiny
    frames (candidate count capped at 4^6)."""
    h = model.h_matrix
    n = h.shape[1]
    m = constellation.size
    count = m**n
    if count > 4096:
        raise ValueError(f"frame too large for exhaustive search ({count} candidates)")
    chol = np.linalg.cholesky(model.noise_cov)
    y_w = np.linalg.solve(chol, np.asarray(y, dtype=np.complex128))
    h_w = np.linalg.solve(chol, h)
    grids = np.meshgrid(*([np.arange(m)] * n), indexing="ij")
    idx = np.stack([g.reshape(-1) for g in grids], axis=1)
    cands = constellation[idx]  # (count, n)
    resid = y_w[None, :] - cands @ h_w.T
    best = int(np.argmin(np.einsum("ij,ij->i", resid, resid.conj()).real))
    return cands[best]
