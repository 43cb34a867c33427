"""Monte Carlo BER engine, SNR sweeps, diversity-order estimation, and the
naive-cancellation averaging loop.

Frames are independent trials (fresh channels, lags and noise per frame)
processed in fixed-size batches; the stopping rule is evaluated between
batches, so results are a pure function of (config, seed) regardless of
scheduling or worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import NoiseSpec, draw_realizations, noise_variance_from_snr, rng_for
from .codegen import hd_code_rows, solve_crosstalk_amplifiers_batch, solve_loop_amplifiers_batch
from .config import DelayProfile, SchemeConfig
from .modem import qpsk_demodulate, qpsk_modulate
from .receiver import mmse_dfe_detect_batch, model_from_parts
from .relaysim import (
    crosstalk_recursion_batch,
    draw_relay_noise,
    loop_recursion_batch,
    naive_cancellation_powers,
    powers_to_snr_db,
)

CHUNK_FRAMES = 1024


@dataclass(frozen=True)
class StopRule:
    min_errors: int = 200
    max_frames: int = 2_000_000

    def __post_init__(self):
        if self.min_errors < 1 or self.max_frames < 1:
            raise ValueError("stop rule bounds must be positive")


@dataclass(frozen=True)
class BerPoint:
    scheme: str
    snr_r_db: float
    snr_d_db: float
    frames: int
    bit_errors: int
    ber: float
    seed: int
    wall_time_s: float = 0.0


# ---------------------------------------------------------------------------
# batched per-scheme transmit + model parts


def _scatter_rows(length: int, positions: np.ndarray, values: np.ndarray) -> np.ndarray:
    """rows[b, positions[b, t]] = values[b, t] over a fresh (B, length)."""
    B = positions.shape[0]
    rows = np.zeros((B, length), dtype=np.complex128)
    np.put_along_axis(rows, positions, values, axis=1)
    return rows


def _shift_source_batch(x: np.ndarray, lags: np.ndarray) -> np.ndarray:
    """x[b, i - lag_b] with zero fill."""
    B, L = x.shape
    idx = np.arange(L)[None, :] - lags[:, None]
    take = np.take_along_axis(x, np.clip(idx, 0, L - 1), axis=1)
    return np.where(idx >= 0, take, 0.0)


def _crosstalk_parts(cfg, batch, beta, x, w_r):
    phi, depth = cfg.proc_delay, cfg.echo_depth
    h_sr, h_cross = batch["h_sr"], batch["h_cross"]
    h_rd, lags = batch["h_rd"], batch["src_lags"]
    B = x.shape[0]
    h_in = np.stack([h_cross[:, 1], h_cross[:, 0]], axis=1)
    eta = beta[:, 0] * beta[:, 1] * h_cross[:, 0] * h_cross[:, 1]
    pow_eta = eta[:, None] ** np.arange(depth + 1)[None, :]
    max_lag = int(max(cfg.delays.src_lag_choices))
    row_len = (2 * depth + 2) * phi + max_lag + 1
    odd = (2 * np.arange(depth + 1) + 1) * phi
    even = odd + phi

    t, _ = crosstalk_recursion_batch(x, h_sr, h_in, lags, beta, w_r, phi)
    tx, sig_parts, noise_parts = [], [], []
    for k in range(2):
        j = 1 - k
        own = beta[:, k] * h_sr[:, k]
        crossed = beta[:, k] * h_in[:, k] * beta[:, j] * h_sr[:, j]
        row = _scatter_rows(row_len, odd[None, :] + lags[:, k : k + 1], pow_eta * own[:, None])
        row += _scatter_rows(row_len, even[None, :] + lags[:, j : j + 1], pow_eta * crossed[:, None])
        n_own = _scatter_rows(row_len, np.broadcast_to(odd[None, :], (B, depth + 1)), pow_eta * beta[:, k : k + 1])
        n_cross = _scatter_rows(
            row_len,
            np.broadcast_to(even[None, :], (B, depth + 1)),
            pow_eta * (beta[:, k] * h_in[:, k] * beta[:, j])[:, None],
        )
        tx.append((t[:, k], h_rd[:, k], batch["dst_lags"][:, k]))
        sig_parts.append((row, h_rd[:, k], batch["dst_lags"][:, k]))
        noise_parts.append((n_own, h_rd[:, k], batch["dst_lags"][:, k], k))
        noise_parts.append((n_cross, h_rd[:, k], batch["dst_lags"][:, k], j))
    return tx, sig_parts, noise_parts


def _loop_branch_parts(cfg, batch, x, w_r, k):
    phi, b = cfg.proc_delay, cfg.code_len
    h_sr, h_loop = batch["h_sr"][:, k], batch["h_loop"][:, k]
    lags = batch["src_lags"][:, k]
    u, _ = solve_loop_amplifiers_batch(np.abs(h_loop) ** 2, b)
    beta = np.sqrt(u)
    ratio = h_loop * beta
    taps = beta[:, None] * ratio[:, None] ** np.arange(b)[None, :]
    max_lag = int(max(cfg.delays.src_lag_choices))
    row_len = b * phi + max_lag + 1
    pos = (np.arange(b) + 1) * phi
    sig_row = _scatter_rows(row_len, pos[None, :] + lags[:, None], taps)
    noise_row = _scatter_rows(b * phi + 1, np.broadcast_to(pos[None, :], taps.shape), taps)
    t = loop_recursion_batch(x, h_sr, h_loop, lags, beta, w_r, phi, b)
    dest, dlag = batch["h_rd"][:, k], batch["dst_lags"][:, k]
    tx = (t, dest, dlag)
    sig = (sig_row, h_sr * dest, dlag)
    nse = (noise_row, dest, dlag, k)
    return tx, sig, nse


def _hd_parts(cfg, batch, x, w_r):
    phi, b = cfg.proc_delay, cfg.code_len
    coeffs = hd_code_rows(b)
    B, L = x.shape
    pos = np.arange(b) * phi
    max_lag = int(max(cfg.delays.src_lag_choices))
    tx, sig_parts, noise_parts = [], [], []
    for k in range(2):
        lags = batch["src_lags"][:, k]
        received = batch["h_sr"][:, k : k + 1] * _shift_source_batch(x, lags) + w_r[:, k]
        t = np.zeros((B, L), dtype=np.complex128)
        for n in range(b):
            t[:, pos[n] :] += coeffs[k, n] * received[:, : L - pos[n]]
        taps = np.broadcast_to(coeffs[k][None, :], (B, b)).astype(np.complex128)
        sig_row = _scatter_rows((b - 1) * phi + max_lag + 1, pos[None, :] + lags[:, None], taps)
        noise_row = _scatter_rows((b - 1) * phi + 1, np.broadcast_to(pos[None, :], (B, b)), taps)
        dest, dlag = batch["h_rd"][:, k], batch["dst_lags"][:, k]
        tx.append((t, dest, dlag))
        sig_parts.append((sig_row, batch["h_sr"][:, k] * dest, dlag))
        noise_parts.append((noise_row, dest, dlag, k))
    return tx, sig_parts, noise_parts


def _direct_parts(cfg, batch, x, scale: float):
    B = x.shape[0]
    row = np.zeros((B, 1), dtype=np.complex128)
    row[:, 0] = scale
    ones = np.full(B, 1.0, dtype=np.complex128)
    tx = (scale * x, batch["h_direct"], batch["direct_lag"])
    sig = (row, batch["h_direct"] * ones, batch["direct_lag"])
    return tx, sig


def _transmit_and_model(cfg, batch, x, w_r):
    scheme = cfg.scheme
    if scheme in ("fd_crosstalk", "fd_crosstalk_dl"):
        c12 = np.abs(batch["h_cross"][:, 0]) ** 2
        c21 = np.abs(batch["h_cross"][:, 1]) ** 2
        a, b, _ = solve_crosstalk_amplifiers_batch(c12, c21, cfg.echo_depth)
        beta = np.sqrt(np.stack([a, b], axis=1))
        tx, sig, nse = _crosstalk_parts(cfg, batch, beta, x, w_r)
    elif scheme in ("fd_loop", "fd_loop_dl"):
        tx, sig, nse = [], [], []
        for k in range(2):
            t, s, n = _loop_branch_parts(cfg, batch, x, w_r[:, k], k)
            tx.append(t)
            sig.append(s)
            nse.append(n)
    elif scheme == "hd":
        tx, sig, nse = _hd_parts(cfg, batch, x, w_r)
    elif scheme == "self_coding":
        t, s, n = _loop_branch_parts(cfg, batch, x, w_r[:, 0], 0)
        dt, ds = _direct_parts(cfg, batch, x, 1.0)
        tx, sig, nse = [dt, t], [ds, s], [n]
    elif scheme == "direct":
        dt, ds = _direct_parts(cfg, batch, x, np.sqrt(2.0))
        tx, sig, nse = [dt], [ds], []
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    if scheme.endswith("_dl"):
        dt, ds = _direct_parts(cfg, batch, x, 1.0)
        tx.append(dt)
        sig.append(ds)
    return tx, sig, nse


def _assemble_batch(tx, window_len: int, sigma2_dest: float, rng) -> np.ndarray:
    B = tx[0][0].shape[0]
    y = np.zeros((B, window_len), dtype=np.complex128)
    rows = np.arange(B)[:, None]
    for t, gain, lags in tx:
        cols = lags[:, None] + np.arange(t.shape[1])[None, :]
        y[rows, cols] += gain[:, None] * t
    if sigma2_dest > 0:
        y += np.sqrt(sigma2_dest / 2.0) * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    return y


def run_frames(cfg: SchemeConfig, noise: NoiseSpec, seed: int, chunk_index: int, n_frames: int):
    """Simulate ``n_frames`` independent frames; returns (bit_errors, frames)."""
    rng = rng_for(seed, 0xC0DE, chunk_index)
    batch = draw_realizations(rng, n_frames, cfg.delays)
    bits = rng.integers(0, 2, (n_frames, 2 * cfg.n_data))
    s = qpsk_modulate(bits.reshape(-1)).reshape(n_frames, cfg.n_data)
    x = np.concatenate([s, np.zeros((n_frames, cfg.pad_len), dtype=np.complex128)], axis=1)
    w_r = draw_relay_noise(rng, n_frames, 2, cfg.frame_len, noise.sigma2_relay)
    tx, sig_parts, noise_parts = _transmit_and_model(cfg, batch, x, w_r)
    y = _assemble_batch(tx, cfg.window_len, noise.sigma2_dest, rng)
    h, r = model_from_parts(sig_parts, noise_parts, cfg.frame_len, noise, cfg.window_len, cfg.n_data)
    decided = mmse_dfe_detect_batch(y, h, r, symbol_energy=noise.symbol_energy)
    bit_dec = qpsk_demodulate(decided.reshape(-1)).reshape(n_frames, 2 * cfg.n_data)
    return int(np.count_nonzero(bit_dec != bits)), n_frames


def run_ber_point(
    cfg: SchemeConfig,
    snr_r_db: float,
    snr_d_db: float,
    stop: StopRule = StopRule(),
    seed: int = 0,
) -> BerPoint:
    """Monte Carlo BER at one (SNR_R, SNR_D) operating point.

    Frames are drawn until ``stop.min_errors`` bit errors accumulate or
    ``stop.max_frames`` frames have been simulated.  Errors are counted on
    information bits only.
    """
    noise = NoiseSpec(
        sigma2_relay=noise_variance_from_snr(snr_r_db),
        sigma2_dest=noise_variance_from_snr(snr_d_db),
    )
    t0 = time.perf_counter()
    frames = errors = chunk = 0
    while errors < stop.min_errors and frames < stop.max_frames:
        n = min(CHUNK_FRAMES, stop.max_frames - frames)
        e, f = run_frames(cfg, noise, seed, chunk, n)
        errors += e
        frames += f
        chunk += 1
    return BerPoint(
        scheme=cfg.scheme,
        snr_r_db=float(snr_r_db),
        snr_d_db=float(snr_d_db),
        frames=frames,
        bit_errors=errors,
        ber=errors / (2.0 * cfg.n_data * frames),
        seed=int(seed),
        wall_time_s=time.perf_counter() - t0,
    )


def _cell_seed(seed: int, i: int, j: int) -> int:
    return int(rng_for(seed, 0x9B1D, i, j).integers(0, 2**31 - 1))


def sweep(
    cfg: SchemeConfig,
    snr_r_grid,
    snr_d_grid,
    stop: StopRule = StopRule(),
    seed: int = 0,
    threads: int = 1,
) -> list[BerPoint]:
    """One BerPoint per grid cell with per-cell derived seeds; cells are
    independent and may run on a thread pool."""
    snr_r_grid = list(snr_r_grid)
    snr_d_grid = list(snr_d_grid)
    if not snr_r_grid or not snr_d_grid:
        raise ValueError("SNR grids must be non-empty")
    cells = [
        (i, j, r, d)
        for i, r in enumerate(snr_r_grid)
        for j, d in enumerate(snr_d_grid)
    ]

    def job(cell):
        i, j, r, d = cell
        return run_ber_point(cfg, r, d, stop, _cell_seed(seed, i, j))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(job, cells))
    return [job(c) for c in cells]


def diagonal_sweep(
    cfg: SchemeConfig, gammas, stop: StopRule = StopRule(), seed: int = 0, threads: int = 1
) -> list[BerPoint]:
    """Equal relay/destination SNR sweep used for diversity estimation."""
    gammas = list(gammas)
    cells = list(enumerate(gammas))

    def job(cell):
        i, g = cell
        return run_ber_point(cfg, g, g, stop, _cell_seed(seed, i, i))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(job, cells))
    return [job(c) for c in cells]


def estimate_diversity_order(points: list[BerPoint]) -> float:
    """Negative least-squares slope of log10(BER) against SNR/10 dB."""
    pts = sorted(points, key=lambda p: p.snr_d_db)
    if len(pts) < 2:
        raise ValueError("need at least two points")
    snrs = np.array([p.snr_d_db for p in pts])
    if np.any(np.diff(snrs) <= 0):
        raise ValueError("SNRs must be strictly increasing")
    bers = np.array([p.ber for p in pts])
    if np.any(bers <= 0):
        raise ValueError("zero BER in fit set; simulate more frames")
    slope = np.polyfit(snrs / 10.0, np.log10(bers), 1)[0]
    return float(-slope)


FIG2_DEFAULTS = dict(block_len=20, proc_delay=1, sigma2_relay=1e-4)


def run_fig2(
    estimator: str,
    trials: int,
    seed: int,
    block_len: int = 20,
    proc_delay: int = 1,
    sigma2_relay: float = 1e-4,
) -> np.ndarray:
    """Average transmit SNR per time index of the naive-cancellation demo:
    powers pooled over trials in the linear domain, dB after averaging."""
    if trials < 1:
        raise ValueError("need at least one trial")
    cfg = SchemeConfig(
        scheme="fd_crosstalk",
        n_data=block_len,
        pad_len=2 * proc_delay - 1,
        proc_delay=proc_delay,
        delays=DelayProfile(src_lag_choices=(0,), max_lag=1),
    )
    noise = NoiseSpec(sigma2_relay=sigma2_relay, sigma2_dest=0.0)
    sig, err = naive_cancellation_powers(trials, cfg, noise, estimator, block_len, seed)
    return powers_to_snr_db(sig, err)
