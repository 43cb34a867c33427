"""Shared helpers: a per-trial reference pipeline built from generator
rows (the slow, obviously-correct route the fast engine is checked
against)."""

import numpy as np

from dlcstc.channel import NoiseSpec
from dlcstc.codegen import (
    build_generators_baseline,
    build_generators_crosstalk,
    build_generators_loop,
    solve_amplifiers_crosstalk,
    solve_amplifiers_loop_pair,
)
from dlcstc.config import SchemeConfig
from dlcstc.modem import build_frame, qpsk_modulate
from dlcstc.receiver import superpose


def generator_for(scheme: str, ch, cfg: SchemeConfig):
    if scheme.startswith("fd_crosstalk"):
        gen = build_generators_crosstalk(ch, solve_amplifiers_crosstalk(ch, cfg), cfg)
    elif scheme.startswith("fd_loop"):
        gen = build_generators_loop(ch, solve_amplifiers_loop_pair(ch, cfg), cfg)
    else:
        return build_generators_baseline(scheme, ch, cfg)
    if scheme.endswith("_dl"):
        direct = build_generators_baseline("direct_link_row", ch, cfg).branches
        gen = type(gen)(scheme=scheme, branches=gen.branches + direct, meta=gen.meta)
    return gen


def branch_transmission(branch, frame, relay_noise):
    L = frame.padded.size
    out = branch.src_gain * np.convolve(branch.row, frame.padded)[:L]
    for stream, row in branch.noise_rows.items():
        out += np.convolve(row, relay_noise[stream])[:L]
    return out


def reference_receive(gen, frame, ch, noise: NoiseSpec, cfg: SchemeConfig, rng, relay_noise=None):
    """Noisy destination window via per-branch convolutions."""
    L = frame.padded.size
    if relay_noise is None:
        relay_noise = np.sqrt(noise.sigma2_relay / 2) * (
            rng.standard_normal((2, L)) + 1j * rng.standard_normal((2, L))
        )
    signals, gains, lags = [], [], []
    for br in gen.branches:
        signals.append(branch_transmission(br, frame, relay_noise))
        if br.kind == "relay":
            gains.append(complex(ch.h_rd[br.relay]))
            lags.append(int(ch.dst_lags[br.relay]))
        else:
            gains.append(complex(ch.h_direct))
            lags.append(int(ch.direct_lag))
    return superpose(signals, gains, lags, noise.sigma2_dest, cfg.window_len, rng)


def random_frame(rng, cfg: SchemeConfig):
    return build_frame(qpsk_modulate(rng.integers(0, 2, 2 * cfg.n_data)), cfg.pad_len)
