"""Link-level simulator for distributed linear convolutional space-time codes
on two-relay full-duplex asynchronous cooperative networks.

Subpackage layout:

* :mod:`dlcstc.corelin`  -- complex sequence/matrix substrate
* :mod:`dlcstc.channel`  -- quasi-static Rayleigh channel draws and noise specs
* :mod:`dlcstc.modem`    -- QPSK mapping and zero-padded framing
* :mod:`dlcstc.codegen`  -- generator matrices, amplifier solutions, SFR audits
* :mod:`dlcstc.relaysim` -- sample-level relay recursions
* :mod:`dlcstc.receiver` -- destination assembly, MMSE-DFE and ML detection
* :mod:`dlcstc.harness`  -- Monte Carlo BER engine and experiment sweeps
* :mod:`dlcstc.cli`      -- command-line front end (CSV/JSON + figures)
"""

from .config import SchemeConfig, DelayProfile, SCHEMES
from .channel import ChannelRealization, NoiseSpec, draw_realization, noise_variance_from_snr
from .modem import Frame, qpsk_modulate, qpsk_demodulate, build_frame
from .codegen import (
    GeneratorMatrix,
    AmplifierSolution,
    RankAuditReport,
    solve_amplifiers_crosstalk,
    solve_amplifier_loop,
    build_generators_crosstalk,
    build_generators_loop,
    build_generators_baseline,
    sfr_analytic,
    sfr_bruteforce,
    rank_audit_padding,
)
from .relaysim import RelayTrace, simulate_crosstalk_relays, simulate_loop_relay, simulate_naive_cancellation
from .receiver import EquivalentModel, assemble_destination, equivalent_model, mmse_dfe_detect, ml_detect
from .harness import BerPoint, run_ber_point, sweep, estimate_diversity_order, run_fig2

__all__ = [
    "SchemeConfig",
    "DelayProfile",
    "SCHEMES",
    "ChannelRealization",
    "NoiseSpec",
    "draw_realization",
    "noise_variance_from_snr",
    "Frame",
    "qpsk_modulate",
    "qpsk_demodulate",
    "build_frame",
    "GeneratorMatrix",
    "AmplifierSolution",
    "RankAuditReport",
    "solve_amplifiers_crosstalk",
    "solve_amplifier_loop",
    "build_generators_crosstalk",
    "build_generators_loop",
    "build_generators_baseline",
    "sfr_analytic",
    "sfr_bruteforce",
    "rank_audit_padding",
    "RelayTrace",
    "simulate_crosstalk_relays",
    "simulate_loop_relay",
    "simulate_naive_cancellation",
    "EquivalentModel",
    "assemble_destination",
    "equivalent_model",
    "mmse_dfe_detect",
    "ml_detect",
    "BerPoint",
    "run_ber_point",
    "sweep",
    "estimate_diversity_order",
    "run_fig2",
]
