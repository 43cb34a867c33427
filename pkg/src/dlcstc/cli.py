"""Command-line front end.

Subcommands: ``ber`` (sweep -> CSV), ``fig2`` (SNR trace -> CSV),
``diversity`` (diagonal sweep + slopes -> CSV + JSON), ``sfr`` (analytic
vs brute-force agreement -> JSON), ``rank-audit`` (guard-length audit ->
JSON).  Curve commands also render a PNG next to the delimited output
unless ``--no-figure`` is given.  ``--config FILE`` loads a JSON run
config; explicit flags override it.  Results are written only after a
command completes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .channel import draw_realization, rng_for
from .codegen import (
    rank_audit_padding,
    sfr_analytic,
    sfr_bruteforce,
    solve_amplifiers_crosstalk,
    solve_amplifiers_loop_pair,
    build_generators_crosstalk,
    build_generators_loop,
    verify_rank_witness,
)
from .config import SchemeConfig, SCHEMES
from .harness import BerPoint, StopRule, diagonal_sweep, estimate_diversity_order, run_fig2, sweep

CSV_HEADER = "scheme,snr_r_db,snr_d_db,frames,bit_errors,ber,seed"


def parse_grid(text: str) -> list[float]:
    """``start:step:stop`` inclusive of stop when on the grid, or a single
    value, or a comma list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"bad grid {text!r}; expected start:step:stop")
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("grid step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(max(count, 0))]
    if "," in text:
        return [float(p) for p in text.split(",") if p.strip()]
    return [float(text)]


def _point_row(p: BerPoint) -> str:
    return f"{p.scheme},{p.snr_r_db!r},{p.snr_d_db!r},{p.frames},{p.bit_errors},{p.ber!r},{p.seed}"


def write_points_csv(points, path):
    lines = [CSV_HEADER] + [_point_row(p) for p in points]
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _default_out(name: str) -> str:
    out_dir = os.environ.get("DLCSTC_OUT_DIR", ".")
    return os.path.join(out_dir, name)


def _figure_path(out_path: str) -> str:
    stem, _ = os.path.splitext(out_path)
    return stem + ".png"


@dataclass
class RunConfig:
    """One CLI invocation, JSON round-trippable."""

    command: str = "ber"
    scheme: str = "fd_loop"
    schemes: list[str] = field(default_factory=lambda: ["fd_crosstalk", "fd_loop", "hd", "direct"])
    n_data: int = 20
    pad_len: int | None = None
    proc_delay: int = 2
    code_len: int = 3
    max_lag: int = 3
    snr_r: str = "30"
    snr_d: str = "0:2:30"
    gammas: str = "18:6:30"
    estimator: str = "zf"
    trials: int = 10000
    draws: int = 10000
    pad_tested: int | None = None
    block_len: int = 20
    min_errors: int = 200
    max_frames: int = 2_000_000
    seed: int = 0
    threads: int = 1
    out: str | None = None
    figure: bool = True

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def scheme_config(self, scheme: str | None = None) -> SchemeConfig:
        from .config import DelayProfile

        kw = dict(
            n_data=self.n_data,
            proc_delay=self.proc_delay,
            code_len=self.code_len,
            delays=DelayProfile(max_lag=self.max_lag),
        )
        if self.pad_len is not None:
            kw["pad_len"] = self.pad_len
        return SchemeConfig.for_scheme(scheme or self.scheme, **kw)

    def stop_rule(self) -> StopRule:
        return StopRule(min_errors=self.min_errors, max_frames=self.max_frames)


def _add_common(p):
    p.add_argument("--config", help="JSON run config; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output file (CSV or JSON per command)")
    p.add_argument("--no-figure", dest="figure", action="store_false", default=None)
    p.add_argument("--threads", type=int)


def _add_frame_opts(p):
    p.add_argument("--n-data", type=int, dest="n_data")
    p.add_argument("--pad-len", type=int, dest="pad_len")
    p.add_argument("--proc-delay", type=int, dest="proc_delay")
    p.add_argument("--code-len", type=int, dest="code_len")
    p.add_argument("--max-lag", type=int, dest="max_lag")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dlcstc", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ber", help="BER sweep over an SNR grid")
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--snr-r", dest="snr_r", help="grid start:step:stop or value")
    p.add_argument("--snr-d", dest="snr_d")
    p.add_argument("--min-errors", type=int, dest="min_errors")
    p.add_argument("--max-frames", type=int, dest="max_frames")
    _add_frame_opts(p)
    _add_common(p)

    p = sub.add_parser("fig2", help="naive-cancellation transmit SNR trace")
    p.add_argument("--estimator", choices=("zf", "mmse"))
    p.add_argument("--trials", type=int)
    p.add_argument("--block-len", type=int, dest="block_len")
    _add_common(p)

    p = sub.add_parser("diversity", help="diagonal sweep and slope fit")
    p.add_argument("--schemes", help="comma list of schemes")
    p.add_argument("--gammas", help="grid start:step:stop (dB)")
    p.add_argument("--min-errors", type=int, dest="min_errors")
    p.add_argument("--max-frames", type=int, dest="max_frames")
    _add_frame_opts(p)
    _add_common(p)

    p = sub.add_parser("sfr", help="analytic vs brute-force SFR agreement")
    p.add_argument("--scheme", choices=("fd_crosstalk", "fd_loop"))
    p.add_argument("--draws", type=int)
    _add_frame_opts(p)
    _add_common(p)

    p = sub.add_parser("rank-audit", help="guard-length rank audit")
    p.add_argument("--pad-tested", type=int, dest="pad_tested")
    p.add_argument("--trials", type=int)
    _add_frame_opts(p)
    _add_common(p)
    return ap


def _merge_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = RunConfig.from_json(fh.read())
    cfg.command = args.command
    for f in fields(RunConfig):
        if f.name in ("command",):
            continue
        val = getattr(args, f.name, None)
        if val is not None:
            if f.name == "schemes" and isinstance(val, str):
                val = [s.strip() for s in val.split(",") if s.strip()]
            setattr(cfg, f.name, val)
    return cfg


def _cmd_ber(rc: RunConfig) -> int:
    scheme_cfg = rc.scheme_config()
    points = sweep(
        scheme_cfg,
        parse_grid(rc.snr_r),
        parse_grid(rc.snr_d),
        rc.stop_rule(),
        seed=rc.seed,
        threads=rc.threads,
    )
    out = rc.out or _default_out("ber.csv")
    write_points_csv(points, out)
    if rc.figure:
        from .plotting import save_ber_figure

        axis = "snr_d_db" if len(parse_grid(rc.snr_d)) > 1 else "snr_r_db"
        save_ber_figure(points, _figure_path(out), x_axis=axis)
    return 0


def _cmd_fig2(rc: RunConfig) -> int:
    trace = run_fig2(rc.estimator, rc.trials, rc.seed, block_len=rc.block_len)
    out = rc.out or _default_out("fig2.csv")
    lines = ["index,snr_db"] + [f"{i},{v!r}" for i, v in enumerate(trace.tolist())]
    with open(out, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    if rc.figure:
        from .plotting import save_fig2_figure

        save_fig2_figure({rc.estimator: trace}, _figure_path(out))
    return 0


def _cmd_diversity(rc: RunConfig) -> int:
    gammas = parse_grid(rc.gammas)
    all_points: list[BerPoint] = []
    slopes: dict[str, float] = {}
    for scheme in rc.schemes:
        pts = diagonal_sweep(rc.scheme_config(scheme), gammas, rc.stop_rule(), rc.seed, rc.threads)
        slopes[scheme] = estimate_diversity_order(pts)
        all_points.extend(pts)
    out = rc.out or _default_out("diversity.csv")
    write_points_csv(all_points, out)
    stem, _ = os.path.splitext(out)
    _write_json({"gammas_db": gammas, "diversity_slopes": slopes}, stem + ".json")
    if rc.figure:
        from .plotting import save_diversity_figure

        save_diversity_figure(all_points, slopes, _figure_path(out))
    return 0


def _cmd_sfr(rc: RunConfig) -> int:
    scheme_cfg = rc.scheme_config(rc.scheme if rc.scheme in ("fd_crosstalk", "fd_loop") else "fd_crosstalk")
    agree = disagree = skipped = 0
    for i in range(rc.draws):
        ch = draw_realization(int(rng_for(rc.seed, 0x5F4, i).integers(0, 2**31 - 1)), scheme_cfg.delays)
        if scheme_cfg.scheme == "fd_crosstalk":
            amps = solve_amplifiers_crosstalk(ch, scheme_cfg)
            gen = build_generators_crosstalk(ch, amps, scheme_cfg)
            d1 = amps.beta[0] * ch.h_cross[0] * ch.h_sr[0] ** 2
            d2 = amps.beta[1] * ch.h_cross[1] * ch.h_sr[1] ** 2
        else:
            amps = solve_amplifiers_loop_pair(ch, scheme_cfg)
            gen = build_generators_loop(ch, amps, scheme_cfg)
            d1 = ch.h_loop[0] * amps.beta[0]
            d2 = ch.h_loop[1] * amps.beta[1]
        margin = abs(d1 - d2) / max(abs(d1), abs(d2), 1e-300)
        if margin < 1e-8:
            skipped += 1
            continue
        analytic = sfr_analytic(ch, amps, scheme_cfg.scheme)
        brute = sfr_bruteforce(gen, max_shift=2 * max(scheme_cfg.gap_total, 1))
        if analytic == brute:
            agree += 1
        else:
            disagree += 1
    out = rc.out or _default_out("sfr.json")
    _write_json(
        {
            "scheme": scheme_cfg.scheme,
            "draws": rc.draws,
            "agreements": agree,
            "disagreements": disagree,
            "near_singular_skipped": skipped,
            "all_agree": disagree == 0,
        },
        out,
    )
    return 0


def _cmd_rank_audit(rc: RunConfig) -> int:
    scheme_cfg = rc.scheme_config("fd_crosstalk")
    pad = rc.pad_tested if rc.pad_tested is not None else scheme_cfg.gap_total + 1
    ch = draw_realization(rc.seed, scheme_cfg.delays)
    amps = solve_amplifiers_crosstalk(ch, scheme_cfg)
    report = rank_audit_padding(ch, amps, scheme_cfg, pad, rc.trials, rc.seed)
    payload = report.to_dict()
    if report.drop_found:
        payload["witness_verified"] = verify_rank_witness(report, scheme_cfg)
    out = rc.out or _default_out("rank_audit.json")
    _write_json(payload, out)
    return 0


_COMMANDS = {
    "ber": _cmd_ber,
    "fig2": _cmd_fig2,
    "diversity": _cmd_diversity,
    "sfr": _cmd_sfr,
    "rank-audit": _cmd_rank_audit,
}


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        rc = _merge_config(args)
        return _COMMANDS[args.command](rc)
    except (ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
