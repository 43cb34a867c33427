"""Generator matrices for every scheme, amplifying-factor solutions,
shift-full-rank (SFR) analysis, and the guard-length rank audit.

Row conventions
---------------
Signal rows are stored at absolute delay: index d of a row is the tap
multiplying ``x(i - d)`` in the relay's transmitted signal, so leading
zeros encode the processing and source lags.  For the cross-talk scheme
the source->relay gains are part of the taps; for the loop, half-duplex
and self-coding schemes they act as a separate per-branch ``src_gain``
(the code taps there are channel-normalized and the source gain rides on
the equivalent end-to-end channel).  Noise rows map a relay's receiver
noise stream to its transmitted signal and never carry source gains.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization, rng_for, draw_realization
from .config import SchemeConfig
from .corelin import convolve, matrix_rank, two_row_full_rank, DEFAULT_RANK_TOL

_BISECT_ITERS = 100


@dataclass(frozen=True)
class AmplifierSolution:
    """Power-normalizing amplifying factors of the two relays."""

    beta: np.ndarray
    residual: float
    constraint_flag: bool = True

    def __post_init__(self):
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=np.float64)))


@dataclass(frozen=True)
class GeneratorMeta:
    """Shift metadata of a generator family."""

    gap1: int  # zero run after the first tap of row 1
    gap2: int  # zero run after the first tap of row 2
    gap_total: int  # largest total zero run inside one period
    echo_depth: int  # periods that land inside the frame window
    round_trip: complex | None  # per-period gain (cross-talk scheme only)
    scheme: str = "fd_crosstalk"


@dataclass(frozen=True)
class Branch:
    """One equivalent transmit branch seen by the destination."""

    kind: str  # "relay" or "direct"
    relay: int  # relay index, -1 for the direct branch
    offset: int  # leading zeros of the signal row
    row: np.ndarray  # absolute signal taps (leading zeros included)
    src_gain: complex  # multiplies the signal path only
    noise_rows: dict = field(default_factory=dict)  # stream index -> absolute taps

    @property
    def core(self) -> np.ndarray:
        return self.row[self.offset :]


@dataclass(frozen=True)
class GeneratorMatrix:
    scheme: str
    branches: tuple
    meta: GeneratorMeta

    @property
    def signal_rows(self) -> list:
        return [b.row for b in self.branches]

    @property
    def noise_rows(self) -> list:
        return [b.noise_rows for b in self.branches]


@dataclass(frozen=True)
class RankAuditReport:
    """Outcome of the guard-length audit over random and directed trials."""

    p_tested: int
    trials: int
    min_rank_full: int
    min_rank_truncated: int
    drop_found: bool
    witness: dict | None = None

    def to_dict(self) -> dict:
        d = {
            "p_tested": self.p_tested,
            "trials": self.trials,
            "min_rank_full": self.min_rank_full,
            "min_rank_truncated": self.min_rank_truncated,
            "drop_found": self.drop_found,
        }
        if self.witness is not None:
            w = dict(self.witness)
            for key in ("row1", "row2", "error_frame"):
                w[key] = [[float(v.real), float(v.imag)] for v in w[key]]
            w["round_trip"] = [float(self.witness["round_trip"].real), float(self.witness["round_trip"].imag)]
            d["witness"] = w
        return d


# ---------------------------------------------------------------------------
# amplifying factors


def _crosstalk_power_residual(a, b, c12, c21, depth):
    q = a * b * c12 * c21
    s = np.ones_like(a)
    term = np.ones_like(a)
    for _ in range(depth):
        term = term * q
        s = s + term
    eq1 = s * a * (1.0 + c21 * b)
    eq2 = s * b * (1.0 + c12 * a)
    return eq1, eq2


def solve_crosstalk_amplifiers_batch(c12, c21, depth: int):
    """Vectorized bisection for the squared amplifying factors (a, b) of
    the cross-talk scheme.  ``c12``/``c21`` are |h|^2 of the two cross
    links; ``depth`` is the echo depth (periods inside the frame)."""
    c12 = np.asarray(c12, dtype=np.float64)
    c21 = np.asarray(c21, dtype=np.float64)
    # b follows from a through the exact reduction a - b = a*b*(c12 - c21).
    hi = np.where(c12 >= c21, 1.0, 1.0 / (1.0 + np.maximum(c21 - c12, 0.0)))
    lo = np.zeros_like(hi)

    def f(a):
        b = a / (1.0 + a * (c12 - c21))
        eq1, _ = _crosstalk_power_residual(a, b, c12, c21, depth)
        return eq1 - 1.0

    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        neg = f(mid) < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    a = 0.5 * (lo + hi)
    b = a / (1.0 + a * (c12 - c21))
    eq1, eq2 = _crosstalk_power_residual(a, b, c12, c21, depth)
    resid = np.maximum(np.abs(eq1 - 1.0), np.abs(eq2 - 1.0))
    return a, b, resid


def solve_amplifiers_crosstalk(ch: ChannelRealization, cfg: SchemeConfig) -> AmplifierSolution:
    """Amplifying factors normalizing the expected transmit power of both
    relays to one, treating the cross gains as deterministic."""
    c12 = abs(ch.h_cross[0]) ** 2
    c21 = abs(ch.h_cross[1]) ** 2
    if not (np.isfinite(c12) and np.isfinite(c21)):
        raise ValueError("non-finite cross-talk gains")
    a, b, resid = solve_crosstalk_amplifiers_batch(np.array([c12]), np.array([c21]), cfg.echo_depth)
    if not np.isfinite(resid[0]) or resid[0] > 1e-10:
        raise ArithmeticError(
            f"no acceptable root: residual={resid[0]:.3e} for |h12|^2={c12:.3e}, |h21|^2={c21:.3e}"
        )
    return AmplifierSolution(beta=np.sqrt([a[0], b[0]]), residual=float(resid[0]))


def solve_loop_amplifiers_batch(c, code_len: int):
    """Vectorized bisection for the squared loop amplifying factor u with
    sum_{i=1..b} c^(i-1) u^i = 1; ``c`` is |h_loop|^2."""
    c = np.asarray(c, dtype=np.float64)
    lo = np.zeros_like(c)
    hi = np.ones_like(c)

    def g(u):
        total = np.zeros_like(u)
        term = np.ones_like(u)
        for _ in range(code_len):
            term = term * u
            total = total + term
            term = term * c
        return total

    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        neg = g(mid) < 1.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    u = 0.5 * (lo + hi)
    return u, np.abs(g(u) - 1.0)


def solve_amplifier_loop(h_loop: complex, code_len: int) -> AmplifierSolution:
    """Amplifying factor making the loop-scheme row exactly unit energy.

    The constraint flag records whether beta stays below 1/|h_loop|; the
    unique positive root violates it when |h_loop|^2 exceeds ``code_len``,
    in which case the root is still returned (energy stays normalized).
    """
    if code_len < 1:
        raise ValueError("code_len must be >= 1")
    c = abs(h_loop) ** 2
    u, resid = solve_loop_amplifiers_batch(np.array([c]), code_len)
    beta = float(np.sqrt(u[0]))
    flag = bool(c * u[0] < 1.0)
    return AmplifierSolution(beta=np.array([beta]), residual=float(resid[0]), constraint_flag=flag)


# ---------------------------------------------------------------------------
# generator construction


def _crosstalk_meta(ch: ChannelRealization, amps: AmplifierSolution, cfg: SchemeConfig) -> GeneratorMeta:
    lag1, lag2 = int(ch.src_lags[0]), int(ch.src_lags[1])
    phi = cfg.proc_delay
    eta = complex(amps.beta[0] * amps.beta[1] * ch.h_cross[0] * ch.h_cross[1])
    return GeneratorMeta(
        gap1=phi + lag2 - lag1 - 1,
        gap2=phi + lag1 - lag2 - 1,
        gap_total=cfg.gap_total,
        echo_depth=cfg.echo_depth,
        round_trip=eta,
        scheme="fd_crosstalk",
    )


def _check_crosstalk_pre(ch: ChannelRealization, cfg: SchemeConfig):
    phi = cfg.proc_delay
    if phi < int(max(ch.src_lags)) + 1:
        raise ValueError("processing delay must exceed the largest source lag")
    if cfg.pad_len < 2 * phi - 1:
        raise ValueError("guard length must be at least 2*proc_delay - 1")


def _crosstalk_branch(ch, amps, cfg, k: int) -> Branch:
    phi = cfg.proc_delay
    j = 1 - k
    lag_k, lag_j = int(ch.src_lags[k]), int(ch.src_lags[j])
    beta_k, beta_j = float(amps.beta[k]), float(amps.beta[j])
    h_in = ch.incoming_cross(k)
    eta = complex(amps.beta[0] * amps.beta[1] * ch.h_cross[0] * ch.h_cross[1])
    depth = cfg.echo_depth

    own = beta_k * ch.h_sr[k]
    crossed = beta_k * h_in * beta_j * ch.h_sr[j]
    row = np.zeros((2 * depth + 2) * phi + max(lag_k, lag_j) + 1, dtype=np.complex128)
    n_own = np.zeros((2 * depth + 1) * phi + 1, dtype=np.complex128)
    n_crossed = np.zeros((2 * depth + 2) * phi + 1, dtype=np.complex128)
    scale = 1.0 + 0.0j
    for n in range(depth + 1):
        row[(2 * n + 1) * phi + lag_k] = scale * own
        row[(2 * n + 2) * phi + lag_j] = scale * crossed
        n_own[(2 * n + 1) * phi] = scale * beta_k
        n_crossed[(2 * n + 2) * phi] = scale * beta_k * h_in * beta_j
        scale *= eta
    return Branch(
        kind="relay",
        relay=k,
        offset=phi + lag_k,
        row=row,
        src_gain=1.0 + 0.0j,
        noise_rows={k: n_own, j: n_crossed},
    )


def build_generators_crosstalk(
    ch: ChannelRealization, amps: AmplifierSolution, cfg: SchemeConfig
) -> GeneratorMatrix:
    """Two-row generator of the cross-talk scheme: alternating own/crossed
    taps scaled by powers of the round-trip gain, long enough to reproduce
    the sample recursion over the whole frame window."""
    _check_crosstalk_pre(ch, cfg)
    branches = (_crosstalk_branch(ch, amps, cfg, 0), _crosstalk_branch(ch, amps, cfg, 1))
    return GeneratorMatrix(scheme="fd_crosstalk", branches=branches, meta=_crosstalk_meta(ch, amps, cfg))


def _loop_branch(ch, beta: float, cfg, k: int) -> Branch:
    phi = cfg.proc_delay
    b = cfg.code_len
    lag_k = int(ch.src_lags[k])
    ratio = complex(ch.h_loop[k]) * beta
    core = np.zeros((b - 1) * phi + 1, dtype=np.complex128)
    core[np.arange(b) * phi] = beta * ratio ** np.arange(b)
    row = np.concatenate([np.zeros(phi + lag_k, dtype=np.complex128), core])
    noise = np.concatenate([np.zeros(phi, dtype=np.complex128), core])
    return Branch(
        kind="relay",
        relay=k,
        offset=phi + lag_k,
        row=row,
        src_gain=complex(ch.h_sr[k]),
        noise_rows={k: noise},
    )


def build_generators_loop(
    ch: ChannelRealization, amps: AmplifierSolution, cfg: SchemeConfig
) -> GeneratorMatrix:
    """Loop-scheme generator: geometric taps at the processing-delay
    spacing, each row exactly unit energy after the amplifier solve."""
    if cfg.code_len < 2:
        raise ValueError("loop scheme needs code_len >= 2 (one tap per independent link)")
    beta = amps.beta
    if beta.size < 2:
        raise ValueError("need one amplifying factor per relay")
    branches = (_loop_branch(ch, float(beta[0]), cfg, 0), _loop_branch(ch, float(beta[1]), cfg, 1))
    meta = GeneratorMeta(
        gap1=cfg.proc_delay - 1,
        gap2=cfg.proc_delay - 1,
        gap_total=cfg.proc_delay - 1,
        echo_depth=cfg.code_len - 1,
        round_trip=None,
        scheme="fd_loop",
    )
    return GeneratorMatrix(scheme="fd_loop", branches=branches, meta=meta)


def solve_amplifiers_loop_pair(ch: ChannelRealization, cfg: SchemeConfig) -> AmplifierSolution:
    """Per-relay loop amplifier solve packed into one solution record."""
    sols = [solve_amplifier_loop(ch.h_loop[k], cfg.code_len) for k in range(2)]
    return AmplifierSolution(
        beta=np.array([s.beta[0] for s in sols]),
        residual=max(s.residual for s in sols),
        constraint_flag=all(s.constraint_flag for s in sols),
    )


def hd_code_rows(code_len: int) -> np.ndarray:
    """Fixed unit-norm half-duplex code rows: a 2 x code_len Vandermonde on
    the nodes (1, -1), which keeps the rows independent for any length."""
    nodes = np.array([1.0, -1.0])
    rows = nodes[:, None] ** np.arange(code_len)[None, :]
    return rows / np.sqrt(code_len)


def _direct_branch(cfg: SchemeConfig, scale: float = 1.0) -> Branch:
    row = np.zeros((cfg.code_len - 1) * cfg.proc_delay + 1, dtype=np.complex128)
    row[0] = scale
    return Branch(kind="direct", relay=-1, offset=0, row=row, src_gain=1.0 + 0.0j, noise_rows={})


def _hd_branch(ch, cfg, k: int) -> Branch:
    phi = cfg.proc_delay
    lag_k = int(ch.src_lags[k])
    coeffs = hd_code_rows(cfg.code_len)[k]
    core = np.zeros((cfg.code_len - 1) * phi + 1, dtype=np.complex128)
    core[np.arange(cfg.code_len) * phi] = coeffs
    row = np.concatenate([np.zeros(lag_k, dtype=np.complex128), core])
    return Branch(
        kind="relay",
        relay=k,
        offset=lag_k,
        row=row,
        src_gain=complex(ch.h_sr[k]),
        noise_rows={k: core.copy()},
    )


def build_generators_baseline(kind: str, ch: ChannelRealization, cfg: SchemeConfig) -> GeneratorMatrix:
    """Baseline generator families: half-duplex fixed rows, direct
    transmission, the one-relay-plus-direct-link self-coding scheme, and
    the bare direct-link row used by the three-branch variants."""
    meta = GeneratorMeta(
        gap1=cfg.proc_delay - 1,
        gap2=cfg.proc_delay - 1,
        gap_total=cfg.proc_delay - 1,
        echo_depth=cfg.code_len - 1,
        round_trip=None,
        scheme=kind,
    )
    if kind in ("direct", "direct_link_row"):
        return GeneratorMatrix(scheme=kind, branches=(_direct_branch(cfg),), meta=meta)
    if kind == "hd":
        return GeneratorMatrix(scheme=kind, branches=(_hd_branch(ch, cfg, 0), _hd_branch(ch, cfg, 1)), meta=meta)
    if kind == "self_coding":
        amp = solve_amplifier_loop(ch.h_loop[0], cfg.code_len)
        return GeneratorMatrix(
            scheme=kind,
            branches=(_direct_branch(cfg), _loop_branch(ch, float(amp.beta[0]), cfg, 0)),
            meta=meta,
        )
    raise ValueError(f"unknown baseline kind {kind!r}")


# ---------------------------------------------------------------------------
# SFR analysis


def sfr_analytic(
    ch: ChannelRealization,
    amps: AmplifierSolution,
    scheme: str,
    rel_tol: float = DEFAULT_RANK_TOL,
) -> bool:
    """Closed-form SFR predicate.

    Cross-talk scheme: the two rows stay independent under every shift iff
    b1*h12*h_sr1^2 != b2*h21*h_sr2^2 with both first taps nonzero.  Loop
    scheme: iff the per-relay geometric ratios h_kk*beta_k differ.
    Near-equality is measured against ``rel_tol`` times the larger scale.
    """
    if scheme == "fd_crosstalk":
        d1 = complex(amps.beta[0] * ch.h_cross[0] * ch.h_sr[0] ** 2)
        d2 = complex(amps.beta[1] * ch.h_cross[1] * ch.h_sr[1] ** 2)
        scale = max(abs(d1), abs(d2), 1e-300)
        taps_nonzero = (
            abs(amps.beta[0] * ch.h_sr[0]) > rel_tol and abs(amps.beta[1] * ch.h_sr[1]) > rel_tol
        )
        return bool(abs(d1 - d2) > rel_tol * scale and taps_nonzero)
    if scheme == "fd_loop":
        d1 = complex(ch.h_loop[0]) * float(amps.beta[0])
        d2 = complex(ch.h_loop[1]) * float(amps.beta[1])
        scale = max(abs(d1), abs(d2))
        if scale == 0.0:
            return False
        return bool(abs(d1 - d2) > rel_tol * scale)
    raise ValueError(f"no analytic SFR predicate for scheme {scheme!r}")


def _trim(row: np.ndarray) -> np.ndarray:
    nz = np.nonzero(np.abs(row) > 0)[0]
    if nz.size == 0:
        return row[:1]
    return row[: nz[-1] + 1]


def sfr_bruteforce(
    gen: GeneratorMatrix | list, max_shift: int, tol: float = DEFAULT_RANK_TOL
) -> bool:
    """Exhaustive SFR check: full row rank for every combination of
    per-row right shifts in [0, max_shift].

    For two rows only the relative shift matters (a common shift prepends
    zero columns), so the pair is screened over relative offsets with the
    Gram fast path; three rows enumerate all shift triples.
    """
    rows = gen.signal_rows if isinstance(gen, GeneratorMatrix) else list(gen)
    rows = [_trim(np.asarray(r, dtype=np.complex128)) for r in rows]
    if not 2 <= len(rows) <= 3:
        raise ValueError("SFR check expects 2 or 3 rows")
    if max_shift < 0:
        raise ValueError("max_shift must be non-negative")
    if len(rows) == 2:
        r1, r2 = rows
        for delta in range(-max_shift, max_shift + 1):
            a = np.concatenate([np.zeros(max(delta, 0), dtype=np.complex128), r1])
            b = np.concatenate([np.zeros(max(-delta, 0), dtype=np.complex128), r2])
            width = max(a.size, b.size)
            a = np.pad(a, (0, width - a.size))
            b = np.pad(b, (0, width - b.size))
            if not two_row_full_rank(a, b, tol):
                return False
        return True
    shifts = range(max_shift + 1)
    width = max(r.size for r in rows) + max_shift
    for s1 in shifts:
        for s2 in shifts:
            for s3 in shifts:
                stacked = np.zeros((3, width), dtype=np.complex128)
                for out, (s, r) in zip(stacked, ((s1, rows[0]), (s2, rows[1]), (s3, rows[2]))):
                    out[s : s + r.size] = r
                if matrix_rank(stacked, tol) < 3:
                    return False
    return True


# ---------------------------------------------------------------------------
# guard-length rank audit


def _two_tap_rows(a11, a12, a21, a22, gap1: int, gap2: int, gap_total: int):
    r1 = np.zeros(gap_total + 2, dtype=np.complex128)
    r2 = np.zeros(gap_total + 2, dtype=np.complex128)
    r1[0], r1[gap1 + 1] = a11, a12
    r2[0], r2[gap2 + 1] = a21, a22
    return r1, r2


def _periodic_row(row: np.ndarray, ratio: complex, out_len: int) -> np.ndarray:
    period = row.size
    reps = -(-out_len // period) + 1
    out = np.zeros(reps * period, dtype=np.complex128)
    scale = 1.0 + 0.0j
    for m in range(reps):
        out[m * period : (m + 1) * period] = scale * row
        scale *= ratio
    return out[:out_len]


def _audit_ranks(r1, r2, ratio, err, n_data: int, pad: int, tol: float):
    full = np.vstack([convolve(r1, err), convolve(r2, err)])
    keep = n_data + pad
    ratio_len = keep + r1.size
    h1 = _periodic_row(r1, ratio, ratio_len)
    h2 = _periodic_row(r2, ratio, ratio_len)
    trunc = np.vstack([convolve(h1, err)[:keep], convolve(h2, err)[:keep]])
    return matrix_rank(full, tol), matrix_rank(trunc, tol)


def _scheme_coefficients(ch: ChannelRealization, amps: AmplifierSolution):
    a11 = complex(amps.beta[0] * ch.h_sr[0])
    a12 = complex(amps.beta[0] * ch.incoming_cross(0) * amps.beta[1] * ch.h_sr[1])
    a21 = complex(amps.beta[1] * ch.h_sr[1])
    a22 = complex(amps.beta[1] * ch.incoming_cross(1) * amps.beta[0] * ch.h_sr[0])
    eta = complex(amps.beta[0] * amps.beta[1] * ch.h_cross[0] * ch.h_cross[1])
    return a11, a12, a21, a22, eta


def _random_error_frame(rng: np.random.Generator, n_data: int) -> np.ndarray:
    from .modem import qpsk_modulate

    while True:
        b1 = rng.integers(0, 2, 2 * n_data)
        b2 = rng.integers(0, 2, 2 * n_data)
        err = qpsk_modulate(b1) - qpsk_modulate(b2)
        if np.any(err != 0):
            return err


def rank_audit_padding(
    ch: ChannelRealization,
    amps: AmplifierSolution,
    cfg: SchemeConfig,
    pad: int,
    trials: int,
    seed: int,
    tol: float = DEFAULT_RANK_TOL,
) -> RankAuditReport:
    """Compare codeword-difference ranks of the frame-truncated code
    against the untruncated one for guard length ``pad``.

    Trials draw the full two-tap row family admitted by the diversity
    reduction -- tap spacings uniform on [0, gap_total]^2 with scheme
    channel coefficients and the scheme round-trip gain -- plus directed
    probes at the extreme spacing with an impulse error frame, which is
    the only family member that can lose rank when the guard is one short.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    xi = cfg.gap_total
    n_data = cfg.n_data
    min_full = min_trunc = 2
    drop_found = False
    witness = None
    impulse = np.zeros(n_data, dtype=np.complex128)
    impulse[-1] = 1.0

    for t in range(trials):
        if t == 0:
            draw, sol = ch, amps
        else:
            draw = draw_realization(rng_for(seed, 0xA0D17, t), cfg.delays)
            sol = solve_amplifiers_crosstalk(draw, cfg)
        a11, a12, a21, a22, eta = _scheme_coefficients(draw, sol)
        directed = t % 2 == 0
        if directed:
            gap1 = gap2 = xi
            err = impulse
        else:
            trial_rng = rng_for(seed, 0xE44, t)
            gap1 = int(trial_rng.integers(0, xi + 1))
            gap2 = int(trial_rng.integers(0, xi + 1))
            err = _random_error_frame(trial_rng, n_data)
        r1, r2 = _two_tap_rows(a11, a12, a21, a22, gap1, gap2, xi)
        rank_full, rank_trunc = _audit_ranks(r1, r2, eta, err, n_data, pad, tol)
        min_full = min(min_full, rank_full)
        min_trunc = min(min_trunc, rank_trunc)
        if rank_trunc < rank_full and not drop_found:
            drop_found = True
            witness = {
                "trial": t,
                "gap1": gap1,
                "gap2": gap2,
                "row1": r1.tolist(),
                "row2": r2.tolist(),
                "round_trip": eta,
                "error_frame": err.tolist(),
                "rank_full": rank_full,
                "rank_truncated": rank_trunc,
            }
    return RankAuditReport(
        p_tested=pad,
        trials=trials,
        min_rank_full=min_full,
        min_rank_truncated=min_trunc,
        drop_found=drop_found,
        witness=witness,
    )


def verify_rank_witness(report: RankAuditReport, cfg: SchemeConfig, tol: float = DEFAULT_RANK_TOL) -> bool:
    """Recompute the stored witness ranks; True iff the drop reproduces."""
    w = report.witness
    if w is None:
        return False
    r1 = np.asarray(w["row1"], dtype=np.complex128)
    r2 = np.asarray(w["row2"], dtype=np.complex128)
    err = np.asarray(w["error_frame"], dtype=np.complex128)
    rank_full, rank_trunc = _audit_ranks(
        r1, r2, complex(w["round_trip"]), err, cfg.n_data, report.p_tested, tol
    )
    return rank_trunc < rank_full and rank_full == w["rank_full"] and rank_trunc == w["rank_truncated"]
