"""Scheme and experiment configuration records."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

SCHEMES = (
    "fd_crosstalk",
    "fd_loop",
    "hd",
    "self_coding",
    "direct",
    "fd_crosstalk_dl",
    "fd_loop_dl",
)

# Full-duplex schemes keep a longer guard interval than the baselines.
_FD_PAD = 6
_BASELINE_PAD = 3


@dataclass(frozen=True)
class DelayProfile:
    """Random timing offsets of one trial.

    ``src_lag_choices`` are the admissible source->relay lags (symbol
    periods), drawn uniformly per relay.  Arrival lags at the destination
    are uniform on ``[0, max_lag)``.
    """

    src_lag_choices: tuple[int, ...] = (0, 1)
    max_lag: int = 3

    def __post_init__(self):
        if self.max_lag < 1:
            raise ValueError("max_lag must be >= 1")
        if not self.src_lag_choices or min(self.src_lag_choices) < 0:
            raise ValueError("source lag choices must be non-negative")


@dataclass(frozen=True)
class SchemeConfig:
    """Frame and code parameters of one transmission scheme.

    ``n_data``   symbols per frame, ``pad_len`` trailing zero guard,
    ``proc_delay`` common processing delay at the relays,
    ``code_len`` number of symbols combined per convolution branch
    (loop/HD/self-coding schemes).
    """

    scheme: str = "fd_crosstalk"
    n_data: int = 20
    pad_len: int = _FD_PAD
    proc_delay: int = 2
    code_len: int = 3
    delays: DelayProfile = field(default_factory=DelayProfile)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.n_data < 1 or self.pad_len < 0:
            raise ValueError("bad frame dimensions")
        if self.proc_delay < 1:
            raise ValueError("proc_delay must be >= 1")
        if self.code_len < 1:
            raise ValueError("code_len must be >= 1")

    @classmethod
    def for_scheme(cls, scheme: str, **kw) -> "SchemeConfig":
        """Config with the default guard length of the given scheme."""
        if "pad_len" not in kw:
            kw["pad_len"] = _FD_PAD if scheme.startswith("fd_") else _BASELINE_PAD
        return cls(scheme=scheme, **kw)

    @property
    def frame_len(self) -> int:
        return self.n_data + self.pad_len

    @property
    def window_len(self) -> int:
        """Destination observation window."""
        return self.frame_len + self.delays.max_lag - 1

    @property
    def gap_total(self) -> int:
        """Largest zero run inside one generator period (cross-talk rows)."""
        return 2 * self.proc_delay - 2

    @property
    def echo_depth(self) -> int:
        """Number of round trips through the cross-talk loop that land
        inside the frame window: largest n with (2n+1)*proc_delay <= frame_len-1."""
        return max((self.frame_len - 1 - self.proc_delay) // (2 * self.proc_delay), 0)

    def spectral_efficiency(self) -> float:
        """Information bits per channel use (QPSK); half-duplex relays
        spend two phases per frame."""
        rate = 2.0 * self.n_data / self.frame_len
        if self.scheme == "hd":
            rate /= 2.0
        return rate

    def to_dict(self) -> dict:
        d = asdict(self)
        d["delays"]["src_lag_choices"] = list(self.delays.src_lag_choices)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SchemeConfig":
        d = dict(d)
        dp = d.pop("delays", {})
        profile = DelayProfile(
            src_lag_choices=tuple(dp.get("src_lag_choices", (0, 1))),
            max_lag=int(dp.get("max_lag", 3)),
        )
        return cls(delays=profile, **d)
