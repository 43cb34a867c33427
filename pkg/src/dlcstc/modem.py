"""Gray-mapped QPSK and zero-padded frame construction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SCALE = 1.0 / np.sqrt(2.0)

# Decision targets ordered lexicographically by (real, imag) so that
# nearest-point ties resolve toward the smallest point.
QPSK_POINTS = np.array(
    [(-1 - 1j), (-1 + 1j), (1 - 1j), (1 + 1j)], dtype=np.complex128
) * _SCALE


@dataclass(frozen=True)
class Frame:
    """One zero-padded source frame: ``padded = [data, zeros(pad_len)]``."""

    data: np.ndarray
    padded: np.ndarray

    @property
    def n_data(self) -> int:
        return self.data.size

    @property
    def pad_len(self) -> int:
        return self.padded.size - self.data.size


def qpsk_modulate(bits) -> np.ndarray:
    """Map bit pairs (b0, b1) to ((1-2*b0) + j*(1-2*b1)) / sqrt(2)."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.ndim != 1 or bits.size % 2:
        raise ValueError("bit count must be even")
    pairs = bits.reshape(-1, 2)
    return ((1 - 2 * pairs[:, 0]) + 1j * (1 - 2 * pairs[:, 1])) * _SCALE


def qpsk_demodulate(symbols) -> np.ndarray:
    """Hard sign decisions; inverse of the Gray map for noiseless input."""
    symbols = np.asarray(symbols, dtype=np.complex128)
    bits = np.empty((symbols.size, 2), dtype=np.int64)
    bits[:, 0] = symbols.real <= 0
    bits[:, 1] = symbols.imag <= 0
    return bits.reshape(-1)


def slice_qpsk(symbols: np.ndarray) -> np.ndarray:
    """Nearest-constellation decisions (ties toward negative parts)."""
    re = np.where(np.asarray(symbols).real > 0, _SCALE, -_SCALE)
    im = np.where(np.asarray(symbols).imag > 0, _SCALE, -_SCALE)
    return re + 1j * im


def build_frame(s, pad_len: int) -> Frame:
    """Frame with ``pad_len`` trailing zero guard symbols."""
    s = np.asarray(s, dtype=np.complex128)
    if s.ndim != 1 or s.size < 1:
        raise ValueError("need at least one data symbol")
    if pad_len < 0:
        raise ValueError("pad_len must be non-negative")
    padded = np.concatenate([s, np.zeros(pad_len, dtype=np.complex128)])
    return Frame(data=s, padded=padded)
