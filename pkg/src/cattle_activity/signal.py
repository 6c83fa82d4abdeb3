"""One-dimensional signal primitives used by the window feature extractor.

Savitzky-Golay smoothing, a multilevel orthonormal discrete wavelet
transform (with its inverse), histogram entropy and mean signal energy.
Everything here is a pure function of its inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "ParameterError",
    "DecompositionError",
    "StructureError",
    "WaveletCoeffs",
    "WAVELETS",
    "wavelet_filters",
    "savitzky_golay",
    "dwt_decompose",
    "dwt_reconstruct",
    "shannon_entropy",
    "signal_energy",
]


class ParameterError(ValueError):
    """Invalid parameter for a signal operation."""


class DecompositionError(ValueError):
    """Series cannot be decomposed at the requested number of levels."""


class StructureError(ValueError):
    """Wavelet coefficient arrays have inconsistent lengths."""


# Decomposition low-pass filters in convolution order, from a 60-digit
# spectral factorisation (db4 differs from common tables past 1e-12).
WAVELETS: dict[str, np.ndarray] = {
    "haar": np.array([0.7071067811865476, 0.7071067811865476]),
    "db2": np.array([
        -0.12940952255126037, 0.2241438680420134,
        0.8365163037378079, 0.48296291314453416,
    ]),
    "db3": np.array([
        0.03522629188570953, -0.08544127388202666, -0.13501102001025458,
        0.45987750211849154, 0.8068915093110925, 0.33267055295008263,
    ]),
    "db4": np.array([
        -0.010597401785069032, 0.0328830116668852, 0.030841381835560764,
        -0.18703481171909309, -0.027983769416859854, 0.6308807679298589,
        0.7148465705529157, 0.2303778133088965,
    ]),
}
WAVELETS["db1"] = WAVELETS["haar"]

MODES = ("symmetric", "periodization")


def wavelet_filters(name: str) -> tuple[np.ndarray, np.ndarray]:
    """Return the (low-pass, high-pass) decomposition filters for `name`."""
    try:
        lo = WAVELETS[name.lower()]
    except KeyError:
        raise ParameterError(
            f"unknown wavelet {name!r}; available: {sorted(WAVELETS)}"
        ) from None
    n = len(lo)
    hi = np.array([(-1) ** (k + 1) * lo[n - 1 - k] for k in range(n)])
    return lo, hi


def _as_series(series) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ParameterError(f"expected a 1-D series, got shape {x.shape}")
    if x.size == 0:
        raise ParameterError("series is empty")
    return x


# -- Savitzky-Golay ----------------------------------------------------------

def _sg_projection(window_len: int, polyorder: int) -> tuple[np.ndarray, np.ndarray]:
    half = window_len // 2
    t = np.arange(-half, half + 1, dtype=float)
    vander = np.vander(t, polyorder + 1, increasing=True)
    # rows of pinv map a window to its polynomial coefficients
    return t, np.linalg.pinv(vander)


def savitzky_golay(series, window_len: int, polyorder: int) -> np.ndarray:
    """Smooth `series` with a Savitzky-Golay filter.

    Each interior output is the value at the window centre of the
    least-squares polynomial of degree `polyorder` fitted to the centred
    window. The first and last ``window_len // 2`` points are taken from
    the polynomial fitted to the first and last full window, so the output
    has the same length as the input.
    """
    x = _as_series(series)
    if window_len <= 0 or window_len % 2 == 0:
        raise ParameterError(f"window_len must be a positive odd integer, got {window_len}")
    if polyorder < 0 or polyorder >= window_len:
        raise ParameterError(
            f"polyorder must satisfy 0 <= polyorder < window_len, got {polyorder}"
        )
    if x.size < window_len:
        raise ParameterError(
            f"series of length {x.size} is shorter than window_len={window_len}"
        )
    half = window_len // 2
    t, proj = _sg_projection(window_len, polyorder)
    out = np.empty_like(x)
    out[half:x.size - half] = sliding_window_view(x, window_len) @ proj[0]
    if half:
        edge_powers = np.vander(t, polyorder + 1, increasing=True)
        head = proj @ x[:window_len]
        tail = proj @ x[-window_len:]
        out[:half] = edge_powers[:half] @ head
        out[x.size - half:] = edge_powers[half + 1:] @ tail
    return out


# -- Discrete wavelet transform ---------------------------------------------

@dataclass(frozen=True)
class WaveletCoeffs:
    """Multilevel DWT output. ``details[0]`` is D1, the finest band."""

    approximation: np.ndarray
    details: list[np.ndarray]
    wavelet_name: str
    levels: int
    mode: str = "symmetric"
    signal_length: int | None = field(default=None)

    def bands(self) -> dict[str, np.ndarray]:
        """Coefficient bands keyed ``A``, ``D1`` .. ``DL``."""
        out = {"A": self.approximation}
        for i, d in enumerate(self.details, start=1):
            out[f"D{i}"] = d
        return out


def _next_length(n: int, filter_len: int, mode: str) -> int:
    if mode == "periodization":
        return (n + 1) // 2
    return (n + filter_len - 1) // 2


def _index_grid(n_coeffs: int, filter_len: int) -> np.ndarray:
    k = np.arange(n_coeffs)[:, None]
    j = np.arange(filter_len)[None, :]
    return 2 * k + 1 - j


def _analysis_step(x: np.ndarray, lo: np.ndarray, hi: np.ndarray, mode: str):
    f = len(lo)
    if mode == "periodization":
        if x.size % 2:
            x = np.append(x, x[-1])
        idx = _index_grid(x.size // 2, f) % x.size
        windows = x[idx]
    else:
        m = (x.size + f - 1) // 2
        ext = np.pad(x, f - 1, mode="symmetric")
        windows = ext[_index_grid(m, f) + (f - 1)]
    return windows @ lo, windows @ hi


def _synthesis_step(a, d, lo, hi, n_out: int, mode: str) -> np.ndarray:
    f = len(lo)
    contrib = a[:, None] * lo[None, :] + d[:, None] * hi[None, :]
    idx = _index_grid(a.size, f)
    if mode == "periodization":
        size = 2 * a.size
        out = np.zeros(size)
        np.add.at(out, idx % size, contrib)
        return out[:n_out]
    out = np.zeros(n_out + 2 * (f - 1))
    np.add.at(out, idx + (f - 1), contrib)
    return out[f - 1:f - 1 + n_out]


def dwt_decompose(series, levels: int = 3, wavelet_name: str = "db4",
                  mode: str = "symmetric") -> WaveletCoeffs:
    """Multilevel DWT by cascaded filtering and dyadic downsampling.

    ``mode="symmetric"`` extends each level by half-point reflection and
    keeps ``(n + F - 1) // 2`` coefficients per band (F = filter length).
    ``mode="periodization"`` wraps the signal and keeps ``ceil(n / 2)``
    coefficients, which makes the transform exactly orthogonal whenever the
    length is divisible by ``2**levels``.
    """
    x = _as_series(series)
    if levels < 1:
        raise ParameterError(f"levels must be a positive integer, got {levels}")
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    lo, hi = wavelet_filters(wavelet_name)
    min_len = 2 ** levels
    if x.size < min_len:
        raise DecompositionError(
            f"series of length {x.size} too short for {levels} levels; "
            f"minimum length is {min_len}"
        )
    details = []
    approx = x
    for _ in range(levels):
        approx, d = _analysis_step(approx, lo, hi, mode)
        details.append(d)
    return WaveletCoeffs(approx, details, wavelet_name, levels, mode, x.size)


def dwt_reconstruct(coeffs: WaveletCoeffs) -> np.ndarray:
    """Invert :func:`dwt_decompose`.

    When ``coeffs.signal_length`` is unknown the finest level is rebuilt
    at its longest admissible length.
    """
    lo, hi = wavelet_filters(coeffs.wavelet_name)
    f = len(lo)
    mode = coeffs.mode
    if mode not in MODES:
        raise StructureError(f"unknown mode {mode!r}")
    if coeffs.levels != len(coeffs.details) or coeffs.levels < 1:
        raise StructureError(
            f"levels={coeffs.levels} but {len(coeffs.details)} detail bands given"
        )
    approx = np.asarray(coeffs.approximation, dtype=float)
    details = [np.asarray(d, dtype=float) for d in coeffs.details]
    for level in range(coeffs.levels, 0, -1):
        d = details[level - 1]
        if d.size != approx.size:
            raise StructureError(
                f"level {level}: approximation has {approx.size} coefficients, "
                f"detail has {d.size}"
            )
        if level > 1:
            target = details[level - 2].size
        elif coeffs.signal_length is not None:
            target = coeffs.signal_length
        else:
            target = 2 * approx.size if mode == "periodization" else 2 * approx.size - f + 2
        if target < 1 or _next_length(target, f, mode) != approx.size:
            raise StructureError(
                f"level {level}: {approx.size} coefficients cannot come from a "
                f"length-{target} signal"
            )
        approx = _synthesis_step(approx, d, lo, hi, target, mode)
    return approx


# -- Scalar measures ---------------------------------------------------------

def shannon_entropy(series, bins: int = 10) -> float:
    """Natural-log entropy of the equal-width histogram over ``[min, max]``.

    A value ``v`` falls in bin ``floor((v - min) / (max - min) * bins)``,
    with ``max`` itself placed in the last bin. Constant series give 0.
    """
    x = _as_series(series)
    if bins < 1:
        raise ParameterError(f"bins must be a positive integer, got {bins}")
    lo, hi = x.min(), x.max()
    if lo == hi:
        return 0.0
    idx = np.floor((x - lo) / (hi - lo) * bins).astype(np.int64)
    np.clip(idx, 0, bins - 1, out=idx)
    counts = np.bincount(idx, minlength=bins)
    p = counts[counts > 0] / x.size
    return float(-np.sum(p * np.log(p)))


def signal_energy(series) -> float:
    """Mean squared amplitude."""
    x = _as_series(series)
    return float(np.mean(x * x))
