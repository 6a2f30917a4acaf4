"""Spectral analysis: STFTs, the multi-scale magnitude loss and its
gradient, A-weighted loudness, and YIN pitch tracking.

The loss compares magnitude spectrograms at several FFT sizes at once, so a
mismatch shows up whether it is narrow in frequency or narrow in time. The
magnitude uses an epsilon-smoothed modulus sqrt(re^2 + im^2 + eps^2), which
keeps the gradient finite on empty bins.
"""

from dataclasses import dataclass

import numpy as np

DEFAULT_FFT_SIZES = (64, 128, 256, 512, 1024, 2048)
MAGNITUDE_EPS = 1e-7

LOUDNESS_FLOOR_DB = -120.0
POWER_FLOOR = 1e-12


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SpectralConfig:
    """Which scales the multi-scale loss runs at."""

    fft_sizes: tuple = DEFAULT_FFT_SIZES
    hop_divisor: int = 4
    window: str = "hann"

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.fft_sizes)
        if not sizes:
            raise ValueError("need at least one FFT size")
        for n in sizes:
            if not _is_pow2(n) or n < 32:
                raise ValueError(f"FFT sizes must be powers of two >= 32, got {n}")
        if self.hop_divisor < 1:
            raise ValueError(f"hop_divisor must be >= 1, got {self.hop_divisor}")
        _make_window(self.window, sizes[0])  # reject unknown names early
        object.__setattr__(self, "fft_sizes", sizes)

    def hop_for(self, fft_size):
        return max(1, fft_size // self.hop_divisor)


@dataclass
class Spectrogram:
    """Magnitude spectrogram plus the geometry it was computed with."""

    magnitudes: np.ndarray
    fft_size: int
    hop: int

    def __post_init__(self):
        m = np.asarray(self.magnitudes, dtype=np.float64)
        if m.ndim != 2:
            raise ValueError(f"magnitudes must be 2-D, got shape {m.shape}")
        if m.shape[1] != self.fft_size // 2 + 1:
            raise ValueError(
                f"bin count {m.shape[1]} does not match fft_size {self.fft_size}"
            )
        if m.size and np.min(m) < 0:
            raise ValueError("magnitudes must be nonnegative")
        self.magnitudes = m

    @property
    def n_frames(self):
        return self.magnitudes.shape[0]


def _make_window(name, length):
    if name == "hann":
        # periodic variant, the right one for STFT analysis
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(length) / length)
    if name in ("rect", "rectangular"):
        return np.ones(length)
    raise ValueError(f"unknown window {name!r}")


def _frame_signal(signal, fft_size, hop):
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1:
        raise ValueError(f"signal must be 1-D, got shape {signal.shape}")
    if signal.shape[0] < fft_size:
        raise ValueError(
            f"signal ({signal.shape[0]} samples) shorter than one frame ({fft_size})"
        )
    frames = np.lib.stride_tricks.sliding_window_view(signal, fft_size)[::hop]
    return signal, frames


def stft_complex(signal, fft_size, hop, window="hann"):
    """Windowed complex STFT, frames starting at multiples of ``hop``."""
    _, frames = _frame_signal(signal, fft_size, hop)
    return np.fft.rfft(frames * _make_window(window, fft_size), axis=-1)


def stft_magnitude(signal, fft_size, hop, window="hann"):
    """Epsilon-smoothed magnitude spectrogram."""
    z = stft_complex(signal, fft_size, hop, window)
    mags = np.sqrt(z.real * z.real + z.imag * z.imag + MAGNITUDE_EPS * MAGNITUDE_EPS)
    return Spectrogram(magnitudes=mags, fft_size=fft_size, hop=hop)


def stft_adjoint(grad_bins, n_samples, fft_size, hop, window="hann"):
    """Adjoint of stft_complex: spread complex bin gradients back to samples.

    For the real-input FFT, the adjoint of rfft is N * irfft once interior
    bins (every bin except DC and Nyquist) are halved, because those bins
    implicitly carry their conjugate mirror. Windowing multiplies through,
    framing becomes overlap-add.
    """
    grad_bins = np.asarray(grad_bins, dtype=np.complex128)
    scaled = grad_bins.copy()
    scaled[:, 1:-1] *= 0.5
    frames = fft_size * np.fft.irfft(scaled, n=fft_size, axis=-1)
    frames *= _make_window(window, fft_size)
    grad = np.zeros(n_samples, dtype=np.float64)
    for i in range(frames.shape[0]):
        start = i * hop
        grad[start:start + fft_size] += frames[i]
    return grad


class TargetSpectra:
    """Precomputed per-scale target magnitudes, reused across iterations."""

    def __init__(self, target, config):
        target = np.asarray(target, dtype=np.float64)
        if not np.all(np.isfinite(target)):
            raise ValueError("target contains non-finite values")
        self.n_samples = target.shape[0]
        self.scales = []
        for fft_size in config.fft_sizes:
            hop = config.hop_for(fft_size)
            spec = stft_magnitude(target, fft_size, hop, config.window)
            self.scales.append((fft_size, hop, config.window, spec.magnitudes))


def multiscale_loss(signal, target, config=None):
    """Sum over scales of the mean absolute magnitude difference.

    Each scale contributes mean(|S_signal - S_target|) taken over all of its
    frames and bins, so no single scale dominates just by having more bins.
    """
    loss, _ = _loss_and_grad(signal, target, config, want_grad=False)
    return loss


def multiscale_loss_grad(signal, target, config=None):
    """Gradient of multiscale_loss with respect to ``signal``."""
    _, grad = _loss_and_grad(signal, target, config, want_grad=True)
    return grad


def _loss_and_grad(signal, target, config, want_grad):
    if config is None:
        config = SpectralConfig()
    if not isinstance(target, TargetSpectra):
        target = TargetSpectra(np.asarray(target, dtype=np.float64), config)
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1:
        raise ValueError(f"signal must be 1-D, got shape {signal.shape}")
    if signal.shape[0] != target.n_samples:
        raise ValueError(
            f"signal length {signal.shape[0]} != target length {target.n_samples}"
        )
    largest = max(fft for fft, _, _, _ in target.scales)
    if signal.shape[0] < largest:
        raise ValueError(
            f"signals must cover the largest FFT size ({largest}), got {signal.shape[0]}"
        )

    loss = 0.0
    grad = np.zeros_like(signal) if want_grad else None
    for fft_size, hop, window, target_mags in target.scales:
        z = stft_complex(signal, fft_size, hop, window)
        mags = np.sqrt(z.real * z.real + z.imag * z.imag
                       + MAGNITUDE_EPS * MAGNITUDE_EPS)
        diff = mags - target_mags
        loss += float(np.mean(np.abs(diff)))
        if want_grad:
            # d|m - t|/dm = sign, then dm/dz = z / m for the smoothed modulus
            bin_grad = (np.sign(diff) / diff.size) * (z / mags)
            grad += stft_adjoint(bin_grad, signal.shape[0], fft_size, hop, window)
    return loss, grad


def a_weighting_db(freq_hz):
    """IEC A-curve gain in dB, normalized to 0 dB at 1 kHz (vectorized)."""
    gain = _a_weight_gain(np.asarray(freq_hz, dtype=np.float64))
    ref = _a_weight_gain(np.asarray(1000.0))
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(gain / ref)


def _a_weight_gain(freq_hz):
    f2 = freq_hz * freq_hz
    num = (12194.217 ** 2) * f2 * f2
    den = ((f2 + 20.598997 ** 2)
           * np.sqrt((f2 + 107.65265 ** 2) * (f2 + 737.86223 ** 2))
           * (f2 + 12194.217 ** 2))
    return num / den


def extract_loudness(signal, sample_rate, frame_rate, fft_size=2048):
    """Per-frame A-weighted loudness in dB, floored at -120.

    One frame per hop = sample_rate / frame_rate samples; the signal is
    zero-padded at the end so every frame has a full window. Halving the
    signal amplitude drops every frame by very nearly 6.02 dB.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1:
        raise ValueError(f"signal must be 1-D, got shape {signal.shape}")
    hop = sample_rate / frame_rate
    hop_i = int(round(hop))
    if hop_i < 1 or abs(hop - hop_i) > 1e-9:
        raise ValueError("sample_rate / frame_rate must be a positive integer hop")
    n_frames = signal.shape[0] // hop_i
    if n_frames < 1:
        raise ValueError("signal shorter than one frame hop")
    needed = (n_frames - 1) * hop_i + fft_size
    if needed > signal.shape[0]:
        signal = np.concatenate((signal, np.zeros(needed - signal.shape[0])))
    frames = np.lib.stride_tricks.sliding_window_view(signal, fft_size)[::hop_i]
    frames = frames[:n_frames]
    window = _make_window("hann", fft_size)
    spectra = np.fft.rfft(frames * window, axis=-1)
    freqs = np.fft.rfftfreq(fft_size, d=1.0 / sample_rate)
    weight = (_a_weight_gain(freqs) / _a_weight_gain(np.asarray(1000.0))) ** 2
    power = np.sum(weight * (spectra.real ** 2 + spectra.imag ** 2), axis=-1)
    return np.maximum(10.0 * np.log10(np.maximum(power, POWER_FLOOR)),
                      LOUDNESS_FLOOR_DB)


def estimate_f0(signal, sample_rate, frame_rate, f0_min=20.0, f0_max=4000.0,
                threshold=0.15):
    """Per-frame fundamental frequency via the YIN difference function.

    Returns (f0_hz, confidence), one value per hop of the signal. Confidence
    is 1 minus the minimum of the cumulative-mean-normalized difference; a
    frame counts as unvoiced when confidence <= 1 - threshold, and such
    frames keep their best-guess f0.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1:
        raise ValueError(f"signal must be 1-D, got shape {signal.shape}")
    if not 0 < f0_min < f0_max:
        raise ValueError(f"need 0 < f0_min < f0_max, got {f0_min}, {f0_max}")
    if f0_max >= sample_rate / 2:
        raise ValueError("f0_max must stay below Nyquist")
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    hop = sample_rate / frame_rate
    hop_i = int(round(hop))
    if hop_i < 1 or abs(hop - hop_i) > 1e-9:
        raise ValueError("sample_rate / frame_rate must be a positive integer hop")

    tau_min = max(1, int(np.floor(sample_rate / f0_max)))
    tau_max = int(np.ceil(sample_rate / f0_min))
    window_len = tau_max
    span = window_len + tau_max
    n_frames = signal.shape[0] // hop_i
    if n_frames < 1:
        raise ValueError("signal shorter than one frame hop")
    needed = (n_frames - 1) * hop_i + span
    if needed > signal.shape[0]:
        signal = np.concatenate((signal, np.zeros(needed - signal.shape[0])))

    fft_len = 1
    while fft_len < 2 * span:
        fft_len *= 2

    f0 = np.empty(n_frames)
    confidence = np.empty(n_frames)
    taus = np.arange(1, tau_max + 1)
    for frame in range(n_frames):
        seg = signal[frame * hop_i: frame * hop_i + span]
        head = seg[:window_len]
        # difference d(tau) = E0 + E(tau) - 2 * corr(tau), correlation by FFT
        spec_seg = np.fft.rfft(seg, fft_len)
        spec_head = np.fft.rfft(head, fft_len)
        corr = np.fft.irfft(spec_seg * np.conj(spec_head), fft_len)[: tau_max + 1]
        energy = np.concatenate(([0.0], np.cumsum(seg * seg)))
        e0 = energy[window_len]
        e_tau = energy[taus + window_len] - energy[taus]
        d = e0 + e_tau - 2.0 * corr[1:]
        d = np.maximum(d, 0.0)

        running_mean = np.cumsum(d) / taus
        cmndf = np.ones(tau_max + 1)
        nonzero = running_mean > 0
        cmndf[1:][nonzero] = d[nonzero] / running_mean[nonzero]

        below = np.flatnonzero(cmndf[tau_min: tau_max + 1] < threshold)
        if below.size:
            tau = tau_min + int(below[0])
            while tau + 1 <= tau_max and cmndf[tau + 1] < cmndf[tau]:
                tau += 1
            voiced_min = cmndf[tau]
        else:
            tau = tau_min + int(np.argmin(cmndf[tau_min: tau_max + 1]))
            voiced_min = cmndf[tau]

        if 1 < tau < tau_max:
            a, b, c = cmndf[tau - 1], cmndf[tau], cmndf[tau + 1]
            denom = a - 2.0 * b + c
            shift = 0.5 * (a - c) / denom if abs(denom) > 1e-12 else 0.0
            shift = float(np.clip(shift, -1.0, 1.0))
        else:
            shift = 0.0
        f0[frame] = float(np.clip(sample_rate / (tau + shift), f0_min, f0_max))
        confidence[frame] = max(0.0, 1.0 - float(voiced_min))
    return f0, confidence
