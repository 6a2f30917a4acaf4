"""Independent reference implementations the tests check the package against.

Everything here is deliberately slow and literal: matrix DFTs, scalar loops,
central finite differences. None of it shares code with the package beyond
numpy primitives.
"""

import numpy as np


def naive_rdft(x):
    """One-sided DFT by explicit matrix multiply, O(n^2)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    k = np.arange(n // 2 + 1)[:, None]
    j = np.arange(n)[None, :]
    basis = np.exp(-2j * np.pi * k * j / n)
    return basis @ x


def naive_bandlimit(table, max_harmonic):
    """Projection onto harmonics 1..max_harmonic via the full DFT matrix."""
    table = np.asarray(table, dtype=np.float64)
    n = table.shape[0]
    j = np.arange(n)
    full = np.exp(-2j * np.pi * np.outer(j, j) / n) @ table.astype(complex)
    keep = np.zeros(n, dtype=bool)
    for k in range(1, max_harmonic + 1):
        keep[k] = True
        keep[n - k] = True
    full[~keep] = 0.0
    inverse = np.exp(2j * np.pi * np.outer(j, j) / n) @ full / n
    return inverse.real


def naive_stft_mags(signal, fft_size, hop, eps=1e-7):
    """Hann-windowed magnitude frames using the matrix DFT."""
    signal = np.asarray(signal, dtype=np.float64)
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(fft_size) / fft_size)
    n_frames = (signal.shape[0] - fft_size) // hop + 1
    mags = np.empty((n_frames, fft_size // 2 + 1))
    for f in range(n_frames):
        frame = signal[f * hop: f * hop + fft_size] * window
        z = naive_rdft(frame)
        mags[f] = np.sqrt(z.real ** 2 + z.imag ** 2 + eps * eps)
    return mags


def naive_multiscale_loss(x, y, fft_sizes, hop_divisor=4):
    total = 0.0
    for n in fft_sizes:
        hop = n // hop_divisor
        total += np.mean(np.abs(naive_stft_mags(x, n, hop) - naive_stft_mags(y, n, hop)))
    return total


def scalar_phase(f0_per_sample, sample_rate, initial_phase=0.0):
    """Per-sample phase recursion, one modular reduction per step."""
    two_pi = 2.0 * np.pi
    out = np.empty(len(f0_per_sample))
    phase = initial_phase % two_pi
    for n, f0 in enumerate(f0_per_sample):
        out[n] = phase
        phase = (phase + two_pi * f0 / sample_rate) % two_pi
    return out


def scalar_additive(f0_per_sample, amps_per_sample, sample_rate, initial_phase=0.0):
    """Sum-of-sines rendered sample by sample, harmonics muted at Nyquist."""
    phases = scalar_phase(f0_per_sample, sample_rate, initial_phase)
    n_harm = amps_per_sample.shape[1]
    out = np.zeros(len(phases))
    for n in range(len(phases)):
        for k in range(1, n_harm + 1):
            if k * f0_per_sample[n] < sample_rate / 2.0:
                out[n] += amps_per_sample[n, k - 1] * np.sin(k * phases[n])
    return out


def saw_table(table_len, n_harmonics):
    """One cycle of a band-limited sawtooth, harmonics a_k = 1/k."""
    j = np.arange(table_len)
    table = np.zeros(table_len)
    for k in range(1, n_harmonics + 1):
        table += np.sin(2.0 * np.pi * k * j / table_len) / k
    return table


def saw_harmonic_amps(n_frames, n_harmonics):
    """Frame-constant additive amplitudes matching saw_table."""
    return np.tile(1.0 / np.arange(1, n_harmonics + 1), (n_frames, 1))


def central_diff_grad(loss_fn, array, h=1e-5):
    """Central finite differences over every element of ``array`` in place."""
    grad = np.zeros_like(array)
    flat = array.ravel()
    grad_flat = grad.ravel()
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + h
        up = loss_fn()
        flat[i] = saved - h
        down = loss_fn()
        flat[i] = saved
        grad_flat[i] = (up - down) / (2.0 * h)
    return grad


def relative_error_pass_rate(analytic, numeric, tol=1e-3, floor=1e-8):
    """Fraction of coordinates whose relative disagreement is under tol.

    Coordinates where both gradients are below ``floor`` in magnitude count
    as agreeing (relative error is meaningless around zero).
    """
    a = np.asarray(analytic).ravel()
    n = np.asarray(numeric).ravel()
    denom = np.maximum(np.abs(a), np.abs(n))
    ok = np.where(denom < floor, True, np.abs(a - n) <= tol * denom)
    return float(np.mean(ok)), int(ok.size)


def spectrum_db(segment):
    """Hann-windowed magnitude spectrum of one segment, linear power kept."""
    segment = np.asarray(segment, dtype=np.float64)
    n = segment.shape[0]
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    return np.abs(np.fft.rfft(segment * window))


def max_nonharmonic_db(segment, sample_rate, f0, tol_bins=5.0):
    """Worst spectral peak that is not at a harmonic of f0, in dB relative
    to the fundamental.

    Local maxima of the windowed spectrum count as peaks; a peak is
    harmonic when it sits within tol_bins of some k * f0. Returns -inf when
    every peak is harmonic.
    """
    mags = spectrum_db(segment)
    n = segment.shape[0]
    bin_hz = sample_rate / n
    peak_idx = np.flatnonzero(
        (mags[1:-1] > mags[:-2]) & (mags[1:-1] >= mags[2:])) + 1
    if peak_idx.size == 0:
        return float("-inf")
    freqs = peak_idx * bin_hz
    harmonic_count = int(np.floor((sample_rate / 2.0) / f0))
    harmonics = f0 * np.arange(1, harmonic_count + 1)
    dist = np.min(np.abs(freqs[:, None] - harmonics[None, :]), axis=1)
    fundamental_bins = np.abs(np.arange(mags.shape[0]) * bin_hz - f0) <= tol_bins * bin_hz
    ref = np.max(mags[fundamental_bins])
    bad = dist > tol_bins * bin_hz
    if not np.any(bad):
        return float("-inf")
    worst = np.max(mags[peak_idx[bad]])
    if worst == 0.0:
        return float("-inf")
    return 20.0 * np.log10(worst / ref)
