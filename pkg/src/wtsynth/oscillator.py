"""Phase accumulation, control upsampling, and the render kernels.

Rendering is a gather-and-lerp pipeline: frame-rate controls are linearly
upsampled to sample rate, a phase accumulator turns per-sample f0 into a
fractional table position, each wavetable is read at that position, and the
reads are mixed by per-sample attention weights and scaled by amplitude.

Phase is accumulated in fixed-size blocks. Within a block the running sum is
vectorized; the carry between blocks goes through a scalar modular reduction.
Because the reduction happens at exactly the same sample positions no matter
where a render starts, rendering a track in one call and rendering it in
several calls chained through a PhaseState produce bit-identical samples, as
long as the split points land on block boundaries (synthesize uses the frame
hop as the block size, so frame-aligned splits always qualify).
"""

from dataclasses import dataclass

import numpy as np

from .wavetable import MipmapBank, WavetableBank, _bandlimit_many

TWO_PI = 2.0 * np.pi

DEFAULT_FRAME_RATE = 250.0
DEFAULT_PHASE_BLOCK = 64

ATTENTION_SUM_TOL = 1e-6


@dataclass
class ControlTrack:
    """Frame-rate controls for one render: f0, amplitude, attention.

    ``f0`` and ``amplitude`` have shape (n_frames,); ``attention`` has shape
    (n_frames, n_tables) with nonnegative rows summing to 1. All values sit
    in the constrained domain, anything produced by an optimizer must be
    mapped through its constraints before it lands here.
    """

    f0: np.ndarray
    amplitude: np.ndarray
    attention: np.ndarray
    frame_rate: float = DEFAULT_FRAME_RATE

    def __post_init__(self):
        self.f0 = np.asarray(self.f0, dtype=np.float64)
        self.amplitude = np.asarray(self.amplitude, dtype=np.float64)
        self.attention = np.asarray(self.attention, dtype=np.float64)
        self.frame_rate = float(self.frame_rate)
        self.validate()

    def validate(self):
        if self.f0.ndim != 1 or self.amplitude.ndim != 1 or self.attention.ndim != 2:
            raise ValueError("f0/amplitude must be 1-D and attention 2-D")
        t = self.f0.shape[0]
        if self.amplitude.shape[0] != t or self.attention.shape[0] != t:
            raise ValueError(
                f"frame counts disagree: f0 {t}, amplitude {self.amplitude.shape[0]}, "
                f"attention {self.attention.shape[0]}"
            )
        if not self.frame_rate > 0:
            raise ValueError(f"frame_rate must be positive, got {self.frame_rate}")
        for name, arr in (("f0", self.f0), ("amplitude", self.amplitude),
                          ("attention", self.attention)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        if np.any(self.f0 < 0):
            raise ValueError("f0 must be nonnegative")
        if np.any(self.amplitude < 0):
            raise ValueError("amplitude must be nonnegative")
        if np.any(self.attention < 0):
            raise ValueError("attention weights must be nonnegative")
        if t > 0:
            sums = self.attention.sum(axis=1)
            worst = np.max(np.abs(sums - 1.0))
            if worst > ATTENTION_SUM_TOL:
                raise ValueError(
                    f"attention rows must sum to 1 within {ATTENTION_SUM_TOL}, "
                    f"worst deviation {worst:.3g}"
                )

    @property
    def n_frames(self):
        return self.f0.shape[0]

    @property
    def n_tables(self):
        return self.attention.shape[1]


@dataclass
class PhaseState:
    """Carries the phase accumulator between chained renders."""

    phase: float = 0.0

    def __post_init__(self):
        p = float(self.phase)
        if not np.isfinite(p) or p < 0.0 or p >= TWO_PI:
            raise ValueError(f"phase must lie in [0, 2*pi), got {p}")
        self.phase = p


@dataclass
class SampleControls:
    """Controls expanded to sample rate (one row per output sample)."""

    f0: np.ndarray
    amplitude: np.ndarray
    attention: np.ndarray


def accumulate_phase(f0_per_sample, sample_rate, initial_phase=0.0,
                     block=DEFAULT_PHASE_BLOCK):
    """Running phase in radians for a per-sample f0 sequence.

    Sample n carries the phase accumulated over samples 0..n-1 (the first
    sample is exactly ``initial_phase``), wrapped into [0, 2*pi). The wrap is
    applied blockwise, see the module docstring for the continuity
    guarantee this buys.
    """
    phases, _ = _accumulate(f0_per_sample, sample_rate, initial_phase, block)
    return phases


def _accumulate(f0_per_sample, sample_rate, initial_phase, block):
    if not sample_rate > 0:
        raise ValueError(f"sample_rate must be positive, got {sample_rate}")
    if block < 1:
        raise ValueError(f"block must be >= 1, got {block}")
    f0 = np.asarray(f0_per_sample, dtype=np.float64)
    if f0.ndim != 1:
        raise ValueError(f"f0_per_sample must be 1-D, got shape {f0.shape}")
    if not np.all(np.isfinite(f0)):
        raise ValueError("f0_per_sample contains non-finite values")
    if np.any(f0 < 0):
        raise ValueError("f0 must be nonnegative")

    carry = float(initial_phase) % TWO_PI
    n = f0.shape[0]
    phases = np.empty(n, dtype=np.float64)
    if n == 0:
        return phases, carry

    inc = (TWO_PI / sample_rate) * f0
    n_blocks = n // block
    if n_blocks:
        main = inc[: n_blocks * block].reshape(n_blocks, block)
        totals = main.sum(axis=1)
        carries = np.empty(n_blocks, dtype=np.float64)
        c = carry
        for i in range(n_blocks):
            carries[i] = c
            c = (c + totals[i]) % TWO_PI
        carry = c
        running = np.empty_like(main)
        running[:, 0] = 0.0
        np.cumsum(main[:, :-1], axis=1, out=running[:, 1:])
        phases[: n_blocks * block] = ((carries[:, None] + running) % TWO_PI).ravel()
    tail = inc[n_blocks * block:]
    if tail.size:
        running = np.concatenate(([0.0], np.cumsum(tail[:-1])))
        phases[n_blocks * block:] = (carry + running) % TWO_PI
        carry = (carry + tail.sum()) % TWO_PI
    return phases, carry


def _integer_hop(sample_rate, frame_rate):
    hop = sample_rate / frame_rate
    hop_i = int(round(hop))
    if hop_i < 1 or abs(hop - hop_i) > 1e-9:
        raise ValueError(
            f"sample_rate / frame_rate must be a positive integer hop, "
            f"got {sample_rate}/{frame_rate} = {hop}"
        )
    return hop_i


def _frame_weights(n_samples, hop, n_frames):
    """Per-sample (left frame, right frame, blend) for linear upsampling.

    Frame f anchors sample f * hop. Samples past the last anchor hold its
    value (both indices collapse onto the final frame there, which makes the
    blend weight irrelevant).
    """
    pos = np.arange(n_samples, dtype=np.float64) / hop
    left = np.minimum(pos.astype(np.int64), n_frames - 1)
    right = np.minimum(left + 1, n_frames - 1)
    blend = pos - left
    return left, right, blend


def _lerp_rows(values, left, right, blend):
    v0 = values[left]
    v1 = values[right]
    if values.ndim == 1:
        return v0 * (1.0 - blend) + v1 * blend
    return v0 * (1.0 - blend[:, None]) + v1 * blend[:, None]


def upsample_controls(track, sample_rate, n_samples):
    """Linearly interpolate a track's controls up to sample rate."""
    hop = _integer_hop(sample_rate, track.frame_rate)
    if n_samples < 0:
        raise ValueError(f"n_samples must be >= 0, got {n_samples}")
    if track.n_frames < 1:
        raise ValueError("track needs at least one frame")
    left, right, blend = _frame_weights(n_samples, hop, track.n_frames)
    return SampleControls(
        f0=_lerp_rows(track.f0, left, right, blend),
        amplitude=_lerp_rows(track.amplitude, left, right, blend),
        attention=_lerp_rows(track.attention, left, right, blend),
    )


class RenderCache:
    """Everything the backward pass needs to replay a render's data flow."""

    __slots__ = (
        "signal", "hop", "n_frames", "n_tables", "table_len",
        "left", "right", "blend",
        "k0", "k1", "table_frac", "level_per_sample",
        "read_stack", "level_harmonics",
        "attention_up", "amplitude_up", "reads", "mix",
    )


def synthesize(bank, track, sample_rate, antialias=True, state=None):
    """Render a control track through a wavetable bank.

    ``bank`` is either a WavetableBank (tables projected exactly per frame
    when ``antialias`` is on, the training path) or a MipmapBank (levels
    picked per frame, the playback path). Output has track.n_frames * hop
    samples. Passing a PhaseState chains renders: the state is updated to
    the phase one past the end of this buffer.
    """
    signal, _ = _render(bank, track, sample_rate, antialias, state, want_cache=False)
    return signal


def _render(bank, track, sample_rate, antialias, state, want_cache):
    hop = _integer_hop(sample_rate, track.frame_rate)
    n_frames = track.n_frames
    if n_frames < 1:
        raise ValueError("track needs at least one frame")
    if isinstance(bank, MipmapBank):
        n_tables = bank.n_tables
        table_len = bank.table_len
    elif isinstance(bank, WavetableBank):
        n_tables = bank.n_tables
        table_len = bank.table_len
    else:
        raise TypeError(f"bank must be a WavetableBank or MipmapBank, got {type(bank).__name__}")
    if track.n_tables != n_tables:
        raise ValueError(
            f"track drives {track.n_tables} tables but the bank holds {n_tables}"
        )
    nyquist = sample_rate / 2.0
    if np.any(track.f0 >= nyquist):
        raise ValueError(f"f0 must stay below Nyquist ({nyquist:g} Hz)")

    n_samples = n_frames * hop
    left, right, blend = _frame_weights(n_samples, hop, n_frames)
    f0_up = _lerp_rows(track.f0, left, right, blend)
    amplitude_up = _lerp_rows(track.amplitude, left, right, blend)
    attention_up = _lerp_rows(track.attention, left, right, blend)

    initial = state.phase if state is not None else 0.0
    phases, final_phase = _accumulate(f0_up, sample_rate, initial, block=hop)

    positions = phases * (table_len / TWO_PI)
    k0 = np.minimum(positions.astype(np.int64), table_len - 1)
    table_frac = positions - k0
    k1 = (k0 + 1) % table_len

    # Pick one band-limited variant of the bank per frame, then stretch the
    # choice to sample rate. The frame's own anchor f0 governs the choice;
    # no lookahead, so a render split at frame boundaries picks the same
    # variants as a one-shot render of the whole track.
    level_harmonics = None
    if isinstance(bank, MipmapBank):
        frame_levels = bank.select_level(track.f0)
        read_stack = bank.read_stack
    elif antialias:
        span_f0 = track.f0
        half = table_len // 2
        with np.errstate(divide="ignore"):
            harm = np.floor(np.divide(sample_rate, 2.0 * span_f0,
                                      out=np.full_like(span_f0, np.inf),
                                      where=span_f0 > 0))
        harm = np.clip(harm, 1, half).astype(np.int64)
        uniq, frame_levels = np.unique(harm, return_inverse=True)
        level_harmonics = uniq
        read_stack = np.stack(
            [np.ascontiguousarray(_bandlimit_many(bank.tables, int(k)).T) for k in uniq]
        )
    else:
        frame_levels = np.zeros(n_frames, dtype=np.int64)
        read_stack = np.ascontiguousarray(bank.tables.T)[None]
    level_per_sample = np.repeat(frame_levels, hop)

    g0 = read_stack[level_per_sample, k0]
    g1 = read_stack[level_per_sample, k1]
    reads = g0 * (1.0 - table_frac[:, None]) + g1 * table_frac[:, None]

    mix = np.einsum("sn,sn->s", attention_up, reads)
    signal = amplitude_up * mix

    if state is not None:
        state.phase = final_phase

    if not want_cache:
        return signal, None
    cache = RenderCache()
    cache.signal = signal
    cache.hop = hop
    cache.n_frames = n_frames
    cache.n_tables = n_tables
    cache.table_len = table_len
    cache.left = left
    cache.right = right
    cache.blend = blend
    cache.k0 = k0
    cache.k1 = k1
    cache.table_frac = table_frac
    cache.level_per_sample = level_per_sample
    cache.read_stack = read_stack
    cache.level_harmonics = level_harmonics
    cache.attention_up = attention_up
    cache.amplitude_up = amplitude_up
    cache.reads = reads
    cache.mix = mix
    return signal, cache


def _render_adjoint(cache, grad_signal):
    """Pull a per-sample signal gradient back to tables and frame controls.

    Returns (grad_tables, grad_attention_frames, grad_amplitude_frames) in
    the same shapes the forward pass consumed. The band-limiting projection
    is orthogonal, so it back-propagates as itself; the per-sample scatter
    inverts the linear upsampling and the table gather.
    """
    grad_signal = np.asarray(grad_signal, dtype=np.float64)
    grad_amp_up = grad_signal * cache.mix
    grad_mix = grad_signal * cache.amplitude_up
    grad_attention_up = grad_mix[:, None] * cache.reads
    grad_reads = grad_mix[:, None] * cache.attention_up

    grad_stack = np.zeros_like(cache.read_stack)
    w1 = cache.table_frac[:, None]
    np.add.at(grad_stack, (cache.level_per_sample, cache.k0), grad_reads * (1.0 - w1))
    np.add.at(grad_stack, (cache.level_per_sample, cache.k1), grad_reads * w1)

    if cache.level_harmonics is None:
        grad_tables = grad_stack[0].T.copy()
    else:
        grad_tables = np.zeros((cache.n_tables, cache.table_len))
        for lvl, harm in enumerate(cache.level_harmonics):
            grad_tables += _bandlimit_many(grad_stack[lvl].T, int(harm))

    grad_attention = np.zeros((cache.n_frames, cache.n_tables))
    b = cache.blend[:, None]
    np.add.at(grad_attention, cache.left, grad_attention_up * (1.0 - b))
    np.add.at(grad_attention, cache.right, grad_attention_up * b)

    grad_amplitude = np.zeros(cache.n_frames)
    np.add.at(grad_amplitude, cache.left, grad_amp_up * (1.0 - cache.blend))
    np.add.at(grad_amplitude, cache.right, grad_amp_up * cache.blend)

    return grad_tables, grad_attention, grad_amplitude


def synthesize_additive(f0_frames, amplitude_frames, sample_rate,
                        frame_rate=DEFAULT_FRAME_RATE, initial_phase=0.0):
    """Sum-of-sinusoids reference synthesizer.

    ``amplitude_frames`` has shape (n_frames, n_harmonics); harmonic k
    (1-based) renders as a_k(n) * sin(k * phase(n)). Harmonics that would
    land at or above Nyquist for a sample's instantaneous f0 are muted for
    that sample. Shares the upsampling and phase machinery with
    synthesize(), so the two paths are comparable sample for sample.
    """
    hop = _integer_hop(sample_rate, frame_rate)
    f0_frames = np.asarray(f0_frames, dtype=np.float64)
    amplitude_frames = np.asarray(amplitude_frames, dtype=np.float64)
    if f0_frames.ndim != 1 or amplitude_frames.ndim != 2:
        raise ValueError("f0_frames must be 1-D and amplitude_frames 2-D")
    n_frames = f0_frames.shape[0]
    if n_frames < 1:
        raise ValueError("need at least one frame")
    if amplitude_frames.shape[0] != n_frames:
        raise ValueError(
            f"frame counts disagree: f0 {n_frames}, amplitudes {amplitude_frames.shape[0]}"
        )
    if not np.all(np.isfinite(f0_frames)) or not np.all(np.isfinite(amplitude_frames)):
        raise ValueError("controls contain non-finite values")
    if np.any(f0_frames < 0):
        raise ValueError("f0 must be nonnegative")
    nyquist = sample_rate / 2.0
    if np.any(f0_frames >= nyquist):
        raise ValueError(f"f0 must stay below Nyquist ({nyquist:g} Hz)")

    n_samples = n_frames * hop
    left, right, blend = _frame_weights(n_samples, hop, n_frames)
    f0_up = _lerp_rows(f0_frames, left, right, blend)
    amps_up = _lerp_rows(amplitude_frames, left, right, blend)

    phases, _ = _accumulate(f0_up, sample_rate, initial_phase, block=hop)
    k = np.arange(1, amplitude_frames.shape[1] + 1, dtype=np.float64)
    audible = (f0_up[:, None] * k) < nyquist
    return np.einsum("sk,sk->s", np.sin(phases[:, None] * k), amps_up * audible)
