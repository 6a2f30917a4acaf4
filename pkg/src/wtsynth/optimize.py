"""Gradient-descent fitting of wavetables and controls to a target signal.

Raw parameters live in an unconstrained space. Attention logits pass through
a row softmax, amplitude logits through a softplus, and the resulting
constrained controls drive the renderer. The backward pass retraces that
chain by hand: spectral-loss gradient, render adjoint, then the constraint
Jacobians.
"""

from dataclasses import dataclass, field, fields

import numpy as np

from . import oscillator, spectral
from .errors import DivergenceError
from .oscillator import ControlTrack, DEFAULT_FRAME_RATE, synthesize
from .spectral import SpectralConfig, TargetSpectra
from .wavetable import DEFAULT_SIGMA, DEFAULT_TABLE_LEN, WavetableBank, init_bank

DEFAULT_SAMPLE_RATE = 16000.0
DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_ITERATIONS = 2000


@dataclass
class FitParams:
    """Unconstrained parameter blocks the optimizer walks on."""

    wavetable_params: np.ndarray   # (n_tables, table_len)
    attention_logits: np.ndarray   # (n_frames, n_tables)
    amp_logits: np.ndarray         # (n_frames,)

    def __post_init__(self):
        self.wavetable_params = np.asarray(self.wavetable_params, dtype=np.float64)
        self.attention_logits = np.asarray(self.attention_logits, dtype=np.float64)
        self.amp_logits = np.asarray(self.amp_logits, dtype=np.float64)
        if self.wavetable_params.ndim != 2:
            raise ValueError("wavetable_params must be 2-D")
        if self.attention_logits.ndim != 2:
            raise ValueError("attention_logits must be 2-D")
        if self.amp_logits.ndim != 1:
            raise ValueError("amp_logits must be 1-D")
        if self.attention_logits.shape[1] != self.wavetable_params.shape[0]:
            raise ValueError("attention_logits width must equal the table count")
        if self.amp_logits.shape[0] != self.attention_logits.shape[0]:
            raise ValueError("amp_logits and attention_logits disagree on frame count")

    def copy(self):
        return FitParams(self.wavetable_params.copy(),
                         self.attention_logits.copy(),
                         self.amp_logits.copy())

    def blocks(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class FitGrads:
    """Gradient for each block in FitParams, same shapes."""

    wavetable_params: np.ndarray
    attention_logits: np.ndarray
    amp_logits: np.ndarray

    def blocks(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class AdamState:
    """First/second moment estimates plus the step counter."""

    learning_rate: float = DEFAULT_LEARNING_RATE
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ValueError("betas must lie in [0, 1)")

    @classmethod
    def for_params(cls, params, learning_rate=DEFAULT_LEARNING_RATE, **kw):
        state = cls(learning_rate=learning_rate, **kw)
        for name, block in params.blocks().items():
            state.m[name] = np.zeros_like(block)
            state.v[name] = np.zeros_like(block)
        return state


@dataclass
class FitConfig:
    """Everything a fit run needs besides the target and f0 curve."""

    iterations: int = DEFAULT_ITERATIONS
    learning_rate: float = DEFAULT_LEARNING_RATE
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    antialias: bool = True
    seed: int = 0
    freeze_wavetables: bool = False
    sample_rate: float = DEFAULT_SAMPLE_RATE
    frame_rate: float = DEFAULT_FRAME_RATE
    table_len: int = DEFAULT_TABLE_LEN
    init_sigma: float = DEFAULT_SIGMA

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not self.sample_rate > 0 or not self.frame_rate > 0:
            raise ValueError("sample_rate and frame_rate must be positive")


def softmax(logits, axis=-1):
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def softplus(x):
    # log1p(exp(-|x|)) + max(x, 0) is exact for both tails
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def sigmoid(x):
    out = np.empty_like(np.asarray(x, dtype=np.float64))
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _softmax_vjp(probs, grad_probs):
    inner = np.sum(grad_probs * probs, axis=-1, keepdims=True)
    return probs * (grad_probs - inner)


def constrained_track(params, f0_frames, config):
    """Map raw parameter blocks to a valid ControlTrack."""
    return ControlTrack(
        f0=f0_frames,
        amplitude=softplus(params.amp_logits),
        attention=softmax(params.attention_logits),
        frame_rate=config.frame_rate,
    )


def forward(params, f0_frames, config):
    """Render the signal the current parameters describe."""
    signal, _ = _forward_cached(params, f0_frames, config)
    return signal


def _forward_cached(params, f0_frames, config):
    track = constrained_track(params, f0_frames, config)
    bank = WavetableBank(params.wavetable_params)
    return oscillator._render(bank, track, config.sample_rate,
                              antialias=config.antialias, state=None,
                              want_cache=True)


def backward(params, f0_frames, target, config):
    """Loss gradient for every parameter block, derived by hand.

    The chain runs loss -> signal (spectral adjoint), signal -> tables and
    constrained controls (render adjoint), controls -> logits (softmax and
    softplus Jacobians). Gradients are exact up to floating point, which the
    finite-difference tests pin down.
    """
    signal, cache = _forward_cached(params, f0_frames, config)
    grad_signal = spectral.multiscale_loss_grad(signal, target, config.spectral)
    return _grads_from_cache(params, cache, grad_signal)


def _grads_from_cache(params, cache, grad_signal):
    grad_tables, grad_attention, grad_amplitude = oscillator._render_adjoint(
        cache, grad_signal)
    probs = softmax(params.attention_logits)
    grad_att_logits = _softmax_vjp(probs, grad_attention)
    grad_amp_logits = grad_amplitude * sigmoid(params.amp_logits)
    return FitGrads(grad_tables, grad_att_logits, grad_amp_logits)


def adam_step(params, grads, state):
    """One bias-corrected Adam update. Functional: inputs stay untouched."""
    p_blocks = params.blocks()
    g_blocks = grads.blocks()
    if not state.m:
        for name, block in p_blocks.items():
            state.m[name] = np.zeros_like(block)
            state.v[name] = np.zeros_like(block)
    t = state.step + 1
    new_state = AdamState(learning_rate=state.learning_rate, beta1=state.beta1,
                          beta2=state.beta2, eps=state.eps, step=t)
    new_blocks = {}
    for name, p in p_blocks.items():
        g = g_blocks[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {p.shape} for {name}")
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        new_blocks[name] = p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
        new_state.m[name] = m
        new_state.v[name] = v
    return FitParams(**new_blocks), new_state


def _check_params_finite(params, iteration):
    """Raise DivergenceError naming the first non-finite block."""
    for name, block in params.blocks().items():
        if not np.all(np.isfinite(block)):
            raise DivergenceError(iteration, name)


def _run_fit(params, f0_frames, target, config, callback):
    f0_frames = np.asarray(f0_frames, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if target.ndim != 1:
        raise ValueError("target must be a 1-D signal")
    if not np.all(np.isfinite(target)):
        raise ValueError("target contains non-finite values")
    hop = oscillator._integer_hop(config.sample_rate, config.frame_rate)
    if f0_frames.shape[0] * hop != target.shape[0]:
        raise ValueError(
            f"{f0_frames.shape[0]} frames at hop {hop} cover "
            f"{f0_frames.shape[0] * hop} samples, target has {target.shape[0]}"
        )

    target_spectra = TargetSpectra(target, config.spectral)
    state = AdamState.for_params(params, config.learning_rate)
    losses = np.empty(config.iterations)
    for it in range(config.iterations):
        _check_params_finite(params, it)
        signal, cache = _forward_cached(params, f0_frames, config)
        loss, grad_signal = spectral._loss_and_grad(
            signal, target_spectra, config.spectral, want_grad=True)
        if not np.isfinite(loss):
            raise DivergenceError(it, "loss")
        grads = _grads_from_cache(params, cache, grad_signal)
        if config.freeze_wavetables:
            # zero gradient + zero moments means the Adam delta is exactly
            # 0.0, so the frozen block survives bit for bit
            grads.wavetable_params = np.zeros_like(grads.wavetable_params)
        for name, block in grads.blocks().items():
            if not np.all(np.isfinite(block)):
                raise DivergenceError(it, f"grad of {name}")
        losses[it] = loss
        if callback is not None:
            callback(it, loss, params)
        params, state = adam_step(params, grads, state)
    return params, losses


def fit(target, f0_frames, n_tables, config=None, callback=None):
    """Fit a fresh bank plus controls to a target signal.

    Returns (bank, track, losses): the learned bank (frozen), the fitted
    control track, and the per-iteration loss curve. ``callback``, when
    given, is invoked as callback(iteration, loss, params) before each
    update.
    """
    if config is None:
        config = FitConfig()
    if config.freeze_wavetables:
        raise ValueError("freeze_wavetables is set; use fit_oneshot with an existing bank")
    f0_frames = np.asarray(f0_frames, dtype=np.float64)
    n_frames = f0_frames.shape[0]
    bank = init_bank(n_tables, config.table_len, config.init_sigma, config.seed)
    params = FitParams(
        wavetable_params=bank.tables,
        attention_logits=np.zeros((n_frames, n_tables)),
        amp_logits=np.zeros(n_frames),
    )
    params, losses = _run_fit(params, f0_frames, target, config, callback)
    fitted_bank = WavetableBank(params.wavetable_params.copy()).freeze()
    track = constrained_track(params, f0_frames, config)
    return fitted_bank, track, losses


def fit_oneshot(target, f0_frames, bank, config=None, callback=None):
    """Fit controls for a new target while keeping ``bank`` fixed.

    The bank must be frozen. Its tables are verified byte-identical after
    the run. Returns (track, losses).
    """
    if config is None:
        config = FitConfig(freeze_wavetables=True)
    if not bank.frozen:
        raise ValueError("fit_oneshot needs a frozen bank; call bank.freeze() first")
    if not config.freeze_wavetables:
        raise ValueError("fit_oneshot requires config.freeze_wavetables = True")
    f0_frames = np.asarray(f0_frames, dtype=np.float64)
    n_frames = f0_frames.shape[0]
    before = bank.tables.tobytes()
    params = FitParams(
        wavetable_params=bank.tables.copy(),
        attention_logits=np.zeros((n_frames, bank.n_tables)),
        amp_logits=np.zeros(n_frames),
    )
    params, losses = _run_fit(params, f0_frames, target, config, callback)
    if params.wavetable_params.tobytes() != before or bank.tables.tobytes() != before:
        raise RuntimeError("frozen bank changed during fit_oneshot")
    track = constrained_track(params, f0_frames, config)
    return track, losses


def pitch_shift(bank, track, factor, sample_rate):
    """Re-render a fitted track with every frame's f0 scaled by ``factor``.

    The controls and the bank stay as learned, only the pitch moves. The
    shifted f0 must stay below Nyquist.
    """
    if not factor > 0:
        raise ValueError(f"factor must be positive, got {factor}")
    shifted_f0 = track.f0 * factor
    if np.any(shifted_f0 >= sample_rate / 2.0):
        raise ValueError(
            f"shift by {factor:g} pushes f0 to {np.max(shifted_f0):g} Hz, "
            f"at or above Nyquist ({sample_rate / 2:g} Hz)"
        )
    shifted = ControlTrack(shifted_f0, track.amplitude, track.attention,
                           track.frame_rate)
    return synthesize(bank, shifted, sample_rate, antialias=True)


def rank_wavetables(bank, track):
    """Order table indices by mean attention over the track, descending.

    Returns (order, mean_attention). Ties keep their original index order.
    """
    if track.n_tables != bank.n_tables:
        raise ValueError(
            f"track drives {track.n_tables} tables but the bank holds {bank.n_tables}"
        )
    if track.n_frames == 0:
        means = np.zeros(bank.n_tables)
    else:
        means = track.attention.mean(axis=0)
    order = np.argsort(-means, kind="stable")
    return order, means
