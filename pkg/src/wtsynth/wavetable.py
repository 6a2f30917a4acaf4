"""Wavetable storage, initialization, fractional reads, and band-limiting.

A wavetable is one cycle of a waveform held as a 1-D float array of length L.
Only L samples are stored; the wrap-around sample t[L] == t[0] is derived at
read time, so interpolation across the table boundary stays continuous
without carrying a redundant parameter.
"""

from dataclasses import dataclass, field

import numpy as np

DEFAULT_TABLE_LEN = 512
DEFAULT_SIGMA = 0.01
DEFAULT_BASE_F0 = 20.0

MIN_TABLE_LEN = 4


@dataclass
class WavetableBank:
    """A dictionary of n_tables single-cycle wavetables, each table_len long.

    ``tables`` has shape (n_tables, table_len), float64. A frozen bank is
    read-only: its array rejects writes and downstream fitting must not
    modify it.
    """

    tables: np.ndarray
    frozen: bool = False

    def __post_init__(self):
        t = np.asarray(self.tables, dtype=np.float64)
        if t.ndim != 2:
            raise ValueError(f"tables must be 2-D (n_tables, table_len), got shape {t.shape}")
        if t.shape[0] < 1:
            raise ValueError("bank needs at least one table")
        if t.shape[1] < MIN_TABLE_LEN:
            raise ValueError(f"table_len must be >= {MIN_TABLE_LEN}, got {t.shape[1]}")
        if not np.all(np.isfinite(t)):
            raise ValueError("tables contain non-finite values")
        self.tables = t
        if self.frozen:
            self.tables.setflags(write=False)

    @property
    def n_tables(self):
        return self.tables.shape[0]

    @property
    def table_len(self):
        return self.tables.shape[1]

    def freeze(self):
        """Mark the bank read-only (in place) and return it."""
        self.frozen = True
        self.tables.setflags(write=False)
        return self

    def copy(self):
        """Writable deep copy; the copy is never frozen."""
        return WavetableBank(self.tables.copy(), frozen=False)


def init_bank(n_tables, table_len=DEFAULT_TABLE_LEN, sigma=DEFAULT_SIGMA, seed=0):
    """Gaussian-initialized bank, zero mean, stddev ``sigma``.

    The same seed always yields the same bank. Small-amplitude noise keeps
    early fitting iterations well-conditioned; tables are meant to be learned,
    not hand-authored, so no waveform shaping happens here.
    """
    if n_tables < 1:
        raise ValueError(f"n_tables must be >= 1, got {n_tables}")
    if table_len < MIN_TABLE_LEN:
        raise ValueError(f"table_len must be >= {MIN_TABLE_LEN}, got {table_len}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    rng = np.random.default_rng(seed)
    tables = rng.normal(0.0, sigma, size=(n_tables, table_len))
    return WavetableBank(tables)


def read_fractional(table, index):
    """Linear-interpolated read of a single table at fractional positions.

    ``index`` may be a scalar or an array; values must lie in [0, L). The
    read wraps: positions between L-1 and L interpolate toward table[0].
    """
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 1:
        raise ValueError(f"table must be 1-D, got shape {table.shape}")
    length = table.shape[0]
    idx = np.asarray(index, dtype=np.float64)
    if np.any(idx < 0.0) or np.any(idx >= length):
        raise ValueError(f"index out of range [0, {length})")
    k0 = idx.astype(np.int64)
    frac = idx - k0
    k1 = (k0 + 1) % length
    out = table[k0] * (1.0 - frac) + table[k1] * frac
    if np.isscalar(index) or np.ndim(index) == 0:
        return float(out)
    return out


def bandlimit(table, max_harmonic):
    """Project a table onto harmonics 1..max_harmonic of its own period.

    Exact frequency-domain projection: the DC bin and every bin above
    ``max_harmonic`` are zeroed, then the table is transformed back. The
    Nyquist bin (L/2) survives only when max_harmonic == L/2. Applying the
    projection twice equals applying it once.
    """
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 1:
        raise ValueError(f"table must be 1-D, got shape {table.shape}")
    return _bandlimit_many(table[None, :], _check_harmonic(max_harmonic, table.shape[0]))[0]


def _check_harmonic(max_harmonic, table_len):
    limit = table_len // 2
    k = int(max_harmonic)
    if k != max_harmonic or k < 1 or k > limit:
        raise ValueError(f"max_harmonic must be an integer in [1, {limit}], got {max_harmonic}")
    return k


def _bandlimit_many(tables, max_harmonic):
    """Same projection as bandlimit(), applied along the last axis."""
    spec = np.fft.rfft(tables, axis=-1)
    spec[..., 0] = 0.0
    spec[..., max_harmonic + 1:] = 0.0
    return np.fft.irfft(spec, n=tables.shape[-1], axis=-1)


@dataclass
class MipmapBank:
    """Octave-spaced band-limited copies of a frozen bank, for playback.

    Level k is safe up to ``level_max_f0[k]`` Hz: every harmonic it keeps
    stays below Nyquist for any fundamental at or under that limit. Levels
    are ordered by rising max_f0, so harmonic content shrinks as the level
    index grows.
    """

    source: WavetableBank
    levels: list = field(default_factory=list)
    level_max_f0: np.ndarray = None
    level_max_harmonic: np.ndarray = None
    # gather-friendly copy of levels, shape (n_levels, table_len, n_tables)
    read_stack: np.ndarray = None

    @property
    def n_tables(self):
        return self.source.n_tables

    @property
    def table_len(self):
        return self.source.table_len

    @property
    def n_levels(self):
        return len(self.levels)

    def select_level(self, f0):
        """Index of the first level whose max_f0 covers ``f0`` (vectorized)."""
        idx = np.searchsorted(self.level_max_f0, f0, side="left")
        if np.any(idx >= self.n_levels):
            top = self.level_max_f0[-1]
            raise ValueError(f"f0 exceeds the bank's top mipmap level ({top:g} Hz)")
        if np.ndim(f0) == 0:
            return int(idx)
        return idx


def build_mipmaps(bank, sample_rate, octaves, base_f0=DEFAULT_BASE_F0):
    """Precompute octave-spaced band-limited levels of a frozen bank.

    Level k covers fundamentals up to base_f0 * 2**k and keeps harmonics
    1..K_k with K_k = floor(sample_rate / (2 * max_f0_k)), clamped to
    [1, table_len // 2]. The source must be frozen first, so the levels can
    never go stale against a bank that keeps training.
    """
    if not bank.frozen:
        raise ValueError("bank must be frozen before building mipmaps")
    if not sample_rate > 0:
        raise ValueError(f"sample_rate must be positive, got {sample_rate}")
    if octaves < 1:
        raise ValueError(f"octaves must be >= 1, got {octaves}")
    if not base_f0 > 0:
        raise ValueError(f"base_f0 must be positive, got {base_f0}")

    half = bank.table_len // 2
    max_f0 = base_f0 * (2.0 ** np.arange(octaves))
    max_harmonic = np.floor(sample_rate / (2.0 * max_f0)).astype(np.int64)
    max_harmonic = np.clip(max_harmonic, 1, half)

    levels = [_bandlimit_many(bank.tables, int(k)) for k in max_harmonic]
    read_stack = np.ascontiguousarray(np.stack([lvl.T for lvl in levels]))
    return MipmapBank(
        source=bank,
        levels=levels,
        level_max_f0=max_f0,
        level_max_harmonic=max_harmonic,
        read_stack=read_stack,
    )
