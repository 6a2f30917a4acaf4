import numpy as np
import pytest

from wtsynth.wavetable import (
    MipmapBank,
    WavetableBank,
    bandlimit,
    build_mipmaps,
    init_bank,
    read_fractional,
)

from oracles import naive_bandlimit


def test_init_bank_is_deterministic():
    a = init_bank(4, 64, sigma=0.01, seed=7)
    b = init_bank(4, 64, sigma=0.01, seed=7)
    assert np.array_equal(a.tables, b.tables)
    c = init_bank(4, 64, sigma=0.01, seed=8)
    assert not np.array_equal(a.tables, c.tables)


def test_init_bank_matches_requested_scale():
    bank = init_bank(64, 512, sigma=0.01, seed=0)
    assert bank.tables.shape == (64, 512)
    assert abs(bank.tables.std() - 0.01) < 0.001
    assert abs(bank.tables.mean()) < 0.001
    # Gaussian tails: nothing should sit absurdly far out
    assert np.max(np.abs(bank.tables)) < 6 * 0.01


def test_init_bank_rejects_bad_arguments():
    with pytest.raises(ValueError):
        init_bank(0, 64)
    with pytest.raises(ValueError):
        init_bank(4, 2)
    with pytest.raises(ValueError):
        init_bank(4, 64, sigma=0.0)
    with pytest.raises(ValueError):
        init_bank(4, 64, sigma=-1.0)


def test_bank_validation():
    with pytest.raises(ValueError):
        WavetableBank(np.zeros(16))  # 1-D
    with pytest.raises(ValueError):
        WavetableBank(np.zeros((0, 16)))
    with pytest.raises(ValueError):
        WavetableBank(np.zeros((2, 3)))  # table too short
    bad = np.zeros((2, 16))
    bad[1, 3] = np.nan
    with pytest.raises(ValueError):
        WavetableBank(bad)


def test_freeze_rejects_writes_and_copy_lifts_it():
    bank = init_bank(2, 16, seed=1).freeze()
    assert bank.frozen
    with pytest.raises((ValueError, RuntimeError)):
        bank.tables[0, 0] = 1.0
    dup = bank.copy()
    assert not dup.frozen
    dup.tables[0, 0] = 1.0  # must not raise
    assert np.array_equal(bank.tables, init_bank(2, 16, seed=1).tables)


def test_read_fractional_integer_positions_are_exact():
    table = np.array([3.0, -1.0, 4.0, -1.5, 5.0, -9.0, 2.0, 6.0])
    for i in range(8):
        assert read_fractional(table, float(i)) == table[i]


def test_read_fractional_wraps_toward_first_sample():
    # one cycle of sin(2*pi*j/4); reading at 3.75 blends t[3] toward t[0]
    table = np.array([0.0, 1.0, 0.0, -1.0])
    assert read_fractional(table, 3.75) == pytest.approx(-0.25, abs=1e-15)
    assert read_fractional(table, 0.5) == pytest.approx(0.5, abs=1e-15)


def test_read_fractional_is_linear_between_neighbors():
    rng = np.random.default_rng(3)
    table = rng.normal(size=32)
    for frac in (0.1, 0.25, 0.9):
        got = read_fractional(table, 5 + frac)
        want = table[5] * (1 - frac) + table[6] * frac
        assert got == pytest.approx(want, rel=1e-14)


def test_read_fractional_vectorized_matches_scalar():
    rng = np.random.default_rng(4)
    table = rng.normal(size=16)
    idx = rng.uniform(0, 16, size=200) % 16.0
    batch = read_fractional(table, idx)
    singles = np.array([read_fractional(table, float(i)) for i in idx])
    assert np.allclose(batch, singles, rtol=0, atol=1e-15)


def test_read_fractional_rejects_out_of_range():
    table = np.zeros(8)
    with pytest.raises(ValueError):
        read_fractional(table, -0.01)
    with pytest.raises(ValueError):
        read_fractional(table, 8.0)


def test_bandlimit_matches_matrix_dft_oracle():
    rng = np.random.default_rng(11)
    table = rng.normal(size=32)
    for k in (1, 3, 7, 16):
        assert np.allclose(bandlimit(table, k), naive_bandlimit(table, k),
                           rtol=0, atol=1e-12)


def test_bandlimit_is_idempotent_and_removes_dc():
    rng = np.random.default_rng(12)
    table = rng.normal(size=64) + 2.5
    once = bandlimit(table, 9)
    twice = bandlimit(once, 9)
    assert np.allclose(once, twice, rtol=0, atol=1e-12)
    assert abs(once.sum()) < 1e-9  # no DC left


def test_bandlimit_passes_low_harmonics_untouched():
    j = np.arange(64)
    tone = np.sin(2 * np.pi * 3 * j / 64) + 0.5 * np.cos(2 * np.pi * 5 * j / 64)
    assert np.allclose(bandlimit(tone, 5), tone, rtol=0, atol=1e-12)
    # and fully rejects content above the cut
    assert np.max(np.abs(bandlimit(tone, 3) - np.sin(2 * np.pi * 3 * j / 64))) < 1e-12
    assert np.max(np.abs(bandlimit(tone, 2))) < 1e-12


def test_bandlimit_nyquist_bin_kept_only_at_half_length():
    j = np.arange(16)
    nyq = np.cos(np.pi * j)
    assert np.allclose(bandlimit(nyq, 8), nyq, rtol=0, atol=1e-12)
    assert np.max(np.abs(bandlimit(nyq, 7))) < 1e-12


def test_bandlimit_rejects_bad_harmonic_counts():
    table = np.zeros(16)
    for bad in (0, -1, 9, 2.5):
        with pytest.raises(ValueError):
            bandlimit(table, bad)


def test_bandlimit_never_adds_energy():
    rng = np.random.default_rng(13)
    table = rng.normal(size=128)
    for k in (1, 5, 20, 64):
        assert np.sum(bandlimit(table, k) ** 2) <= np.sum(table ** 2) + 1e-9


def test_build_mipmaps_requires_frozen_bank():
    bank = init_bank(2, 512, seed=0)
    with pytest.raises(ValueError):
        build_mipmaps(bank, 16000, octaves=4)


def test_mipmap_levels_follow_the_octave_ladder():
    bank = init_bank(3, 512, seed=5).freeze()
    mip = build_mipmaps(bank, 16000, octaves=10)
    assert isinstance(mip, MipmapBank)
    assert np.allclose(mip.level_max_f0, 20.0 * 2.0 ** np.arange(10))
    # floor(16000 / (2 * max_f0)), clamped into [1, 256]
    assert mip.level_max_harmonic.tolist() == [256, 200, 100, 50, 25, 12, 6, 3, 1, 1]


def test_mipmap_levels_are_actually_bandlimited():
    bank = init_bank(2, 512, seed=6).freeze()
    mip = build_mipmaps(bank, 16000, octaves=8)
    for level, kmax in zip(mip.levels, mip.level_max_harmonic):
        spec = np.fft.rfft(level, axis=-1)
        assert np.max(np.abs(spec[:, 0])) < 1e-9
        if kmax + 1 < spec.shape[1]:
            assert np.max(np.abs(spec[:, kmax + 1:])) < 1e-9


def test_mipmap_read_stack_mirrors_levels():
    bank = init_bank(3, 64, seed=7).freeze()
    mip = build_mipmaps(bank, 16000, octaves=3)
    for u, level in enumerate(mip.levels):
        assert np.array_equal(mip.read_stack[u].T, level)


def test_select_level_picks_first_covering_octave():
    bank = init_bank(1, 512, seed=8).freeze()
    mip = build_mipmaps(bank, 16000, octaves=10)
    assert mip.select_level(20.0) == 0
    assert mip.select_level(20.01) == 1
    assert mip.select_level(40.0) == 1
    assert mip.select_level(6000.0) == 9
    assert mip.select_level(np.array([20.0, 100.0])).tolist() == [0, 3]
    with pytest.raises(ValueError):
        mip.select_level(20.0 * 2 ** 9 + 1.0)
