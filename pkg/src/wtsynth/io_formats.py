"""On-disk formats: WAV audio, binary wavetable banks, CSV control tracks,
CSV f0 tracks, and flat key=value run configs."""

import struct
import warnings
from dataclasses import dataclass, fields

import numpy as np

from .errors import FormatError, UnsupportedFormatError
from .oscillator import ControlTrack
from .spectral import DEFAULT_FFT_SIZES
from .wavetable import WavetableBank

BANK_MAGIC = b"DWTB"

_WAVE_PCM = 1
_WAVE_FLOAT = 3


@dataclass
class AudioBuffer:
    """Mono audio plus its sample rate. Samples are float64 in memory."""

    sample_rate: int
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {self.samples.shape}")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def duration(self):
        return self.samples.shape[0] / self.sample_rate


def wav_read(path):
    """Read a RIFF/WAVE file (PCM-16 or float-32, mono or stereo).

    Stereo input is downmixed to mono by averaging, with a warning. Other
    channel counts and codecs raise UnsupportedFormatError.
    """
    with open(path, "rb") as fh:
        riff = fh.read(12)
        if len(riff) < 12 or riff[:4] != b"RIFF" or riff[8:12] != b"WAVE":
            raise FormatError(f"{path}: not a RIFF/WAVE file")
        fmt = None
        data = None
        while True:
            header = fh.read(8)
            if len(header) < 8:
                break
            chunk_id, size = struct.unpack("<4sI", header)
            payload = fh.read(size)
            if len(payload) < size:
                raise FormatError(f"{path}: truncated {chunk_id!r} chunk")
            if size % 2:
                fh.read(1)  # RIFF chunks are word-aligned
            if chunk_id == b"fmt ":
                if size < 16:
                    raise FormatError(f"{path}: fmt chunk too short")
                fmt = struct.unpack("<HHIIHH", payload[:16])
            elif chunk_id == b"data":
                data = payload
    if fmt is None:
        raise FormatError(f"{path}: missing fmt chunk")
    if data is None:
        raise FormatError(f"{path}: missing data chunk")
    audio_format, channels, sample_rate, _, _, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedFormatError(f"{path}: {channels} channels (mono/stereo only)")
    if (audio_format, bits) == (_WAVE_PCM, 16):
        dtype, scale = np.dtype("<i2"), 1.0 / 32768.0
    elif (audio_format, bits) == (_WAVE_FLOAT, 32):
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise UnsupportedFormatError(
            f"{path}: format {audio_format} at {bits} bits (PCM-16 or float-32 only)"
        )
    frame_bytes = dtype.itemsize * channels
    if len(data) % frame_bytes:
        raise FormatError(f"{path}: data size {len(data)} not a whole number of frames")
    samples = np.frombuffer(data, dtype=dtype).astype(np.float64) * scale
    if channels == 2:
        warnings.warn(f"{path}: stereo input downmixed to mono by averaging")
        samples = samples.reshape(-1, 2).mean(axis=1)
    return AudioBuffer(sample_rate=sample_rate, samples=samples)


def wav_write(path, buffer, codec="float32"):
    """Write a mono WAV with a canonical 44-byte header.

    ``codec`` is "float32" (bit-exact round trip for float-32 data) or
    "pcm16" (samples clamped to [-1, 1] and rounded half away from zero).
    """
    if codec == "float32":
        audio_format, bits = _WAVE_FLOAT, 32
        payload = buffer.samples.astype("<f4").tobytes()
    elif codec == "pcm16":
        audio_format, bits = _WAVE_PCM, 16
        clamped = np.clip(buffer.samples, -1.0, 1.0)
        scaled = clamped * 32768.0
        ints = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
        payload = np.clip(ints, -32768, 32767).astype("<i2").tobytes()
    else:
        raise ValueError(f"codec must be 'pcm16' or 'float32', got {codec!r}")
    sample_rate = int(buffer.sample_rate)
    block_align = bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, audio_format, 1, sample_rate,
        sample_rate * block_align, block_align, bits,
        b"data", len(payload),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def bank_save(path, bank):
    """Write a bank: magic, u32 table count, u32 table length, then the
    tables as float32 little-endian in table-major order."""
    header = BANK_MAGIC + struct.pack("<II", bank.n_tables, bank.table_len)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(bank.tables.astype("<f4").tobytes())


def bank_load(path):
    """Read a bank written by bank_save. The result comes back frozen."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != BANK_MAGIC:
        raise FormatError(f"{path}: not a wavetable bank file")
    n_tables, table_len = struct.unpack("<II", blob[4:12])
    expected = 12 + 4 * n_tables * table_len
    if n_tables < 1 or table_len < 4:
        raise FormatError(f"{path}: implausible dimensions {n_tables}x{table_len}")
    if len(blob) != expected:
        raise FormatError(
            f"{path}: payload is {len(blob)} bytes, header implies {expected}"
        )
    tables = np.frombuffer(blob[12:], dtype="<f4").astype(np.float64)
    return WavetableBank(tables.reshape(n_tables, table_len), frozen=True)


def _format_float(x):
    return format(float(x), ".17g")


def track_save(path, track):
    """Write a control track as CSV: frame,f0_hz,amp,c_0..c_{N-1}."""
    n = track.n_tables
    columns = ["frame", "f0_hz", "amp"] + [f"c_{i}" for i in range(n)]
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for i in range(track.n_frames):
            row = [str(i), _format_float(track.f0[i]), _format_float(track.amplitude[i])]
            row += [_format_float(c) for c in track.attention[i]]
            fh.write(",".join(row) + "\n")


def track_load(path, frame_rate=250.0):
    """Read a control track CSV written by track_save.

    The header pins the column layout; every data row is validated (field
    count, numeric values, nonnegative weights, attention sum within 1e-6 of
    one) and errors name the offending row.
    """
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0]:
        raise FormatError(f"{path}: missing header")
    header = lines[0].split(",")
    if header[:3] != ["frame", "f0_hz", "amp"]:
        raise FormatError(f"{path}: header must start with frame,f0_hz,amp")
    n = len(header) - 3
    if n < 1 or header[3:] != [f"c_{i}" for i in range(n)]:
        raise FormatError(f"{path}: attention columns must be c_0..c_{{N-1}}")
    rows = [ln for ln in lines[1:] if ln]
    f0 = np.empty(len(rows))
    amp = np.empty(len(rows))
    att = np.empty((len(rows), n))
    for r, line in enumerate(rows):
        parts = line.split(",")
        if len(parts) != 3 + n:
            raise FormatError(f"{path}: row {r} has {len(parts)} fields, expected {3 + n}")
        try:
            f0[r] = float(parts[1])
            amp[r] = float(parts[2])
            att[r] = [float(p) for p in parts[3:]]
        except ValueError as exc:
            raise FormatError(f"{path}: row {r}: {exc}") from exc
        if not np.isfinite(f0[r]) or f0[r] < 0:
            raise FormatError(f"{path}: row {r}: bad f0 {parts[1]}")
        if not np.isfinite(amp[r]) or amp[r] < 0:
            raise FormatError(f"{path}: row {r}: bad amplitude {parts[2]}")
        if np.any(~np.isfinite(att[r])) or np.any(att[r] < 0):
            raise FormatError(f"{path}: row {r}: attention weights must be nonnegative")
        s = att[r].sum()
        if abs(s - 1.0) > 1e-6:
            raise FormatError(f"{path}: row {r}: attention sums to {s:.8f}, expected 1")
    return ControlTrack(f0=f0, amplitude=amp, attention=att, frame_rate=frame_rate)


def f0_track_save(path, f0, confidence):
    """Write an f0 curve as CSV: frame,f0_hz,confidence."""
    f0 = np.asarray(f0, dtype=np.float64)
    confidence = np.asarray(confidence, dtype=np.float64)
    if f0.shape != confidence.shape or f0.ndim != 1:
        raise ValueError("f0 and confidence must be matching 1-D arrays")
    with open(path, "w") as fh:
        fh.write("frame,f0_hz,confidence\n")
        for i in range(f0.shape[0]):
            fh.write(f"{i},{_format_float(f0[i])},{_format_float(confidence[i])}\n")


def f0_track_load(path):
    """Read an f0 curve CSV written by f0_track_save."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0].split(",") != ["frame", "f0_hz", "confidence"]:
        raise FormatError(f"{path}: header must be frame,f0_hz,confidence")
    rows = [ln for ln in lines[1:] if ln]
    f0 = np.empty(len(rows))
    confidence = np.empty(len(rows))
    for r, line in enumerate(rows):
        parts = line.split(",")
        if len(parts) != 3:
            raise FormatError(f"{path}: row {r} has {len(parts)} fields, expected 3")
        try:
            f0[r] = float(parts[1])
            confidence[r] = float(parts[2])
        except ValueError as exc:
            raise FormatError(f"{path}: row {r}: {exc}") from exc
    return f0, confidence


@dataclass
class RunConfig:
    """Reproducibility settings, serialized as flat key=value lines."""

    sample_rate: float = 16000.0
    frame_rate: float = 250.0
    n_tables: int = 10
    table_len: int = 512
    fft_sizes: tuple = DEFAULT_FFT_SIZES
    learning_rate: float = 1e-3
    iterations: int = 2000
    seed: int = 0
    antialias: bool = True


def run_config_save(path, config):
    with open(path, "w") as fh:
        for f in fields(config):
            value = getattr(config, f.name)
            if f.name == "fft_sizes":
                text = ",".join(str(int(v)) for v in value)
            elif f.name == "antialias":
                text = "true" if value else "false"
            else:
                text = repr(value) if isinstance(value, float) else str(value)
            fh.write(f"{f.name}={text}\n")


def run_config_load(path):
    """Parse a key=value run config. Unknown keys are rejected; keys left
    out keep their defaults."""
    known = {f.name: f for f in fields(RunConfig)}
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"{path}: line {lineno}: expected key=value")
            key, _, text = line.partition("=")
            key = key.strip()
            text = text.strip()
            if key not in known:
                raise FormatError(f"{path}: line {lineno}: unknown key {key!r}")
            try:
                if key == "fft_sizes":
                    values[key] = tuple(int(v) for v in text.split(","))
                elif key == "antialias":
                    if text not in ("true", "false"):
                        raise ValueError(f"expected true/false, got {text!r}")
                    values[key] = text == "true"
                elif key in ("n_tables", "table_len", "iterations", "seed"):
                    values[key] = int(text)
                else:
                    values[key] = float(text)
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from exc
    return RunConfig(**values)
