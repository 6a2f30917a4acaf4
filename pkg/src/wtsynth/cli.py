"""Command-line front end: synth, fit, oneshot, shift, bench, inspect."""

import argparse
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import io_formats, optimize, spectral, wavetable
from .errors import DivergenceError, FormatError
from .io_formats import AudioBuffer
from .oscillator import ControlTrack, synthesize, synthesize_additive
from .wavetable import build_mipmaps, init_bank


@dataclass
class BenchReport:
    additive_ms_per_second: float
    wavetable_ms_per_second: float
    speedup: float
    trials: int
    harmonics: int
    n_tables: int


def _f0_frames(args, samples, sample_rate, frame_rate):
    """Per-frame f0 for a fit: tracked from the audio, or fixed by --f0."""
    hop = int(round(sample_rate / frame_rate))
    n_frames = len(samples) // hop
    if n_frames < 1:
        raise ValueError("input audio is shorter than one control frame")
    if args.f0 != "auto":
        return np.full(n_frames, float(args.f0)), None
    f0, confidence = spectral.estimate_f0(samples[: n_frames * hop],
                                          sample_rate, frame_rate)
    return f0, confidence


def _write_loss_csv(path, losses):
    with open(path, "w") as fh:
        fh.write("iteration,loss\n")
        for i, value in enumerate(losses):
            fh.write(f"{i},{float(value)!r}\n")


def cmd_synth(args):
    bank = io_formats.bank_load(args.bank)
    track = io_formats.track_load(args.track, frame_rate=args.frame_rate)
    signal = synthesize(bank, track, args.sample_rate, antialias=args.antialias)
    io_formats.wav_write(args.out, AudioBuffer(args.sample_rate, signal),
                         codec=args.codec)
    print(f"wrote {args.out}: {len(signal)} samples at {args.sample_rate} Hz")
    return 0


def _load_fit_target(args):
    audio = io_formats.wav_read(args.target)
    sample_rate = audio.sample_rate
    hop = int(round(sample_rate / args.frame_rate))
    n_frames = len(audio.samples) // hop
    if n_frames < 1:
        raise ValueError("input audio is shorter than one control frame")
    samples = audio.samples[: n_frames * hop]
    return samples, sample_rate


def _fit_config(args, sample_rate, freeze):
    return optimize.FitConfig(
        iterations=args.iters,
        learning_rate=args.lr,
        seed=args.seed,
        freeze_wavetables=freeze,
        sample_rate=sample_rate,
        frame_rate=args.frame_rate,
    )


def cmd_fit(args):
    samples, sample_rate = _load_fit_target(args)
    f0, _ = _f0_frames(args, samples, sample_rate, args.frame_rate)
    config = _fit_config(args, sample_rate, freeze=False)
    bank, track, losses = optimize.fit(samples, f0, args.n_tables, config)
    io_formats.bank_save(args.out_bank, bank)
    io_formats.track_save(args.out_track, track)
    if args.loss_csv:
        _write_loss_csv(args.loss_csv, losses)
    print(f"fit {args.iters} iterations: loss {losses[0]:.6f} -> {losses[-1]:.6f}")
    print(f"wrote {args.out_bank} and {args.out_track}")
    return 0


def cmd_oneshot(args):
    samples, sample_rate = _load_fit_target(args)
    bank = io_formats.bank_load(args.bank)
    f0, _ = _f0_frames(args, samples, sample_rate, args.frame_rate)
    config = _fit_config(args, sample_rate, freeze=True)
    track, losses = optimize.fit_oneshot(samples, f0, bank, config)
    io_formats.track_save(args.out_track, track)
    if args.loss_csv:
        _write_loss_csv(args.loss_csv, losses)
    print(f"oneshot fit {args.iters} iterations: loss {losses[0]:.6f} -> {losses[-1]:.6f}")
    print(f"wrote {args.out_track} (bank untouched)")
    return 0


def cmd_shift(args):
    bank = io_formats.bank_load(args.bank)
    track = io_formats.track_load(args.track, frame_rate=args.frame_rate)
    factor = 2.0 ** args.octaves
    signal = optimize.pitch_shift(bank, track, factor, args.sample_rate)
    io_formats.wav_write(args.out, AudioBuffer(args.sample_rate, signal),
                         codec=args.codec)
    print(f"wrote {args.out}: pitch scaled by {factor:g} ({args.octaves:+g} octaves)")
    return 0


def run_benchmark(trials=1000, seconds=1.0, sample_rate=16000, frame_rate=250.0,
                  harmonics=100, n_tables=10, seed=0, warmup=3):
    """Time the mipmap wavetable path against the additive reference.

    Both paths render the same randomized control material per trial; only
    synthesis is timed, setup is not. Returns (report, per_trial) where
    per_trial[:, 0] is additive ms and per_trial[:, 1] wavetable ms.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    hop = int(round(sample_rate / frame_rate))
    n_frames = int(round(seconds * frame_rate))
    if n_frames < 2:
        raise ValueError("benchmark needs at least two frames")
    rng = np.random.default_rng(seed)

    f0 = np.empty(n_frames)
    f0[0] = rng.uniform(80.0, 800.0)
    for i in range(1, n_frames):
        f0[i] = np.clip(f0[i - 1] + rng.uniform(-20.0, 20.0), 80.0, 800.0)
    attention = rng.uniform(0.0, 1.0, size=(n_frames, n_tables))
    attention /= attention.sum(axis=1, keepdims=True)
    amplitude = rng.uniform(0.1, 1.0, size=n_frames)
    harmonic_amps = rng.uniform(0.0, 1.0, size=(n_frames, harmonics)) / harmonics

    bank = init_bank(n_tables, seed=seed).freeze()
    mipmaps = build_mipmaps(bank, sample_rate, octaves=10)
    track = ControlTrack(f0, amplitude, attention, frame_rate)

    for _ in range(warmup):
        synthesize(mipmaps, track, sample_rate)
        synthesize_additive(f0, harmonic_amps, sample_rate, frame_rate)

    per_trial = np.empty((trials, 2))
    for t in range(trials):
        t0 = time.perf_counter()
        synthesize_additive(f0, harmonic_amps, sample_rate, frame_rate)
        t1 = time.perf_counter()
        synthesize(mipmaps, track, sample_rate)
        t2 = time.perf_counter()
        per_trial[t, 0] = (t1 - t0) * 1e3 / seconds
        per_trial[t, 1] = (t2 - t1) * 1e3 / seconds

    additive_ms, wavetable_ms = per_trial.mean(axis=0)
    report = BenchReport(
        additive_ms_per_second=float(additive_ms),
        wavetable_ms_per_second=float(wavetable_ms),
        speedup=float(additive_ms / wavetable_ms),
        trials=trials,
        harmonics=harmonics,
        n_tables=n_tables,
    )
    return report, per_trial


def cmd_bench(args):
    report, per_trial = run_benchmark(
        trials=args.trials, seconds=args.seconds, sample_rate=args.sample_rate,
        frame_rate=args.frame_rate, harmonics=args.harmonics,
        n_tables=args.n_tables, seed=args.seed, warmup=args.warmup,
    )
    print(f"additive ({report.harmonics} partials): "
          f"{report.additive_ms_per_second:.3f} ms per second of audio")
    print(f"wavetables ({report.n_tables} tables):  "
          f"{report.wavetable_ms_per_second:.3f} ms per second of audio")
    print(f"speedup: {report.speedup:.2f}x over {report.trials} trials")
    if args.out_csv:
        with open(args.out_csv, "w") as fh:
            fh.write("trial,additive_ms,wavetable_ms\n")
            for t in range(per_trial.shape[0]):
                fh.write(f"{t},{per_trial[t, 0]!r},{per_trial[t, 1]!r}\n")
        print(f"wrote {args.out_csv}")
    return 0


def cmd_inspect(args):
    import os

    bank = io_formats.bank_load(args.bank)
    os.makedirs(args.out_dir, exist_ok=True)
    if args.track:
        track = io_formats.track_load(args.track, frame_rate=args.frame_rate)
        order, means = optimize.rank_wavetables(bank, track)
    else:
        order = np.arange(bank.n_tables)
        means = None
    for rank, idx in enumerate(order):
        path = os.path.join(args.out_dir, f"table_{rank:02d}.csv")
        with open(path, "w") as fh:
            fh.write("sample,amplitude\n")
            for s, value in enumerate(bank.tables[idx]):
                fh.write(f"{s},{float(value)!r}\n")
        if means is None:
            print(f"table {idx}: wrote {path}")
        else:
            print(f"rank {rank}: table {idx}, mean attention {means[idx]:.4f}, wrote {path}")
    print(f"wrote {len(order)} tables to {args.out_dir}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="wtsynth",
        description="Wavetable synthesis, dictionary fitting, and benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--sample-rate", type=int, default=16000, dest="sample_rate")
        p.add_argument("--frame-rate", type=float, default=250.0, dest="frame_rate")

    p = sub.add_parser("synth", help="render a bank + control track to WAV")
    p.add_argument("bank")
    p.add_argument("track")
    p.add_argument("out")
    add_common(p)
    p.add_argument("--codec", choices=("pcm16", "float32"), default="float32")
    p.add_argument("--antialias", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="learn a bank + controls from target audio")
    p.add_argument("target")
    p.add_argument("out_bank")
    p.add_argument("out_track")
    add_common(p)
    p.add_argument("--n-tables", type=int, default=10, dest="n_tables")
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--f0", default="auto",
                   help="'auto' to track pitch, or a fixed value in Hz")
    p.add_argument("--loss-csv", default=None, dest="loss_csv")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("oneshot", help="fit controls to new audio, bank frozen")
    p.add_argument("target")
    p.add_argument("bank")
    p.add_argument("out_track")
    add_common(p)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--f0", default="auto",
                   help="'auto' to track pitch, or a fixed value in Hz")
    p.add_argument("--loss-csv", default=None, dest="loss_csv")
    p.set_defaults(func=cmd_oneshot)

    p = sub.add_parser("shift", help="re-render a track at a shifted pitch")
    p.add_argument("bank")
    p.add_argument("track")
    p.add_argument("out")
    add_common(p)
    p.add_argument("--octaves", type=float, required=True,
                   help="pitch offset in octaves, e.g. -1 for an octave down")
    p.add_argument("--codec", choices=("pcm16", "float32"), default="float32")
    p.set_defaults(func=cmd_shift)

    p = sub.add_parser("bench", help="time wavetable vs additive synthesis")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seconds", type=float, default=1.0)
    add_common(p)
    p.add_argument("--harmonics", type=int, default=100)
    p.add_argument("--n-tables", type=int, default=10, dest="n_tables")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--out-csv", default=None, dest="out_csv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("inspect", help="dump tables (ranked by attention) to CSV")
    p.add_argument("bank")
    p.add_argument("--track", default=None)
    p.add_argument("--out-dir", default=".", dest="out_dir")
    p.add_argument("--frame-rate", type=float, default=250.0, dest="frame_rate")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None):
    """Run the CLI. Returns 0 on success, 1 on numeric failure during a
    run, 2 on usage or input errors."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint():
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
