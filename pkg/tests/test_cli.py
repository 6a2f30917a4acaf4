"""End-to-end runs of the command line driver through main()."""

import numpy as np
import pytest

from wtsynth.cli import main
from wtsynth.io_formats import (
    AudioBuffer,
    bank_load,
    bank_save,
    track_load,
    track_save,
    wav_read,
    wav_write,
)
from wtsynth.oscillator import ControlTrack, synthesize
from wtsynth.wavetable import init_bank
from oracles import saw_table


def make_bank_file(tmp_path, n=3, length=64, seed=0, name="bank.dwtb"):
    path = tmp_path / name
    bank_save(path, init_bank(n, length, seed=seed))
    return path


def make_track_file(tmp_path, n_frames=50, n_tables=3, f0=220.0, name="track.csv"):
    path = tmp_path / name
    att = np.full((n_frames, n_tables), 1.0 / n_tables)
    track = ControlTrack(np.full(n_frames, f0), np.full(n_frames, 0.5), att, 250.0)
    track_save(path, track)
    return path


def make_target_wav(tmp_path, seconds=0.25, f0=220.0, name="target.wav"):
    path = tmp_path / name
    sr = 16000
    n_frames = int(round(seconds * 250))
    bank = init_bank(1, 512, seed=7)
    bank.tables[0] = saw_table(512, 6) * 0.4
    track = ControlTrack(np.full(n_frames, f0), np.ones(n_frames),
                         np.ones((n_frames, 1)), 250.0)
    audio = synthesize(bank.freeze(), track, sr)
    wav_write(path, AudioBuffer(sr, audio), codec="float32")
    return path


def test_synth_writes_expected_wav(tmp_path, capsys):
    bank = make_bank_file(tmp_path)
    track = make_track_file(tmp_path, n_frames=50)
    out = tmp_path / "out.wav"
    code = main(["synth", str(bank), str(track), str(out)])
    assert code == 0
    buf = wav_read(out)
    assert buf.sample_rate == 16000
    assert buf.samples.shape == (50 * 64,)
    assert str(out) in capsys.readouterr().out


def test_synth_missing_bank_exits_2(tmp_path, capsys):
    track = make_track_file(tmp_path)
    code = main(["synth", str(tmp_path / "nope.dwtb"), str(track),
                 str(tmp_path / "o.wav")])
    assert code == 2
    assert "error" in capsys.readouterr().err.lower()


def test_synth_rejects_f0_at_nyquist(tmp_path, capsys):
    bank = make_bank_file(tmp_path)
    track = make_track_file(tmp_path, f0=9000.0)
    code = main(["synth", str(bank), str(track), str(tmp_path / "o.wav")])
    assert code == 2


def test_synth_bad_track_csv_exits_2(tmp_path):
    bank = make_bank_file(tmp_path)
    bad = tmp_path / "bad.csv"
    bad.write_text("frame,f0_hz,amp,c_0\n0,220.0,1.0,0.4\n")
    code = main(["synth", str(bank), str(bad), str(tmp_path / "o.wav")])
    assert code == 2


def test_fit_produces_loadable_outputs(tmp_path, capsys):
    target = make_target_wav(tmp_path)
    out_bank = tmp_path / "fit.dwtb"
    out_track = tmp_path / "fit.csv"
    loss_csv = tmp_path / "loss.csv"
    code = main(["fit", str(target), str(out_bank), str(out_track),
                 "--n-tables", "3", "--iters", "40", "--f0", "220",
                 "--loss-csv", str(loss_csv)])
    assert code == 0
    bank = bank_load(out_bank)
    assert bank.n_tables == 3
    track = track_load(out_track)
    assert track.n_frames == 62  # ceil(4000 / 64) frames for 0.25 s at hop 64
    lines = loss_csv.read_text().splitlines()
    assert lines[0] == "iteration,loss"
    assert len(lines) == 41
    losses = [float(line.split(",")[1]) for line in lines[1:]]
    assert losses[-1] < losses[0]
    assert "loss" in capsys.readouterr().out


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_fit_divergence_exits_1(tmp_path, capsys):
    target = make_target_wav(tmp_path)
    code = main(["fit", str(target), str(tmp_path / "b.dwtb"),
                 str(tmp_path / "t.csv"), "--n-tables", "2",
                 "--iters", "20", "--f0", "220", "--lr", "1e308"])
    assert code == 1
    assert "lower learning rate" in capsys.readouterr().err


def test_oneshot_leaves_bank_bytes_alone(tmp_path):
    target = make_target_wav(tmp_path)
    bank_path = tmp_path / "fixed.dwtb"
    bank = init_bank(2, 512, seed=3)
    bank.tables[0] = saw_table(512, 6) * 0.4
    bank_save(bank_path, bank)
    before = bank_path.read_bytes()
    code = main(["oneshot", str(target), str(bank_path), str(tmp_path / "t.csv"),
                 "--iters", "30", "--f0", "220"])
    assert code == 0
    assert bank_path.read_bytes() == before
    assert track_load(tmp_path / "t.csv").n_tables == 2


def test_shift_octave_down(tmp_path):
    bank = make_bank_file(tmp_path, length=512, seed=5)
    track = make_track_file(tmp_path, n_frames=100, f0=440.0)
    out = tmp_path / "down.wav"
    code = main(["shift", str(bank), str(track), str(out), "--octaves", "-1"])
    assert code == 0
    assert wav_read(out).samples.shape == (100 * 64,)


def test_shift_above_nyquist_exits_2(tmp_path, capsys):
    bank = make_bank_file(tmp_path)
    track = make_track_file(tmp_path, f0=3000.0)
    code = main(["shift", str(bank), str(track), str(tmp_path / "o.wav"),
                 "--octaves", "2"])
    assert code == 2
    assert "Nyquist" in capsys.readouterr().err


def test_bench_reports_speedup(tmp_path, capsys):
    csv = tmp_path / "bench.csv"
    code = main(["bench", "--trials", "3", "--seconds", "0.2", "--warmup", "1",
                 "--harmonics", "25", "--n-tables", "4", "--out-csv", str(csv)])
    assert code == 0
    out = capsys.readouterr().out
    assert "speedup" in out
    lines = csv.read_text().splitlines()
    assert lines[0] == "trial,additive_ms,wavetable_ms"
    assert len(lines) == 4


def test_inspect_writes_per_table_csvs(tmp_path, capsys):
    bank = make_bank_file(tmp_path, n=4, length=32)
    out_dir = tmp_path / "dump"
    code = main(["inspect", str(bank), "--out-dir", str(out_dir)])
    assert code == 0
    files = sorted(out_dir.glob("table_*.csv"))
    assert len(files) == 4
    first = files[0].read_text().splitlines()
    assert first[0] == "sample,amplitude"
    assert len(first) == 33
    assert "4 tables" in capsys.readouterr().out


def test_inspect_with_track_ranks_tables(tmp_path, capsys):
    bank = make_bank_file(tmp_path, n=3)
    track = make_track_file(tmp_path)
    code = main(["inspect", str(bank), "--track", str(track),
                 "--out-dir", str(tmp_path / "d")])
    assert code == 0
    assert "rank" in capsys.readouterr().out.lower()


def test_no_arguments_exits_2(capsys):
    assert main([]) == 2
    capsys.readouterr()


def test_unknown_subcommand_exits_2(capsys):
    assert main(["transmogrify"]) == 2
    capsys.readouterr()


def test_help_exits_0(capsys):
    assert main(["--help"]) == 0
    assert "synth" in capsys.readouterr().out
