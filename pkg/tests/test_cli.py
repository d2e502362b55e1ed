import json
import subprocess
import sys

import pytest

from querywatch import synth
from querywatch.attack_sim import QueryTrace, TraceRecord, benign_trace, save_trace
from querywatch.audio_io import write_wav
from querywatch.cli import main


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["make-corpus", "--n", "60", "--seed", "2", "--duration", "1.0", "--out", str(root / "corpus")]) == 0
    write_wav(root / "carrier.wav", synth.music_carrier(4, duration=1.0))
    return root


@pytest.fixture(scope="module")
def calib(workdir):
    out = workdir / "calib.json"
    assert main(["calibrate", "--corpus", str(workdir / "corpus"), "--k", "5", "--fpr", "0.02",
                 "--seed", "1", "--out", str(out)]) == 0
    return out


def test_calibrate_writes_valid_delta(calib):
    doc = json.loads(calib.read_text())
    assert doc["k"] == 5 and 0.0 < doc["delta"] < 1.0 and doc["corpus_size"] == 60


def test_calibrate_is_byte_reproducible(workdir, calib):
    again = workdir / "calib2.json"
    main(["calibrate", "--corpus", str(workdir / "corpus"), "--k", "5", "--fpr", "0.02", "--seed", "1",
          "--out", str(again)])
    assert again.read_bytes() == calib.read_bytes()


def test_calibrate_exit_codes(workdir, tmp_path):
    assert main(["calibrate", "--corpus", str(workdir / "corpus"), "--k", "75", "--out", str(tmp_path / "c")]) == 2
    assert main(["calibrate", "--corpus", str(tmp_path / "missing"), "--k", "5", "--out", str(tmp_path / "c")]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["calibrate", "--corpus", "x", "--k", "0"])
    assert exc.value.code == 64


def test_usage_error_exit_code_from_shell():
    proc = subprocess.run([sys.executable, "-m", "querywatch", "calibrate", "--k", "0"], capture_output=True)
    assert proc.returncode == 64


def test_config_file_with_flag_override(workdir, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"k": 75, "corpus": str(workdir / "corpus"), "fpr": 0.02}))
    out = tmp_path / "c.json"
    assert main(["calibrate", "--config", str(cfg), "--out", str(out)]) == 2  # k=75 from file is too big
    assert main(["calibrate", "--config", str(cfg), "--k", "4", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["k"] == 4


def test_simulate_manifest(workdir, tmp_path):
    args = ["simulate", "--carrier", str(workdir / "carrier.wav"), "-n", "300", "--p-fake", "0.25",
            "--decoys", str(workdir / "corpus"), "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    lines = (tmp_path / "a" / "trace.jsonl").read_text().splitlines()
    assert len(lines) == 300
    assert sum(json.loads(l)["label"] == "fake" for l in lines) == 75
    main(args + ["--out", str(tmp_path / "b")])
    assert (tmp_path / "b" / "trace.jsonl").read_bytes() == (tmp_path / "a" / "trace.jsonl").read_bytes()


def test_scan_identical_trace_full_detection(workdir, calib, tmp_path):
    clip = synth.music_carrier(4, duration=1.0)
    save_trace(QueryTrace([TraceRecord(i + 1, "x", clip, "benign", 0.0) for i in range(20)]), tmp_path)
    report = tmp_path / "r.json"
    assert main(["scan", "--trace", str(tmp_path / "trace.jsonl"), "--calib", str(calib),
                 "--report", str(report)]) == 0
    assert json.loads(report.read_text())["dsr_percent"] == 100.0


def test_scan_benign_trace_low_dsr(workdir, calib, tmp_path):
    corpus = synth.benign_corpus(60, seed=2, duration=1.0)
    save_trace(benign_trace(corpus, seed=1), tmp_path)
    report = tmp_path / "r.json"
    main(["scan", "--trace", str(tmp_path / "trace.jsonl"), "--calib", str(calib), "--report", str(report)])
    doc = json.loads(report.read_text())
    assert sum(s["flagged"] for s in doc["scores"]) <= 0.02 * 60 + 1


def test_scan_missing_wav_names_line(workdir, calib, tmp_path, capsys):
    clip = synth.music_carrier(4, duration=1.0)
    save_trace(QueryTrace([TraceRecord(i + 1, "x", clip, "benign", 0.0) for i in range(4)]), tmp_path)
    (tmp_path / "clips" / "000003_benign.wav").unlink()
    assert main(["scan", "--trace", str(tmp_path / "trace.jsonl"), "--calib", str(calib)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_sweep_p_fake_csv(workdir, calib, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--axis", "p_fake", "--values", "0,50,100", "--calib", str(calib), "-n", "40",
                 "--carrier", str(workdir / "carrier.wav"), "--decoys", str(workdir / "corpus"),
                 "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "axis_value,dsr_percent,fsnr_db,detections,queries"
    dsr = [float(r.split(",")[1]) for r in rows[1:]]
    assert len(dsr) == 3 and all(a >= b for a, b in zip(dsr, dsr[1:]))


def test_sweep_empty_values_is_usage_error(calib):
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--axis", "p_fake", "--values", "", "--calib", str(calib)])
    assert exc.value.code == 64
