import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import enumerate_min_edits
from querywatch.audio_io import AudioClip
from querywatch.errors import EmptyReference, LengthMismatch, ZeroPerturbation, ZeroQueries
from querywatch.metrics import MetricsReport, count_detection_windows, dsr, edit_ops, format_table, fsnr, wer


def test_dsr_reference_value():
    assert dsr(3.92, 300, 75) == pytest.approx(98.0)


def test_dsr_edges():
    assert dsr(4, 300, 75) == 100.0
    assert dsr(0, 300, 75) == 0.0
    assert dsr(10, 300, 75) == 100.0  # capped
    with pytest.raises(ZeroQueries):
        dsr(1, 0, 75)


def test_detection_windows():
    flags = [False] * 300
    flags[10] = flags[80] = flags[299] = True
    assert count_detection_windows(flags, 75) == 3
    assert count_detection_windows([False] * 10 + [True], 75) == 1
    assert count_detection_windows([], 75) == 0


def test_fsnr_reference_and_errors():
    x = AudioClip(np.sin(np.linspace(0, 20, 1000)) * 0.8)
    assert fsnr(x, x.with_samples(x.samples / 10)) == pytest.approx(20.0)
    assert fsnr(x, x.with_samples(x.samples)) == pytest.approx(0.0)
    with pytest.raises(ZeroPerturbation):
        fsnr(x, x.with_samples(np.zeros(1000)))
    with pytest.raises(LengthMismatch):
        fsnr(x, AudioClip(np.ones(10) * 0.1))


def test_wer_examples():
    assert wer("the cat sat", "the cat sat") == 0.0
    assert wer("the cat sat", "the dog sat") == pytest.approx(100 / 3)
    assert wer("The cat, sat!", ["the", "cat", "sat"]) == 0.0
    assert wer("a b", "a b c d") == 100.0
    assert edit_ops("a b c".split(), "a x".split()) == (1, 1, 0)
    with pytest.raises(EmptyReference):
        wer("", "x")


@given(st.lists(st.sampled_from("abc"), max_size=6), st.lists(st.sampled_from("abc"), max_size=6))
def test_edit_distance_matches_enumeration(ref, hyp):
    s, d, i = edit_ops(ref, hyp)
    assert s + d + i == enumerate_min_edits(ref, hyp)
    assert len(ref) - d + i == len(hyp)


def test_all_short_pairs_exhaustively():
    words = ["x", "y"]
    seqs = [list(p) for n in range(4) for p in itertools.product(words, repeat=n)]
    for ref in seqs:
        for hyp in seqs:
            assert sum(edit_ops(ref, hyp)) == enumerate_min_edits(ref, hyp)


def test_report_roundtrip_and_table():
    rep = MetricsReport(a_n=300, d_n=3.92, k=75, dsr_percent=98.0, fsnr_db=7.38, first_detection_seq=12, label="CS")
    back = MetricsReport.from_dict(json.loads(rep.to_json()))
    assert back == rep
    table = format_table([rep])
    assert "Avg.Queries(n)" in table and "98.00" in table and "7.38" in table
    with pytest.raises(ValueError):
        MetricsReport(a_n=1, d_n=0, k=75, dsr_percent=0.0, fsnr_db=3.0)
