import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from querywatch import synth
from querywatch.audio_io import AudioClip


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_corpus():
    return synth.benign_corpus(50, seed=11)


def sine(freq, seconds=1.0, rate=16000, amp=0.5, phase=0.0):
    t = np.arange(int(round(seconds * rate))) / rate
    return AudioClip(amp * np.sin(2 * np.pi * freq * t + phase), rate, f"sine{freq}")


# acceptance criteria record (id, title, passed, seconds, detail) here
ACCEPTANCE: list[tuple[str, str, bool, float, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, title, passed, secs, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{cid} {'PASS' if passed else 'FAIL'} {title} ({secs:.1f}s) {detail}")
