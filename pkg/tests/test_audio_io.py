import io
import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import sine
from querywatch.audio_io import (
    AudioClip,
    add_noise_snr,
    decode_wav,
    encode_wav,
    measure_snr,
    read_wav,
    resample,
    slice_segments,
    write_wav,
)
from querywatch.errors import (
    ClipTooShort,
    LengthMismatch,
    MalformedWav,
    SilentInput,
    UnsupportedEncoding,
    UnsupportedRate,
)


def _wav(pcm, rate=16000, channels=1, width=2):
    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(width)
        w.setframerate(rate)
        w.writeframes(np.asarray(pcm).astype(f"<i{width}").tobytes())
    return buf.getvalue()


def test_silence_decodes_to_zeros():
    clip = decode_wav(_wav(np.zeros(16000, dtype=np.int16)))
    assert len(clip) == 16000 and clip.sample_rate == 16000
    assert not clip.samples.any()


def test_full_scale_sample_scaling():
    clip = decode_wav(_wav(np.array([32767], dtype=np.int16)))
    assert clip.samples[0] == pytest.approx(32767 / 32768)


def test_stereo_downmix_is_channel_average():
    left = np.full(100, 1000, dtype=np.int16)
    right = np.full(100, -3000, dtype=np.int16)
    inter = np.stack([left, right], axis=1).reshape(-1)
    clip = decode_wav(_wav(inter, channels=2))
    np.testing.assert_allclose(clip.samples, -1000 / 32768)


def test_8k_file_upsamples_and_keeps_tone():
    t = np.arange(8000) / 8000
    pcm = np.round(0.5 * 32767 * np.sin(2 * np.pi * 440 * t)).astype(np.int16)
    clip = decode_wav(_wav(pcm, rate=8000))
    assert abs(len(clip) - 16000) <= 1
    ref = 0.5 * np.sin(2 * np.pi * 440 * np.arange(len(clip)) / 16000)
    core = slice(200, -200)  # filter edge effects
    assert np.corrcoef(clip.samples[core], ref[core])[0, 1] >= 0.99


def test_garbage_is_malformed():
    with pytest.raises(MalformedWav):
        decode_wav(b"RIFF\x00\x00\x00\x00WAVEjunk")
    with pytest.raises(MalformedWav):
        decode_wav(b"not a wav at all")


def test_non_pcm16_rejected():
    with pytest.raises(UnsupportedEncoding):
        decode_wav(_wav(np.zeros(10, dtype=np.int32), width=4))
    # IEEE float format tag (3) is not PCM
    raw = bytearray(_wav(np.zeros(10, dtype=np.int16)))
    raw[20:22] = (3).to_bytes(2, "little")
    with pytest.raises(UnsupportedEncoding):
        decode_wav(bytes(raw))


def test_wav_roundtrip(tmp_path):
    clip = sine(1000, 0.25)
    write_wav(tmp_path / "a.wav", clip)
    back = read_wav(tmp_path / "a.wav")
    assert back.id == "a"
    np.testing.assert_allclose(back.samples, clip.samples, atol=1 / 32768)


def test_samples_are_clipped():
    clip = AudioClip(np.array([2.0, -3.0, 0.5]))
    assert clip.samples.tolist() == [1.0, -1.0, 0.5]
    with pytest.raises(ValueError):
        AudioClip(np.array([]))


def test_resample_identity_is_bit_identical():
    clip = sine(300, 0.1)
    out = resample(clip, 16000)
    assert np.array_equal(out.samples, clip.samples)


def test_resample_halves_length():
    clip = sine(300, 1.0)
    assert abs(len(resample(clip, 8000)) - 8000) <= 1


def test_resample_round_trip_sinusoid():
    clip = sine(1000, 1.0)
    back = resample(resample(clip, 8000), 16000)
    n = min(len(back), len(clip))
    core = slice(200, n - 200)
    assert np.corrcoef(back.samples[core], clip.samples[core])[0, 1] >= 0.99


def test_resample_unsupported_rate():
    with pytest.raises(UnsupportedRate):
        resample(sine(100, 0.1), 22050)


@pytest.mark.parametrize("snr", [0.0, 25.0, 50.0])
def test_add_noise_hits_requested_snr(snr):
    clip = sine(440, 1.0, amp=0.3)
    noisy = add_noise_snr(clip, snr, seed=3)
    assert measure_snr(clip, noisy) == pytest.approx(snr, abs=0.1)


def test_add_noise_deterministic():
    clip = sine(440, 0.5)
    assert np.array_equal(add_noise_snr(clip, 20, 9).samples, add_noise_snr(clip, 20, 9).samples)
    assert not np.array_equal(add_noise_snr(clip, 20, 9).samples, add_noise_snr(clip, 20, 10).samples)


def test_add_noise_rejects_silence():
    with pytest.raises(SilentInput):
        add_noise_snr(AudioClip(np.zeros(100)), 10, 0)


def test_measure_snr_edges():
    clip = sine(440, 0.5, amp=0.05)  # quiet enough that nothing clips
    assert measure_snr(clip, clip) == 200.0
    noise = np.random.default_rng(0).standard_normal(len(clip))
    noise *= np.sqrt(np.mean(clip.samples**2) / np.mean(noise**2))
    assert measure_snr(clip, clip.with_samples(clip.samples + noise)) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(LengthMismatch):
        measure_snr(clip, sine(440, 0.4))


def test_slice_segments():
    clip = sine(440, 10.0)
    segs = slice_segments(clip, 4.0, 25, seed=1)
    assert len(segs) == 25 and all(len(s) == 64000 for s in segs)
    again = slice_segments(clip, 4.0, 25, seed=1)
    assert [s.id for s in segs] == [s.id for s in again]
    with pytest.raises(ClipTooShort):
        slice_segments(sine(440, 1.0), 4.0, 1, seed=1)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-32768, 32767), min_size=1, max_size=400))
def test_pcm_roundtrip_is_lossless(values):
    pcm = np.array(values, dtype=np.int16)
    clip = decode_wav(_wav(pcm))
    assert np.array_equal(np.frombuffer(encode_wav(clip)[44:], dtype="<i2"), pcm)
