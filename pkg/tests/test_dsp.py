import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loopeval.audio_io import AudioClip
from loopeval.dsp import (
    LOG_FLOOR,
    MelSpectrogram,
    StftFrameSpec,
    hz_to_mel,
    mel_filterbank,
    mel_spectrogram,
    mel_to_hz,
    stft_magnitude,
    time_stretch,
)

from conftest import dominant_frequency, sine


def clip_of(x, rate=44100):
    return AudioClip(np.asarray(x, dtype=np.float64), rate)


class TestStft:
    def test_zero_clip_shape_and_values(self):
        mag = stft_magnitude(clip_of(np.zeros(88200)))
        assert mag.shape == (513, 321)
        assert np.all(mag == 0.0)

    def test_frame_count_formula(self):
        spec = StftFrameSpec()
        for n in (1, 274, 275, 276, 88200, 88199):
            mag = stft_magnitude(clip_of(np.ones(n)))
            assert mag.shape[1] == n // spec.hop_size + 1

    def test_dc_concentrates_in_bin_zero(self):
        mag = stft_magnitude(clip_of(np.ones(44100)))
        interior = mag[:, 2:-2]
        assert np.all(interior[0] > 0)
        # Hann leaks into bin 1 by design; bins >= 2 must be tiny
        assert np.all(interior[2:] < 0.01 * interior[0])

    def test_bin_exact_sine_peaks_at_bin(self):
        freq = 10 * 44100 / 1024
        mag = stft_magnitude(sine(freq, 1.0, amp=1.0))
        # edge frames see the even reflection of an odd signal; test interior
        assert np.all(np.argmax(mag[:, 1:-1], axis=0) == 10)

    def test_sign_flip_invariance(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=4096)
        a = stft_magnitude(clip_of(x))
        b = stft_magnitude(clip_of(-x))
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestMelFilterbank:
    def test_single_triangle_peaks_at_mel_midpoint(self):
        fb = mel_filterbank(44100, 513, n_mels=1, f_min=0.0, f_max=22050.0)
        assert fb.shape == (1, 513)
        center_hz = mel_to_hz((hz_to_mel(0.0) + hz_to_mel(22050.0)) / 2.0)
        peak_bin = int(np.argmax(fb[0]))
        bin_hz = 44100 / 1024
        assert abs(peak_bin * bin_hz - center_hz) <= bin_hz

    def test_centers_increase(self):
        fb = mel_filterbank(44100, 513, 80, 0.0, 22050.0)
        # analytic centers increase strictly; sampled argmaxes can tie at the
        # low end where triangles are narrower than one FFT bin
        centers = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(22050.0), 82))[1:-1]
        assert np.all(np.diff(centers) > 0)
        argmaxes = np.argmax(fb, axis=1)
        assert np.all(np.diff(argmaxes) >= 0)
        assert argmaxes[0] < argmaxes[-1]

    def test_rows_peak_at_one(self):
        fb = mel_filterbank(44100, 513, 80, 0.0, 22050.0)
        occupied = fb.max(axis=1) > 0
        np.testing.assert_allclose(fb.max(axis=1)[occupied], 1.0, atol=1e-9)
        assert np.all(fb >= 0.0)

    def test_invalid_range_rejected(self):
        with pytest.raises(ValueError):
            mel_filterbank(44100, 513, 80, -1.0, 22050.0)
        with pytest.raises(ValueError):
            mel_filterbank(44100, 513, 80, 100.0, 100.0)
        with pytest.raises(ValueError):
            mel_filterbank(44100, 513, 80, 0.0, 30000.0)


class TestMelSpectrogram:
    def test_zero_clip_hits_floor(self):
        mel = mel_spectrogram(clip_of(np.zeros(88200)))
        assert mel.values.shape == (80, 321)
        np.testing.assert_array_equal(mel.values, np.log(LOG_FLOOR))

    def test_frame_count(self):
        mel = mel_spectrogram(clip_of(np.random.default_rng(0).normal(size=88200) * 0.1))
        assert mel.n_frames == 88200 // 275 + 1 == 321

    def test_gain_power_law(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=88200) * 0.2
        a = mel_spectrogram(clip_of(x)).values
        b = mel_spectrogram(clip_of(2.0 * x)).values
        above = (a > np.log(LOG_FLOOR) + 1e-9) & (b > np.log(LOG_FLOOR) + 1e-9)
        np.testing.assert_allclose(b[above] - a[above], np.log(4.0), atol=1e-6)

    def test_gain_monotonicity(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=44100) * 0.05
        a = mel_spectrogram(clip_of(x)).values
        b = mel_spectrogram(clip_of(1.7 * x)).values
        assert np.all(b >= a - 1e-12)

    def test_wrong_rate_rejected(self):
        with pytest.raises(ValueError, match="44100"):
            mel_spectrogram(clip_of(np.zeros(1000), rate=48000))

    def test_band_count_invariant(self):
        with pytest.raises(ValueError):
            MelSpectrogram(values=np.zeros((79, 10)), sample_rate=44100, frame_spec=StftFrameSpec())


class TestTimeStretch:
    def test_identity_is_pass_through(self):
        clip = sine(440.0, 1.0)
        out = time_stretch(clip, len(clip.samples))
        np.testing.assert_array_equal(out.samples, clip.samples)

    def test_double_length_preserves_pitch(self):
        clip = sine(1000.0, 1.0)
        out = time_stretch(clip, 88200)
        assert len(out.samples) == 88200
        peak = dominant_frequency(out.samples, 44100)
        assert abs(peak - 1000.0) / 1000.0 <= 0.02

    def test_132bpm_bar_to_exact_length(self):
        n = int(round(240.0 / 132.0 * 44100))  # 80182 samples
        clip = sine(660.0, n / 44100)
        out = time_stretch(clip, 88200)
        assert len(out.samples) == 88200

    def test_ratio_bounds(self):
        clip = sine(440.0, 1.0)
        with pytest.raises(ValueError, match="ratio"):
            time_stretch(clip, len(clip.samples) * 5)
        with pytest.raises(ValueError, match="ratio"):
            time_stretch(clip, len(clip.samples) // 5)

    def test_too_short_rejected(self):
        with pytest.raises(ValueError, match="short"):
            time_stretch(clip_of(np.zeros(2047)), 4096)

    @settings(max_examples=25, deadline=None)
    @given(ratio=st.floats(min_value=0.25, max_value=4.0))
    def test_exact_target_length_property(self, ratio):
        n_in = 8192
        target = int(round(n_in * ratio))
        if not (0.25 <= target / n_in <= 4.0):
            return
        clip = sine(500.0, n_in / 44100)
        out = time_stretch(clip, target)
        assert len(out.samples) == target

    def test_compression_preserves_pitch(self):
        clip = sine(880.0, 2.0)
        out = time_stretch(clip, 44100)
        peak = dominant_frequency(out.samples, 44100)
        assert abs(peak - 880.0) / 880.0 <= 0.02
