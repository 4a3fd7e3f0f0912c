import math

import numpy as np
import pytest
from scipy.fft import dct

from melbridge.metrics import (MCD_CONST, F0Track, _difference_function, estimate_f0,
                               evaluate_pair, f0_rmse, mcd, mel_cepstra, vuv_error)

from conftest import SR, harmonic_plus_noise, sine


def brute_difference(frame, window, max_lag):
    return np.array([np.sum((frame[:window] - frame[tau:tau + window]) ** 2)
                     for tau in range(max_lag + 1)])


def test_difference_function_matches_direct_sum(rng):
    window, max_lag = 60, 40
    frames = rng.standard_normal((3, window + max_lag))
    fast = _difference_function(frames, window, max_lag)
    for row, frame in zip(fast, frames):
        np.testing.assert_allclose(row, brute_difference(frame, window, max_lag), atol=1e-9)


def test_mcd_constant():
    assert MCD_CONST == pytest.approx(6.1418514, rel=1e-7)


def test_mcd_identity_and_symmetry(rng):
    a, b = harmonic_plus_noise(rng), harmonic_plus_noise(rng)
    assert mcd(a, a, SR) == 0.0
    assert mcd(a, b, SR) == mcd(b, a, SR) > 0


def test_mcd_gain_invariance(rng):
    noise = 0.1 * rng.standard_normal(SR)
    assert mcd(noise, 2 * noise, SR) < 1e-9


def test_dct_of_constant_frame_has_no_higher_coefficients():
    c = dct(np.full((1, 80), -3.2), type=2, norm="ortho", axis=1)
    assert np.abs(c[0, 1:]).max() < 1e-12


def test_silence_cepstra_constant():
    c = mel_cepstra(np.zeros(SR), SR)
    assert c.shape[1] == 13 and np.abs(c).max() < 1e-9


def test_mcd_length_mismatch_uses_common_frames(rng):
    a = harmonic_plus_noise(rng)
    assert mcd(a, a[:SR // 2], SR) < 1e-9


def test_mel_cepstra_rejects_empty():
    with pytest.raises(ValueError):
        mel_cepstra(np.zeros(0), SR)


@pytest.mark.parametrize("freq", [110.0, 220.0, 440.0])
def test_sine_f0(freq):
    track = estimate_f0(sine(freq), SR)
    assert track.voiced.all()
    assert np.abs(track.f0 - freq).max() <= 3.0


def test_noise_mostly_unvoiced(rng):
    track = estimate_f0(rng.standard_normal(SR), SR)
    assert np.mean(~track.voiced) >= 0.9


def test_silence_unvoiced():
    track = estimate_f0(np.zeros(SR), SR)
    assert not track.voiced.any() and not track.f0.any()


def test_voiced_iff_nonzero_f0(rng):
    track = estimate_f0(harmonic_plus_noise(rng), SR)
    assert np.array_equal(track.voiced, track.f0 > 0)
    assert np.all((track.f0[track.voiced] >= 50) & (track.f0[track.voiced] <= 600))


def test_f0_rmse_close_sines():
    a, b = estimate_f0(sine(220.0), SR), estimate_f0(sine(224.0), SR)
    assert f0_rmse(a, b) == pytest.approx(4.0, abs=1.0)
    assert f0_rmse(a, b) == f0_rmse(b, a)


def test_identical_tracks():
    t = estimate_f0(sine(220.0), SR)
    assert f0_rmse(t, t) == 0.0 and vuv_error(t, t) == 0.0


def test_inverted_flags_full_disagreement():
    a = F0Track(np.array([100.0, 0, 120.0, 0]), np.array([True, False, True, False]), 220, SR)
    b = F0Track(np.array([0, 110.0, 0, 130.0]), ~a.voiced, 220, SR)
    assert vuv_error(a, b) == 100.0
    assert f0_rmse(a, b) is None


def test_sine_vs_noise_vuv(rng):
    a, b = estimate_f0(sine(220.0), SR), estimate_f0(rng.standard_normal(SR), SR)
    assert vuv_error(a, b) >= 80.0


def test_track_mismatch_rejected():
    a = F0Track(np.zeros(3), np.zeros(3, bool), 220, SR)
    b = F0Track(np.zeros(3), np.zeros(3, bool), 160, 16000)
    with pytest.raises(ValueError):
        vuv_error(a, b)


def test_trailing_silence_invariance(rng):
    a, b = harmonic_plus_noise(rng), harmonic_plus_noise(rng)
    hop = int(round(0.010 * SR))
    base = evaluate_pair(a, b, SR)
    padded = evaluate_pair(np.concatenate([a, np.zeros(hop)]), b, SR)
    for key in ("mcd_db", "f0_rmse_hz", "vuv_error_pct"):
        assert padded[key] == pytest.approx(base[key], abs=1e-9)


def test_evaluate_pair_record(rng):
    x = harmonic_plus_noise(rng)
    rec = evaluate_pair(x, x, SR)
    assert rec["mcd_db"] == 0 and rec["f0_rmse_hz"] == 0 and rec["vuv_error_pct"] == 0
    assert rec["frames"] == 1 + (SR - 551) // 220
    assert all(v is None or (math.isfinite(v) and v >= 0) for v in rec.values())
