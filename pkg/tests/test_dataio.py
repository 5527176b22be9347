import numpy as np
import pytest
from scipy.io import wavfile

from opvib.dataio import (
    AudioFormatError,
    DataError,
    ManifestError,
    SyntheticSpec,
    generate_synthetic,
    load_manifest,
    load_recording,
    load_segment_pairs,
    write_wav,
)
from opvib.signal import Signal, spectrogram


def test_float32_wav_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    samples = rng.uniform(-1, 1, 1000).astype(np.float32)
    path = write_wav(tmp_path / "x.wav", Signal(samples, 4096.0))
    loaded = load_recording(path)
    assert loaded.sample_rate_hz == 4096.0
    assert np.array_equal(loaded.samples, samples)


def test_pcm16_scaling(tmp_path):
    path = tmp_path / "pcm.wav"
    wavfile.write(path, 8000, np.array([16384, -32768, 0], dtype=np.int16))
    sig = load_recording(path)
    assert np.allclose(sig.samples, [0.5, -1.0, 0.0])


def test_stereo_wav_rejected(tmp_path):
    path = tmp_path / "stereo.wav"
    wavfile.write(path, 8000, np.zeros((100, 2), dtype=np.int16))
    with pytest.raises(AudioFormatError, match="mono required"):
        load_recording(path)


def test_unsupported_encoding_rejected(tmp_path):
    path = tmp_path / "f64.wav"
    wavfile.write(path, 8000, np.zeros(100, dtype=np.float64))
    with pytest.raises(AudioFormatError, match="float64"):
        load_recording(path)


def test_csv_recording(tmp_path):
    path = tmp_path / "sig.csv"
    path.write_text("sample_rate_hz=2048\n0.5\n-0.25\n0.125\n")
    sig = load_recording(path)
    assert sig.sample_rate_hz == 2048.0
    assert np.allclose(sig.samples, [0.5, -0.25, 0.125])


def test_csv_errors(tmp_path):
    missing_header = tmp_path / "a.csv"
    missing_header.write_text("0.5\n0.2\n")
    with pytest.raises(DataError, match="sample_rate_hz"):
        load_recording(missing_header)
    bad_value = tmp_path / "b.csv"
    bad_value.write_text("sample_rate_hz=100\n0.5\noops\n")
    with pytest.raises(DataError, match=":3"):
        load_recording(bad_value)


def test_missing_file_is_data_error(tmp_path):
    with pytest.raises(DataError):
        load_recording(tmp_path / "nope.wav")


def _write_pair(tmp_path, stem, n=64, rate=32):
    rng = np.random.default_rng(hash(stem) % 2**32)
    write_wav(tmp_path / f"{stem}_s.wav", Signal(rng.uniform(-1, 1, n).astype(np.float32), rate))
    write_wav(tmp_path / f"{stem}_v.wav", Signal(rng.uniform(-1, 1, n).astype(np.float32), rate))
    return f"{stem}_s.wav\t{stem}_v.wav"


def test_manifest_roundtrip(tmp_path):
    rows = [
        _write_pair(tmp_path, "a") + "\thealthy\tm1\t480\tL1\tacc1\t2.0",
        _write_pair(tmp_path, "b") + "\tfaulty\tm1\t680\tL1\tacc1\t2.0",
        _write_pair(tmp_path, "c") + "\thealthy\tm1\t1010\tL1\tacc1\t2.0",
    ]
    mpath = tmp_path / "manifest.tsv"
    mpath.write_text("# header\n" + "\n".join(rows) + "\n")
    manifest = load_manifest(mpath)
    assert len(manifest) == 3
    assert manifest.speeds == [480.0, 680.0, 1010.0]
    assert manifest.entries[1].label == "faulty"


def test_manifest_missing_file_reports_row(tmp_path):
    mpath = tmp_path / "manifest.tsv"
    mpath.write_text("ghost_s.wav\tghost_v.wav\thealthy\tm1\t480\tL1\tacc1\t1.0\n")
    with pytest.raises(ManifestError, match=":1"):
        load_manifest(mpath)


def test_manifest_bad_label_and_speed(tmp_path):
    good = _write_pair(tmp_path, "z")
    mpath = tmp_path / "manifest.tsv"
    mpath.write_text(good + "\tbroken\tm1\t480\tL1\tacc1\t1.0\n")
    with pytest.raises(ManifestError, match="label"):
        load_manifest(mpath)
    mpath.write_text(good + "\thealthy\tm1\tfast\tL1\tacc1\t1.0\n")
    with pytest.raises(ManifestError, match="speed"):
        load_manifest(mpath)


def test_manifest_wrong_field_count(tmp_path):
    mpath = tmp_path / "manifest.tsv"
    mpath.write_text("only\tthree\tfields\n")
    with pytest.raises(ManifestError, match="8"):
        load_manifest(mpath)


def test_pair_length_mismatch_truncates_with_warning(tmp_path):
    rng = np.random.default_rng(1)
    write_wav(tmp_path / "s.wav", Signal(rng.uniform(-1, 1, 4100).astype(np.float32), 4096))
    write_wav(tmp_path / "v.wav", Signal(rng.uniform(-1, 1, 4096).astype(np.float32), 4096))
    mpath = tmp_path / "m.tsv"
    mpath.write_text("s.wav\tv.wav\thealthy\tm1\t480\tL1\tacc1\t1.0\n")
    with pytest.warns(UserWarning, match="truncating"):
        pairs = load_segment_pairs(mpath)
    assert len(pairs) == 1
    assert pairs[0].sound.size == 4096 and pairs[0].vibration.size == 4096


def test_pair_rate_mismatch_is_error(tmp_path):
    write_wav(tmp_path / "s.wav", Signal(np.zeros(64, dtype=np.float32), 32))
    write_wav(tmp_path / "v.wav", Signal(np.zeros(64, dtype=np.float32), 64))
    mpath = tmp_path / "m.tsv"
    mpath.write_text("s.wav\tv.wav\thealthy\tm1\t480\tL1\tacc1\t1.0\n")
    with pytest.raises(DataError, match="sample rates differ"):
        load_segment_pairs(mpath)


def test_loaded_pairs_are_normalized(tmp_path):
    manifest = generate_synthetic(SyntheticSpec(seed=3, num_healthy=2, num_faulty=2), tmp_path / "d")
    pairs = load_segment_pairs(manifest)
    assert len(pairs) == 4
    for p in pairs:
        for arr in (p.sound, p.vibration):
            assert arr.min() == -1.0 and arr.max() == 1.0
        assert p.sample_rate_hz == 4096.0
        assert p.sound.size == p.vibration.size == 4096


def test_synthetic_generation_is_byte_deterministic(tmp_path):
    spec = SyntheticSpec(seed=7, num_healthy=3, num_faulty=2)
    m1 = generate_synthetic(spec, tmp_path / "one")
    m2 = generate_synthetic(spec, tmp_path / "two")
    assert m1.path.read_bytes() == m2.path.read_bytes()
    for e1, e2 in zip(m1.entries, m2.entries):
        assert e1.sound_path.read_bytes() == e2.sound_path.read_bytes()
        assert e1.vibration_path.read_bytes() == e2.vibration_path.read_bytes()


def test_synthetic_labels_interleave_and_speeds_cycle(tmp_path):
    manifest = generate_synthetic(SyntheticSpec(seed=1, num_healthy=3, num_faulty=3), tmp_path / "d")
    labels = [e.label for e in manifest.entries]
    assert labels == ["healthy", "faulty"] * 3
    speeds = [e.speed for e in manifest.entries]
    assert speeds == [480.0, 680.0, 1010.0, 480.0, 680.0, 1010.0]


def test_fault_frequency_peak_present_only_in_faulty_vibration(tmp_path):
    spec = SyntheticSpec(seed=5, num_healthy=4, num_faulty=4)
    manifest = generate_synthetic(spec, tmp_path / "d")
    bin_width = spec.sample_rate / 256.0
    fault_bin = int(round(spec.fault_freq / bin_width))
    for entry in manifest.entries:
        vib = load_recording(entry.vibration_path).samples.astype(np.float64)
        spec_energy = spectrogram(vib).mean(axis=0)
        local = spec_energy[fault_bin] / (spec_energy.mean() + 1e-12)
        if entry.label == "faulty":
            assert local > 3.0
        else:
            assert local < 0.5


def test_noiseless_faultless_vibration_is_exact_fir(tmp_path):
    spec = SyntheticSpec(seed=9, num_healthy=2, num_faulty=0, noise_level=0.0)
    manifest = generate_synthetic(spec, tmp_path / "d")
    taps = np.asarray(spec.fir_taps)
    for entry in manifest.entries:
        snd = load_recording(entry.sound_path).samples
        vib = load_recording(entry.vibration_path).samples
        expected = np.convolve(snd.astype(float), taps, mode="same").astype(np.float32)
        assert np.array_equal(vib, expected)


def test_zero_segment_request_is_error(tmp_path):
    with pytest.raises(DataError):
        generate_synthetic(SyntheticSpec(num_healthy=0, num_faulty=0), tmp_path / "d")
