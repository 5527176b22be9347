"""Paired sound/vibration recording ingestion and synthetic dataset generation.

A dataset is described by a tab-separated manifest whose rows name the
paired files plus their metadata:

    sound_path  vibration_path  label  machine_id  speed_rpm  load  sensor_id  duration_s

Paths are resolved relative to the manifest's directory.  Lines starting
with ``#`` and blank lines are ignored.  Supported recordings are mono WAV
(PCM16 or IEEE float32) and single-column CSV with a
``sample_rate_hz=<value>`` header line.

The synthetic generator produces deterministic paired recordings: each
sound segment is a mixture of fixed-frequency sinusoids with per-segment
random amplitudes/phases plus Gaussian noise; the vibration is a fixed FIR
filtering of that sound.  Faulty segments additionally carry an
impact-modulated harmonic at the fault frequency (present at reduced level
in the sound as well, since a microphone hears the same impacts), which
gives the classifier a physical signature to detect and the transformer a
learnable path from sound to vibration.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .signal import DegenerateSegmentWarning, SegmentPair, Signal, normalize_segment, segment_signal

__all__ = [
    "DataError",
    "AudioFormatError",
    "ManifestError",
    "ManifestEntry",
    "DatasetManifest",
    "SyntheticSpec",
    "load_recording",
    "write_wav",
    "load_manifest",
    "load_segment_pairs",
    "generate_synthetic",
]


class DataError(ValueError):
    """A data file could not be ingested."""


class AudioFormatError(DataError):
    pass


class ManifestError(DataError):
    pass


VALID_LABELS = ("healthy", "faulty")


def load_recording(path):
    """Read a mono recording (WAV PCM16/float32 or headed CSV) into a Signal."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    if path.suffix.lower() == ".csv":
        return _load_csv(path)
    try:
        rate, data = wavfile.read(str(path))
    except ValueError as exc:
        raise AudioFormatError(f"{path}: unreadable WAV ({exc})") from exc
    if data.ndim != 1:
        raise AudioFormatError(
            f"{path}: mono required, file has {data.shape[1]} channels"
        )
    if data.dtype == np.int16:
        samples = data.astype(np.float32) / 32768.0
    elif data.dtype == np.float32:
        samples = data
    else:
        raise AudioFormatError(
            f"{path}: unsupported sample encoding {data.dtype}; expected PCM16 or IEEE float32"
        )
    return Signal(samples, float(rate))


def _load_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("sample_rate_hz="):
            raise DataError(
                f"{path}: first CSV line must be 'sample_rate_hz=<value>', got {header!r}"
            )
        try:
            rate = float(header.split("=", 1)[1])
        except ValueError as exc:
            raise DataError(f"{path}: malformed sample_rate_hz value in {header!r}") from exc
        values = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric sample {line!r}") from exc
    if not values:
        raise DataError(f"{path}: CSV contains no samples")
    return Signal(np.asarray(values, dtype=np.float32), rate)


def write_wav(path, signal: Signal):
    """Write a Signal as a mono IEEE float32 WAV."""
    wavfile.write(str(path), int(round(signal.sample_rate_hz)),
                  np.ascontiguousarray(signal.samples, dtype="<f4"))
    return Path(path)


@dataclass
class ManifestEntry:
    sound_path: Path
    vibration_path: Path
    label: str
    machine_id: str
    speed: float
    load: str
    sensor_id: str
    duration_seconds: float


@dataclass
class DatasetManifest:
    path: Path
    entries: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    @property
    def speeds(self):
        return sorted({e.speed for e in self.entries})


def load_manifest(path):
    """Parse and validate a manifest; every referenced file must exist."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"{path}: no such manifest")
    base = path.parent
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 8:
                raise ManifestError(
                    f"{path}:{lineno}: expected 8 tab-separated fields, got {len(fields)}"
                )
            sound_p = base / fields[0]
            vib_p = base / fields[1]
            for p in (sound_p, vib_p):
                if not p.exists():
                    raise ManifestError(f"{path}:{lineno}: referenced file missing: {p}")
            label = fields[2]
            if label not in VALID_LABELS:
                raise ManifestError(
                    f"{path}:{lineno}: label must be one of {VALID_LABELS}, got {label!r}"
                )
            try:
                speed = float(fields[4])
            except ValueError as exc:
                raise ManifestError(
                    f"{path}:{lineno}: non-numeric speed {fields[4]!r}"
                ) from exc
            try:
                duration = float(fields[7])
            except ValueError as exc:
                raise ManifestError(
                    f"{path}:{lineno}: non-numeric duration {fields[7]!r}"
                ) from exc
            entries.append(ManifestEntry(sound_p, vib_p, label, fields[3], speed,
                                         fields[5], fields[6], duration))
    return DatasetManifest(path, entries)


def _normalize_with_flag(x):
    degenerate = bool(np.max(x) == np.min(x))
    if degenerate:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateSegmentWarning)
            return normalize_segment(x), True
    return normalize_segment(x), False


def load_segment_pairs(manifest, seg_seconds=1.0):
    """Load every manifest entry into normalized 1-second segment pairs.

    Pairs keep manifest order (chronological) and then segment order within
    each recording.  Length mismatches are truncated to the shorter stream
    with a warning; sample-rate mismatches are errors.
    """
    if not isinstance(manifest, DatasetManifest):
        manifest = load_manifest(manifest)
    pairs = []
    for entry in manifest.entries:
        snd = load_recording(entry.sound_path)
        vib = load_recording(entry.vibration_path)
        if snd.sample_rate_hz != vib.sample_rate_hz:
            raise DataError(
                f"{entry.sound_path} / {entry.vibration_path}: sample rates differ "
                f"({snd.sample_rate_hz} vs {vib.sample_rate_hz})"
            )
        if snd.samples.size != vib.samples.size:
            n = min(snd.samples.size, vib.samples.size)
            warnings.warn(
                f"pair length mismatch ({snd.samples.size} vs {vib.samples.size} samples); "
                f"truncating both to {n}",
                stacklevel=2,
            )
            snd = Signal(snd.samples[:n], snd.sample_rate_hz)
            vib = Signal(vib.samples[:n], vib.sample_rate_hz)
        s_segs = segment_signal(snd, seg_seconds)
        v_segs = segment_signal(vib, seg_seconds)
        for s_raw, v_raw in zip(s_segs, v_segs):
            s_norm, s_deg = _normalize_with_flag(s_raw)
            v_norm, v_deg = _normalize_with_flag(v_raw)
            pairs.append(SegmentPair(
                sound=s_norm.astype(np.float32),
                vibration=v_norm.astype(np.float32),
                label=entry.label,
                machine_id=entry.machine_id,
                speed=entry.speed,
                load=entry.load,
                sensor_id=entry.sensor_id,
                degenerate=s_deg or v_deg,
                sample_rate_hz=snd.sample_rate_hz,
            ))
    return pairs


@dataclass(frozen=True)
class SyntheticSpec:
    """Deterministic recipe for a paired synthetic dataset."""

    seed: int = 0
    num_healthy: int = 16
    num_faulty: int = 16
    sample_rate: float = 4096.0
    segment_seconds: float = 1.0
    base_freqs: tuple = (176.0, 368.0, 752.0)
    fault_freq: float = 640.0
    fault_amp: float = 0.8
    fault_repeat_hz: float = 32.0
    fault_in_sound: float = 0.6
    noise_level: float = 0.02
    fir_taps: tuple = (0.15, 0.45, 0.8, 0.45, 0.15)
    speeds: tuple = (480.0, 680.0, 1010.0)
    machine_id: str = "synthA"
    load: str = "0.20kN"
    sensor_id: str = "acc1"


def _synthesize_pair(spec: SyntheticSpec, rng, faulty: bool):
    n = int(round(spec.sample_rate * spec.segment_seconds))
    t = np.arange(n) / spec.sample_rate
    sound = np.zeros(n)
    for f in spec.base_freqs:
        amp = rng.uniform(0.4, 1.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        sound += amp * np.sin(2.0 * np.pi * f * t + phase)
    if spec.noise_level > 0:
        sound += rng.normal(0.0, spec.noise_level, n)
    impact = np.zeros(n)
    if faulty:
        env = 0.5 * (1.0 - np.cos(2.0 * np.pi * spec.fault_repeat_hz * t))
        impact = env * np.sin(2.0 * np.pi * spec.fault_freq * t)
        sound = sound + spec.fault_in_sound * spec.fault_amp * impact
    # round the sound to its stored precision first so the written vibration
    # equals FIR(stored sound) exactly in the clean case
    sound32 = sound.astype(np.float32)
    vibration = np.convolve(sound32.astype(np.float64), np.asarray(spec.fir_taps, dtype=float),
                            mode="same")
    if faulty:
        vibration = vibration + spec.fault_amp * impact
    return sound32, vibration.astype(np.float32)


def generate_synthetic(spec: SyntheticSpec, out_dir):
    """Write the synthetic dataset (float32 WAVs + manifest.tsv); returns the manifest.

    Labels alternate while both classes remain and speeds cycle through
    ``spec.speeds``, so any chronological prefix carries both classes and
    every speed.  Identical ``spec`` (including seed) yields byte-identical
    files.
    """
    if spec.num_healthy + spec.num_faulty < 1:
        raise DataError("synthetic spec requests zero segments")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)

    labels = []
    h, f = spec.num_healthy, spec.num_faulty
    while h > 0 or f > 0:
        if h > 0:
            labels.append("healthy")
            h -= 1
        if f > 0:
            labels.append("faulty")
            f -= 1

    rows = []
    entries = []
    for i, label in enumerate(labels):
        sound, vibration = _synthesize_pair(spec, rng, label == "faulty")
        s_name = f"seg{i:04d}_sound.wav"
        v_name = f"seg{i:04d}_vib.wav"
        write_wav(out_dir / s_name, Signal(sound, spec.sample_rate))
        write_wav(out_dir / v_name, Signal(vibration, spec.sample_rate))
        speed = spec.speeds[i % len(spec.speeds)]
        rows.append("\t".join([
            s_name, v_name, label, spec.machine_id, f"{speed:g}",
            spec.load, spec.sensor_id, f"{spec.segment_seconds:.3f}",
        ]))
        entries.append(ManifestEntry(out_dir / s_name, out_dir / v_name, label,
                                     spec.machine_id, float(speed), spec.load,
                                     spec.sensor_id, spec.segment_seconds))
    manifest_path = out_dir / "manifest.tsv"
    header = "# sound\tvibration\tlabel\tmachine_id\tspeed_rpm\tload\tsensor_id\tduration_s"
    manifest_path.write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
    return DatasetManifest(manifest_path, entries)
