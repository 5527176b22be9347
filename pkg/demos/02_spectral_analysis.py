"""Spectral fingerprints of healthy vs faulty machines.

Generates a small synthetic paired dataset and inspects where the energy
sits: faulty vibrations carry an impact-modulated harmonic that healthy
segments lack.
"""

import tempfile

import numpy as np

from opvib import SyntheticSpec, generate_synthetic, load_recording, spectrogram

spec = SyntheticSpec(seed=4, num_healthy=3, num_faulty=3)
with tempfile.TemporaryDirectory() as workdir:
    manifest = generate_synthetic(spec, workdir)
    bin_hz = spec.sample_rate / 256.0
    fault_bin = int(round(spec.fault_freq / bin_hz))
    print(f"sample rate {spec.sample_rate:g} Hz, {bin_hz:g} Hz per bin, "
          f"fault harmonic at {spec.fault_freq:g} Hz = bin {fault_bin}")
    print(f"{'label':>8s} {'top bins by energy':>24s} {'fault-bin share':>16s}")
    for entry in manifest.entries:
        vib = load_recording(entry.vibration_path).samples.astype(np.float64)
        energy = spectrogram(vib).mean(axis=0)
        top = np.argsort(energy)[::-1][:3]
        share = energy[fault_bin] / energy.sum()
        print(f"{entry.label:>8s} {str(sorted(top.tolist())):>24s} {share:15.1%}")
print("\nboth classes share the base-frequency peaks; only faulty segments"
      "\nlight up the fault bin, which is what the detector learns to key on")
