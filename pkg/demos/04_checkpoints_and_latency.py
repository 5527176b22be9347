"""Checkpoint round trips and single-segment inference latency."""

import tempfile
from pathlib import Path

import numpy as np

from opvib import OpUNet, Tensor, load_checkpoint, no_grad, parameter_count, save_checkpoint
from opvib.evaluation import benchmark_inference, real_time_factor

model = OpUNet()  # default architecture: 4096-sample segments
print(model.describe())

with tempfile.TemporaryDirectory() as workdir:
    path = Path(workdir) / "transformer.opvb"
    save_checkpoint(model, path, meta={"seed": 0, "iteration": 0, "val_loss": None})
    print(f"\ncheckpoint: {path.stat().st_size} bytes "
          f"for {parameter_count(model)} float32 parameters + descriptor")

    reloaded, meta = load_checkpoint(path)
    x = Tensor(np.random.default_rng(0).uniform(-1, 1, (1, 4096)).astype(np.float32))
    with no_grad():
        identical = np.array_equal(model(x).data, reloaded(x).data)
    print(f"reloaded forward pass bit-identical: {identical}")

median_ms = benchmark_inference(model, x.data[0], repetitions=30)
print(f"\nmedian inference: {median_ms:.2f} ms per 1-second segment")
print(f"real-time factor: {real_time_factor(median_ms):.0f}x faster than real time")
