"""Train the neural surrogate on a small physics dataset.

The surrogate replaces the full transfer-matrix plus quantum-dynamics
evaluation inside optimisation loops. Here a reduced dataset (400 rows
instead of the production 5000) keeps the demo quick; expect a few minutes.
"""

import pathlib
import time

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from slotbragg import photonics, pipeline, surrogate

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

model = photonics.default_index_model()
emitter = photonics.emitter_preset("rt_benchmark")
geometry = photonics.preset_geometry("rt_benchmark")

print("generating 400 corrugation samples...")
t0 = time.time()
table = pipeline.generate_dataset(geometry, emitter, model, n=400,
                                  bounds=photonics.CORRUGATION_BOUNDS_NM,
                                  seed=1)
print(f"done in {time.time() - t0:.0f}s ({table.failed_count} failures)")
csv_path = OUT / "demo_dataset.csv"
pipeline.write_dataset_csv(table, str(csv_path), "demo", 1)
dataset = pipeline.read_dataset_csv(str(csv_path))
print(f"targets span [{dataset.targets.min():.3f}, {dataset.targets.max():.3f}]")

config = surrogate.TrainConfig(epochs=2000, batch_size=32, learning_rate=1e-2,
                               holdout_fraction=0.2, patience=100, seed=1)
net = surrogate.init_model((dataset.inputs.shape[1], 64, 64, 1), seed=1)
t0 = time.time()
trained, history = surrogate.train(net, dataset, config)
rmse = float(np.sqrt(history.holdout_loss[history.best_epoch]))
print(f"trained {len(history.train_loss)} epochs in {time.time() - t0:.0f}s; "
      f"holdout RMSE = {rmse:.4f}")

surrogate.save(trained, str(OUT / "demo_model.json"))

pred = surrogate.predict_batch(trained, dataset.inputs)
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
ax1.semilogy(history.train_loss, label="train")
ax1.semilogy(history.holdout_loss, label="holdout")
ax1.axvline(history.best_epoch, color="k", ls=":", lw=0.8)
ax1.set_xlabel("epoch")
ax1.set_ylabel("MSE")
ax1.legend()
ax2.plot(dataset.targets, pred, ".", ms=3, alpha=0.6)
lims = [dataset.targets.min(), dataset.targets.max()]
ax2.plot(lims, lims, "k--", lw=0.8)
ax2.set_xlabel("physics I")
ax2.set_ylabel("surrogate I")
fig.tight_layout()
fig.savefig(OUT / "surrogate_training.png", dpi=150)
print(f"figures and model written to {OUT}")
