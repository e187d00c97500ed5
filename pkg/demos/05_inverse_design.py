"""Close the loop: evolve corrugation widths on the surrogate, re-verify the
winners with physics.

Runs demo 04 first if its surrogate model is missing. The genetic algorithm
only ever queries the neural surrogate; the expensive physics pipeline is
reserved for the handful of final candidates, which is what makes the search
tractable (here: 64 x 60 surrogate calls against ~6 physics calls).
"""

import pathlib
import runpy

import numpy as np

from slotbragg import evolve, photonics, surrogate

OUT = pathlib.Path(__file__).parent / "output"
model_path = OUT / "demo_model.json"
if not model_path.exists():
    print("surrogate model missing; running demo 04 first\n")
    runpy.run_path(str(pathlib.Path(__file__).parent / "04_surrogate_training.py"))

net = surrogate.load(str(model_path))
index_model = photonics.default_index_model()
emitter = photonics.emitter_preset("rt_benchmark")
geometry = photonics.preset_geometry("rt_benchmark")

config = evolve.GAConfig(genome_length=geometry.periods, population_size=64,
                         generations=60, seed=5)
report = evolve.optimize_and_verify(net, geometry, emitter, index_model,
                                    config, top_k=5)

print(f"surrogate evaluations: {report.surrogate_evaluations}")
print(f"physics evaluations:   {report.physics_evaluations}")
print(f"baseline physics I:    {report.baseline.figures.indist:.4f}")
print(f"winner physics I:      {report.winner.figures.indist:.4f} "
      f"(surrogate said {report.winner.surrogate_indist:.4f})")
print(f"resonance shift:       {report.resonance_shift_nm:+.2f} nm from target")

print("\nper-candidate comparison (surrogate vs physics):")
for cand in report.candidates:
    physics = (f"{cand.figures.indist:.4f}" if cand.figures
               else f"failed: {cand.error}")
    print(f"  surrogate {cand.surrogate_indist:.4f} -> physics {physics}")

widths = np.array(report.winner.omega)
dev = widths - photonics.NOMINAL_CORRUGATION_NM
print("\nwinning corrugation profile (deviation from nominal, nm, "
      "innermost first):")
print(np.array2string(np.round(dev, 1), max_line_width=78))
inner = np.abs(dev[: len(dev) // 2]).mean()
outer = np.abs(dev[len(dev) // 2:]).mean()
print(f"mean |deviation|: inner half {inner:.1f} nm, outer half {outer:.1f} nm")

if report.winner_is_baseline:
    print("\nnote: at this reduced dataset size the surrogate overestimates "
          "its own optima (an optimiser exploits any upward model error), so "
          "physics verification rejected them and kept the incumbent. With "
          "the production 5000-row dataset (holdout RMSE ~ 0.007) the same "
          "loop finds corrugation tapers that genuinely beat the uniform "
          "baseline; see the acceptance suite.")
