"""slotbragg: photon indistinguishability of dissipative quantum emitters in
slot-Bragg nanocavities, and a surrogate-assisted evolutionary design loop.

Submodules:
    qed        - single-excitation Lindblad dynamics, two-time correlations,
                 indistinguishability, regime maps and thresholds
    tmm        - 1D transfer-matrix optics (spectra, resonances, fields)
    photonics  - slot-Bragg geometry, calibrated index model, emitter presets,
                 geometry-to-figures pipeline
    surrogate  - from-scratch MLP regressor mapping corrugations to I
    evolve     - genetic algorithm and the optimise-then-verify loop
    pipeline   - run configuration, dataset generation, CSV interchange
    cli        - command-line interface (console script `slotbragg`)
"""

__version__ = "0.1.0"

from . import errors  # noqa: F401  (import order: errors has no dependencies)
