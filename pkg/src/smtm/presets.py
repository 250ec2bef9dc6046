"""Built-in experiment presets.

Values not pinned by the experiment descriptions (step sizes, iteration
and seed counts) are defaults; override any field with --set or a config
file that `extends` a preset.  Radii follow R^2 = lam^-1 * d * E[X^2] with
lam = 1 unless stated otherwise.
"""

import math

# Step sizes below were tuned by pilot runs to land in reasonable
# acceptance ranges; they are conventions, not contract values.

_BURNIN_KERNELS = (
    {"label": "rwm", "kernel": "rwm", "step": 0.75},
    {"label": "gb-mtm", "kernel": "mtm", "weight": "gb", "n_candidates": 5, "step": 0.75},
    {"label": "lb-mtm", "kernel": "mtm", "weight": "lb", "n_candidates": 5, "step": 0.75},
    {"label": "srwm", "kernel": "srwm", "step": 0.35},
    {"label": "gb-smtm", "kernel": "smtm", "weight": "gb", "n_candidates": 5, "step": 0.35},
    {"label": "lb-smtm", "kernel": "smtm", "weight": "lb", "n_candidates": 5, "step": 0.35},
)

PRESETS = {
    # d=10 burn-in from the far tail, light vs heavy target.
    "burnin-light": {
        "mode": "chains",
        "target": "gaussian(0,1)^10",
        "radius": math.sqrt(10.0),
        "x0": 10.0,
        "iterations": 5000,
        "n_seeds": 10,
        "retention": "full",
        "reference": "mean",
        "kernels": list(_BURNIN_KERNELS),
    },
    "burnin-heavy": {
        "extends": "burnin-light",
        "target": "student_t(11,0,1)^10",
        # E[X^2] = 11/9 for t(11), so R = sqrt(10 * 11/9).
        "radius": math.sqrt(10.0 * 11.0 / 9.0),
    },
    # d=20 target centered at 10 with the chart still centered at 0:
    # the sphere covers the mass only through a larger radius.
    "mislocated": {
        "mode": "chains",
        "target": "student_t(21,10,1)^20",
        # R = sqrt((s^2 + m^2) d) = sqrt(101 * 20).
        "radius": math.sqrt(101.0 * 20.0),
        "x0": 0.0,
        "iterations": 8000,
        "n_seeds": 10,
        "retention": "full",
        "reference": "mean",
        "kernels": [
            {"label": "srwm", "kernel": "srwm", "step": 0.01},
            {"label": "gb-smtm-5", "kernel": "smtm", "weight": "gb", "n_candidates": 5, "step": 0.01},
            {"label": "gb-smtm-20", "kernel": "smtm", "weight": "gb", "n_candidates": 20, "step": 0.01},
            {"label": "lb-smtm-5", "kernel": "smtm", "weight": "lb", "n_candidates": 5, "step": 0.01},
            {"label": "lb-smtm-20", "kernel": "smtm", "weight": "lb", "n_candidates": 20, "step": 0.01},
        ],
    },
    # Large-N trap: GB-MTM stalls in the far tail while GB-SMTM crosses.
    "pathological": {
        "mode": "chains",
        "target": "gaussian(0,1)^10",
        "radius": math.sqrt(10.0),
        "x0": 10.0,
        "iterations": 5000,
        "n_seeds": 10,
        "retention": "full",
        "reference": "zero",
        "kernels": [
            {"label": "gb-mtm-100", "kernel": "mtm", "weight": "gb", "n_candidates": 100, "step": 0.75},
            {"label": "gb-smtm-100", "kernel": "smtm", "weight": "gb", "n_candidates": 100, "step": 0.35},
        ],
    },
    # Limit-functional robustness curves, f = N(m, 1 - m^2), N = 3.
    "robust-center": {
        "mode": "curves",
        "weight": "lb",
        "centers": [0.2, 0.5, 0.8],
        "lam": 1.0,
        "n_candidates": 3,
        "samples": 200000,
        "ell_grid": [0.2, 6.0, 30],
    },
    "robust-radius": {
        "mode": "curves",
        "weight": "lb",
        "lams": [0.1, 1.0, 10.0],
        "center": 0.5,
        "n_candidates": 3,
        "samples": 200000,
        "ell_grid": [0.2, 6.0, 30],
    },
    # Total acceptance versus candidate count at m = 0.5.
    "large-n": {
        "mode": "curves",
        "n_values": [1, 2, 4, 8, 16, 32, 64],
        "center": 0.5,
        "lam": 1.0,
        "ell": 1.2,
        "samples": 200000,
    },
    # Acceptance-vs-ESJD frontiers via step-size optimization.
    "scaling-curves": {
        "mode": "scaling",
        "center": 0.5,
        "n_candidates": 3,
        "samples": 200000,
        "ell_grid": [0.2, 6.0, 30],
    },
}
