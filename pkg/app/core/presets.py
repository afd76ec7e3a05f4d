"""
Named parameter bundles for the reference regimes (weak and strong coupling,
undriven and driven, angle scans).

Values are flat config keys, layered underneath the config file and
``--set`` overrides. Presets inherit the default ``printed`` coupling
convention and leave ``auto_refine`` off.
"""
import math

_BASE = {
    "Omega": 20.0,
    "theta0": math.pi / 4,
    "Delta": 0.0,
    "omegaD": 0.0,
    "depth": "25,25",
}

PRESETS: dict[str, dict] = {
    "fig1": {**_BASE, "gamma0": 1.0, "cycles": 15},
    "fig1-unitary": {**_BASE, "gamma0": 1e-12, "cycles": 15},
    "fig3": {**_BASE, "mode": "sweep", "sweep_axis1": "gamma0:0.01,1.0", "cycles": 15},
    "fig4": {**_BASE, "gamma0": 0.01, "cycles": 15, "sweep_cycles": "5,15"},
    "fig5": {**_BASE, "mode": "sweep", "gamma0": 0.01, "cycles": 10, "sweep_axis1": "Delta:0,0.3,0.5,1,3,5"},
    "fig6": {**_BASE, "gamma0": 0.01, "Delta": 3.0, "omegaD": 0.1, "cycles": 10},
    "fig7": {
        **_BASE,
        "mode": "sweep",
        "gamma0": 0.01,
        "cycles": 8,
        "sweep_axis1": "Delta:0:8:17",
        "sweep_axis2": "omegaD:0:8:17",
        "sweep_cycles": "2,3,4,5,8",
    },
    "fig8": {**_BASE, "gamma0": 1.0, "cycles": 10},
    "fig8-frozen": {**_BASE, "gamma0": 1.0, "Delta": 7.0, "omegaD": 4.0, "cycles": 10},
    "fig9": {**_BASE, "gamma0": 1.0, "Delta": 5.0, "omegaD": 5.0, "cycles": 10},
    "fig10": {
        **_BASE,
        "mode": "sweep",
        "gamma0": 1.0,
        "cycles": 5,
        "sweep_axis1": "Delta:0:8:17",
        "sweep_axis2": "omegaD:0:8:17",
        "sweep_cycles": "2,3,4,5",
    },
    "theta-scan": {**_BASE, "mode": "theta-scan", "gamma0": 1.0, "Delta": 7.0, "omegaD": 4.0, "cycles": 10},
}


def get_preset(name: str) -> dict:
    try:
        return dict(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset '{name}'; available: {', '.join(sorted(PRESETS))}") from None
