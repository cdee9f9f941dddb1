"""Named experiment configurations for the command line.

Presets are plain config dicts; everything here can also be supplied through
--config with the same schema.
"""

PRESETS = {
    "geometry": {
        "rcm-2d-demo": {
            "family": {"kind": "rcm", "dim": 2, "intensity": 1.0,
                       "c1": 0.5, "c2": 1.0},
            "eps": 0.125,
            "grid_cells": 256,
            "domain_side": 1.0,
            "seed": 7,
        },
        "boolean-3d-demo": {
            "family": {"kind": "boolean", "dim": 3, "intensity": 1.0,
                       "r0": 0.3, "radius_exponent": 1.0},
            "eps": 0.25,
            "grid_cells": 64,
            "domain_side": 1.0,
            "seed": 7,
        },
    },
    "solve": {
        "mms-2d": {
            "mode": "hole-free",
            "dim": 2,
            "grid_cells": 64,
            "domain_side": 1.0,
            "reaction": 1.0,
            "source": "-(2*pi*pi+1)*sin(pi*x)*sin(pi*y)",
            "tol": 1e-10,
            "seed": 0,
        },
        "perforated-2d": {
            "mode": "family",
            "family": {"kind": "rcm", "dim": 2, "intensity": 1.0,
                       "c1": 0.5, "c2": 1.0},
            "eps": 0.125,
            "grid_cells": 128,
            "domain_side": 1.0,
            "reaction": 1.0,
            "source": "-1",
            "tol": 1e-8,
            "seed": 11,
        },
    },
    "capacity": {
        "ball-oracle": {
            "mode": "newton-ladder",
            "radius": 0.1,
            "outer_radius": 1.0,
            "dx_list": [0.08333333333333333, 0.041666666666666664,
                        0.020833333333333332],
            "tol": 1e-7,
            "seed": 0,
        },
        "strange-3d": {
            "mode": "strange-term",
            "family": {"kind": "boolean", "dim": 3, "intensity": 1.0,
                       "r0": 0.2, "radius_exponent": 3.0},
            "domain_side": 1.0,
            "h_list": [0.75, 0.55],
            "eps_list": [0.125, 0.0625, 0.03125],
            "replicas": 3,
            "cells_per_h": 32,
            "seed": 2024,
        },
        "conductivity-2d": {
            "mode": "conductivity",
            "family": {"kind": "boolean", "dim": 2, "intensity": 2.0,
                       "r0": 0.12, "radius_exponent": 1.0},
            "eps": 1.0,
            "domain_side": 1.0,
            "h": 0.5,
            "gamma": 1.0,
            "grid_cells": 128,
            "seed": 3,
        },
    },
    "ergodic": {
        "periodic-2d": {
            "functional": "local_capacity",
            "family": {"kind": "lattice", "dim": 2, "lattice_spacing": 1.0,
                       "r0": 0.3, "radius_exponent": 1.0},
            "t_list": [2.0, 4.0, 8.0],
            "replicas": 4,
            "dx": 0.0625,
            "seed": 5,
        },
        "boolean-2d": {
            "functional": "local_capacity",
            "family": {"kind": "boolean", "dim": 2, "intensity": 1.0,
                       "r0": 0.25, "radius_exponent": 1.0},
            "t_list": [2.0, 8.0],
            "replicas": 16,
            "dx": 0.0625,
            "seed": 2024,
        },
        "boolean-3d-spot": {
            "functional": "local_capacity",
            "family": {"kind": "boolean", "dim": 3, "intensity": 0.5,
                       "r0": 0.34, "radius_exponent": 1.0},
            "t_list": [2.0, 8.0],
            "replicas": 8,
            "dx": 0.16666666666666666,
            "seed": 2024,
        },
    },
    "sweep": {
        "boolean-critical-3d": {
            "family": {"kind": "boolean", "dim": 3, "intensity": 1.0,
                       "r0": 0.2, "radius_exponent": 3.0},
            "domain_side": 1.0,
            "eps_list": [0.125, 0.0625, 0.03125],
            "h_list": [0.75, 0.55],
            "reaction": 1.0,
            "source": "-1",
            "grid_cells": 96,
            "capacity_cells_per_h": 32,
            "replicas": 3,
            "seed": 42,
        },
        "rcm-2d": {
            "family": {"kind": "rcm", "dim": 2, "intensity": 1.0,
                       "c1": 0.5, "c2": 1.0},
            "domain_side": 1.0,
            "eps_list": [0.125, 0.0625, 0.03125],
            "h_list": [0.75, 0.55],
            "reaction": 1.0,
            "source": "-1",
            "grid_cells": 256,
            "capacity_cells_per_h": 32,
            "replicas": 2,
            "seed": 31,
        },
    },
    "density-check": {
        "tubes-2d": {
            "family": {"kind": "rcm", "dim": 2, "intensity": 1.0,
                       "c1": 0.5, "c2": 1.0},
            "eps": 0.0625,
            "grid_cells": 256,
            "domain_side": 1.0,
            "radius": 0.2,
            "probes": 200,
            "seed": 13,
        },
    },
}
