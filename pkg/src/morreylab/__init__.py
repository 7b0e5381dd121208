"""Morrey and weak-Morrey quasi-norms and composition-operator analysis."""

from morreylab.core import (
    INF,
    AxisBox,
    GridFunction,
    GridSet,
    GridSpec,
    MorreyParams,
    regime_index,
    sorted_sides,
)
from morreylab.exact_norms import (
    NormValue,
    box_indicator_norm,
    dilation_norm_factor,
    indicator_weak_norm,
    slab_indicator_norm,
)
from morreylab.grid_norms import (
    CubeSearchPolicy,
    PrefixSumTable,
    build_prefix_table,
    morrey_norm_grid,
    oracle_r_sweep,
    weak_morrey_norm_grid,
)

__all__ = [
    "INF",
    "AxisBox",
    "CubeSearchPolicy",
    "GridFunction",
    "GridSet",
    "GridSpec",
    "MorreyParams",
    "NormValue",
    "PrefixSumTable",
    "box_indicator_norm",
    "build_prefix_table",
    "dilation_norm_factor",
    "indicator_weak_norm",
    "morrey_norm_grid",
    "oracle_r_sweep",
    "regime_index",
    "slab_indicator_norm",
    "sorted_sides",
    "weak_morrey_norm_grid",
]

__version__ = "0.1.0"
