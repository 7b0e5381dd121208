"""Composition operators f -> f o phi: exact results, bounds and certificates."""

from morreylab.composition.jacobian import (
    CERTIFIED,
    FAILED,
    INCONCLUSIVE,
    BiLipCertificate,
    SingularProfile,
    bilip_certify,
    jacobian_profile,
    svd_ascending,
)
from morreylab.composition.maps import (
    BUILTIN_MAPS,
    AffineMap,
    SmoothMap,
    builtin_map,
    diag_map,
    exp1d_map,
    identity_map,
    shear_cubic_map,
)
from morreylab.composition.operators import (
    OperatorBound,
    default_diag_witnesses,
    diag_opnorm_lower,
    exp_interval_family,
    lebesgue_opnorm_affine,
    min_entry_lower_bound,
    morrey_opnorm_upper_affine,
    opnorm_lower_search,
    preimage_measure,
    diag_closed_form_bound,
    pullback_grid,
    scalar_opnorm_exact,
    set_ratio_estimator,
    shear_witness_box,
)

__all__ = [
    "BUILTIN_MAPS",
    "CERTIFIED",
    "FAILED",
    "INCONCLUSIVE",
    "AffineMap",
    "BiLipCertificate",
    "OperatorBound",
    "SingularProfile",
    "SmoothMap",
    "bilip_certify",
    "builtin_map",
    "default_diag_witnesses",
    "diag_map",
    "diag_opnorm_lower",
    "exp1d_map",
    "exp_interval_family",
    "identity_map",
    "jacobian_profile",
    "lebesgue_opnorm_affine",
    "min_entry_lower_bound",
    "morrey_opnorm_upper_affine",
    "opnorm_lower_search",
    "preimage_measure",
    "diag_closed_form_bound",
    "pullback_grid",
    "scalar_opnorm_exact",
    "set_ratio_estimator",
    "shear_cubic_map",
    "shear_witness_box",
    "svd_ascending",
]
