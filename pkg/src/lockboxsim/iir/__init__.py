from lockboxsim.iir.design import (
    BiquadSection,
    BiquadTable,
    DiscreteRational,
    TransferSpec,
    design_filter,
    discretize,
    eval_transfer,
    proper_sys,
    rescale,
    residues,
    round_coefficients,
    to_biquads,
)

__all__ = [
    "BiquadSection",
    "BiquadTable",
    "DiscreteRational",
    "TransferSpec",
    "design_filter",
    "discretize",
    "eval_transfer",
    "proper_sys",
    "rescale",
    "residues",
    "round_coefficients",
    "to_biquads",
]
