"""Minimum l^p path-norm (0 < p < 1) interpolation with shallow ReLU networks."""

from .core import (
    CPWLFunction,
    Dataset1D,
    InfeasibleError,
    LpsiError,
    PathNormReport,
    ReLUNet1D,
    ResourceCapError,
    StructuralError,
    ValidationError,
    eval_cpwl,
    eval_net,
    from_network,
    report,
    to_network,
    vp_cost,
)

__version__ = "0.1.0"
