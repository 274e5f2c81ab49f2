from .spline import RqSplineParams, rq_spline_forward, rq_spline_inverse
from .coupling import CouplingBlock, FlowStack, NfLoss, nf_loss
from .gaussian import SingularCovarianceError, gaussian_kl_to_standard, mi_upper_bound_check
from .estimator import ConditionalSplineFlow

__all__ = [
    "RqSplineParams", "rq_spline_forward", "rq_spline_inverse",
    "CouplingBlock", "FlowStack", "NfLoss", "nf_loss",
    "SingularCovarianceError", "gaussian_kl_to_standard", "mi_upper_bound_check",
    "ConditionalSplineFlow",
]
