from ntkparam.finite.montecarlo import (
    EmpiricalKernels,
    empirical_kernels,
    loglog_slope,
    relative_frobenius_error,
)
from ntkparam.finite.net import (
    DEFAULT_PARAM_CAP,
    FiniteNet,
    LayerParams,
    ParamGradient,
    forward,
    init,
    jacobian,
    ntk_gram,
)
from ntkparam.finite.training import EpochRecord, TrainingTrace, sgd_train

__all__ = [
    "DEFAULT_PARAM_CAP",
    "EmpiricalKernels",
    "EpochRecord",
    "FiniteNet",
    "LayerParams",
    "ParamGradient",
    "TrainingTrace",
    "empirical_kernels",
    "forward",
    "init",
    "jacobian",
    "loglog_slope",
    "ntk_gram",
    "relative_frobenius_error",
    "sgd_train",
]
