from ntkparam.kernels.engine import (
    InputKernel,
    KernelStats,
    decompose,
    input_kernel,
    kernel_stats,
    propagate,
    readout_kernel,
    split_blocks,
)
from ntkparam.kernels.layers import (
    DIVERGENT,
    Contribution,
    Divergent,
    KernelState,
    conv_step,
    dense_step,
    diag_average,
    gap_reduce,
    relu_step,
    vec_reduce,
)
from ntkparam.kernels.relu import relu_derivative_map, relu_ntk_map, relu_nngp_map

__all__ = [
    "DIVERGENT",
    "Contribution",
    "Divergent",
    "InputKernel",
    "KernelState",
    "KernelStats",
    "conv_step",
    "decompose",
    "dense_step",
    "diag_average",
    "gap_reduce",
    "input_kernel",
    "kernel_stats",
    "propagate",
    "readout_kernel",
    "relu_derivative_map",
    "relu_ntk_map",
    "relu_nngp_map",
    "relu_step",
    "split_blocks",
    "vec_reduce",
]
