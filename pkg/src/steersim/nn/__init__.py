from .layers import (
    BatchLoss,
    ShapeError,
    conv_backward,
    conv_forward,
    dropout,
    dropout_backward,
    euclidean_loss,
    euclidean_loss_grad,
    fc_backward,
    fc_forward,
    maxpool_backward,
    maxpool_forward,
    relu,
    relu_backward,
)
from .network import (
    LayerSpec,
    NetworkState,
    backward,
    default_architecture,
    default_network,
    forward,
    init_velocities,
    read_network,
    sgd_step,
    shape_chain,
    write_network,
)

__all__ = [
    "BatchLoss", "ShapeError", "LayerSpec", "NetworkState",
    "conv_forward", "conv_backward", "maxpool_forward", "maxpool_backward",
    "relu", "relu_backward", "dropout", "dropout_backward",
    "fc_forward", "fc_backward", "euclidean_loss", "euclidean_loss_grad",
    "forward", "backward", "sgd_step", "init_velocities",
    "default_architecture", "default_network", "shape_chain",
    "read_network", "write_network",
]
