from .checkpoint import CheckpointFormatError, load_checkpoint, save_checkpoint
from .gradcheck import grad_check
from .layers import MLP, Conv1d, ConvResidualBlock, Linear, Module, MultiHeadAttention, ResidualBlock
from .optim import SGD, OptimState, lr_schedule, sgd_step
from .tensor import NonFiniteError, Tensor, conv1d, linear, mse_loss, relu, softmax

__all__ = [
    "CheckpointFormatError",
    "Conv1d",
    "ConvResidualBlock",
    "Linear",
    "MLP",
    "Module",
    "MultiHeadAttention",
    "NonFiniteError",
    "OptimState",
    "ResidualBlock",
    "SGD",
    "Tensor",
    "conv1d",
    "grad_check",
    "linear",
    "load_checkpoint",
    "lr_schedule",
    "mse_loss",
    "relu",
    "save_checkpoint",
    "sgd_step",
    "softmax",
]
