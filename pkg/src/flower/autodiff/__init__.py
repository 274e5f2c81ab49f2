from .tensor import Tensor, ShapeError, concat
from .nn import Linear, Mlp
from .optim import Adam
from .checkpoint import save_checkpoint, load_checkpoint, restore_parameters, CheckpointError

__all__ = [
    "Tensor", "ShapeError", "concat", "Linear", "Mlp", "Adam",
    "save_checkpoint", "load_checkpoint", "restore_parameters", "CheckpointError",
]
