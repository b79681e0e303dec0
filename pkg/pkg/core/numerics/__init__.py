from .tape import Tape, Var, Tensor, GradMap, ParamBinding, as_tensor
from .gradcheck import finite_diff_check
from . import ops

__all__ = [
    'Tape',
    'Var',
    'Tensor',
    'GradMap',
    'ParamBinding',
    'as_tensor',
    'finite_diff_check',
    'ops',
]
