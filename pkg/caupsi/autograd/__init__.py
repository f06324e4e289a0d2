from .tensor import Tensor, apply, default_dtype, no_grad, precision, to_tensor
from .graph import Graph, backward
from .functions import concat, dropout, grl, layer_norm, split, stack
from .gradcheck import grad_check, grad_check_leaves
