from .params import ParamScope, ParamStore, read_checkpoint, write_checkpoint
from .layers import MlpSpec, init_linear, init_mlp, linear, mlp_forward
from .attention import init_mha, mha
