from .encoder import FrozenEncoder, encode_view
from .views import project_face_body, project_in_scene
from .fusion import CrossViewOutput, cross_view, fuse_scenes
from .ctpc import PsiOutput, compute_psi, psi_class_means
from .chain import (
    ChainInput,
    ChainOutput,
    forward_chain,
    head_input_width,
    shared_projection,
    soft_label_embed,
)
from .caupsi import (
    VIEWS,
    CauPsi,
    ModelOutput,
    count_by_module,
    domain_features,
    frozen_encoders,
    pool_views,
)
