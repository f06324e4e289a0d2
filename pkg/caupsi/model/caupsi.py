import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional

import numpy as np

from ..autograd import Tensor, stack
from ..config import ModelConfig
from ..dataset.dataset import VIEWS
from ..errors import ConfigError, ShapeError
from ..nn import MlpSpec, ParamStore, init_linear
from ..objective.losses import domain_adversary, init_domain_adversary
from .chain import ChainInput, ChainOutput, forward_chain, init_chain, shared_projection
from .ctpc import compute_psi, init_ctpc
from .encoder import FrozenEncoder, init_encoder, project_pooled
from .fusion import cross_view, fuse_scenes, init_cross_view, init_scene_attention
from .views import init_view_projections, project, project_face_body, project_in_scene

logger = logging.getLogger(__name__)

ENCODERS = ("scene", "inside", "face", "body")
SCENE_VIEWS = VIEWS[:3]
IN_CHANNELS = 3

# which frozen encoder and GAP projection serves each view
ENCODER_OF = {
    "front": "scene",
    "left": "scene",
    "right": "scene",
    "inside": "inside",
    "face": "face",
    "body": "body",
}

# parameter prefixes taken out of the optimizer by each ablation
FROZEN_BY_ABLATION = {
    "ctpc": ("ctpc",),
    "crossview": ("fusion.cross",),
    "chain": ("chain.prototypes",),
    "facebody": ("gap.face", "gap.body", "views.face", "views.body", "ctpc"),
}


def init_encoders(params: ParamStore, config: ModelConfig) -> Dict[str, FrozenEncoder]:
    root = params.scope("")
    channels = (config.encoder_channels1, config.encoder_channels2)
    for name in ENCODERS:
        init_encoder(root.scope(f"encoder.{name}"), IN_CHANNELS, channels)
    return {
        name: FrozenEncoder(params.scope(f"encoder.{name}"), config.frame_size)
        for name in ENCODERS
    }


def frozen_encoders(config: ModelConfig, seed: int) -> Dict[str, FrozenEncoder]:
    """
    The frozen encoders of a model with the given seed, without building the
    rest of the model. Encoder weights depend on the seed and their paths only.
    """
    return init_encoders(ParamStore(seed), config)


def pool_views(
    encoders: Mapping[str, FrozenEncoder], clips: Mapping[str, np.ndarray]
) -> Dict[str, np.ndarray]:
    """
    Runs the frozen encoders over all frames.

    :param clips: per view an array (N, C, T, H, W).
    :returns: per view the frame features (N, T, enc_dim).
    """
    missing = set(VIEWS) - set(clips)
    if missing:
        raise ShapeError(f"missing views: {sorted(missing)}")
    return {view: encoders[ENCODER_OF[view]].pool(clips[view]) for view in VIEWS}


def domain_features(pooled: Mapping[str, np.ndarray]) -> np.ndarray:
    """
    Time-averaged frame features of all views side by side, the input of the
    domain clustering.
    """
    return np.concatenate([pooled[view].mean(axis=1) for view in VIEWS], axis=1)


@dataclass
class ModelOutput:
    chain: ChainOutput
    alpha: Tensor
    domain_logits: Optional[Tensor]
    gates: Dict[str, Tensor]

    @property
    def probs(self) -> List[Tensor]:
        return self.chain.probs

    @property
    def psi(self) -> Tensor:
        return self.chain.psi


class CauPsi:

    """
    The full model: frozen per-view encoders, scene fusion, gated cross-view
    attention, psi conditioning, the causal task chain and the domain
    adversary. All weights live in `params`.

    Inputs are the per-frame encoder features of the six views (see `pool`),
    so that the frozen part can be computed once and cached.
    """

    def __init__(self, config: ModelConfig, seed: int = 0):
        if config.num_domains < 2:
            raise ConfigError(
                "the number of domains must be fixed before the model is built"
            )
        self.config = config
        self.seed = seed
        self.params = ParamStore(seed)
        c = config
        root = self.params.scope("")
        self.encoders = init_encoders(self.params, c)
        enc_dim = self.encoders["scene"].enc_dim
        for name in ENCODERS:
            init_linear(root.scope(f"gap.{name}"), enc_dim, c.d_c)
        init_view_projections(root.scope("views"), c.d_c, c.d_f)
        init_scene_attention(
            root.scope("fusion.scene"), len(SCENE_VIEWS), c.d_c, c.scene_hidden
        )
        init_cross_view(root.scope("fusion.cross"), c.d_f, c.heads, c.attention_bias)
        init_ctpc(root.scope("ctpc"), c.d_f, c.d_psi)
        init_chain(
            root.scope("chain"),
            c.d_f,
            c.d_z,
            c.d_t,
            c.d_e,
            c.d_psi,
            c.head_hidden,
            chain=not c.ablate_chain,
        )
        init_domain_adversary(root.scope("adversary"), self.adversary_spec)
        for ablation in c.ablations:
            for prefix in FROZEN_BY_ABLATION[ablation]:
                self.params.freeze(prefix)
        logger.debug(
            "built model with %d trainable and %d frozen values",
            self.params.count(True),
            self.params.count(False),
        )

    def build_encoders(self) -> Dict[str, FrozenEncoder]:
        return {
            name: FrozenEncoder(
                self.params.scope(f"encoder.{name}"), self.config.frame_size
            )
            for name in ENCODERS
        }

    @property
    def adversary_spec(self) -> MlpSpec:
        c = self.config
        return MlpSpec(c.d_z, c.domain_hidden, c.num_domains)

    @property
    def dtype(self) -> Any:
        return self.params["chain.shared.weight"].dtype

    def with_params(self, params: ParamStore) -> "CauPsi":
        """
        The same architecture running on another store with identical paths,
        such as the EMA shadow or a loaded checkpoint.
        """
        missing = set(self.params) ^ set(params)
        if missing:
            raise ShapeError(f"parameter stores disagree on {sorted(missing)[:5]}")
        model = object.__new__(CauPsi)
        model.config = self.config
        model.seed = self.seed
        model.params = params
        model.encoders = model.build_encoders()
        return model

    def astype(self, dtype: Any) -> "CauPsi":
        """
        Returns a copy of the model whose parameters have the given dtype.
        """
        return self.with_params(self.params.astype(dtype))

    def pool(self, clips: Mapping[str, np.ndarray]) -> Dict[str, np.ndarray]:
        return pool_views(self.encoders, clips)

    def encode(self, pooled: Mapping[str, np.ndarray]) -> Dict[str, Tensor]:
        root = self.params.scope("")
        return {
            view: project_pooled(pooled[view], root.scope(f"gap.{ENCODER_OF[view]}"))
            for view in VIEWS
        }

    def zeros(self, n: int, width: int) -> Tensor:
        return Tensor(np.zeros((n, width), dtype=self.dtype))

    def shared_representation(self, pooled: Mapping[str, np.ndarray]) -> Tensor:
        """
        The task-shared representation z alone; dropout never acts before z,
        so this matches z of a full forward pass on the same inputs.
        """
        return self.forward(pooled, with_heads=False).chain.z

    def forward(
        self,
        pooled: Mapping[str, np.ndarray],
        train: bool = False,
        rng: Optional[np.random.Generator] = None,
        lambda_grl: float = 1.0,
        with_domain: bool = True,
        with_heads: bool = True,
    ) -> ModelOutput:
        c = self.config
        root = self.params.scope("")
        views = root.scope("views")
        h = self.encode(pooled)
        n = h["inside"].shape[0]

        h_scene, alpha = fuse_scenes(
            [h[v] for v in SCENE_VIEWS], root.scope("fusion.scene")
        )
        f_in, f_scene = project_in_scene(h["inside"], h_scene, views)
        if c.ablate_facebody:
            f_face, f_body = self.zeros(n, c.d_f), self.zeros(n, c.d_f)
        else:
            f_face, f_body = project_face_body(h["face"], h["body"], views)

        gates: Dict[str, Tensor] = {}
        if c.ablate_crossview:
            f_in_t, f_scene_t = f_in, f_scene
        else:
            tokens = None
            if c.attention_tokens == "views":
                tokens = stack(
                    [project(views, "scene", h[v]) for v in SCENE_VIEWS], axis=1
                )
            cross = cross_view(
                f_in, f_scene, root.scope("fusion.cross"), c.heads, tokens
            )
            f_in_t, f_scene_t = cross.inside, cross.scene
            gates = {"inside": cross.gate_inside, "scene": cross.gate_scene}

        if c.psi_forced_zero:
            psi = self.zeros(n, c.d_psi)
        else:
            psi = compute_psi(f_face, f_body, root.scope("ctpc")).psi

        z, z_tasks = shared_projection(f_in_t, f_scene_t, root.scope("chain"))
        features = ChainInput(f_in_t, f_scene_t, f_face, f_body, psi, z, z_tasks)
        if with_heads:
            chain = forward_chain(
                features,
                root.scope("chain"),
                c.head_hidden,
                c.dropout,
                chain=not c.ablate_chain,
                train=train,
                rng=rng,
            )
        else:
            chain = ChainOutput([], [], psi, z, z_tasks)
        domain_logits = None
        if with_domain and with_heads:
            domain_logits = self.domain_logits(z, lambda_grl)
        return ModelOutput(chain, alpha, domain_logits, gates)

    def domain_logits(self, z: Tensor, lambda_grl: float) -> Tensor:
        return domain_adversary(
            z, lambda_grl, self.params.scope("adversary"), self.adversary_spec
        )


def count_by_module(params: ParamStore, depth: int = 1) -> Dict[str, Dict[str, int]]:
    """
    Trainable and frozen value counts per module path prefix.
    """
    counts: Dict[str, Dict[str, int]] = {}
    for path, tensor in params.items():
        module = ".".join(path.split(".")[:depth])
        entry = counts.setdefault(module, {"trainable": 0, "frozen": 0})
        entry["trainable" if tensor.requires_grad else "frozen"] += tensor.data.size
    return counts
