import numpy as np

from caupsi.config import GeneratorConfig, ModelConfig, RunConfig
from caupsi.dataset.dataset import VIEWS

TOY_DIMS = dict(
    d_c=16,
    d_f=16,
    d_z=32,
    d_t=8,
    d_e=4,
    d_psi=4,
    heads=4,
    scene_hidden=8,
    head_hidden=16,
    domain_hidden=8,
    num_domains=3,
)


def toy_model_config(**values):
    settings = dict(TOY_DIMS)
    settings.update(values)
    return ModelConfig(**settings)


def random_pooled(n=3, frames=2, width=64, seed=0, dtype=np.float32):
    rng = np.random.default_rng(seed)
    return {
        view: np.abs(rng.standard_normal((n, frames, width))).astype(dtype)
        for view in VIEWS
    }


def random_clips(n=2, frames=2, size=8, seed=0):
    rng = np.random.default_rng(seed)
    return {
        view: rng.standard_normal((n, 3, frames, size, size)).astype(np.float32)
        for view in VIEWS
    }


def toy_run_config(**values):
    """
    A configuration small enough to train in seconds.
    """
    config = RunConfig(
        model=toy_model_config(num_domains=0),
        generator=GeneratorConfig(n_samples=60, clip_frames=2),
    )
    settings = dict(
        max_epochs=3,
        warmup_epochs=1,
        batch_size=8,
        accum_steps=2,
        eval_batch_size=16,
        patience=5,
        progress=False,
        domain_k_max=3,
    )
    settings.update(values)
    config.override({key: str(value) for key, value in settings.items()})
    return config
