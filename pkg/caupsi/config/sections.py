from typing import List, Tuple

from ..errors import ConfigError
from .schema import ConfigSchema
from .types import Boolean, Choice, Float, Integer

ABLATIONS = ("ctpc", "crossview", "chain", "facebody")


class ModelConfig(ConfigSchema):

    """
    Architecture dimensions. The defaults are the desk-scale reference
    configuration; `d_c` and the widths of all hidden layers are not given by
    the reference hyperparameter table and are chosen here.
    """

    frame_size = Integer(8, min=4, max=64)
    encoder_channels1 = Integer(8, min=1, max=64)
    encoder_channels2 = Integer(16, min=1, max=128)
    d_c = Integer(128, min=1)
    d_f = Integer(128, min=1)
    d_z = Integer(256, min=1)
    d_t = Integer(64, min=1)
    d_e = Integer(32, min=1)
    d_psi = Integer(16, min=1)
    heads = Integer(4, min=1)
    scene_hidden = Integer(64, min=1)
    head_hidden = Integer(128, min=1)
    domain_hidden = Integer(64, min=1)
    dropout = Float(0.1, min=0.0, max=0.99)
    # 0 means "choose by silhouette" until the labeler has been fitted
    num_domains = Integer(0, min=0, max=64)
    attention_tokens = Choice(["single", "views"], "single")
    attention_bias = Boolean(True)
    ablate_ctpc = Boolean(False)
    ablate_crossview = Boolean(False)
    ablate_chain = Boolean(False)
    ablate_facebody = Boolean(False)

    def check(self) -> None:
        if self.d_f % self.heads:
            raise ConfigError(
                f"d_f = {self.d_f} is not divisible by heads = {self.heads}"
            )
        if self.num_domains == 1:
            raise ConfigError("num_domains must be 0 (automatic) or at least 2")

    @property
    def ablations(self) -> List[str]:
        return [name for name in ABLATIONS if getattr(self, f"ablate_{name}")]

    @property
    def psi_forced_zero(self) -> bool:
        return self.ablate_ctpc or self.ablate_facebody


class TrainConfig(ConfigSchema):
    lr_max = Float(3e-4, min=0.0)
    lr_min = Float(1e-6, min=0.0)
    weight_decay = Float(1e-4, min=0.0)
    warmup_epochs = Integer(5, min=0)
    max_epochs = Integer(100, min=1)
    batch_size = Integer(16, min=1)
    accum_steps = Integer(4, min=1)
    ema_beta = Float(0.999, min=0.0, max=1.0)
    ema_warmup = Boolean(True)
    mixup_alpha = Float(0.2, min=0.0)
    clip_norm = Float(5.0, min=0.0)
    patience = Integer(20, min=1)
    flip_p = Float(0.5, min=0.0, max=1.0)
    adam_beta1 = Float(0.9, min=0.0, max=0.999999)
    adam_beta2 = Float(0.999, min=0.0, max=0.999999)
    adam_eps = Float(1e-8, min=0.0)
    eval_batch_size = Integer(64, min=1)
    seed = Integer(0, min=0)
    progress = Boolean(True)

    def check(self) -> None:
        if self.warmup_epochs >= self.max_epochs:
            raise ConfigError(
                f"warmup_epochs ({self.warmup_epochs}) must be below "
                f"max_epochs ({self.max_epochs})"
            )
        if self.lr_min > self.lr_max:
            raise ConfigError("lr_min must not exceed lr_max")


class LossConfig(ConfigSchema):
    lambda_tcr = Float(1.0, min=0.0)
    lambda_vcr = Float(1.0, min=0.0)
    lambda_der = Float(1.5, min=0.0)
    lambda_dbr = Float(2.0, min=0.0)
    label_smoothing = Float(0.1, min=0.0, max=0.999)
    gamma_adv = Float(0.5, min=0.0)
    lambda_grl = Float(1.0, min=0.0)
    domain_k_min = Integer(2, min=2)
    domain_k_max = Integer(8, min=2)

    def check(self) -> None:
        if min(self.task_weights) <= 0:
            raise ConfigError("task loss weights must be positive")
        if not self.lambda_der > self.lambda_tcr:
            raise ConfigError("lambda_der must exceed lambda_tcr")
        if not self.lambda_dbr > self.lambda_vcr:
            raise ConfigError("lambda_dbr must exceed lambda_vcr")
        if self.domain_k_min > self.domain_k_max:
            raise ConfigError("domain_k_min must not exceed domain_k_max")

    @property
    def task_weights(self) -> Tuple[float, float, float, float]:
        return (self.lambda_tcr, self.lambda_vcr, self.lambda_der, self.lambda_dbr)


class GeneratorConfig(ConfigSchema):

    """
    Settings of the synthetic dataset. `difficulty` scales the frame noise,
    the `*_separation` settings scale how far apart the class prototype
    images of the respective views are.
    """

    n_samples = Integer(2898, min=1)
    data_seed = Integer(0, min=0)
    causal_strength = Float(1.0, min=0.0, max=1.0)
    difficulty = Float(1.0, min=0.0)
    noise_sigma = Float(0.5, min=0.0)
    temporal_rho = Float(0.8, min=0.0, max=0.999)
    scene_separation = Float(1.0, min=0.0)
    face_separation = Float(0.6, min=0.0)
    body_separation = Float(0.25, min=0.0)
    arousal_gain = Float(0.6, min=0.0)
    inside_cue = Float(0.4, min=0.0)
    clip_frames = Integer(16, min=1)
    clip_size = Integer(8, min=4, max=64)
