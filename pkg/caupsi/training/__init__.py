from .schedule import lr_at
from .ema import EmaShadow, ema_update
from .optimizer import AdamW, clip_grads, global_norm
from .metrics import MetricsReport, TaskMetrics, compute_metrics, normalized_confusion
from .reports import write_metrics, write_psi
from .trainer import (
    EarlyStopping,
    EpochRecord,
    Trainer,
    TrainResult,
    evaluate_split,
    load_model,
)
