from .losses import (
    LossBreakdown,
    class_weights,
    compute_class_weights,
    domain_adversary,
    domain_ce,
    ls_ce,
    ls_ce_mixed,
    smoothed_targets,
    total_loss,
)
from .domains import (
    DomainLabeler,
    fit_domain_labels,
    inertia_trace,
    read_domains,
    write_domains,
)
