import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from ..config import ABLATIONS, RunConfig
from ..dataset import PandasDataset, generate
from ..errors import CauPsiError, ConfigError, UsageError
from ..model import count_by_module
from ..model.ctpc import max_class_distance, psi_class_means
from ..tasks import NUM_CLASSES, TASK_NAMES
from ..training import Trainer, evaluate_split, load_model, write_metrics, write_psi
from ..training.reports import write_csv

logger = logging.getLogger(__name__)


class Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def run_config(args: argparse.Namespace) -> RunConfig:
    """
    The configuration file (or the defaults) with the command line settings
    applied on top.
    """
    config = RunConfig.load(args.config) if args.config else RunConfig()
    config.apply(args.set or [])
    values: Dict[str, str] = {}
    for ablation in getattr(args, "ablate", None) or []:
        values[f"ablate_{ablation}"] = "true"
    if getattr(args, "seed", None) is not None:
        values["seed" if args.command != "gen-data" else "data_seed"] = str(args.seed)
    config.override(values)
    return config


def gen_data(args: argparse.Namespace) -> None:
    config = run_config(args)
    values = {}
    if args.n is not None:
        values["n_samples"] = str(args.n)
    if args.causal_strength is not None:
        values["causal_strength"] = repr(args.causal_strength)
    if args.difficulty is not None:
        values["difficulty"] = repr(args.difficulty)
    config.override(values)
    summary = generate(
        config.generator, args.out, threads=args.threads, force=args.force
    )
    for line in summary.lines():
        print(line)


def train(args: argparse.Namespace) -> None:
    config = run_config(args)
    dataset = PandasDataset.load(args.data)
    result = Trainer(config, dataset, args.out, threads=args.threads).train()
    print(f"best epoch {result.best_epoch}: val macc {result.best_val_macc:.4f}")
    if result.test is not None:
        print(f"test macc {result.test.mean_accuracy:.4f}")


def evaluate(args: argparse.Namespace) -> None:
    config, model = load_model(args.checkpoint)
    dataset = PandasDataset.load(args.data)
    report, _ = evaluate_split(model, dataset, args.split, config.train.eval_batch_size)
    write_metrics(report, args.out)
    for key, value in report.summary().items():
        print(f"{key} = {value:.6f}")


def psi_export(args: argparse.Namespace) -> None:
    config, model = load_model(args.checkpoint)
    if config.model.psi_forced_zero:
        raise ConfigError(
            "the checkpoint was trained with psi forced to zero "
            f"(ablations: {', '.join(config.model.ablations)}), "
            "there is nothing to export"
        )
    dataset = PandasDataset.load(args.data)
    batch_size = config.train.eval_batch_size
    _, prediction = evaluate_split(model, dataset, args.split, batch_size)
    write_psi(prediction.ids, prediction.psi, prediction.labels, args.out)
    means = psi_class_means(prediction.psi, prediction.labels, NUM_CLASSES)
    for task in TASK_NAMES:
        print(f"{task}: max class-mean distance {max_class_distance(*means[task]):.4f}")


def report(args: argparse.Namespace) -> None:
    _, model = load_model(args.checkpoint)
    counts = count_by_module(model.params, depth=args.depth)
    width = max(len(module) for module in counts)
    print(f"{'module':<{width}} {'trainable':>10} {'frozen':>10}")
    for module, entry in sorted(counts.items()):
        print(f"{module:<{width}} {entry['trainable']:>10} {entry['frozen']:>10}")
    print(
        f"{'total':<{width}} {model.params.count(True):>10} "
        f"{model.params.count(False):>10}"
    )


def parse_seeds(text: str) -> List[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(
            f"seeds must be a comma-separated list of integers, got {text!r}"
        )
    if not seeds:
        raise UsageError("at least one seed is required")
    return seeds


def ablate(args: argparse.Namespace) -> None:
    """
    Trains the full model and every single-mechanism ablation for each seed
    and tabulates the test accuracies.
    """
    base = run_config(args)
    dataset = PandasDataset.load(args.data)
    out = Path(args.out)
    rows: List[Dict[str, Any]] = []
    for seed in parse_seeds(args.seeds):
        for condition in ("full",) + ABLATIONS:
            config = base.copy()
            values = {"seed": str(seed)}
            if condition != "full":
                values[f"ablate_{condition}"] = "true"
            config.override(values)
            logger.info("training %s with seed %d", condition, seed)
            run_dir = out / f"{condition}_seed{seed}"
            result = Trainer(config, dataset, run_dir, threads=args.threads).train()
            if result.test is None:
                raise UsageError("the ablation sweep needs a test split")
            row: Dict[str, Any] = {"condition": condition, "seed": seed}
            row["macc"] = result.test.mean_accuracy
            row.update({f"acc_{t}": a for t, a in result.test.accuracies().items()})
            rows.append(row)
    table = pd.DataFrame(rows)
    write_csv(out / "ablation.csv", table)
    summary = table.drop(columns="seed").groupby("condition", sort=False).mean()
    summary.insert(1, "delta_macc", summary["macc"] - summary.loc["full", "macc"])
    summary = summary.reset_index()
    write_csv(out / "ablation_summary.csv", summary)
    print(summary.to_string(index=False, float_format=lambda v: f"{v:.4f}"))


def add_config_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="configuration file with key = value lines")
    parser.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override a configuration value (can repeat)",
    )
    parser.add_argument(
        "--threads", type=int, help="worker threads (default: CAUPSI_THREADS)"
    )


def build_parser() -> Parser:
    parser = Parser(
        prog="caupsi",
        description="Multi-task driver state recognition with a causal task chain",
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="log debug messages"
    )
    commands = parser.add_subparsers(dest="command", parser_class=Parser)

    p = commands.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--causal-strength", type=float)
    p.add_argument("--difficulty", type=float)
    p.add_argument(
        "--force", action="store_true", help="overwrite a non-empty directory"
    )
    add_config_options(p)
    p.set_defaults(handler=gen_data)

    p = commands.add_parser(
        "train",
        help="train a model",
        description="Trains a model. The EMA shadow uses the warmed-up decay "
        "min(beta, (1+t)/(10+t)) at optimizer step t instead of a constant "
        "beta; pass --set ema_warmup=false for the plain update.",
    )
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--ablate", action="append", choices=ABLATIONS)
    add_config_options(p)
    p.set_defaults(handler=train)

    for name, handler, help in (
        ("eval", evaluate, "evaluate a checkpoint"),
        ("psi-export", psi_export, "export the psi vectors of a checkpoint"),
    ):
        p = commands.add_parser(name, help=help)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--split", choices=("train", "val", "test"), default="test")
        p.add_argument("--out", required=True)
        p.set_defaults(handler=handler)

    p = commands.add_parser("report", help="parameter counts of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--depth", type=int, default=2, help="module path depth")
    p.set_defaults(handler=report)

    p = commands.add_parser("ablate", help="run the ablation sweep")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", default="0,1,2")
    add_config_options(p)
    p.set_defaults(handler=ablate)
    return parser


def caupsi(argv: Optional[Sequence[str]] = None) -> int:
    """
    Runs one command and returns its exit code: 0 on success, otherwise the
    code of the error class (1 usage, 2 config, 3 data, 4 numeric, 5 I/O).
    """
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"caupsi: {e}", file=sys.stderr)
        return e.exit_code
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if args.command is None:
        print("caupsi: a command is required, see --help", file=sys.stderr)
        return UsageError.exit_code
    try:
        args.handler(args)
    except CauPsiError as e:
        logger.error("%s", e)
        return e.exit_code
    except OSError as e:
        logger.error("%s", e)
        return 5
    return 0


if __name__ == "__main__":
    sys.exit(caupsi())
