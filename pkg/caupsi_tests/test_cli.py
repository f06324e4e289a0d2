import contextlib
import io
import os
import shutil
import tempfile
import unittest

import pandas as pd

from caupsi.cli.main import caupsi, parse_seeds
from caupsi.errors import UsageError
from caupsi.training.reports import read_key_values

from .helpers import toy_run_config


def run(*argv):
    out = io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(io.StringIO()):
        code = caupsi([str(a) for a in argv])
    return code, out.getvalue()


class CliTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.directory = tempfile.mkdtemp()
        cls.config = os.path.join(cls.directory, "toy.txt")
        toy_run_config(max_epochs=2).save(cls.config)
        cls.data = os.path.join(cls.directory, "data")
        cls.gen_code, cls.gen_output = run(
            "gen-data", "--out", cls.data, "--config", cls.config, "--threads", 2
        )
        cls.run_dir = os.path.join(cls.directory, "run")
        cls.train_code, _ = run(
            "train", "--data", cls.data, "--out", cls.run_dir, "--config", cls.config
        )
        cls.checkpoint = os.path.join(cls.run_dir, "model.ckpt")

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.directory)

    def path(self, *names):
        return os.path.join(self.directory, *names)

    def test_gen_data(self):
        assert self.gen_code == 0
        assert "samples = 60" in self.gen_output
        assert "mi_der_dbr = " in self.gen_output
        assert os.path.isfile(os.path.join(self.data, "manifest.tsv"))

    def test_gen_data_options(self):
        out = self.path("independent")
        code, output = run(
            "gen-data",
            "--out",
            out,
            "--config",
            self.config,
            "--n",
            20,
            "--causal-strength",
            0,
            "--seed",
            5,
        )
        assert code == 0
        assert "samples = 20" in output
        code, _ = run("gen-data", "--out", out, "--config", self.config)
        assert code == 1
        code, _ = run("gen-data", "--out", out, "--config", self.config, "--force")
        assert code == 0

    def test_train(self):
        assert self.train_code == 0
        info = read_key_values(os.path.join(self.run_dir, "run_info.txt"))
        assert info["epochs"] == "2"

    def test_eval(self):
        out = self.path("eval")
        code, output = run(
            "eval", "--checkpoint", self.checkpoint, "--data", self.data, "--out", out
        )
        assert code == 0
        assert "macc = " in output
        test = read_key_values(os.path.join(self.run_dir, "test", "metrics.txt"))
        values = read_key_values(os.path.join(out, "metrics.txt"))
        assert values["macc"] == test["macc"]

    def test_psi_export(self):
        out = self.path("psi")
        code, output = run(
            "psi-export",
            "--checkpoint",
            self.checkpoint,
            "--data",
            self.data,
            "--split",
            "val",
            "--out",
            out,
        )
        assert code == 0
        assert "dbr: max class-mean distance" in output
        raw = pd.read_csv(os.path.join(out, "psi_raw.csv"))
        assert len(raw) == 9

    def test_psi_export_needs_psi(self):
        run_dir = self.path("no_psi")
        code, _ = run(
            "train",
            "--data",
            self.data,
            "--out",
            run_dir,
            "--config",
            self.config,
            "--ablate",
            "ctpc",
            "--set",
            "max_epochs=2",
        )
        assert code == 0
        code, _ = run(
            "psi-export",
            "--checkpoint",
            os.path.join(run_dir, "model.ckpt"),
            "--data",
            self.data,
            "--out",
            self.path("no_psi_out"),
        )
        assert code == 2

    def test_report(self):
        code, output = run("report", "--checkpoint", self.checkpoint)
        assert code == 0
        lines = output.splitlines()
        assert lines[0].split() == ["module", "trainable", "frozen"]
        assert lines[-1].startswith("total")
        assert any(line.startswith("fusion.cross") for line in lines)

    def test_ablate(self):
        out = self.path("ablation")
        code, _ = run(
            "ablate",
            "--data",
            self.data,
            "--out",
            out,
            "--config",
            self.config,
            "--seeds",
            "0",
            "--set",
            "max_epochs=1",
            "--set",
            "warmup_epochs=0",
        )
        assert code == 0
        table = pd.read_csv(os.path.join(out, "ablation.csv"))
        conditions = ["full", "ctpc", "crossview", "chain", "facebody"]
        assert list(table["condition"]) == conditions
        summary = pd.read_csv(os.path.join(out, "ablation_summary.csv"))
        assert summary.loc[0, "condition"] == "full"
        assert summary.loc[0, "delta_macc"] == 0.0

    def test_exit_codes(self):
        assert run()[0] == 1
        assert run("train", "--data", self.data)[0] == 1
        assert run("frobnicate")[0] == 1
        assert run("--help")[0] == 0
        missing = self.path("missing")
        assert run("train", "--data", missing, "--out", self.path("x"))[0] == 3
        bad_key = ("--set", "nope=1")
        assert run("train", "--data", self.data, "--out", "-", *bad_key)[0] == 2
        assert run("report", "--checkpoint", self.path("missing.ckpt"))[0] == 3

    def test_train_help_names_the_ema_decay(self):
        code, output = run("train", "--help")
        assert code == 0
        assert "ema_warmup=false" in output
        assert "(1+t)/(10+t)" in output

    def test_seeds(self):
        assert parse_seeds("0,1, 2") == [0, 1, 2]
        with self.assertRaises(UsageError):
            parse_seeds("a,b")
        with self.assertRaises(UsageError):
            parse_seeds(" , ")
