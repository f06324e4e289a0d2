import os
import tempfile
import unittest

from caupsi.config import GeneratorConfig, ModelConfig, RunConfig, TrainConfig
from caupsi.errors import ConfigError, MissingFileError


class SchemaTest(unittest.TestCase):
    def test_defaults(self):
        train = TrainConfig()
        assert train.lr_max == 3e-4
        assert train.batch_size * train.accum_steps == 64
        assert train.patience == 20
        assert ModelConfig().d_f == 128

    def test_validation(self):
        with self.assertRaises(ConfigError):
            TrainConfig(batch_size=0)
        with self.assertRaises(ConfigError):
            TrainConfig(batch_size=2.5)
        with self.assertRaises(ConfigError):
            TrainConfig(progress="yes")
        with self.assertRaises(ConfigError):
            GeneratorConfig(causal_strength=1.5)
        with self.assertRaises(ConfigError):
            ModelConfig(attention_tokens="all")

    def test_cross_field_checks(self):
        with self.assertRaises(ConfigError):
            ModelConfig(d_f=30, heads=4)
        with self.assertRaises(ConfigError):
            ModelConfig(num_domains=1)
        with self.assertRaises(ConfigError):
            TrainConfig(warmup_epochs=10, max_epochs=10)

    def test_failed_updates_are_rolled_back(self):
        config = TrainConfig()
        with self.assertRaises(ConfigError):
            config.update(max_epochs=50, warmup_epochs=60)
        assert config.max_epochs == 100 and config.warmup_epochs == 5
        with self.assertRaises(ConfigError):
            config.update(max_epochs=50, batch_size=-1)
        assert config.max_epochs == 100

    def test_attribute_assignment_is_validated(self):
        config = ModelConfig()
        config.num_domains = 4
        assert config.num_domains == 4
        with self.assertRaises(ConfigError):
            config.heads = 0

    def test_ablations(self):
        config = ModelConfig(ablate_chain=True, ablate_facebody=True)
        assert config.ablations == ["chain", "facebody"]
        assert config.psi_forced_zero
        assert not ModelConfig(ablate_crossview=True).psi_forced_zero


class RunConfigTest(unittest.TestCase):
    def test_dumps_parses_back(self):
        config = RunConfig()
        config.override({"lr_max": "0.001", "ablate_ctpc": "true", "difficulty": "0.3"})
        assert RunConfig.parse(config.dumps()) == config
        assert "lr_max = 0.001\n" in config.dumps()

    def test_parse(self):
        text = """
        # a comment
        max_epochs = 30   # trailing comment
        ablate_chain = Yes
        causal_strength = 0
        """
        config = RunConfig.parse(text)
        assert config.train.max_epochs == 30
        assert config.model.ablate_chain is True
        assert config.generator.causal_strength == 0.0
        assert config.get("max_epochs") == 30

    def test_unknown_key(self):
        with self.assertRaises(ConfigError) as context:
            RunConfig.parse("max_epochs = 3\nlearning_rate = 0.1\n", "run.txt")
        assert "run.txt:2" in str(context.exception)

    def test_duplicate_key(self):
        with self.assertRaises(ConfigError):
            RunConfig.parse("max_epochs = 3\nmax_epochs = 4\n")

    def test_missing_separator(self):
        with self.assertRaises(ConfigError):
            RunConfig.parse("max_epochs 3\n")

    def test_order_does_not_matter_for_checks(self):
        # each line alone would break warmup_epochs < max_epochs
        config = RunConfig.parse("max_epochs = 3\nwarmup_epochs = 1\n")
        assert config.train.max_epochs == 3
        config = RunConfig.parse("warmup_epochs = 20\nmax_epochs = 40\n")
        assert config.train.warmup_epochs == 20

    def test_command_line_overrides(self):
        config = RunConfig()
        config.apply(["max_epochs=10", "seed = 3"])
        assert config.train.max_epochs == 10 and config.train.seed == 3
        with self.assertRaises(ConfigError):
            config.apply(["max_epochs"])

    def test_copy_is_independent(self):
        config = RunConfig()
        copy = config.copy()
        copy.override({"num_domains": "3"})
        assert config.model.num_domains == 0
        assert copy != config

    def test_files(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "config.txt")
            config = RunConfig()
            config.override({"batch_size": "8"})
            config.save(path)
            assert RunConfig.load(path) == config
            with self.assertRaises(MissingFileError):
                RunConfig.load(os.path.join(directory, "missing.txt"))
