from .dataset import SPLITS, VIEWS, Batch, Dataset, SampleRecord
from .pandas import PandasDataset
from .generator import GenerationSummary, generate, sample_labels, split_sizes
