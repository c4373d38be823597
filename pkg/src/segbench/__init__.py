"""Surface-segmentation workbench.

Segmenter model families (morph-lexicon baseline, order-k CRF taggers,
character-level attention encoder-decoder) plus a resampling-based
evaluation protocol: repeated data set sampling, random/heuristic/
adversarial splits, five segmentation metrics, consistency statistics,
and regressions of scores on split characteristics.
"""

__version__ = "0.1.0"

from .corpus import (
    Corpus,
    CorpusError,
    Word,
    load_corpus,
    parse_corpus,
    parse_word_list,
    save_corpus,
    type_count,
    write_corpus,
)
from .crf import CrfModel, train_crf
from .experiment import RunConfig, load_config, run_experiment, train_model
from .lexicon import MorphLexicon, Segmenter, train_lexicon
from .metrics import METRIC_NAMES, Evaluation, eval_corpus, eval_word
from .sampling import (
    DataSet,
    ExperimentalSetting,
    SamplingStrategy,
    make_random_splits,
    sample_datasets,
)
from .seq2seq import Seq2seqConfig, Seq2seqModel, train_seq2seq
from .splits import Split, SplitMethod, adversarial_split, heuristic_split
from .synth import SyntheticSpec, generate_synthetic_corpus

__all__ = [
    "Corpus",
    "CorpusError",
    "CrfModel",
    "DataSet",
    "Evaluation",
    "ExperimentalSetting",
    "METRIC_NAMES",
    "MorphLexicon",
    "RunConfig",
    "SamplingStrategy",
    "Segmenter",
    "Seq2seqConfig",
    "Seq2seqModel",
    "Split",
    "SplitMethod",
    "SyntheticSpec",
    "Word",
    "__version__",
    "adversarial_split",
    "eval_corpus",
    "eval_word",
    "generate_synthetic_corpus",
    "heuristic_split",
    "load_config",
    "load_corpus",
    "make_random_splits",
    "parse_corpus",
    "parse_word_list",
    "run_experiment",
    "sample_datasets",
    "save_corpus",
    "train_crf",
    "train_lexicon",
    "train_model",
    "train_seq2seq",
    "type_count",
    "write_corpus",
]
