"""Semi-supervised multi-task classification toolkit.

Confidence-gated and rank-adaptive pseudo-labelling for joint two-task
classification over signal or token sequences, with weak/strong
augmentation, a from-scratch two-head classifier with verified analytic
gradients, stratified data handling, and margin-based late fusion.
"""

from .augment import (
    EmbeddingTable,
    FeatureExtractor,
    SignalSequence,
    SynonymLexicon,
    TokenSequence,
    augment_signal,
    augment_tokens,
    featurize_signal,
    featurize_tokens,
)
from .data import (
    Corpus,
    GeneratorConfig,
    Sample,
    SplitSpec,
    load_corpus,
    make_batches,
    save_corpus,
    stratified_split,
    synthesize_corpus,
)
from .errors import ConfigError, ContractError, NumericError, SchemaError, SemimatchError
from .gradcheck import run_gradient_checks
from .losses import (
    LossBreakdown,
    MultitaskLoss,
    PseudoLabelDecision,
    TopKSelection,
    adaptive_negative_loss,
    entropy_meaning_loss,
    entropy_meaning_soft_label,
    fixmatch_loss,
    fullmatch_loss,
    gate_pseudo_label,
    multitask_loss,
    select_k,
)
from .metrics import MetricsReport, confusion, jrbm, margin_fusion, weighted_f1
from .model import (
    AdamState,
    Gradients,
    TaskProbs,
    TwoHeadModel,
    adam_step,
    backprop,
    finite_difference_gradient,
    forward,
    init_model,
)
from .trainer import TrainConfig, TrainResult, evaluate, lr_at_epoch, train

__version__ = "0.1.0"

__all__ = [
    "AdamState", "ConfigError", "ContractError", "Corpus", "EmbeddingTable",
    "FeatureExtractor", "GeneratorConfig", "Gradients", "LossBreakdown",
    "MetricsReport", "MultitaskLoss", "NumericError", "PseudoLabelDecision",
    "Sample", "SchemaError", "SemimatchError", "SignalSequence", "SplitSpec",
    "SynonymLexicon", "TaskProbs", "TokenSequence", "TopKSelection",
    "TrainConfig", "TrainResult", "TwoHeadModel", "adam_step",
    "adaptive_negative_loss", "augment_signal", "augment_tokens", "backprop",
    "confusion", "entropy_meaning_loss", "entropy_meaning_soft_label",
    "evaluate", "featurize_signal", "featurize_tokens",
    "finite_difference_gradient", "fixmatch_loss", "forward", "fullmatch_loss",
    "gate_pseudo_label", "init_model", "jrbm", "load_corpus", "lr_at_epoch",
    "make_batches", "margin_fusion", "multitask_loss", "run_gradient_checks",
    "save_corpus", "select_k", "stratified_split", "synthesize_corpus",
    "train", "weighted_f1", "__version__",
]
