"""Training loop: batching, augmentation, loss composition, Adam updates,
per-epoch validation, and checkpoint selection by validation JRBM.

Determinism contract: every random draw comes from a generator keyed by
(config seed, stream id, epoch), so two runs with the same config and
corpus produce bit-identical trajectories. The labelled streams are
independent of the unlabelled ones, which is what makes a fixmatch run
whose gate never opens reproduce the baseline trajectory exactly.

The weak-augmentation ablation switch (``weak_aug_on_unlabelled``) turns
only the unlabelled weak branch into the identity; labelled samples are
always weakly augmented.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .augment import (
    FeatureExtractor,
    augment_signal,
    augment_tokens,
    strong_kind,
    weak_kinds,
)
from .data import Corpus, Sample, SplitSpec, make_batches, stratified_split
from .errors import ConfigError, ContractError
from .losses import LossCoefficients, build_task_terms
from .metrics import MetricsReport
from .model import (
    AdamState,
    BatchLossSpec,
    TwoHeadModel,
    adam_step,
    forward_batch,
    init_model,
    loss_and_gradients,
)

METHODS = ("baseline", "fixmatch", "fullmatch")

# rng stream ids; each is combined with (seed, epoch)
_STREAM_INIT = 40001
_STREAM_BATCH = 41000
_STREAM_LAB_AUG = 42000
_STREAM_WEAK_AUG = 43000
_STREAM_STRONG_AUG = 44000


@dataclass
class TrainConfig:
    """Every knob of a training run; see the README for the config-file keys."""

    method: str = "baseline"
    modality: str = "signal"
    weak_aug_kind: str | None = None     # default: flip (signal) / synonym (tokens)
    strong_aug_kind: str | None = None   # fixed per modality; kept for visibility
    weak_aug_on_unlabelled: bool = True
    epochs: int = 30
    batch_size: int = 8
    unlabelled_ratio: float = 1.0
    learning_rate: float = 3e-5
    lr_decay: float = 0.9
    tau: float = 0.95
    sigma: float = 0.99
    unsup_weight: float = 0.5
    negative_weight: float = 0.5
    entropy_weight: float = 0.5
    intent_weight: float = 1.0
    hidden_size: int = 64
    seed: int = 0
    train_frac: float = 0.7
    valid_frac: float = 0.15
    test_frac: float = 0.15
    signal_bins: int = 4
    token_max_len: int = 64
    flip_max_seconds: float = 6.25
    time_mask_max_frames: int = 30000
    pitch_max_steps: int = 4
    noise_scale: float = 0.05
    swap_count: int = 1
    delete_prob: float = 0.1
    synonym_prob: float = 0.15
    contextual_prob: float = 0.15
    contextual_neighbors: int = 5

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method '{self.method}'")
        if self.modality not in ("signal", "tokens"):
            raise ConfigError(f"unknown modality '{self.modality}'")
        if self.weak_aug_kind is None:
            self.weak_aug_kind = "flip" if self.modality == "signal" else "synonym"
        if self.weak_aug_kind not in weak_kinds(self.modality):
            raise ConfigError(
                f"'{self.weak_aug_kind}' is not a weak augmentation for {self.modality}")
        expected_strong = strong_kind(self.modality)
        if self.strong_aug_kind is None:
            self.strong_aug_kind = expected_strong
        if self.strong_aug_kind != expected_strong:
            raise ConfigError(
                f"the strong augmentation for {self.modality} is '{expected_strong}'")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError("tau must lie in (0, 1]")
        if not 0.0 < self.sigma <= 1.0:
            raise ConfigError("sigma must lie in (0, 1]")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigError("lr_decay must lie in (0, 1]")
        if self.epochs < 1 or self.batch_size < 1 or self.hidden_size < 1:
            raise ConfigError("epochs, batch_size, and hidden_size must be positive")
        if self.unlabelled_ratio < 0:
            raise ConfigError("unlabelled_ratio must be non-negative")
        for name in ("unsup_weight", "negative_weight", "entropy_weight", "intent_weight"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        # raises ConfigError on bad fractions
        SplitSpec(self.train_frac, self.valid_frac, self.test_frac, seed=self.seed)


def lr_at_epoch(lr0: float, decay: float, epoch: int) -> float:
    """Geometric schedule: lr0 * decay**epoch."""
    if epoch < 0:
        raise ContractError("epoch must be non-negative")
    return lr0 * decay ** epoch


@dataclass
class TaskEpochStats:
    """Mean loss parts for one task over an epoch's steps."""

    sup: float = 0.0
    unsup: float = 0.0
    neg: float = 0.0
    ent: float = 0.0
    total: float = 0.0
    acceptance_rate: float = 0.0
    k_hist: dict[int, int] = field(default_factory=dict)


@dataclass
class EpochReport:
    epoch: int
    lr: float
    emo: TaskEpochStats
    intent: TaskEpochStats
    mean_total: float
    val: MetricsReport


@dataclass
class TrainResult:
    model: TwoHeadModel              # checkpoint with the best validation JRBM
    reports: list[EpochReport]
    best_epoch: int
    val_metrics: MetricsReport       # validation metrics of the best checkpoint
    test_metrics: MetricsReport | None


class _Augmenter:
    """Applies one named operator with the parameters from the config."""

    def __init__(self, config: TrainConfig, corpus: Corpus):
        self.config = config
        self.corpus = corpus

    def __call__(self, sample: Sample, kind: str, rng: np.random.Generator):
        cfg = self.config
        if sample.modality == "signal":
            params = {
                "flip": {"max_seconds": cfg.flip_max_seconds},
                "time_mask": {"max_frames": cfg.time_mask_max_frames},
                "pitch_shift": {"max_steps": cfg.pitch_max_steps},
                "gaussian_noise": {"scale": cfg.noise_scale},
            }[kind]
            return augment_signal(sample.payload, kind, rng, **params)
        params = {
            "swap": {"n_swaps": cfg.swap_count},
            "delete": {"p": cfg.delete_prob},
            "synonym": {"p": cfg.synonym_prob},
            "contextual": {"n_neighbors": cfg.contextual_neighbors, "p": cfg.contextual_prob},
        }[kind]
        return augment_tokens(sample.payload, kind, rng,
                              lexicon=self.corpus.lexicon, table=self.corpus.embedding,
                              **params)


def evaluate(model: TwoHeadModel, samples, extractor: FeatureExtractor) -> MetricsReport:
    """Metrics of raw (un-augmented) samples under the model's argmax."""
    samples = list(samples)
    if not samples:
        raise ContractError("evaluate needs a non-empty sample list")
    if any(not s.is_labelled for s in samples):
        raise ContractError("evaluate requires labelled samples")
    feats = np.stack([extractor(s.payload) for s in samples])
    p_emo, p_int = forward_batch(model, feats)
    return MetricsReport.from_predictions(
        np.argmax(p_emo, axis=1), [s.emotion for s in samples],
        np.argmax(p_int, axis=1), [s.intent for s in samples],
        model.n_emotion, model.n_intent)


def predict_probs(model: TwoHeadModel, samples, extractor: FeatureExtractor):
    """Per-task probability tables for a list of samples (no augmentation)."""
    feats = np.stack([extractor(s.payload) for s in samples])
    return forward_batch(model, feats)


class _StatsAccumulator:
    def __init__(self):
        self.sums = np.zeros(5)          # sup, unsup, neg, ent, total
        self.accepted = 0
        self.unlab_seen = 0
        self.k_hist: dict[int, int] = {}
        self.steps = 0

    def add(self, bd, n_unlab: int):
        self.sums += (bd.l_sup, bd.l_fix_unsup, bd.l_neg, bd.l_ent, bd.total)
        self.accepted += bd.accepted_count
        self.unlab_seen += n_unlab
        if bd.k is not None:
            self.k_hist[bd.k] = self.k_hist.get(bd.k, 0) + 1
        self.steps += 1

    def finish(self) -> TaskEpochStats:
        means = [float(v) for v in self.sums / max(self.steps, 1)]
        rate = self.accepted / self.unlab_seen if self.unlab_seen else 0.0
        return TaskEpochStats(sup=means[0], unsup=means[1], neg=means[2], ent=means[3],
                              total=means[4], acceptance_rate=rate, k_hist=dict(self.k_hist))


def train(config: TrainConfig, corpus: Corpus) -> TrainResult:
    """Run the configured method on the corpus; see the module docstring."""
    lab_pool = [s for s in corpus.labelled if s.modality == config.modality]
    unlab_pool = [s for s in corpus.unlabelled if s.modality == config.modality]
    if not lab_pool:
        raise ConfigError(f"corpus has no labelled {config.modality} samples")
    if config.method != "baseline" and not unlab_pool:
        raise ConfigError(f"method '{config.method}' needs unlabelled data")

    split = SplitSpec(config.train_frac, config.valid_frac, config.test_frac, seed=config.seed)
    train_set, valid_set, test_set = stratified_split(lab_pool, split)
    valid_eval = valid_set or train_set

    extractor = FeatureExtractor(config.modality, bins=config.signal_bins,
                                 max_token_len=config.token_max_len, table=corpus.embedding)
    model = init_model(extractor.dim, config.hidden_size, corpus.n_emotion, corpus.n_intent,
                       np.random.default_rng([config.seed, _STREAM_INIT]))
    state = AdamState.zeros_like(model)
    augmenter = _Augmenter(config, corpus)

    if config.method == "fullmatch":
        coeffs = LossCoefficients(unsup=config.unsup_weight, negative=config.negative_weight,
                                  entropy=config.entropy_weight)
    else:
        coeffs = LossCoefficients(unsup=config.unsup_weight, negative=0.0, entropy=0.0)
    mu = 0.0 if config.method == "baseline" else config.unlabelled_ratio

    reports: list[EpochReport] = []
    best_jrbm, best_model, best_val, best_epoch = -1.0, model, None, 0
    for epoch in range(config.epochs):
        lr = lr_at_epoch(config.learning_rate, config.lr_decay, epoch)
        steps = make_batches(train_set, unlab_pool, config.batch_size, mu,
                             seed=[config.seed, _STREAM_BATCH, epoch])
        rng_lab = np.random.default_rng([config.seed, _STREAM_LAB_AUG, epoch])
        rng_weak = np.random.default_rng([config.seed, _STREAM_WEAK_AUG, epoch])
        rng_strong = np.random.default_rng([config.seed, _STREAM_STRONG_AUG, epoch])

        stats_emo, stats_int = _StatsAccumulator(), _StatsAccumulator()
        total_sum = 0.0
        for lab_batch, unlab_batch in steps:
            lab_feats = np.stack([
                extractor(augmenter(s, config.weak_aug_kind, rng_lab)) for s in lab_batch])
            spec = BatchLossSpec(
                lab_features=lab_feats,
                emo_labels=np.array([s.emotion for s in lab_batch]),
                int_labels=np.array([s.intent for s in lab_batch]),
                coeffs=coeffs, intent_weight=config.intent_weight)

            if config.method != "baseline" and unlab_batch:
                if config.weak_aug_on_unlabelled:
                    weak_payloads = [augmenter(s, config.weak_aug_kind, rng_weak)
                                     for s in unlab_batch]
                else:
                    weak_payloads = [s.payload for s in unlab_batch]
                weak_feats = np.stack([extractor(p) for p in weak_payloads])
                strong_feats = np.stack([
                    extractor(augmenter(s, config.strong_aug_kind, rng_strong))
                    for s in unlab_batch])
                pw_emo, pw_int = forward_batch(model, weak_feats)
                if config.method == "fixmatch":
                    joint = ((pw_emo.max(axis=1) > config.tau)
                             & (pw_int.max(axis=1) > config.tau))
                    terms_emo = build_task_terms(pw_emo, None, config.tau, gate=joint)
                    terms_int = build_task_terms(pw_int, None, config.tau, gate=joint)
                else:
                    ps_emo, ps_int = forward_batch(model, strong_feats)
                    terms_emo = build_task_terms(pw_emo, ps_emo, config.tau, sigma=config.sigma)
                    terms_int = build_task_terms(pw_int, ps_int, config.tau, sigma=config.sigma)
                spec.strong_features = strong_feats
                spec.emo_terms = terms_emo
                spec.int_terms = terms_int

            result, grads = loss_and_gradients(model, spec)
            model, state = adam_step(model, grads, state, lr)
            stats_emo.add(result.emo, len(unlab_batch))
            stats_int.add(result.intent, len(unlab_batch))
            total_sum += result.total

        val = evaluate(model, valid_eval, extractor)
        reports.append(EpochReport(epoch=epoch, lr=lr, emo=stats_emo.finish(),
                                   intent=stats_int.finish(),
                                   mean_total=total_sum / max(len(steps), 1), val=val))
        if val.jrbm > best_jrbm:
            best_jrbm, best_model, best_val, best_epoch = val.jrbm, model, val, epoch

    test = evaluate(best_model, test_set, extractor) if test_set else None
    return TrainResult(model=best_model, reports=reports, best_epoch=best_epoch,
                       val_metrics=best_val, test_metrics=test)


_CSV_COLUMNS = [
    "epoch", "lr",
    "emo_sup", "emo_unsup", "emo_neg", "emo_ent", "emo_total", "emo_accept_rate", "emo_k_hist",
    "int_sup", "int_unsup", "int_neg", "int_ent", "int_total", "int_accept_rate", "int_k_hist",
    "mean_total", "val_f1_emo", "val_f1_intent", "val_jrbm",
]


def _hist_str(hist: dict[int, int]) -> str:
    return " ".join(f"{k}:{hist[k]}" for k in sorted(hist))


def epoch_reports_csv(reports) -> str:
    """One CSV row per epoch; float cells use repr for exact round-trips."""
    lines = [",".join(_CSV_COLUMNS)]
    for r in reports:
        cells = [str(r.epoch), repr(r.lr)]
        for stats in (r.emo, r.intent):
            cells += [repr(stats.sup), repr(stats.unsup), repr(stats.neg), repr(stats.ent),
                      repr(stats.total), repr(stats.acceptance_rate), _hist_str(stats.k_hist)]
        cells += [repr(r.mean_total), repr(r.val.f1_emo), repr(r.val.f1_intent), repr(r.val.jrbm)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


__all__ = [
    "EpochReport", "METHODS", "TaskEpochStats", "TrainConfig", "TrainResult",
    "epoch_reports_csv", "evaluate", "lr_at_epoch", "predict_probs", "train",
]
