"""Corpus model, line-delimited serialization, splitting, synthesis, batching.

A corpus holds labelled samples (each carrying both task labels), unlabelled
samples (carrying neither), the class name lists, and the token-side
resources (synonym lexicon, embedding table). The on-disk format is one
JSON object per line: a header with the shared resources first, then one
record per sample. The embedding table is stored as seed + dimensions and
regenerated on load.

The synthetic generator builds class-conditional payloads: piecewise
amplitude signatures plus unit noise for signals, class-tilted unigram
token distributions for text. The two label streams are paired through a
partial shuffle, which keeps both per-class margins exact at every
correlation level: correlation 1 leaves the sorted streams aligned
(maximal coupling), correlation 0 permutes one stream uniformly.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .augment import EmbeddingTable, SignalSequence, SynonymLexicon, TokenSequence
from .errors import ConfigError, ContractError, SchemaError
from .fileio import atomic_write_text

FORMAT_NAME = "semimatch-corpus"
FORMAT_VERSION = 1


@dataclass
class Sample:
    """One instance: signal or token payload, both labels or neither."""

    id: str
    modality: str
    payload: SignalSequence | TokenSequence
    emotion: int | None = None
    intent: int | None = None

    def __post_init__(self):
        if self.modality not in ("signal", "tokens"):
            raise SchemaError(f"sample {self.id}: unknown modality '{self.modality}'")
        if (self.emotion is None) != (self.intent is None):
            raise SchemaError(
                f"sample {self.id}: labelled samples need both labels, unlabelled neither")

    @property
    def is_labelled(self) -> bool:
        return self.emotion is not None


@dataclass
class Corpus:
    labelled: list[Sample]
    unlabelled: list[Sample]
    emotion_names: list[str]
    intent_names: list[str]
    lexicon: SynonymLexicon | None = None
    embedding: EmbeddingTable | None = None

    def __post_init__(self):
        if len(self.emotion_names) < 2 or len(self.intent_names) < 2:
            raise SchemaError("each task needs at least two classes")
        seen = set()
        for sample in self.labelled + self.unlabelled:
            if sample.id in seen:
                raise SchemaError(f"duplicate sample id '{sample.id}'")
            seen.add(sample.id)
        for sample in self.labelled:
            if not 0 <= sample.emotion < len(self.emotion_names):
                raise SchemaError(f"sample {sample.id}: emotion label out of range")
            if not 0 <= sample.intent < len(self.intent_names):
                raise SchemaError(f"sample {sample.id}: intent label out of range")

    @property
    def n_emotion(self) -> int:
        return len(self.emotion_names)

    @property
    def n_intent(self) -> int:
        return len(self.intent_names)


@dataclass(frozen=True)
class SplitSpec:
    """Train/valid/test fractions (summing to 1) plus the shuffle seed."""

    train: float
    valid: float
    test: float = 0.0
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train, self.valid, self.test)
        if any(f < 0 or f > 1 for f in fracs):
            raise ConfigError("split fractions must lie in [0, 1]")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ConfigError("split fractions must sum to 1")
        if self.train <= 0:
            raise ConfigError("the train fraction must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


def _largest_remainder(n: int, fractions) -> list[int]:
    """Integer allocation of n by fractions; ties go to the earlier split."""
    targets = [n * f for f in fractions]
    base = [int(np.floor(t)) for t in targets]
    leftovers = n - sum(base)
    order = sorted(range(len(fractions)), key=lambda i: (-(targets[i] - base[i]), i))
    for i in order[:leftovers]:
        base[i] += 1
    return base


def stratified_split(samples, spec: SplitSpec):
    """Partition labelled samples so each (emotion, intent) joint class lands
    within one sample of its fraction-proportional share in every split."""
    samples = list(samples)
    if any(not s.is_labelled for s in samples):
        raise ContractError("stratified_split requires fully labelled samples")
    groups: dict[tuple[int, int], list[Sample]] = {}
    for sample in samples:
        groups.setdefault((sample.emotion, sample.intent), []).append(sample)

    fractions = (spec.train, spec.valid, spec.test)
    n_positive = sum(1 for f in fractions if f > 0)
    rng = np.random.default_rng([int(spec.seed), 11003])
    splits: tuple[list[Sample], ...] = ([], [], [])
    for key in sorted(groups):
        members = groups[key]
        order = rng.permutation(len(members))
        shuffled = [members[i] for i in order]
        if len(members) < n_positive:
            warnings.warn(
                f"joint class {key} has fewer samples ({len(members)}) than splits; "
                "placing all of them in train", stacklevel=2)
            splits[0].extend(shuffled)
            continue
        counts = _largest_remainder(len(members), fractions)
        at = 0
        for split, count in zip(splits, counts):
            split.extend(shuffled[at:at + count])
            at += count
    return splits


@dataclass
class GeneratorConfig:
    """Recipe for a synthetic two-task corpus.

    ``emotion_counts`` and ``intent_counts`` are the labelled per-class
    counts; their sums must agree. ``correlation`` couples the two label
    assignments (0 independent, 1 maximal), ``separation`` scales class
    evidence relative to unit noise, ``modality_mix`` is the fraction of
    signal samples (the rest are token sequences).
    """

    emotion_counts: tuple[int, ...]
    intent_counts: tuple[int, ...]
    unlabelled_count: int = 0
    min_len: int = 160
    max_len: int = 320
    separation: float = 1.0
    correlation: float = 0.3
    modality_mix: float = 1.0
    sample_rate: int = 16000
    vocab_size: int = 30
    embedding_dim: int = 16
    seed: int = 0
    emotion_names: tuple[str, ...] | None = None
    intent_names: tuple[str, ...] | None = None

    def __post_init__(self):
        self.emotion_counts = tuple(int(c) for c in self.emotion_counts)
        self.intent_counts = tuple(int(c) for c in self.intent_counts)
        if len(self.emotion_counts) < 2 or len(self.intent_counts) < 2:
            raise ConfigError("each task needs at least two classes")
        if any(c <= 0 for c in self.emotion_counts + self.intent_counts):
            raise ConfigError("per-class counts must be positive")
        if sum(self.emotion_counts) != sum(self.intent_counts):
            raise ConfigError("emotion and intent counts must sum to the same total")
        if self.unlabelled_count < 0:
            raise ConfigError("unlabelled_count must be non-negative")
        if not 1 <= self.min_len <= self.max_len:
            raise ConfigError("need 1 <= min_len <= max_len")
        if not 0.0 <= self.correlation <= 1.0:
            raise ConfigError("correlation must lie in [0, 1]")
        if not 0.0 <= self.modality_mix <= 1.0:
            raise ConfigError("modality_mix must lie in [0, 1]")
        if self.separation < 0:
            raise ConfigError("separation must be non-negative")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


_N_SEGMENTS = 8


class _PayloadFactory:
    """Class-conditional payload generators shared by labelled/unlabelled."""

    def __init__(self, config: GeneratorConfig):
        self.config = config
        rng = np.random.default_rng([int(config.seed), 20001])
        n_emo, n_int = len(config.emotion_counts), len(config.intent_counts)
        self.signal_emo = rng.standard_normal((n_emo, _N_SEGMENTS))
        self.signal_int = rng.standard_normal((n_int, _N_SEGMENTS))
        self.token_emo = rng.standard_normal((n_emo, config.vocab_size))
        self.token_int = rng.standard_normal((n_int, config.vocab_size))

    def _length(self, rng):
        return int(rng.integers(self.config.min_len, self.config.max_len + 1))

    def signal(self, emotion: int, intent: int, rng) -> SignalSequence:
        cfg = self.config
        n = self._length(rng)
        t = np.arange(n)
        seg = (t * _N_SEGMENTS) // n
        sig = cfg.separation * (self.signal_emo[emotion][seg] + self.signal_int[intent][seg])
        texture = 0.2 * np.sin(2.0 * np.pi * 4.0 * t / n)
        frames = sig + texture + rng.standard_normal(n)
        return SignalSequence(frames=frames, sample_rate=cfg.sample_rate)

    def tokens(self, emotion: int, intent: int, rng) -> TokenSequence:
        cfg = self.config
        logits = cfg.separation * (self.token_emo[emotion] + self.token_int[intent])
        probs = np.exp(logits - logits.max())
        probs /= probs.sum()
        toks = rng.choice(cfg.vocab_size, size=self._length(rng), p=probs)
        return TokenSequence(tokens=toks, vocab_size=cfg.vocab_size)


def _paired_labels(config: GeneratorConfig, rng) -> list[tuple[int, int]]:
    """Pair the two sorted label streams through a partial shuffle.

    Both per-class margins are exact by construction; the shuffled subset
    size (1 - correlation) of the total tunes the coupling strength.
    """
    emo = np.repeat(np.arange(len(config.emotion_counts)), config.emotion_counts)
    intent = np.repeat(np.arange(len(config.intent_counts)), config.intent_counts)
    n = len(emo)
    n_shuffle = int(round((1.0 - config.correlation) * n))
    if n_shuffle > 1:
        where = rng.choice(n, size=n_shuffle, replace=False)
        intent[where] = intent[where[rng.permutation(n_shuffle)]]
    order = rng.permutation(n)
    return [(int(emo[i]), int(intent[i])) for i in order]


def synthesize_corpus(config: GeneratorConfig) -> Corpus:
    """Deterministically generate a corpus matching the requested counts."""
    factory = _PayloadFactory(config)
    pair_rng = np.random.default_rng([int(config.seed), 20002])
    payload_rng = np.random.default_rng([int(config.seed), 20003])
    pairs = _paired_labels(config, pair_rng)

    lexicon = embedding = None
    if config.modality_mix < 1.0:
        lexicon = SynonymLexicon.from_groups(config.vocab_size, group_size=3)
        embedding = EmbeddingTable.from_seed(
            config.vocab_size, config.embedding_dim, seed=config.seed, group_size=3)

    def build(index: int, prefix: str, emotion, intent, labelled: bool) -> Sample:
        is_signal = payload_rng.random() < config.modality_mix
        if is_signal:
            payload = factory.signal(emotion, intent, payload_rng)
        else:
            payload = factory.tokens(emotion, intent, payload_rng)
        return Sample(id=f"{prefix}-{index:06d}",
                      modality="signal" if is_signal else "tokens",
                      payload=payload,
                      emotion=emotion if labelled else None,
                      intent=intent if labelled else None)

    labelled = [build(i, "lab", e, c, True) for i, (e, c) in enumerate(pairs)]
    unlabelled = []
    for i in range(config.unlabelled_count):
        e, c = pairs[int(payload_rng.integers(0, len(pairs)))]
        unlabelled.append(build(i, "unl", e, c, False))

    emotion_names = list(config.emotion_names or
                         (f"emotion_{i}" for i in range(len(config.emotion_counts))))
    intent_names = list(config.intent_names or
                        (f"intent_{i}" for i in range(len(config.intent_counts))))
    return Corpus(labelled=labelled, unlabelled=unlabelled,
                  emotion_names=emotion_names, intent_names=intent_names,
                  lexicon=lexicon, embedding=embedding)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _sample_record(sample: Sample) -> dict:
    record: dict = {"id": sample.id, "modality": sample.modality}
    if sample.modality == "signal":
        record["payload"] = sample.payload.frames.tolist()
        record["sample_rate"] = sample.payload.sample_rate
    else:
        record["payload"] = sample.payload.tokens.tolist()
        record["vocab_size"] = sample.payload.vocab_size
    if sample.is_labelled:
        record["emotion"] = sample.emotion
        record["intent"] = sample.intent
    return record


def corpus_to_text(corpus: Corpus) -> str:
    """Serialize to the line-delimited format (header line first)."""
    header: dict = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "emotion_names": corpus.emotion_names,
        "intent_names": corpus.intent_names,
        "lexicon": None,
        "embedding": None,
    }
    if corpus.lexicon is not None:
        header["lexicon"] = {str(k): list(v) for k, v in sorted(corpus.lexicon.mapping.items())}
    if corpus.embedding is not None:
        if corpus.embedding.seed is None:
            raise ConfigError("only seed-built embedding tables can be serialized")
        header["embedding"] = {
            "vocab_size": corpus.embedding.vocab_size,
            "dim": corpus.embedding.dim,
            "seed": corpus.embedding.seed,
            "group_size": corpus.embedding.group_size,
        }
    lines = [json.dumps(header)]
    for sample in corpus.labelled + corpus.unlabelled:
        lines.append(json.dumps(_sample_record(sample)))
    return "\n".join(lines) + "\n"


def save_corpus(corpus: Corpus, path: str):
    atomic_write_text(path, corpus_to_text(corpus))


def _parse_record(line_no: int, record: dict) -> Sample:
    def need(key):
        if key not in record:
            raise SchemaError(f"line {line_no}: missing field '{key}'")
        return record[key]

    sample_id = need("id")
    modality = need("modality")
    payload = need("payload")
    has_emo, has_int = "emotion" in record, "intent" in record
    if has_emo != has_int:
        raise SchemaError(f"line {line_no}: record carries exactly one of the two labels")
    try:
        if modality == "signal":
            seq = SignalSequence(frames=np.asarray(payload, dtype=float),
                                 sample_rate=int(need("sample_rate")))
        elif modality == "tokens":
            seq = TokenSequence(tokens=np.asarray(payload, dtype=int),
                                vocab_size=int(need("vocab_size")))
        else:
            raise SchemaError(f"line {line_no}: unknown modality '{modality}'")
        return Sample(id=str(sample_id), modality=modality, payload=seq,
                      emotion=int(record["emotion"]) if has_emo else None,
                      intent=int(record["intent"]) if has_int else None)
    except (ContractError, SchemaError, TypeError, ValueError) as exc:
        raise SchemaError(f"line {line_no}: {exc}") from exc


def load_corpus(path: str) -> Corpus:
    """Parse a corpus file; errors name the offending 1-based line."""
    with open(path) as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise SchemaError("corpus file is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise SchemaError(f"line 1: invalid JSON header ({exc})") from exc
    if not isinstance(header, dict) or header.get("format") != FORMAT_NAME:
        raise SchemaError("line 1: not a corpus header")
    if header.get("version") != FORMAT_VERSION:
        raise SchemaError(f"line 1: unsupported corpus version {header.get('version')}")

    lexicon = None
    if header.get("lexicon"):
        lexicon = SynonymLexicon(mapping={
            int(k): tuple(int(t) for t in v) for k, v in header["lexicon"].items()})
    embedding = None
    if header.get("embedding"):
        meta = header["embedding"]
        embedding = EmbeddingTable.from_seed(
            int(meta["vocab_size"]), int(meta["dim"]), seed=int(meta["seed"]),
            group_size=int(meta.get("group_size", 3)))

    labelled, unlabelled = [], []
    for offset, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {offset}: invalid JSON ({exc})") from exc
        if not isinstance(record, dict):
            raise SchemaError(f"line {offset}: record must be an object")
        sample = _parse_record(offset, record)
        (labelled if sample.is_labelled else unlabelled).append(sample)

    try:
        corpus = Corpus(labelled=labelled, unlabelled=unlabelled,
                        emotion_names=list(header.get("emotion_names", [])),
                        intent_names=list(header.get("intent_names", [])),
                        lexicon=lexicon, embedding=embedding)
    except SchemaError as exc:
        raise SchemaError(f"corpus invariant violated: {exc}") from exc
    if embedding is not None:
        for sample in corpus.labelled + corpus.unlabelled:
            if sample.modality == "tokens" and sample.payload.vocab_size != embedding.vocab_size:
                raise SchemaError(
                    f"sample {sample.id}: vocab_size differs from the embedding table")
    return corpus


# ---------------------------------------------------------------------------
# batching
# ---------------------------------------------------------------------------

def make_batches(labelled, unlabelled, batch_size: int, unlabelled_ratio: float,
                 seed) -> list[tuple[list[Sample], list[Sample]]]:
    """One epoch of (labelled batch, unlabelled batch) steps.

    The labelled pool is shuffled and consumed exactly once (final short
    batch included); each step draws its unlabelled batch uniformly from
    the pool. The labelled and unlabelled draws use independent streams,
    so the labelled schedule does not depend on ``unlabelled_ratio``.
    """
    labelled = list(labelled)
    unlabelled = list(unlabelled)
    if not labelled:
        raise ConfigError("make_batches needs a non-empty labelled pool")
    if batch_size < 1:
        raise ConfigError("batch_size must be positive")
    if unlabelled_ratio < 0:
        raise ConfigError("unlabelled_ratio must be non-negative")
    seed = [int(s) for s in np.atleast_1d(seed)]
    if any(s < 0 for s in seed):
        raise ConfigError("seed must be non-negative")
    rng_lab = np.random.default_rng(seed + [31001])
    rng_unlab = np.random.default_rng(seed + [31002])

    order = rng_lab.permutation(len(labelled))
    n_unlab = int(round(unlabelled_ratio * batch_size))
    steps = []
    for start in range(0, len(labelled), batch_size):
        lab_batch = [labelled[i] for i in order[start:start + batch_size]]
        if n_unlab and unlabelled:
            take = rng_unlab.choice(len(unlabelled), size=n_unlab,
                                    replace=n_unlab > len(unlabelled))
            unlab_batch = [unlabelled[i] for i in take]
        else:
            unlab_batch = []
        steps.append((lab_batch, unlab_batch))
    return steps


__all__ = [
    "Corpus", "GeneratorConfig", "Sample", "SplitSpec", "corpus_to_text",
    "load_corpus", "make_batches", "save_corpus", "stratified_split",
    "synthesize_corpus",
]
