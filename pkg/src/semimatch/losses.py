"""Semi-supervised loss stack for joint two-task classification.

Three training objectives build on each other:

* baseline: plain supervised cross-entropy on labelled data;
* fixmatch: adds a consistency term on unlabelled data, where the weak
  branch's argmax becomes a pseudo label whenever its confidence clears a
  threshold, and the cross-entropy is charged to the strong branch;
* fullmatch: additionally picks a per-batch rank cut ``k`` (smallest k whose
  top-k agreement between weak pseudo labels and strong rankings beats a
  threshold), then suppresses strong-branch probabilities of classes ranked
  below k (adaptive negative loss) and pulls ranks 2..k toward a shared soft
  target (entropy meaning loss).

All functions here are pure and operate on probability vectors; the model
and gradients live in :mod:`semimatch.model`.

Conventions fixed across the package: ranks are 1-based by descending
probability with ties broken toward the lower class index; thresholds are
strict (``>``); unsupervised sums are divided by the full unlabelled batch
size; log arguments are clamped to ``[1e-12, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError

CLAMP_MIN = 1e-12
PROB_ATOL = 1e-6


def safe_log(x):
    """log with the argument clamped to [1e-12, 1]."""
    return np.log(np.clip(x, CLAMP_MIN, 1.0))


def _as_prob_matrix(rows, what: str) -> np.ndarray:
    mat = np.asarray(rows, dtype=float)
    if mat.ndim == 1:
        mat = mat[None, :]
    if mat.ndim != 2 or mat.shape[1] < 2:
        raise ContractError(f"{what}: expected vectors of at least 2 classes")
    if np.any(mat < -1e-12) or np.any(mat > 1 + 1e-12):
        raise ContractError(f"{what}: probabilities outside [0, 1]")
    if np.any(np.abs(mat.sum(axis=1) - 1.0) > PROB_ATOL):
        raise ContractError(f"{what}: probability vectors must sum to 1")
    return mat


@dataclass(frozen=True)
class PseudoLabelDecision:
    """Outcome of the confidence gate for one unlabelled sample."""

    predicted_class: int
    confidence: float
    accepted: bool


@dataclass(frozen=True)
class TopKSelection:
    """Selected rank cut and the top-k accuracy achieved at it."""

    k: int
    topk_accuracy: float


@dataclass(frozen=True)
class SoftTargets:
    """Shared soft target for the mid-rank classes of one sample.

    ``values`` holds the target on member classes and 0 elsewhere;
    ``members`` marks the classes whose weak rank lies in [2, k].
    """

    values: np.ndarray
    members: np.ndarray


@dataclass
class LossBreakdown:
    """Itemized loss for one task on one batch.

    ``total`` applies the configured coefficients to the raw parts:
    ``l_sup + lam1 * l_fix_unsup + lam2 * l_neg + lam3 * l_ent``.
    """

    l_sup: float
    l_fix_unsup: float
    l_neg: float
    l_ent: float
    accepted_count: int
    total: float
    labelled_empty: bool = False
    k: int | None = None


@dataclass
class MultitaskLoss:
    """Combined objective ``emo.total + intent_weight * intent.total``."""

    total: float
    emo: LossBreakdown
    intent: LossBreakdown


@dataclass(frozen=True)
class LossCoefficients:
    """Weights of the unsupervised terms (lambda_1..3 in the config)."""

    unsup: float = 0.5
    negative: float = 0.5
    entropy: float = 0.5


@dataclass
class TaskTerms:
    """Frozen per-batch decisions feeding one task's unsupervised losses.

    Everything here is a constant of the batch: no gradient flows through
    pseudo labels, gates, the rank cut, rank masks, or soft targets.
    """

    pseudo: np.ndarray                    # (B,) weak-branch argmax
    gate: np.ndarray                      # (B,) bool, confidence gate
    k: int | None = None                  # rank cut; None disables rank losses
    neg_mask: np.ndarray | None = None    # (B, C) bool, weak rank > k
    mid_mask: np.ndarray | None = None    # (B, C) bool, weak rank in [2, k]
    soft_target: np.ndarray | None = None  # (B,) shared target per sample


def rank_classes(probs) -> np.ndarray:
    """1-based ranks by descending probability, ties to the lower index."""
    return rank_matrix(_as_prob_matrix(probs, "rank_classes"))[0]


def rank_matrix(probs: np.ndarray) -> np.ndarray:
    """Row-wise rank assignment; rank 1 holds each row's maximum."""
    order = np.argsort(-probs, axis=1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(1, probs.shape[1] + 1)[None, :], axis=1)
    return ranks


def gate_pseudo_label(weak_probs, tau: float) -> PseudoLabelDecision:
    """Gate one sample: argmax of the weak branch, accepted iff max > tau."""
    if not 0.0 < tau <= 1.0:
        raise ConfigError("tau must lie in (0, 1]")
    probs = _as_prob_matrix(weak_probs, "gate_pseudo_label")[0]
    cls = int(np.argmax(probs))
    conf = float(probs[cls])
    return PseudoLabelDecision(predicted_class=cls, confidence=conf, accepted=conf > tau)


def select_k(weak_probs_batch, strong_probs_batch, sigma: float) -> TopKSelection:
    """Smallest k whose top-k accuracy beats sigma; k = C when none does.

    Top-k accuracy counts how often the weak-branch argmax appears among the
    k highest strong-branch probabilities.
    """
    if not 0.0 < sigma <= 1.0:
        raise ConfigError("sigma must lie in (0, 1]")
    weak = np.asarray(weak_probs_batch, dtype=float)
    if weak.size == 0:
        raise ConfigError("select_k requires a non-empty batch")
    weak = _as_prob_matrix(weak, "select_k weak branch")
    strong = _as_prob_matrix(strong_probs_batch, "select_k strong branch")
    if weak.shape != strong.shape:
        raise ContractError("weak and strong batches must have identical shapes")
    pseudo = np.argmax(weak, axis=1)
    pseudo_rank = rank_matrix(strong)[np.arange(len(weak)), pseudo]
    n_classes = weak.shape[1]
    for k in range(1, n_classes + 1):
        acc = float(np.mean(pseudo_rank <= k))
        if acc > sigma:
            return TopKSelection(k=k, topk_accuracy=acc)
    return TopKSelection(k=n_classes, topk_accuracy=1.0)


def entropy_meaning_soft_label(weak_probs, strong_probs, k: int) -> SoftTargets:
    """Spread the strong branch's leftover top-1 mass over weak ranks 2..k.

    Each member class gets the same target, (1 - p_strong[weak argmax]) /
    (k - 1). For k = 1 the member set is empty.
    """
    weak = _as_prob_matrix(weak_probs, "soft label weak branch")[0]
    strong = _as_prob_matrix(strong_probs, "soft label strong branch")[0]
    if weak.shape != strong.shape:
        raise ContractError("weak and strong vectors must have the same length")
    n_classes = len(weak)
    if not 1 <= k <= n_classes:
        raise ContractError("k must lie in [1, C]")
    ranks = rank_matrix(weak[None, :])[0]
    members = (ranks >= 2) & (ranks <= k)
    values = np.zeros(n_classes)
    if k >= 2:
        top1 = int(np.argmax(weak))
        values[members] = (1.0 - strong[top1]) / (k - 1)
    return SoftTargets(values=values, members=members)


def _stack_unlabelled(unlabelled):
    weak = _as_prob_matrix([w for w, _ in unlabelled], "unlabelled weak branch")
    strong = _as_prob_matrix([s for _, s in unlabelled], "unlabelled strong branch")
    if weak.shape != strong.shape:
        raise ContractError("weak and strong batches must have identical shapes")
    return weak, strong


def adaptive_negative_loss(unlabelled, k: int) -> float:
    """Mean over the batch of -sum over ranks>k of log(1 - strong prob)."""
    if not unlabelled:
        return 0.0
    weak, strong = _stack_unlabelled(unlabelled)
    if not 1 <= k <= weak.shape[1]:
        raise ContractError("k must lie in [1, C]")
    tail = rank_matrix(weak) > k
    return float(-np.sum(tail * safe_log(1.0 - strong)) / len(weak))


def entropy_meaning_loss(unlabelled, k: int) -> float:
    """Per-class binary cross-entropy of ranks 2..k against the soft target.

    Normalized by batch size times class count.
    """
    if not unlabelled:
        return 0.0
    weak, strong = _stack_unlabelled(unlabelled)
    b, n_classes = weak.shape
    if not 1 <= k <= n_classes:
        raise ContractError("k must lie in [1, C]")
    if k == 1:
        return 0.0
    ranks = rank_matrix(weak)
    members = (ranks >= 2) & (ranks <= k)
    pseudo = np.argmax(weak, axis=1)
    y = ((1.0 - strong[np.arange(b), pseudo]) / (k - 1))[:, None]
    bce = y * safe_log(strong) + (1.0 - y) * safe_log(1.0 - strong)
    return float(-np.sum(members * bce) / (b * n_classes))


def build_task_terms(weak_probs: np.ndarray, strong_probs: np.ndarray | None,
                     tau: float, sigma: float | None = None,
                     gate: np.ndarray | None = None) -> TaskTerms:
    """Freeze one task's batch decisions from the weak (and strong) branch.

    Passing ``sigma`` turns on the rank losses: the cut k is selected on
    this batch and the rank masks and soft targets are derived from it.
    ``gate`` overrides the per-task confidence gate (used for the joint
    two-task gate).
    """
    weak = _as_prob_matrix(weak_probs, "weak branch")
    pseudo = np.argmax(weak, axis=1)
    if gate is None:
        gate = weak.max(axis=1) > tau
    else:
        gate = np.asarray(gate, dtype=bool)
        if gate.shape != (len(weak),):
            raise ContractError("gate mask length must match the batch")
    terms = TaskTerms(pseudo=pseudo, gate=gate)
    if sigma is not None:
        strong = _as_prob_matrix(strong_probs, "strong branch")
        if strong.shape != weak.shape:
            raise ContractError("weak and strong batches must have identical shapes")
        sel = select_k(weak, strong, sigma)
        ranks = rank_matrix(weak)
        terms.k = sel.k
        terms.neg_mask = ranks > sel.k
        terms.mid_mask = (ranks >= 2) & (ranks <= sel.k)
        if sel.k >= 2:
            terms.soft_target = (1.0 - strong[np.arange(len(weak)), pseudo]) / (sel.k - 1)
        else:
            terms.soft_target = np.zeros(len(weak))
    return terms


def task_loss_from_terms(lab_probs: np.ndarray | None, labels: np.ndarray | None,
                         strong_probs: np.ndarray | None, terms: TaskTerms | None,
                         coeffs: LossCoefficients) -> LossBreakdown:
    """Evaluate one task's itemized loss given frozen batch decisions."""
    if lab_probs is not None and len(lab_probs):
        labels = np.asarray(labels, dtype=int)
        if len(labels) != len(lab_probs):
            raise ContractError("labelled probabilities and labels differ in length")
        l_sup = float(-np.mean(safe_log(lab_probs[np.arange(len(labels)), labels])))
        labelled_empty = False
    else:
        l_sup, labelled_empty = 0.0, True

    l_fix = l_neg = l_ent = 0.0
    accepted = 0
    k = None
    if strong_probs is not None and len(strong_probs) and terms is not None:
        b, n_classes = strong_probs.shape
        picked = strong_probs[np.arange(b), terms.pseudo]
        l_fix = float(-np.sum(terms.gate * safe_log(picked)) / b)
        accepted = int(terms.gate.sum())
        k = terms.k
        if terms.neg_mask is not None:
            l_neg = float(-np.sum(terms.neg_mask * safe_log(1.0 - strong_probs)) / b)
        if terms.mid_mask is not None and terms.k is not None and terms.k >= 2:
            y = terms.soft_target[:, None]
            bce = y * safe_log(strong_probs) + (1.0 - y) * safe_log(1.0 - strong_probs)
            l_ent = float(-np.sum(terms.mid_mask * bce) / (b * n_classes))

    total = l_sup + coeffs.unsup * l_fix + coeffs.negative * l_neg + coeffs.entropy * l_ent
    return LossBreakdown(l_sup=l_sup, l_fix_unsup=l_fix, l_neg=l_neg, l_ent=l_ent,
                         accepted_count=accepted, total=total,
                         labelled_empty=labelled_empty, k=k)


def combine_breakdown(emo: LossBreakdown, intent: LossBreakdown,
                      intent_weight: float) -> MultitaskLoss:
    return MultitaskLoss(total=emo.total + intent_weight * intent.total,
                         emo=emo, intent=intent)


def _split_labelled(labelled):
    if not labelled:
        return None, None
    probs = _as_prob_matrix([p for p, _ in labelled], "labelled probabilities")
    labels = np.asarray([y for _, y in labelled], dtype=int)
    if np.any(labels < 0) or np.any(labels >= probs.shape[1]):
        raise ContractError("labels out of class range")
    return probs, labels


def fixmatch_loss(labelled, unlabelled, tau: float, lam1: float) -> LossBreakdown:
    """Supervised cross-entropy plus the confidence-gated consistency term.

    ``labelled`` pairs (weak-branch probs, label); ``unlabelled`` pairs
    (weak probs, strong probs). The unsupervised sum is divided by the full
    unlabelled batch size.
    """
    if not 0.0 < tau <= 1.0:
        raise ConfigError("tau must lie in (0, 1]")
    probs, labels = _split_labelled(labelled)
    coeffs = LossCoefficients(unsup=lam1, negative=0.0, entropy=0.0)
    if not unlabelled:
        return task_loss_from_terms(probs, labels, None, None, coeffs)
    weak, strong = _stack_unlabelled(unlabelled)
    terms = build_task_terms(weak, None, tau)
    return task_loss_from_terms(probs, labels, strong, terms, coeffs)


def fullmatch_loss(labelled, unlabelled, tau: float, sigma: float,
                   lam1: float, lam2: float, lam3: float) -> LossBreakdown:
    """Gated consistency plus rank-tail suppression and mid-rank equalization.

    k is selected once for the whole batch. With lam2 = lam3 = 0 this
    reduces exactly to :func:`fixmatch_loss`.
    """
    if not 0.0 < tau <= 1.0:
        raise ConfigError("tau must lie in (0, 1]")
    probs, labels = _split_labelled(labelled)
    coeffs = LossCoefficients(unsup=lam1, negative=lam2, entropy=lam3)
    if not unlabelled:
        return task_loss_from_terms(probs, labels, None, None, coeffs)
    weak, strong = _stack_unlabelled(unlabelled)
    terms = build_task_terms(weak, strong, tau, sigma=sigma)
    return task_loss_from_terms(probs, labels, strong, terms, coeffs)


def multitask_loss(method: str, emo_labelled, int_labelled, emo_unlabelled,
                   int_unlabelled, lam: float = 1.0, tau: float = 0.95,
                   sigma: float = 0.99, lam1: float = 0.5, lam2: float = 0.5,
                   lam3: float = 0.5) -> MultitaskLoss:
    """Two-task objective: emotion total plus lam times the intent total.

    In fixmatch mode, an unlabelled sample enters either task's consistency
    term only when both tasks clear the confidence gate (joint gate). In
    fullmatch mode every term is computed per task independently, including
    the gates and the rank cut.
    """
    if method not in ("baseline", "fixmatch", "fullmatch"):
        raise ConfigError(f"unknown method '{method}'")
    if len(emo_labelled) != len(int_labelled):
        raise ContractError("labelled sample counts differ between tasks")
    if len(emo_unlabelled) != len(int_unlabelled):
        raise ContractError("unlabelled sample counts differ between tasks")

    if method == "baseline":
        coeffs = LossCoefficients(unsup=lam1, negative=0.0, entropy=0.0)
        emo = task_loss_from_terms(*_split_labelled(emo_labelled), None, None, coeffs)
        intent = task_loss_from_terms(*_split_labelled(int_labelled), None, None, coeffs)
        return combine_breakdown(emo, intent, lam)

    if method == "fixmatch":
        coeffs = LossCoefficients(unsup=lam1, negative=0.0, entropy=0.0)
        emo_probs, emo_labels = _split_labelled(emo_labelled)
        int_probs, int_labels = _split_labelled(int_labelled)
        if not emo_unlabelled:
            emo = task_loss_from_terms(emo_probs, emo_labels, None, None, coeffs)
            intent = task_loss_from_terms(int_probs, int_labels, None, None, coeffs)
            return combine_breakdown(emo, intent, lam)
        weak_e, strong_e = _stack_unlabelled(emo_unlabelled)
        weak_i, strong_i = _stack_unlabelled(int_unlabelled)
        joint = (weak_e.max(axis=1) > tau) & (weak_i.max(axis=1) > tau)
        terms_e = build_task_terms(weak_e, None, tau, gate=joint)
        terms_i = build_task_terms(weak_i, None, tau, gate=joint)
        emo = task_loss_from_terms(emo_probs, emo_labels, strong_e, terms_e, coeffs)
        intent = task_loss_from_terms(int_probs, int_labels, strong_i, terms_i, coeffs)
        return combine_breakdown(emo, intent, lam)

    emo = fullmatch_loss(emo_labelled, emo_unlabelled, tau, sigma, lam1, lam2, lam3)
    intent = fullmatch_loss(int_labelled, int_unlabelled, tau, sigma, lam1, lam2, lam3)
    return combine_breakdown(emo, intent, lam)


__all__ = [
    "CLAMP_MIN", "LossBreakdown", "LossCoefficients", "MultitaskLoss",
    "PseudoLabelDecision", "SoftTargets", "TaskTerms", "TopKSelection",
    "adaptive_negative_loss", "build_task_terms", "combine_breakdown",
    "entropy_meaning_loss", "entropy_meaning_soft_label", "fixmatch_loss",
    "fullmatch_loss", "gate_pseudo_label", "multitask_loss", "rank_classes",
    "rank_matrix", "safe_log", "select_k", "task_loss_from_terms",
]
