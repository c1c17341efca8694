"""Dense two-head classifier with hand-derived gradients.

A single shared hidden layer (ReLU) feeds two independent linear heads, one
per classification task. Everything is plain float64 numpy: forward pass,
analytic backprop for the composed semi-supervised loss, a bias-corrected
Adam update, and a central finite-difference oracle used to cross-check the
analytic gradients.

Gradient semantics: pseudo labels, confidence gates, the selected rank cut
``k``, rank masks, and soft targets are all frozen constants of the batch
(see :class:`semimatch.losses.TaskTerms`). Gradients flow only through the
probabilities of the labelled pass and the strongly-augmented pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, NumericError
from .losses import (
    CLAMP_MIN,
    LossBreakdown,
    LossCoefficients,
    MultitaskLoss,
    TaskTerms,
    combine_breakdown,
    task_loss_from_terms,
)

PARAM_FIELDS = ("w_trunk", "b_trunk", "w_emo", "b_emo", "w_int", "b_int")


@dataclass
class TwoHeadModel:
    """Shared trunk plus one linear head per task.

    Shapes: ``w_trunk (d, H)``, ``b_trunk (H,)``, ``w_emo (H, C_e)``,
    ``b_emo (C_e,)``, ``w_int (H, C_i)``, ``b_int (C_i,)``.
    """

    w_trunk: np.ndarray
    b_trunk: np.ndarray
    w_emo: np.ndarray
    b_emo: np.ndarray
    w_int: np.ndarray
    b_int: np.ndarray

    def __post_init__(self):
        if self.w_trunk.ndim != 2:
            raise ContractError("trunk weights must be a 2-D matrix")
        hidden = self.w_trunk.shape[1]
        if self.b_trunk.shape != (hidden,):
            raise ContractError("trunk bias shape does not match trunk width")
        for w, b, name in ((self.w_emo, self.b_emo, "emotion"), (self.w_int, self.b_int, "intent")):
            if w.shape[0] != hidden:
                raise ContractError(f"{name} head input width does not match trunk output")
            if b.shape != (w.shape[1],):
                raise ContractError(f"{name} head bias shape does not match head width")
            if w.shape[1] < 2:
                raise ContractError(f"{name} head needs at least 2 classes")
        for field in PARAM_FIELDS:
            if not np.all(np.isfinite(getattr(self, field))):
                raise NumericError(f"non-finite values in parameter {field}")

    @property
    def input_dim(self) -> int:
        return self.w_trunk.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.w_trunk.shape[1]

    @property
    def n_emotion(self) -> int:
        return self.w_emo.shape[1]

    @property
    def n_intent(self) -> int:
        return self.w_int.shape[1]

    def copy(self) -> "TwoHeadModel":
        return TwoHeadModel(*(getattr(self, f).copy() for f in PARAM_FIELDS))


@dataclass
class TaskProbs:
    """Per-task probability vectors for one sample."""

    emo: np.ndarray
    intent: np.ndarray

    def __post_init__(self):
        for vec, name in ((self.emo, "emo"), (self.intent, "intent")):
            if vec.ndim != 1:
                raise ContractError(f"{name} probabilities must be a vector")
            if np.any(vec < -1e-12) or np.any(vec > 1 + 1e-12):
                raise ContractError(f"{name} probabilities outside [0, 1]")
            if abs(float(vec.sum()) - 1.0) > 1e-6:
                raise ContractError(f"{name} probabilities do not sum to 1")


@dataclass
class Gradients:
    """Loss gradient, shaped exactly like :class:`TwoHeadModel`."""

    w_trunk: np.ndarray
    b_trunk: np.ndarray
    w_emo: np.ndarray
    b_emo: np.ndarray
    w_int: np.ndarray
    b_int: np.ndarray

    @classmethod
    def zeros_like(cls, model: TwoHeadModel) -> "Gradients":
        return cls(*(np.zeros_like(getattr(model, f)) for f in PARAM_FIELDS))


@dataclass
class AdamState:
    """First/second moment accumulators plus the step counter."""

    m: Gradients
    v: Gradients
    step: int = 0

    @classmethod
    def zeros_like(cls, model: TwoHeadModel) -> "AdamState":
        return cls(m=Gradients.zeros_like(model), v=Gradients.zeros_like(model), step=0)


def init_model(input_dim: int, hidden_size: int, n_emotion: int, n_intent: int,
               rng: np.random.Generator) -> TwoHeadModel:
    """Seeded uniform init in +-1/sqrt(fan_in) for every parameter."""
    if input_dim < 1 or hidden_size < 1:
        raise ConfigError("input_dim and hidden_size must be positive")

    def layer(fan_in, fan_out):
        limit = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        b = rng.uniform(-limit, limit, size=fan_out)
        return w, b

    w1, b1 = layer(input_dim, hidden_size)
    we, be = layer(hidden_size, n_emotion)
    wi, bi = layer(hidden_size, n_intent)
    return TwoHeadModel(w1, b1, we, be, wi, bi)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted by the row max for stability."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_parts(model: TwoHeadModel, x: np.ndarray):
    """Shared forward returning every intermediate needed by backprop."""
    z = x @ model.w_trunk + model.b_trunk
    a = np.maximum(z, 0.0)
    p_emo = softmax(a @ model.w_emo + model.b_emo)
    p_int = softmax(a @ model.w_int + model.b_int)
    return z, a, p_emo, p_int


def forward(model: TwoHeadModel, x: np.ndarray) -> TaskProbs:
    """Run one feature vector through trunk -> ReLU -> heads -> softmax."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.input_dim,):
        raise ContractError(
            f"feature dimension {x.shape} does not match model input ({model.input_dim},)")
    _, _, p_emo, p_int = _forward_parts(model, x[None, :])
    return TaskProbs(emo=p_emo[0], intent=p_int[0])


def forward_batch(model: TwoHeadModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched forward; returns (emotion probs, intent probs) as (B, C) arrays."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ContractError(
            f"feature batch shape {x.shape} does not match model input dim {model.input_dim}")
    _, _, p_emo, p_int = _forward_parts(model, x)
    return p_emo, p_int


def ce_logit_gradient(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-sample gradient of -log p[label] w.r.t. the logits: p - onehot."""
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    labels = np.atleast_1d(np.asarray(labels, dtype=int))
    g = probs.copy()
    g[np.arange(len(labels)), labels] -= 1.0
    return g


@dataclass
class BatchLossSpec:
    """One batch's composed multi-task loss with all discrete decisions frozen.

    ``lab_features`` feed the supervised term for both tasks;
    ``strong_features`` feed every unsupervised term. ``emo_terms`` /
    ``int_terms`` carry the frozen pseudo labels, gates, masks, and soft
    targets produced from the weak branch (and, for the rank losses, the
    strong branch at the base parameters).
    """

    lab_features: np.ndarray | None = None     # (B_l, d)
    emo_labels: np.ndarray | None = None       # (B_l,)
    int_labels: np.ndarray | None = None       # (B_l,)
    strong_features: np.ndarray | None = None  # (B_u, d)
    emo_terms: TaskTerms | None = None
    int_terms: TaskTerms | None = None
    coeffs: LossCoefficients = LossCoefficients()
    intent_weight: float = 1.0


def batch_loss(model: TwoHeadModel, spec: BatchLossSpec) -> MultitaskLoss:
    """Evaluate the composed loss at the given parameters, decisions fixed.

    This is the scalar path shared by backprop and the finite-difference
    oracle: both see the same frozen constants, so the only moving parts
    are the probabilities.
    """
    if spec.lab_features is not None and len(spec.lab_features):
        p_lab_emo, p_lab_int = forward_batch(model, spec.lab_features)
    else:
        p_lab_emo = p_lab_int = None
    if spec.strong_features is not None and len(spec.strong_features):
        p_str_emo, p_str_int = forward_batch(model, spec.strong_features)
    else:
        p_str_emo = p_str_int = None
    emo = task_loss_from_terms(p_lab_emo, spec.emo_labels, p_str_emo, spec.emo_terms, spec.coeffs)
    intent = task_loss_from_terms(p_lab_int, spec.int_labels, p_str_int, spec.int_terms, spec.coeffs)
    return combine_breakdown(emo, intent, spec.intent_weight)


def _check_finite_breakdown(name: str, bd: LossBreakdown):
    for field in ("l_sup", "l_fix_unsup", "l_neg", "l_ent", "total"):
        if not np.isfinite(getattr(bd, field)):
            raise NumericError(f"{name} loss term {field} is not finite")


def _unsup_logit_grad(p: np.ndarray, terms: TaskTerms, coeffs: LossCoefficients,
                      task_weight: float) -> np.ndarray:
    """Logit gradient of the unsupervised terms on the strong branch.

    The gated consistency term uses the softmax-CE shortcut directly; the
    rank-tail and mid-rank terms are assembled as dL/dp and pushed through
    the softmax Jacobian in one pass. Clamped log arguments contribute zero
    gradient, matching the clamping in the scalar path.
    """
    b, n_classes = p.shape
    g = coeffs.unsup / b * terms.gate[:, None] * ce_logit_gradient(p, terms.pseudo)

    dl_dp = np.zeros_like(p)
    one_minus = 1.0 - p
    inv_one_minus = np.where(one_minus > CLAMP_MIN, 1.0 / np.maximum(one_minus, CLAMP_MIN), 0.0)
    if terms.neg_mask is not None and coeffs.negative != 0.0:
        dl_dp += coeffs.negative / b * terms.neg_mask * inv_one_minus
    if terms.mid_mask is not None and coeffs.entropy != 0.0:
        inv_p = np.where(p > CLAMP_MIN, 1.0 / np.maximum(p, CLAMP_MIN), 0.0)
        y = terms.soft_target[:, None]
        dl_dp += -coeffs.entropy / (b * n_classes) * terms.mid_mask * (
            y * inv_p - (1.0 - y) * inv_one_minus)
    if np.any(dl_dp):
        # softmax Jacobian: dL/du_j = p_j * (g_j - sum_c g_c p_c)
        g = g + p * (dl_dp - (dl_dp * p).sum(axis=1, keepdims=True))
    return task_weight * g


def loss_and_gradients(model: TwoHeadModel, spec: BatchLossSpec) -> tuple[MultitaskLoss, Gradients]:
    """Itemized loss plus the analytic gradient of its total.

    The decisions inside ``spec`` never receive gradient; see the module
    docstring.
    """
    result = batch_loss(model, spec)
    _check_finite_breakdown("emotion", result.emo)
    _check_finite_breakdown("intent", result.intent)
    grads = Gradients.zeros_like(model)

    def accumulate(x, g_emo, g_int):
        z, a, _, _ = _forward_parts(model, x)
        grads.w_emo += a.T @ g_emo
        grads.b_emo += g_emo.sum(axis=0)
        grads.w_int += a.T @ g_int
        grads.b_int += g_int.sum(axis=0)
        da = g_emo @ model.w_emo.T + g_int @ model.w_int.T
        dz = da * (z > 0.0)
        grads.w_trunk += x.T @ dz
        grads.b_trunk += dz.sum(axis=0)

    if spec.lab_features is not None and len(spec.lab_features):
        x = np.asarray(spec.lab_features, dtype=float)
        _, _, p_emo, p_int = _forward_parts(model, x)
        b_l = len(x)
        g_emo = ce_logit_gradient(p_emo, spec.emo_labels) / b_l
        g_int = spec.intent_weight * ce_logit_gradient(p_int, spec.int_labels) / b_l
        accumulate(x, g_emo, g_int)

    if spec.strong_features is not None and len(spec.strong_features):
        x = np.asarray(spec.strong_features, dtype=float)
        _, _, p_emo, p_int = _forward_parts(model, x)
        g_emo = _unsup_logit_grad(p_emo, spec.emo_terms, spec.coeffs, 1.0)
        g_int = _unsup_logit_grad(p_int, spec.int_terms, spec.coeffs, spec.intent_weight)
        accumulate(x, g_emo, g_int)

    for field in PARAM_FIELDS:
        if not np.all(np.isfinite(getattr(grads, field))):
            raise NumericError(f"non-finite gradient for parameter {field}")
    return result, grads


def backprop(model: TwoHeadModel, spec: BatchLossSpec) -> tuple[float, Gradients]:
    """Scalar loss of the composed batch plus its exact analytic gradient."""
    result, grads = loss_and_gradients(model, spec)
    return result.total, grads


def adam_step(model: TwoHeadModel, grads: Gradients, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> tuple[TwoHeadModel, AdamState]:
    """One bias-corrected Adam update; returns fresh model and state."""
    if lr <= 0:
        raise ConfigError("learning rate must be positive")
    for field in PARAM_FIELDS:
        if getattr(grads, field).shape != getattr(model, field).shape:
            raise ContractError(f"gradient shape mismatch for {field}")
    t = state.step + 1
    new_params, new_m, new_v = {}, {}, {}
    for field in PARAM_FIELDS:
        g = getattr(grads, field)
        m = beta1 * getattr(state.m, field) + (1.0 - beta1) * g
        v = beta2 * getattr(state.v, field) + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        new_params[field] = getattr(model, field) - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[field] = m
        new_v[field] = v
    return (TwoHeadModel(**new_params),
            AdamState(m=Gradients(**new_m), v=Gradients(**new_v), step=t))


def finite_difference_gradient(loss_fn, model: TwoHeadModel, eps: float = 1e-5) -> Gradients:
    """Central-difference gradient oracle: (L(t+eps) - L(t-eps)) / (2 eps).

    ``loss_fn`` must be a pure function of the model parameters; any frozen
    batch decisions must be captured in its closure so that perturbing a
    parameter never changes them.
    """
    work = model.copy()
    out = Gradients.zeros_like(model)
    for field in PARAM_FIELDS:
        param = getattr(work, field)
        grad = getattr(out, field)
        it = np.nditer(param, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = param[idx]
            param[idx] = orig + eps
            plus = loss_fn(work)
            param[idx] = orig - eps
            minus = loss_fn(work)
            param[idx] = orig
            grad[idx] = (plus - minus) / (2.0 * eps)
    return out


def max_relative_error(analytic: Gradients, numeric: Gradients, floor: float = 1e-4) -> float:
    """Largest guarded relative difference between two gradient sets.

    Per entry: ``|a - n| / max(|a|, |n|, floor)``. The floor turns the
    comparison into an absolute one for entries smaller than ``floor``,
    which keeps finite-difference rounding noise from dominating.
    """
    worst = 0.0
    for field in PARAM_FIELDS:
        a = getattr(analytic, field)
        n = getattr(numeric, field)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


__all__ = [
    "AdamState", "BatchLossSpec", "Gradients", "TaskProbs", "TwoHeadModel",
    "adam_step", "backprop", "batch_loss", "ce_logit_gradient",
    "finite_difference_gradient", "forward", "forward_batch", "init_model",
    "loss_and_gradients", "max_relative_error", "softmax",
]
