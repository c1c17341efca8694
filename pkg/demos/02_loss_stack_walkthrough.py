"""Walk the loss stack on a tiny hand-readable batch.

Shows each moving part in order: the confidence gate, the per-batch rank
cut k, how the classes of one sample partition into rank 1 / ranks 2..k /
ranks after k, the shared soft target, and finally the three objectives
(supervised only, gated consistency, full stack) side by side.
"""

from semimatch.losses import (
    adaptive_negative_loss,
    entropy_meaning_loss,
    entropy_meaning_soft_label,
    fixmatch_loss,
    fullmatch_loss,
    gate_pseudo_label,
    multitask_loss,
    rank_classes,
    select_k,
)

# four unlabelled samples: (weak-branch probs, strong-branch probs)
unlabelled = [
    ([0.96, 0.02, 0.01, 0.01], [0.70, 0.15, 0.10, 0.05]),   # confident, consistent
    ([0.97, 0.01, 0.01, 0.01], [0.20, 0.60, 0.15, 0.05]),   # confident, inconsistent
    ([0.40, 0.30, 0.20, 0.10], [0.35, 0.35, 0.20, 0.10]),   # unsure
    ([0.55, 0.25, 0.15, 0.05], [0.50, 0.30, 0.15, 0.05]),   # unsure
]
labelled = [([0.80, 0.10, 0.05, 0.05], 0), ([0.10, 0.70, 0.10, 0.10], 1)]

print("confidence gate at tau = 0.95:")
for weak, _ in unlabelled:
    decision = gate_pseudo_label(weak, tau=0.95)
    print(f"  weak max {decision.confidence:.2f} -> class {decision.predicted_class}, "
          f"{'accepted' if decision.accepted else 'rejected'}")

weak_batch = [w for w, _ in unlabelled]
strong_batch = [s for _, s in unlabelled]
sel = select_k(weak_batch, strong_batch, sigma=0.99)
print(f"\nrank cut: k = {sel.k} (top-{sel.k} accuracy {sel.topk_accuracy:.2f} > 0.99)")

weak, strong = unlabelled[2]
ranks = rank_classes(weak)
print(f"\nsample 3 weak ranks: {list(ranks)}")
print(f"  rank 1 class feeds the consistency term")
print(f"  ranks 2..{sel.k} feed the mid-rank equalization term")
print(f"  ranks beyond {sel.k} feed the rank-tail suppression term")
soft = entropy_meaning_soft_label(weak, strong, k=sel.k)
print(f"  shared soft target for the mid ranks: "
      f"{soft.values[soft.members][0] if soft.members.any() else 0.0:.4f}")

print(f"\nadaptive negative loss at k={sel.k}: "
      f"{adaptive_negative_loss(unlabelled, k=sel.k):.4f}")
print(f"entropy meaning loss at k={sel.k}:   "
      f"{entropy_meaning_loss(unlabelled, k=sel.k):.4f}")

fix = fixmatch_loss(labelled, unlabelled, tau=0.95, lam1=0.5)
full = fullmatch_loss(labelled, unlabelled, tau=0.95, sigma=0.99,
                      lam1=0.5, lam2=0.5, lam3=0.5)
print(f"\ngated consistency objective: sup {fix.l_sup:.4f} + 0.5 x unsup "
      f"{fix.l_fix_unsup:.4f} = {fix.total:.4f} ({fix.accepted_count}/4 accepted)")
print(f"full objective: adds 0.5 x {full.l_neg:.4f} + 0.5 x {full.l_ent:.4f} "
      f"= {full.total:.4f}")

# the two-task combination: in fixmatch mode a sample must clear the gate
# on BOTH tasks before it contributes to either
emo_unlab = [([0.97, 0.02, 0.01, 0.00], [0.6, 0.2, 0.1, 0.1])]
int_unlab = [([0.90, 0.05, 0.05, 0.00], [0.6, 0.2, 0.1, 0.1])]
joint = multitask_loss("fixmatch", [], [], emo_unlab, int_unlab, tau=0.95)
print(f"\njoint gate: emotion 0.97 > 0.95 but intent 0.90 <= 0.95 -> "
      f"accepted on neither task ({joint.emo.accepted_count} accepted)")
per_task = multitask_loss("fullmatch", [], [], emo_unlab, int_unlab, tau=0.95)
print(f"full-stack mode gates per task -> emotion side accepts "
      f"{per_task.emo.accepted_count}, intent side {per_task.intent.accepted_count}")
