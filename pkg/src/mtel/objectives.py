"""Loss functions for the three tasks and their weighted combination.

All functions are pure over tensors. Reductions: the generation loss
sums log-probabilities over positions (then averages over the batch);
the tagging loss is mean-per-token cross entropy per side, the two
sides summed; the match loss is a plain sum of squared residuals over
the gold pair and the k sampled pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F


class LossError(Exception):
    pass


class LengthMismatch(LossError):
    pass


class ScoreOutOfRange(LossError):
    pass


class NegativeWeight(LossError):
    pass


@dataclass
class LossBreakdown:
    el: torch.Tensor
    md: torch.Tensor
    mp: torch.Tensor
    total: torch.Tensor
    lambda_md: float
    lambda_mp: float

    def to_floats(self) -> dict[str, float]:
        return {
            "el": float(self.el.detach()),
            "md": float(self.md.detach()),
            "mp": float(self.mp.detach()),
            "total": float(self.total.detach()),
            "lambda_md": self.lambda_md,
            "lambda_mp": self.lambda_mp,
        }


def el_loss(logits: torch.Tensor, targets: torch.Tensor,
            mask: torch.Tensor | None = None) -> torch.Tensor:
    """Negative log-likelihood summed over positions, averaged over batch.

    logits: [B, N, V]; targets: [B, N]; mask: [B, N] bool, True at
    positions that count.
    """
    if logits.shape[:2] != targets.shape:
        raise LengthMismatch(f"logits {tuple(logits.shape[:2])} vs targets {tuple(targets.shape)}")
    logprobs = F.log_softmax(logits, dim=-1)
    token_ll = logprobs.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    if mask is not None:
        token_ll = token_ll * mask.to(token_ll.dtype)
    return -token_ll.sum(dim=-1).mean()


def _tag_ce(logits: torch.Tensor, labels: torch.Tensor,
            mask: torch.Tensor | None) -> torch.Tensor:
    # mean cross entropy per counted token
    if logits.shape[:-1] != labels.shape:
        raise LengthMismatch(f"logits {tuple(logits.shape[:-1])} vs labels {tuple(labels.shape)}")
    logprobs = F.log_softmax(logits, dim=-1)
    nll = -logprobs.gather(-1, labels.unsqueeze(-1)).squeeze(-1)
    if mask is None:
        return nll.mean()
    m = mask.to(nll.dtype)
    return (nll * m).sum() / m.sum()


def md_loss(src_logits: torch.Tensor, src_labels: torch.Tensor,
            tgt_logits: torch.Tensor, tgt_labels: torch.Tensor,
            src_mask: torch.Tensor | None = None,
            tgt_mask: torch.Tensor | None = None) -> torch.Tensor:
    """Tagging cross entropy on the encoder side plus the decoder side."""
    return _tag_ce(src_logits, src_labels, src_mask) + _tag_ce(tgt_logits, tgt_labels, tgt_mask)


def mp_loss(gold_score: torch.Tensor, sample_scores: torch.Tensor,
            sample_labels: torch.Tensor) -> torch.Tensor:
    """Squared error of the gold pair against 1 plus the k sampled pairs
    against their binary labels."""
    if sample_scores.shape != sample_labels.shape:
        raise LengthMismatch(
            f"scores {tuple(sample_scores.shape)} vs labels {tuple(sample_labels.shape)}"
        )
    for t in (gold_score.reshape(-1), sample_scores.reshape(-1)):
        if t.numel() and (t.min() < 0 or t.max() > 1):
            raise ScoreOutOfRange("match scores must lie in [0, 1]")
    gold_term = ((gold_score - 1.0) ** 2).sum()
    sample_term = ((sample_scores - sample_labels.to(sample_scores.dtype)) ** 2).sum()
    return gold_term + sample_term


def mtl_loss(el: torch.Tensor, md: torch.Tensor, mp: torch.Tensor,
             lambda_md: float, lambda_mp: float) -> LossBreakdown:
    """Weighted multi-task total; zero weights reduce exactly to el."""
    if lambda_md < 0 or lambda_mp < 0:
        raise NegativeWeight("task weights must be non-negative")
    total = el
    if lambda_md != 0.0:
        total = total + lambda_md * md
    if lambda_mp != 0.0:
        total = total + lambda_mp * mp
    return LossBreakdown(el=el, md=md, mp=mp, total=total,
                         lambda_md=lambda_md, lambda_mp=lambda_mp)
