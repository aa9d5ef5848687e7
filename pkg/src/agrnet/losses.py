"""The five training losses and their weighted aggregation.

Parsing losses take flat probability rows (N, num_classes); the edge loss
takes flat probabilities (N,). Probabilities are clamped to
[eps, 1 - eps] before every logarithm.
"""

from dataclasses import dataclass

import torch

from .config import ConfigError
from .errors import ValidationError

DEFAULT_EPS = 1e-7
DEFAULT_LAMBDAS = (1.0, 1.0, 1.0, 0.5, 0.1)


def _check_labels(probs, labels):
    if labels.min() < 0 or labels.max() >= probs.shape[-1]:
        raise ValidationError("label id out of range")


def loss_raw(probs: torch.Tensor, labels: torch.Tensor, eps: float = DEFAULT_EPS):
    """Mean cross-entropy of the preliminary parsing prediction."""
    _check_labels(probs, labels)
    p = probs.gather(-1, labels.long().unsqueeze(-1)).squeeze(-1)
    return -torch.log(p.clamp(eps, 1.0 - eps)).mean()


def loss_final(probs: torch.Tensor, labels: torch.Tensor, eps: float = DEFAULT_EPS):
    """Mean cross-entropy of the final parsing prediction."""
    return loss_raw(probs, labels, eps)


def loss_edge(pred: torch.Tensor, target: torch.Tensor, eps: float = DEFAULT_EPS):
    """Mean binary cross-entropy of the edge prediction."""
    p = pred.clamp(eps, 1.0 - eps)
    t = target.to(p.dtype)
    return -(t * torch.log(p) + (1.0 - t) * torch.log(1.0 - p)).mean()


def loss_ba(probs: torch.Tensor, labels: torch.Tensor, edge_mask: torch.Tensor,
            eps: float = DEFAULT_EPS):
    """Cross-entropy restricted to ground-truth edge pixels, averaged over the
    edge-pixel count; zero when the mask is empty."""
    _check_labels(probs, labels)
    mask = edge_mask.reshape(-1).bool()
    if not mask.any():
        return probs.sum() * 0.0
    p = probs.reshape(-1, probs.shape[-1])[mask]
    y = labels.reshape(-1)[mask]
    return loss_raw(p, y, eps)


def loss_dis(features: torch.Tensor, delta: float = 1.0):
    """Hinge-squared penalty on pairwise vertex distances below delta.

    Features are L2-normalized first; the mean runs over all ordered pairs
    i != j (batched input averages over the batch as well).
    """
    if features.dim() == 2:
        features = features.unsqueeze(0)
    if delta <= 0:
        raise ConfigError("delta must be positive")
    v = features.shape[1]
    if v < 2:
        raise ConfigError("need at least two vertices")
    x = features / (features.norm(dim=-1, keepdim=True) + 1e-12)
    sq = (x.unsqueeze(2) - x.unsqueeze(1)).pow(2).sum(-1)
    dist = torch.sqrt(sq + 1e-16)
    phi = torch.relu(delta - dist).pow(2)
    off_diag = 1.0 - torch.eye(v, dtype=x.dtype, device=x.device)
    return (phi * off_diag).sum(dim=(1, 2)).mean() / (v * (v - 1))


@dataclass
class LossBundle:
    raw: torch.Tensor
    edge: torch.Tensor
    ba: torch.Tensor
    final: torch.Tensor
    dis: torch.Tensor
    lambdas: tuple
    total: torch.Tensor

    def components(self) -> dict:
        return {k: float(getattr(self, k).detach())
                for k in ("raw", "edge", "ba", "final", "dis", "total")}


def total_loss(raw, edge, ba, final, dis, lambdas=DEFAULT_LAMBDAS) -> LossBundle:
    if len(lambdas) != 5:
        raise ConfigError("expected five loss weights")
    if any(l < 0 for l in lambdas):
        raise ConfigError("loss weights must be nonnegative")
    l1, l2, l3, l4, l5 = lambdas
    total = l1 * raw + l2 * edge + l3 * ba + l4 * final + l5 * dis
    return LossBundle(raw=raw, edge=edge, ba=ba, final=final, dis=dis,
                      lambdas=tuple(lambdas), total=total)
