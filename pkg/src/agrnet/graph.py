"""Pixel-to-vertex projection, graph reasoning and vertex-to-pixel reprojection.

Vertex features are (B, V, C) with V = K * num_classes; row block
k*K .. k*K+K-1 belongs to class k. Vertex indices are flat pixel indices into
the stride-4 grid. The projection matrix is (B, V, H*W), column-stochastic
over vertices for every pixel.
"""

import math

import torch
import torch.nn.functional as F
from torch import nn

from .config import ConfigError
from .errors import ValidationError


class FeatureFusion(nn.Module):
    """Bilinear upsample the pooled high-level map, concatenate with the
    low-level map and mix with a 1x1 convolution."""

    def __init__(self, low_channels, high_channels, out_channels):
        super().__init__()
        self.conv = nn.Conv2d(low_channels + high_channels, out_channels, 1)
        self.out_channels = out_channels

    def forward(self, low: torch.Tensor, high_pooled: torch.Tensor) -> torch.Tensor:
        lh, lw = low.shape[-2:]
        hh, hw = high_pooled.shape[-2:]
        if (lh, lw) != (2 * hh, 2 * hw):
            raise ConfigError(f"expected a 2x spatial ratio, got {lh}x{lw} vs {hh}x{hw}")
        up = F.interpolate(high_pooled, size=(lh, lw), mode="bilinear", align_corners=False)
        return self.conv(torch.cat([low, up], dim=1))


def split_edge_features(x0: torch.Tensor, edge: torch.Tensor):
    """Weight features by the edge map: xe = x0 * E, xne = x0 * (1 - E)."""
    if edge.shape[-2:] != x0.shape[-2:]:
        raise ConfigError("edge map and feature map spatial dims differ")
    if edge.min() < 0 or edge.max() > 1:
        raise ValidationError("edge map values must lie in [0, 1]")
    xe = x0 * edge
    xne = x0 * (1.0 - edge)
    return xe, xne


class RawParsingHead(nn.Module):
    """1x1 convolution to per-class logits, softmax over classes."""

    def __init__(self, channels, num_classes):
        super().__init__()
        self.conv = nn.Conv2d(channels, num_classes, 1)

    def forward(self, x0: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.conv(x0), dim=1)


def select_vertices(xne: torch.Tensor, z0: torch.Tensor, k: int):
    """Pick the k most confident pixels per class from the raw parsing map and
    gather their (non-edge-weighted) feature rows.

    Ties break toward the lowest flat index. The index selection carries no
    gradient; gradients flow through the gathered features.
    Returns (features (B, k*Nc, C), indices (B, k*Nc)).
    """
    b, c, h, w = xne.shape
    if k < 1 or k > h * w:
        raise ConfigError(f"k={k} out of range for a {h}x{w} grid")
    conf = z0.flatten(2)                       # (B, Nc, HW)
    order = torch.argsort(-conf, dim=2, stable=True)
    indices = order[:, :, :k].reshape(b, -1)   # class-major blocks of k
    feats = xne.flatten(2).transpose(1, 2)     # (B, HW, C)
    gathered = torch.gather(feats, 1, indices.unsqueeze(-1).expand(-1, -1, c))
    return gathered, indices


def spatial_pool_vertices(xne: torch.Tensor, k: int, num_classes: int):
    """Ablation path: uniform spatial pooling instead of adaptive selection.

    The grid is partitioned into k*num_classes cells (near-square layout);
    each vertex is the average feature of one cell, its index the cell center.
    """
    b, c, h, w = xne.shape
    v = k * num_classes
    rows = int(math.sqrt(v))
    while v % rows:
        rows -= 1
    cols = v // rows
    pooled = F.adaptive_avg_pool2d(xne, (rows, cols))          # (B, C, rows, cols)
    features = pooled.flatten(2).transpose(1, 2)               # (B, V, C)
    cy = ((torch.arange(rows, dtype=torch.float64) + 0.5) * h / rows).long().clamp(max=h - 1)
    cx = ((torch.arange(cols, dtype=torch.float64) + 0.5) * w / cols).long().clamp(max=w - 1)
    idx = (cy[:, None] * w + cx[None, :]).reshape(-1).to(xne.device)
    return features, idx.unsqueeze(0).expand(b, -1)


class GraphReasoning(nn.Module):
    """Single graph-convolution layer with a learned, unconstrained adjacency
    and a residual connection: out = x + ReLU((I - A) x W)."""

    def __init__(self, num_vertices, channels):
        super().__init__()
        self.adjacency = nn.Parameter(
            torch.empty(num_vertices, num_vertices).uniform_(-0.01, 0.01))
        bound = 1.0 / math.sqrt(channels)
        self.weight = nn.Parameter(
            torch.empty(channels, channels).uniform_(-bound, bound))

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        v = self.adjacency.shape[0]
        if features.shape[-2] != v or features.shape[-1] != self.weight.shape[0]:
            raise ConfigError(
                f"vertex features {tuple(features.shape)} do not match "
                f"adjacency {v}x{v} / weight {tuple(self.weight.shape)}")
        eye = torch.eye(v, dtype=features.dtype, device=features.device)
        propagated = torch.matmul(eye - self.adjacency.to(features.dtype),
                                  features)
        return features + F.relu(torch.matmul(propagated, self.weight.to(features.dtype)))


def build_projection(xg: torch.Tensor, xe: torch.Tensor, scaled: bool = False):
    """Vertex-to-pixel assignment: softmax over vertices of <vertex, pixel>
    inner products. Uses pre-reasoning vertex features and edge-weighted
    pixel features. Returns (B, V, H*W)."""
    b, c, h, w = xe.shape
    if xg.shape[-1] != c:
        raise ConfigError(f"channel mismatch: vertices {xg.shape[-1]} vs pixels {c}")
    logits = torch.matmul(xg, xe.flatten(2))       # (B, V, HW)
    if scaled:
        logits = logits / math.sqrt(c)
    return torch.softmax(logits, dim=1)


def reproject(p: torch.Tensor, xg_hat: torch.Tensor, spatial) -> torch.Tensor:
    """Distribute reasoned vertex features back to pixels: xp = P^T xg_hat,
    reshaped to (B, C, H, W)."""
    h, w = spatial
    if p.shape[-2] != xg_hat.shape[-2] or p.shape[-1] != h * w:
        raise ConfigError("projection matrix shape does not match vertices/grid")
    xp = torch.matmul(p.transpose(-2, -1), xg_hat)   # (B, HW, C)
    return xp.transpose(1, 2).reshape(xg_hat.shape[0], xg_hat.shape[-1], h, w)


class FinalHead(nn.Module):
    """Residual feature sum followed by a 1x1 convolution to class logits."""

    def __init__(self, channels, num_classes):
        super().__init__()
        self.conv = nn.Conv2d(channels, num_classes, 1)

    def forward(self, x0: torch.Tensor, xp: torch.Tensor, out_size):
        logits = self.conv(x0 + xp)
        logits_full = F.interpolate(logits, size=out_size, mode="bilinear",
                                    align_corners=False)
        return logits, logits_full
