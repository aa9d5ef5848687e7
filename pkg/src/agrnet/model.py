"""The full parsing network: backbone, edge branch, graph projection,
reasoning, reprojection and both parsing heads."""

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from . import graph
from .backbone import Backbone, EdgeHead, PyramidPooling
from .config import Config


@dataclass
class ForwardOutputs:
    edge: torch.Tensor | None          # (B, 1, H/4, W/4) in (0,1), None if disabled
    x0: torch.Tensor                   # fused features (B, C, H/4, W/4)
    z0: torch.Tensor | None            # raw parsing probabilities (B, Nc, H/4, W/4)
    vertex_features: torch.Tensor | None   # (B, V, C), pre-reasoning
    vertex_indices: torch.Tensor | None    # (B, V) flat stride-4 indices
    reasoned: torch.Tensor | None      # (B, V, C)
    projection: torch.Tensor | None    # (B, V, H/4*W/4)
    logits: torch.Tensor               # (B, Nc, H/4, W/4)
    logits_full: torch.Tensor          # (B, Nc, H, W)

    @property
    def probs(self):
        return torch.softmax(self.logits, dim=1)

    @property
    def probs_full(self):
        return torch.softmax(self.logits_full, dim=1)


class AGRNet(nn.Module):
    def __init__(self, cfg: Config):
        super().__init__()
        self.cfg = cfg
        c0, c1, c2, c3 = cfg.backbone_channels
        self.backbone = Backbone(cfg.backbone_channels)
        self.pyramid = PyramidPooling(c3)
        self.fusion = graph.FeatureFusion(c0, self.pyramid.out_channels,
                                          cfg.graph_channels)
        self.edge_head = EdgeHead(c0 + c1 + c2) if cfg.use_edge else None
        if cfg.use_graph:
            self.raw_head = graph.RawParsingHead(cfg.graph_channels, cfg.num_classes)
            self.reasoning = graph.GraphReasoning(cfg.graph_k * cfg.num_classes,
                                                  cfg.graph_channels)
        else:
            self.raw_head = None
            self.reasoning = None
        self.final_head = graph.FinalHead(cfg.graph_channels, cfg.num_classes)

    def forward(self, images: torch.Tensor) -> ForwardOutputs:
        cfg = self.cfg
        out_size = images.shape[-2:]
        bb = self.backbone(images)
        x0 = self.fusion(bb.low, self.pyramid(bb.high))

        edge = None
        xe = xne = x0
        if self.edge_head is not None:
            edge = self.edge_head([bb.low, bb.mid_a, bb.mid_b])
            xe, xne = graph.split_edge_features(x0, edge)

        z0 = xg = idx = reasoned = p = None
        xp = torch.zeros_like(x0)
        if cfg.use_graph:
            z0 = self.raw_head(x0)
            if cfg.spatial_pool:
                xg, idx = graph.spatial_pool_vertices(xne, cfg.graph_k, cfg.num_classes)
            else:
                xg, idx = graph.select_vertices(xne, z0, cfg.graph_k)
            reasoned = self.reasoning(xg)
            p = graph.build_projection(xg, xe, scaled=cfg.projection_scale)
            xp = graph.reproject(p, reasoned, x0.shape[-2:])

        logits, logits_full = self.final_head(x0, xp, out_size)
        return ForwardOutputs(edge=edge, x0=x0, z0=z0, vertex_features=xg,
                              vertex_indices=idx, reasoned=reasoned,
                              projection=p, logits=logits,
                              logits_full=logits_full)


def downsample_labels(labels: torch.Tensor, factor: int) -> torch.Tensor:
    """Nearest-neighbor label downsampling to the prediction grid."""
    x = labels.float().unsqueeze(1)
    x = F.interpolate(x, scale_factor=1.0 / factor, mode="nearest")
    return x.squeeze(1).long()


def downsample_edge_mask(mask: torch.Tensor, factor: int) -> torch.Tensor:
    """Max-pool the binary edge mask so thin edges survive downsampling."""
    x = mask.float().unsqueeze(1)
    x = F.max_pool2d(x, kernel_size=factor, stride=factor)
    return x.squeeze(1)
