"""Small convolutional backbone, pyramid pooling and the edge-prediction head.

All feature maps are NCHW tensors. The backbone keeps the stride-4 / stride-8
geometry the graph projection relies on: stage 1 is the stride-4 low-level map,
stage 4 (dilated, stride stays 8) is the high-level map.
"""

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .config import ConfigError
from .errors import NumericError


@dataclass
class BackboneOutput:
    low: torch.Tensor      # stride 4
    mid_a: torch.Tensor    # stride 4
    mid_b: torch.Tensor    # stride 4 (upsampled from stride 8)
    high: torch.Tensor     # stride 8


def _block(cin, cout, stride=1, dilation=1):
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, stride=stride, padding=dilation, dilation=dilation),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class Backbone(nn.Module):
    """Four stages of [conv3x3 -> norm -> ReLU] x2, strides (4, 1, 2, 1)."""

    def __init__(self, channels=(16, 32, 64, 64), in_channels=3):
        super().__init__()
        c0, c1, c2, c3 = channels
        self.channels = tuple(channels)
        self.stage1 = nn.Sequential(_block(in_channels, c0, stride=2), _block(c0, c0, stride=2))
        self.stage2 = nn.Sequential(_block(c0, c1), _block(c1, c1))
        self.stage3 = nn.Sequential(_block(c1, c2, stride=2), _block(c2, c2))
        self.stage4 = nn.Sequential(_block(c2, c3, dilation=2), _block(c3, c3, dilation=2))

    def forward(self, image: torch.Tensor) -> BackboneOutput:
        if image.dim() != 4 or image.shape[1] != 3:
            raise ConfigError("expected an N x 3 x H x W image batch")
        if image.shape[2] % 8 or image.shape[3] % 8:
            raise ConfigError("image height and width must be multiples of 8")
        feats = []
        x = image
        for i, stage in enumerate((self.stage1, self.stage2, self.stage3, self.stage4), 1):
            x = stage(x)
            if not torch.isfinite(x).all():
                raise NumericError(f"non-finite activations in backbone stage {i}")
            feats.append(x)
        s1, s2, s3, s4 = feats
        mid_b = F.interpolate(s3, size=s1.shape[-2:], mode="bilinear", align_corners=False)
        return BackboneOutput(low=s1, mid_a=s2, mid_b=mid_b, high=s4)


class PyramidPooling(nn.Module):
    """PSP-style context module: average pool at several bin sizes, reduce each
    branch to channels/len(bins), upsample and concatenate with the input."""

    def __init__(self, channels, bins=(1, 2, 3, 6)):
        super().__init__()
        self.bins = tuple(bins)
        self.branch_channels = channels // len(bins)
        self.reducers = nn.ModuleList(
            [nn.Conv2d(channels, self.branch_channels, 1) for _ in bins])
        self.out_channels = channels + self.branch_channels * len(bins)

    def forward(self, high: torch.Tensor) -> torch.Tensor:
        h, w = high.shape[-2:]
        if h < max(self.bins) or w < max(self.bins):
            raise ConfigError(f"spatial dims {h}x{w} smaller than largest bin {max(self.bins)}")
        branches = [high]
        for bin_size, reduce in zip(self.bins, self.reducers):
            pooled = reduce(F.adaptive_avg_pool2d(high, bin_size))
            branches.append(F.interpolate(pooled, size=(h, w), mode="bilinear",
                                          align_corners=False))
        return torch.cat(branches, dim=1)


class EdgeHead(nn.Module):
    """1x1 convolution over concatenated stride-4 features, logistic output."""

    def __init__(self, in_channels):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, 1, 1)

    def forward(self, mid_features) -> torch.Tensor:
        size = mid_features[0].shape[-2:]
        aligned = [mid_features[0]]
        for f in mid_features[1:]:
            if f.shape[-2:] != size:
                f = F.interpolate(f, size=size, mode="bilinear", align_corners=False)
            aligned.append(f)
        return torch.sigmoid(self.conv(torch.cat(aligned, dim=1)))
