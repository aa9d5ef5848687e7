import math

import torch

from agrnet import graph, losses
from agrnet.gradcheck import TOLERANCE, check_gradients, run_gradcheck


def test_single_seed_suite_passes():
    rows, passed, instances = run_gradcheck(seeds=(0,))
    assert passed
    assert instances >= 10
    assert all(math.isfinite(err) for _, _, _, err in rows)


class _CorruptedScale(torch.autograd.Function):
    """Forward x.sum() * 2, backward deliberately wrong (scale 3)."""

    @staticmethod
    def forward(ctx, x):
        ctx.shape = x.shape
        return x.sum() * 2.0

    @staticmethod
    def backward(ctx, g):
        return (g * 3.0).expand(ctx.shape).contiguous()


def test_harness_detects_corrupted_gradient():
    x = torch.rand(4, dtype=torch.float64)
    errs = check_gradients(lambda: _CorruptedScale.apply(x), {"x": x})
    assert errs["x"] > TOLERANCE


def test_zero_input_gradients_have_no_nans():
    torch.manual_seed(0)
    reason = graph.GraphReasoning(4, 3).double()
    feats = torch.zeros(1, 4, 3, dtype=torch.float64, requires_grad=True)
    reason(feats).sum().backward()
    assert torch.isfinite(feats.grad).all()
    assert torch.isfinite(reason.adjacency.grad).all()
    assert torch.isfinite(reason.weight.grad).all()

    zero_feats = torch.zeros(5, 3, dtype=torch.float64, requires_grad=True)
    losses.loss_dis(zero_feats, 1.0).backward()
    assert torch.isfinite(zero_feats.grad).all()

    x0 = torch.zeros(1, 2, 4, 4, dtype=torch.float64, requires_grad=True)
    e = torch.full((1, 1, 4, 4), 0.5, dtype=torch.float64, requires_grad=True)
    xe, xne = graph.split_edge_features(x0, e)
    xg, _ = graph.select_vertices(xne, torch.full((1, 2, 4, 4), 0.5), 2)
    p = graph.build_projection(xg, xe)
    graph.reproject(p, xg, (4, 4)).sum().backward()
    assert torch.isfinite(x0.grad).all()
    assert torch.isfinite(e.grad).all()
