"""Finite-difference verification of every differentiable operation.

Analytic gradients come from autograd; the oracle is a central difference
(f(x+h) - f(x-h)) / 2h evaluated elementwise in float64. The two routes share
only the forward function.
"""

import math

import torch

from . import graph, losses
from .backbone import Backbone, EdgeHead, PyramidPooling
from .config import Config
from .model import AGRNet
from .train import compute_losses

H_STEP = 1e-6
TOLERANCE = 1e-4


def finite_difference_grads(f, tensors, h: float = H_STEP):
    """Central-difference gradient of scalar f() w.r.t. each tensor, elementwise."""
    grads = []
    with torch.no_grad():
        for t in tensors:
            g = torch.zeros_like(t)
            flat, gflat = t.reshape(-1), g.reshape(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + h
                fp = float(f())
                flat[i] = orig - h
                fm = float(f())
                flat[i] = orig
                gflat[i] = (fp - fm) / (2.0 * h)
            grads.append(g)
    return grads


def analytic_grads(f, tensors):
    for t in tensors:
        t.requires_grad_(True)
        t.grad = None
    f().backward()
    out = [t.grad.detach().clone() if t.grad is not None else torch.zeros_like(t)
           for t in tensors]
    for t in tensors:
        t.requires_grad_(False)
        t.grad = None
    return out


def relative_error(ga: torch.Tensor, gfd: torch.Tensor) -> float:
    scale = max(float(ga.abs().max()), float(gfd.abs().max()), 1e-8)
    return float((ga - gfd).abs().max()) / scale


def check_gradients(f, named_tensors: dict, h: float = H_STEP) -> dict:
    """Max relative analytic-vs-finite-difference error per tensor name."""
    names = list(named_tensors)
    tensors = [named_tensors[n] for n in names]
    ga = analytic_grads(f, tensors)
    gfd = finite_difference_grads(f, tensors, h)
    return {n: relative_error(a, d) for n, a, d in zip(names, ga, gfd)}


def _probe(rng_seed, *shape):
    g = torch.Generator().manual_seed(rng_seed)
    return torch.randn(*shape, generator=g, dtype=torch.float64)


def _cases(seed: int):
    """Yield (name, scalar function, {tensor name: tensor}) tiny instances."""
    g = torch.Generator().manual_seed(seed)

    def rand(*shape, lo=-1.0, hi=1.0):
        return (lo + (hi - lo) * torch.rand(*shape, generator=g, dtype=torch.float64))

    # backbone forward (BatchNorm in batch-statistics mode)
    torch.manual_seed(seed)
    bb = Backbone(channels=(2, 3, 2, 4)).double()
    image = rand(1, 3, 16, 16, lo=0.0, hi=1.0)
    w_low = rand(1, 2, 4, 4)
    w_high = rand(1, 4, 2, 2)

    def f_backbone():
        out = bb(image)
        return (out.low * w_low).sum() + (out.high * w_high).sum()

    yield "backbone_forward", f_backbone, {
        "image": image,
        "stage1.conv.weight": bb.stage1[0][0].weight,
        "stage4.conv.weight": bb.stage4[1][0].weight,
    }

    # pyramid pooling
    torch.manual_seed(seed + 1)
    psp = PyramidPooling(4).double()
    high = rand(1, 4, 6, 6)
    w_psp = rand(1, psp.out_channels, 6, 6)
    yield "pyramid_pool", lambda: (psp(high) * w_psp).sum(), {
        "high": high, "reducer.weight": psp.reducers[1].weight,
    }

    # edge prediction
    torch.manual_seed(seed + 2)
    eh = EdgeHead(5).double()
    mid_a, mid_b = rand(1, 2, 6, 6), rand(1, 3, 3, 3)
    w_e = rand(1, 1, 6, 6)
    yield "predict_edge", lambda: (eh([mid_a, mid_b]) * w_e).sum(), {
        "mid_a": mid_a, "mid_b": mid_b, "conv.weight": eh.conv.weight,
    }

    # feature fusion
    torch.manual_seed(seed + 3)
    fuse = graph.FeatureFusion(2, 3, 4).double()
    low, high2 = rand(1, 2, 6, 6), rand(1, 3, 3, 3)
    w_f = rand(1, 4, 6, 6)
    yield "fuse_features", lambda: (fuse(low, high2) * w_f).sum(), {
        "low": low, "high": high2, "conv.weight": fuse.conv.weight,
    }

    # edge masking
    x0 = rand(1, 4, 5, 5)
    e = rand(1, 1, 5, 5, lo=0.05, hi=0.95)
    w_a, w_b = rand(1, 4, 5, 5), rand(1, 4, 5, 5)

    def f_split():
        xe, xne = graph.split_edge_features(x0, e)
        return (xe * w_a).sum() + (xne * w_b).sum()

    yield "split_edge_features", f_split, {"x0": x0, "edge": e}

    # raw parsing head
    torch.manual_seed(seed + 4)
    raw_head = graph.RawParsingHead(4, 3).double()
    w_r = rand(1, 3, 5, 5)
    yield "predict_raw_parsing", lambda: (raw_head(x0) * w_r).sum(), {
        "x0": x0, "conv.weight": raw_head.conv.weight,
    }

    # vertex selection (gradient flows through the gathered features)
    z0 = torch.softmax(rand(1, 3, 5, 5) * 3.0, dim=1)
    xne = rand(1, 4, 5, 5)
    w_v = rand(1, 6, 4)
    yield "select_vertices", \
        lambda: (graph.select_vertices(xne, z0, 2)[0] * w_v).sum(), {"xne": xne}

    # graph reasoning
    torch.manual_seed(seed + 5)
    reason = graph.GraphReasoning(6, 4).double()
    xg = rand(1, 6, 4)
    w_g = rand(1, 6, 4)
    yield "reason", lambda: (reason(xg) * w_g).sum(), {
        "xg": xg, "adjacency": reason.adjacency, "weight": reason.weight,
    }

    # projection -> reasoning -> reprojection -> final prediction chain
    torch.manual_seed(seed + 6)
    final_head = graph.FinalHead(4, 3).double()
    x0c = rand(1, 4, 4, 4)
    ec = rand(1, 1, 4, 4, lo=0.05, hi=0.95)
    z0c = torch.softmax(rand(1, 3, 4, 4) * 3.0, dim=1)
    w_y = rand(1, 3, 8, 8)

    def f_chain():
        xe, xne = graph.split_edge_features(x0c, ec)
        xgc, _ = graph.select_vertices(xne, z0c, 2)
        reasoned = reason(xgc)
        p = graph.build_projection(xgc, xe)
        xp = graph.reproject(p, reasoned, (4, 4))
        _, logits_full = final_head(x0c, xp, (8, 8))
        return (logits_full * w_y).sum()

    yield "projection_chain", f_chain, {
        "x0": x0c, "edge": ec, "adjacency": reason.adjacency,
        "final.conv.weight": final_head.conv.weight,
    }

    # losses
    n, nc = 6, 3
    logits = rand(n, nc) * 2.0
    labels = torch.arange(n) % nc
    yield "loss_raw", \
        lambda: losses.loss_raw(torch.softmax(logits, -1), labels), {"logits": logits}
    yield "loss_final", \
        lambda: losses.loss_final(torch.softmax(logits, -1), labels), {"logits": logits}

    pre_edge = rand(n) * 2.0
    edge_t = (rand(n) > 0.0).double()
    yield "loss_edge", \
        lambda: losses.loss_edge(torch.sigmoid(pre_edge), edge_t), {"pre_edge": pre_edge}

    mask = torch.tensor([1.0, 0, 1, 1, 0, 1], dtype=torch.float64)
    yield "loss_ba", \
        lambda: losses.loss_ba(torch.softmax(logits, -1), labels, mask), {"logits": logits}

    feats = rand(5, 4) * 0.6   # normalized rows land within the hinge radius
    yield "loss_dis", lambda: losses.loss_dis(feats, 1.0), {"features": feats}


def _full_model_case(seed: int):
    cfg = Config(image_size=48, num_classes=3, backbone_channels=(2, 3, 2, 4),
                 graph_channels=4, graph_k=2)
    torch.manual_seed(seed)
    model = AGRNet(cfg).double()
    model.eval()   # frozen normalization statistics: FD must not mutate state
    g = torch.Generator().manual_seed(seed + 17)
    image = torch.rand(1, 3, 48, 48, generator=g, dtype=torch.float64)
    labels = torch.randint(0, 3, (1, 48, 48), generator=g)
    edge_mask = (torch.rand(1, 48, 48, generator=g) > 0.8).double()

    def f_total():
        return compute_losses(cfg, model(image), labels, edge_mask).total

    tensors = {
        "adjacency": model.reasoning.adjacency,
        "graph.weight": model.reasoning.weight,
        "fusion.conv.weight": model.fusion.conv.weight,
        "raw.conv.weight": model.raw_head.conv.weight,
        "final.conv.weight": model.final_head.conv.weight,
        "edge.conv.weight": model.edge_head.conv.weight,
    }
    return "full_model_total_loss", f_total, tensors


def run_gradcheck(seeds=(0, 1, 2), tolerance: float = TOLERANCE):
    """Returns (report rows, all_passed, instance count).

    Each row is (case name, seed, tensor name, max relative error).
    """
    rows = []
    instances = 0
    for seed in seeds:
        for name, f, tensors in _cases(seed):
            errs = check_gradients(f, tensors)
            instances += 1
            for tname, err in errs.items():
                rows.append((name, seed, tname, err))
    name, f, tensors = _full_model_case(seeds[0])
    errs = check_gradients(f, tensors)
    instances += 1
    for tname, err in errs.items():
        rows.append((name, seeds[0], tname, err))
    passed = all(err <= tolerance and math.isfinite(err) for _, _, _, err in rows)
    return rows, passed, instances


def format_gradcheck_report(rows, tolerance: float = TOLERANCE) -> str:
    lines = ["case\tseed\ttensor\tmax_rel_err\tstatus"]
    for name, seed, tname, err in rows:
        status = "ok" if err <= tolerance else "FAIL"
        lines.append(f"{name}\t{seed}\t{tname}\t{err:.3e}\t{status}")
    return "\n".join(lines) + "\n"
