"""Training loop (plain SGD), evaluation and inference."""

import copy
import math
import os

import numpy as np
import torch

from . import losses
from .checkpoint import load_checkpoint, save_checkpoint
from .config import Config, ConfigError
from .data import augment, load_dataset, make_dataset
from .errors import NumericError
from .metrics import ConfusionMatrix, compute_metrics, format_report, helen_overall_f1
from .model import AGRNet, downsample_edge_mask, downsample_labels


def build_model(cfg: Config) -> AGRNet:
    torch.manual_seed(cfg.seed)
    return AGRNet(cfg)


def get_datasets(cfg: Config):
    """(train, val) sample lists: from data.dir if set, else generated in memory."""
    if cfg.data_dir:
        train = load_dataset(cfg.data_dir, "train")
        val = load_dataset(cfg.data_dir, "val")
        if not train:
            raise ConfigError(f"no training samples in {cfg.data_dir}")
        return train, val
    train = make_dataset(cfg.train_size, base_seed=1000 + cfg.seed * 100000,
                         image_size=cfg.image_size)
    val = make_dataset(cfg.val_size, base_seed=500000 + cfg.seed * 100000,
                       image_size=cfg.image_size)
    return train, val


def batch_to_tensors(samples):
    images = torch.from_numpy(
        np.stack([s.image for s in samples])).permute(0, 3, 1, 2).float()
    labels = torch.from_numpy(np.stack([s.labels for s in samples])).long()
    edges = torch.from_numpy(np.stack([s.edge_mask for s in samples])).float()
    return images, labels, edges


def _flat_probs(probs):
    return probs.permute(0, 2, 3, 1).reshape(-1, probs.shape[1])


def compute_losses(cfg: Config, out, labels, edge_mask) -> losses.LossBundle:
    """All five losses for one batch; disabled branches contribute zero."""
    zero = out.logits.sum() * 0.0
    eps = cfg.loss_eps
    labels_s4 = downsample_labels(labels, 4)
    probs_full = out.probs_full

    raw = zero
    if out.z0 is not None:
        raw = losses.loss_raw(_flat_probs(out.z0), labels_s4.reshape(-1), eps)
    edge = ba = zero
    if out.edge is not None:
        edge_s4 = downsample_edge_mask(edge_mask, 4)
        edge = losses.loss_edge(out.edge.reshape(-1), edge_s4.reshape(-1), eps)
        ba = losses.loss_ba(_flat_probs(probs_full), labels.reshape(-1),
                            edge_mask.reshape(-1), eps)
    final = losses.loss_final(_flat_probs(probs_full), labels.reshape(-1), eps)
    dis = zero
    if out.vertex_features is not None:
        dis = losses.loss_dis(out.vertex_features, cfg.delta)
    lambdas = (cfg.lambda1, cfg.lambda2, cfg.lambda3, cfg.lambda4, cfg.lambda5)
    return losses.total_loss(raw, edge, ba, final, dis, lambdas)


def state_arrays(model: AGRNet) -> dict:
    return {name: t.detach().cpu().numpy().copy()
            for name, t in model.state_dict().items()}


def load_model(ckpt_path: str):
    """Rebuild the model a checkpoint was saved from. Returns (model, cfg, step, metrics)."""
    arrays, cfg, step, metrics = load_checkpoint(ckpt_path)
    model = AGRNet(cfg)
    state = {name: torch.from_numpy(arr) for name, arr in arrays.items()}
    model.load_state_dict(state)
    return model, cfg, step, metrics


def train(cfg: Config, log=None):
    """Run the training loop; returns (checkpoint_path, loss trace)."""
    model = build_model(cfg)
    model.train()
    opt = torch.optim.SGD(model.parameters(), lr=cfg.lr, momentum=cfg.momentum,
                          weight_decay=cfg.weight_decay)
    train_samples, _ = get_datasets(cfg)
    rng = np.random.default_rng(cfg.seed)
    os.makedirs(cfg.out_dir, exist_ok=True)
    ckpt_path = os.path.join(cfg.out_dir, "checkpoint.agrz")
    trace = []
    last_good = state_arrays(model)
    for step in range(cfg.steps):
        idx = rng.integers(0, len(train_samples), size=cfg.batch_size)
        batch = [train_samples[i] for i in idx]
        if cfg.augment:
            seeds = rng.integers(0, 2**31 - 1, size=cfg.batch_size)
            batch = [augment(s, int(sd)) for s, sd in zip(batch, seeds)]
        images, labels, edge_mask = batch_to_tensors(batch)

        out = model(images)
        bundle = compute_losses(cfg, out, labels, edge_mask)
        comps = bundle.components()
        bad = [k for k, v in comps.items() if not math.isfinite(v)]
        if bad:
            save_checkpoint(ckpt_path, last_good, cfg, step, {})
            raise NumericError(
                f"non-finite loss component(s) {','.join(bad)} at step {step}; "
                f"last-good checkpoint written to {ckpt_path}")

        opt.zero_grad()
        bundle.total.backward()
        if cfg.lr_schedule == "poly":
            lr = cfg.lr * (1.0 - step / cfg.steps) ** cfg.poly_power
            for group in opt.param_groups:
                group["lr"] = lr
        opt.step()
        trace.append(comps)
        last_good = state_arrays(model)
        if log is not None and (step % 50 == 0 or step == cfg.steps - 1):
            log(f"step {step}  total {comps['total']:.4f}  raw {comps['raw']:.4f}  "
                f"edge {comps['edge']:.4f}  ba {comps['ba']:.4f}  "
                f"final {comps['final']:.4f}  dis {comps['dis']:.4f}")
        if cfg.ckpt_every and (step + 1) % cfg.ckpt_every == 0:
            save_checkpoint(ckpt_path, state_arrays(model), cfg, step + 1, {})

    save_checkpoint(ckpt_path, state_arrays(model), cfg, cfg.steps,
                    {"final_total_loss": trace[-1]["total"] if trace else 0.0})
    with open(os.path.join(cfg.out_dir, "loss_trace.tsv"), "w") as fh:
        fh.write("step\traw\tedge\tba\tfinal\tdis\ttotal\n")
        for i, c in enumerate(trace):
            fh.write(f"{i}\t{c['raw']:.6f}\t{c['edge']:.6f}\t{c['ba']:.6f}"
                     f"\t{c['final']:.6f}\t{c['dis']:.6f}\t{c['total']:.6f}\n")
    return ckpt_path, trace


@torch.no_grad()
def predict_labels(model: AGRNet, images: torch.Tensor) -> np.ndarray:
    out = model(images)
    return out.logits_full.argmax(dim=1).cpu().numpy()


def evaluate(model: AGRNet, samples, batch_size: int = 8):
    """Inference without augmentation; returns (metrics, overall_f1, report)."""
    if not samples:
        raise ConfigError("empty evaluation dataset")
    model.eval()
    cm = ConfusionMatrix(model.cfg.num_classes)
    for start in range(0, len(samples), batch_size):
        chunk = samples[start:start + batch_size]
        images, labels, _ = batch_to_tensors(chunk)
        if int(labels.max()) >= model.cfg.num_classes:
            raise ConfigError("dataset class count exceeds the checkpoint's")
        pred = predict_labels(model, images)
        cm.update(pred, labels.numpy())
    model.train()
    m = compute_metrics(cm)
    overall = helen_overall_f1(cm)
    return m, overall, format_report(m, overall)
