"""Inspection artifacts: vertex overlays, per-class response maps, parsing
maps and the learned adjacency matrix."""

import os

import numpy as np
import torch
from PIL import Image as PILImage

from .data import CLASS_NAMES, PALETTE
from .model import AGRNet


def save_parsing_png(labels: np.ndarray, path: str):
    img = PILImage.fromarray(labels.astype(np.uint8), mode="P")
    palette = np.zeros((256, 3), dtype=np.uint8)
    palette[:len(PALETTE)] = np.rint(PALETTE * 255.0)
    img.putpalette(palette.reshape(-1).tolist())
    img.save(path)


@torch.no_grad()
def dump_visuals(model: AGRNet, image: np.ndarray, out_dir: str) -> list:
    """Write all visualization files for one image; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    model.eval()
    x = torch.from_numpy(image).permute(2, 0, 1).unsqueeze(0).float()
    out = model(x)
    h, w = image.shape[:2]
    paths = []

    pred = out.logits_full.argmax(dim=1)[0].numpy()
    path = os.path.join(out_dir, "parsing.png")
    save_parsing_png(pred, path)
    paths.append(path)

    if out.vertex_indices is not None:
        overlay = (image * 255.0).astype(np.uint8).copy()
        h1 = h // 4
        w1 = w // 4
        for idx in out.vertex_indices[0].tolist():
            r, c = divmod(idx, w1)
            overlay[r * 4 + 2, c * 4 + 2] = (255, 255, 0)
        path = os.path.join(out_dir, "vertices.png")
        PILImage.fromarray(overlay).save(path)
        paths.append(path)

        k = model.cfg.graph_k
        p = out.projection[0].numpy()   # (V, H1*W1)
        for class_id in range(model.cfg.num_classes):
            response = p[class_id * k:(class_id + 1) * k].sum(axis=0).reshape(h1, w1)
            gray = np.clip(np.rint(response / k * 255.0), 0, 255).astype(np.uint8)
            path = os.path.join(out_dir, f"response_{class_id:02d}_{CLASS_NAMES[class_id]}.png")
            PILImage.fromarray(gray, mode="L").save(path)
            paths.append(path)

        path = os.path.join(out_dir, "adjacency.txt")
        np.savetxt(path, model.reasoning.adjacency.detach().numpy(), fmt="%.8f")
        paths.append(path)

    return paths
