"""Procedural face-sketch dataset: generation, edge ground truth, augmentation, disk IO.

Label layout (11 classes, fixed):
  0 background, 1 skin, 2 left brow, 3 right brow, 4 left eye, 5 right eye,
  6 nose, 7 upper lip, 8 inner mouth, 9 lower lip, 10 hair
"""

import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as PILImage

NUM_CLASSES = 11

CLASS_NAMES = [
    "background", "skin", "l_brow", "r_brow", "l_eye", "r_eye",
    "nose", "u_lip", "inner_mouth", "l_lip", "hair",
]

# RGB base color per class, values in [0,1]
PALETTE = np.array([
    [0.10, 0.12, 0.15],   # background
    [0.85, 0.68, 0.55],   # skin
    [0.30, 0.20, 0.12],   # l_brow
    [0.34, 0.23, 0.14],   # r_brow
    [0.93, 0.93, 0.97],   # l_eye
    [0.88, 0.90, 0.96],   # r_eye
    [0.78, 0.60, 0.48],   # nose
    [0.75, 0.30, 0.32],   # u_lip
    [0.42, 0.10, 0.12],   # inner_mouth
    [0.70, 0.24, 0.28],   # l_lip
    [0.20, 0.14, 0.10],   # hair
])


class GenerationError(RuntimeError):
    """A component landed outside the canvas or vanished."""

    def __init__(self, component: str, detail: str):
        super().__init__(f"component {component!r}: {detail}")
        self.component = component


@dataclass
class FaceSketchParams:
    seed: int = 0
    expression: float | None = None        # None -> drawn from the seed
    image_size: int = 96
    max_translation: float = 3.0           # canonical 96-px units
    max_rotation_deg: float = 8.0
    scale_range: tuple = (0.92, 1.08)
    color_noise: float = 0.03


@dataclass
class Sample:
    image: np.ndarray       # H x W x 3 float64 in [0,1]
    labels: np.ndarray      # H x W uint8, class ids
    edge_mask: np.ndarray   # H x W uint8 {0,1}, derived from labels
    seed: int = 0
    expression: float = 0.0


def derive_edge_gt(labels: np.ndarray) -> np.ndarray:
    """A pixel is an edge pixel iff any in-bounds 4-neighbor has a different label."""
    edge = np.zeros(labels.shape, dtype=bool)
    diff_v = labels[1:, :] != labels[:-1, :]
    edge[1:, :] |= diff_v
    edge[:-1, :] |= diff_v
    diff_h = labels[:, 1:] != labels[:, :-1]
    edge[:, 1:] |= diff_h
    edge[:, :-1] |= diff_h
    return edge.astype(np.uint8)


def _ellipse(qx, qy, cx, cy, rx, ry, angle_deg=0.0):
    dx = qx - cx
    dy = qy - cy
    if angle_deg:
        a = np.deg2rad(angle_deg)
        dx, dy = dx * np.cos(a) + dy * np.sin(a), -dx * np.sin(a) + dy * np.cos(a)
    return (dx / rx) ** 2 + (dy / ry) ** 2 <= 1.0


def generate_sample(params: FaceSketchParams) -> Sample:
    """Render one face sketch. Deterministic for a given params.seed."""
    rng = np.random.default_rng(params.seed)
    expr = params.expression
    if expr is None:
        expr = float(rng.uniform(0.0, 1.0))
    tx, ty = rng.uniform(-params.max_translation, params.max_translation, size=2)
    rot = rng.uniform(-params.max_rotation_deg, params.max_rotation_deg)
    scale = rng.uniform(*params.scale_range)

    size = params.image_size
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    # map pixel centers into the canonical 96-unit face frame
    px = (xs + 0.5) * (96.0 / size)
    py = (ys + 0.5) * (96.0 / size)
    a = np.deg2rad(rot)
    dx = (px - 48.0 - tx) / scale
    dy = (py - 48.0 - ty) / scale
    qx = dx * np.cos(a) + dy * np.sin(a) + 48.0
    qy = -dx * np.sin(a) + dy * np.cos(a) + 48.0

    labels = np.zeros((size, size), dtype=np.uint8)

    open_amt = 3.8 * expr
    brow_tilt = 6.0 + 12.0 * expr
    shapes = [
        ("hair", 10, (48.0, 42.0, 37.0, 41.0, 0.0)),
        ("skin", 1, (48.0, 52.0, 30.0, 36.0, 0.0)),
        ("l_brow", 2, (33.0, 36.0, 7.5, 2.6, -brow_tilt)),
        ("r_brow", 3, (63.0, 36.0, 7.5, 2.6, brow_tilt)),
        ("l_eye", 4, (34.0, 45.0, 5.5, 3.0, 0.0)),
        ("r_eye", 5, (62.0, 45.0, 5.5, 3.0, 0.0)),
        ("nose", 6, (48.0, 56.0, 4.5, 7.5, 0.0)),
        ("u_lip", 7, (48.0, 70.5 - open_amt / 2.0, 10.0, 2.6, 0.0)),
        ("l_lip", 9, (48.0, 73.5 + open_amt / 2.0, 10.0, 2.6, 0.0)),
        ("inner_mouth", 8, (48.0, 72.0, 7.5, 1.2 + open_amt, 0.0)),
    ]
    for _, class_id, (cx, cy, rx, ry, ang) in shapes:
        labels[_ellipse(qx, qy, cx, cy, rx, ry, ang)] = class_id

    # facial components (not bg/skin/hair) must be on canvas and visible
    for name, class_id, _ in shapes:
        if class_id in (1, 10):
            continue
        mask = labels == class_id
        if not mask.any():
            raise GenerationError(name, "no visible pixels")
        if mask[0, :].any() or mask[-1, :].any() or mask[:, 0].any() or mask[:, -1].any():
            raise GenerationError(name, "touches the canvas border")

    noise = rng.uniform(-params.color_noise, params.color_noise, size=(size, size, 3))
    image = np.clip(PALETTE[labels] + noise, 0.0, 1.0)
    return Sample(image=image, labels=labels, edge_mask=derive_edge_gt(labels),
                  seed=params.seed, expression=expr)


def _affine_sources(size, angle_deg, scale):
    """Inverse-map output pixel coords through rotate+scale about the center."""
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    c = (size - 1) / 2.0
    a = np.deg2rad(angle_deg)
    dx = (xs - c) / scale
    dy = (ys - c) / scale
    sx = dx * np.cos(a) + dy * np.sin(a) + c
    sy = -dx * np.sin(a) + dy * np.cos(a) + c
    return sx, sy


def _sample_nearest(grid, sx, sy, fill):
    ix = np.rint(sx).astype(np.int64)
    iy = np.rint(sy).astype(np.int64)
    inside = (ix >= 0) & (ix < grid.shape[1]) & (iy >= 0) & (iy < grid.shape[0])
    out = np.full(sx.shape, fill, dtype=grid.dtype)
    out[inside] = grid[iy[inside], ix[inside]]
    return out


def _sample_bilinear(img, sx, sy):
    h, w = img.shape[:2]
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = sx - x0
    fy = sy - y0
    out = np.zeros(sx.shape + (img.shape[2],), dtype=np.float64)
    for dy in (0, 1):
        for dx in (0, 1):
            ix = x0 + dx
            iy = y0 + dy
            wgt = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy)
            inside = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
            ixc = np.clip(ix, 0, w - 1)
            iyc = np.clip(iy, 0, h - 1)
            out += (wgt * inside)[..., None] * img[iyc, ixc]
    return out


def draw_augment_params(seed: int):
    rng = np.random.default_rng(seed)
    return float(rng.uniform(-30.0, 30.0)), float(rng.uniform(0.75, 1.25))


def augment(sample: Sample, seed: int) -> Sample:
    """Random rotation in (-30, 30) degrees and scale in (0.75, 1.25).

    Labels are resampled nearest-neighbor, the image bilinearly; the edge mask
    is re-derived from the transformed labels. Off-canvas pixels become
    background / black.
    """
    angle, scale = draw_augment_params(seed)
    return transform_sample(sample, angle, scale)


def transform_sample(sample: Sample, angle_deg: float, scale: float) -> Sample:
    if angle_deg == 0.0 and scale == 1.0:
        return Sample(image=sample.image.copy(), labels=sample.labels.copy(),
                      edge_mask=sample.edge_mask.copy(),
                      seed=sample.seed, expression=sample.expression)
    sx, sy = _affine_sources(sample.labels.shape[0], angle_deg, scale)
    labels = _sample_nearest(sample.labels, sx, sy, fill=np.uint8(0))
    image = _sample_bilinear(sample.image, sx, sy)
    return Sample(image=image, labels=labels, edge_mask=derive_edge_gt(labels),
                  seed=sample.seed, expression=sample.expression)


def make_dataset(count: int, base_seed: int, image_size: int = 96) -> list:
    """In-memory dataset: seeds base_seed .. base_seed+count-1."""
    return [generate_sample(FaceSketchParams(seed=base_seed + i, image_size=image_size))
            for i in range(count)]


def write_dataset(out_dir: str, train: int, val: int, seed: int, image_size: int = 96):
    """Write images/NNNN.png, labels/NNNN.png and manifest.tsv.

    Edge masks are derived on load, never stored.
    """
    os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "labels"), exist_ok=True)
    rows = []
    for i in range(train + val):
        split = "train" if i < train else "val"
        s = generate_sample(FaceSketchParams(seed=seed + i, image_size=image_size))
        name = f"{i:04d}.png"
        img8 = np.clip(np.rint(s.image * 255.0), 0, 255).astype(np.uint8)
        PILImage.fromarray(img8).save(os.path.join(out_dir, "images", name))
        PILImage.fromarray(s.labels, mode="L").save(os.path.join(out_dir, "labels", name))
        rows.append((name, split, s.seed, s.expression))
    with open(os.path.join(out_dir, "manifest.tsv"), "w") as fh:
        fh.write("file\tsplit\tseed\texpression\n")
        for name, split, sd, expr in rows:
            fh.write(f"{name}\t{split}\t{sd}\t{expr:.6f}\n")


def load_dataset(data_dir: str, split: str) -> list:
    """Load one split written by write_dataset; edge masks re-derived."""
    samples = []
    with open(os.path.join(data_dir, "manifest.tsv")) as fh:
        header = fh.readline()
        for line in fh:
            name, row_split, sd, expr = line.rstrip("\n").split("\t")
            if row_split != split:
                continue
            image = np.asarray(
                PILImage.open(os.path.join(data_dir, "images", name)).convert("RGB"),
                dtype=np.float64) / 255.0
            labels = np.asarray(
                PILImage.open(os.path.join(data_dir, "labels", name)),
                dtype=np.uint8)
            samples.append(Sample(image=image, labels=labels,
                                  edge_mask=derive_edge_gt(labels),
                                  seed=int(sd), expression=float(expr)))
    return samples
