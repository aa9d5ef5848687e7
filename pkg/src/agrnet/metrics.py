"""Confusion-matrix accumulation, per-class IoU/F1 and the merged overall F1."""

import numpy as np

from .data import CLASS_NAMES, NUM_CLASSES

# merged facial categories for the overall F1 protocol
MERGE_GROUPS = {
    "brows": (2, 3),
    "eyes": (4, 5),
    "nose": (6,),
    "mouth": (7, 8, 9),
}


class MetricsError(ValueError):
    pass


class ConfusionMatrix:
    """counts[i, j] = pixels with ground truth i predicted j."""

    def __init__(self, num_classes: int = NUM_CLASSES):
        self.num_classes = num_classes
        self.counts = np.zeros((num_classes, num_classes), dtype=np.int64)

    def update(self, pred_labels: np.ndarray, gt_labels: np.ndarray):
        pred = np.asarray(pred_labels).ravel()
        gt = np.asarray(gt_labels).ravel()
        if pred.shape != gt.shape:
            raise MetricsError("prediction and ground truth shapes differ")
        n = self.num_classes
        if pred.min() < 0 or pred.max() >= n or gt.min() < 0 or gt.max() >= n:
            raise MetricsError("label out of range")
        idx = gt.astype(np.int64) * n + pred.astype(np.int64)
        self.counts += np.bincount(idx, minlength=n * n).reshape(n, n)
        return self

    def merge(self, other: "ConfusionMatrix"):
        self.counts += other.counts
        return self

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _prf(tp, fp, fn):
    precision = tp / (tp + fp) if tp + fp > 0 else np.nan
    recall = tp / (tp + fn) if tp + fn > 0 else np.nan
    if tp + fp + fn == 0:
        return np.nan, np.nan, np.nan, np.nan
    f1 = 2 * tp / (2 * tp + fp + fn)
    iou = tp / (tp + fp + fn)
    return precision, recall, f1, iou


def compute_metrics(cm: ConfusionMatrix) -> dict:
    """Per-class precision/recall/F1/IoU plus means over foreground classes.

    A class absent from both prediction and ground truth is excluded from
    means. Pixel accuracy covers all pixels; mean_class_accuracy is the mean
    per-class recall (both are reported since "mean accuracy" is ambiguous).
    """
    if cm.total == 0:
        raise MetricsError("empty confusion matrix")
    c = cm.counts.astype(np.float64)
    per_class = {}
    for k in range(cm.num_classes):
        tp = c[k, k]
        fp = c[:, k].sum() - tp
        fn = c[k, :].sum() - tp
        precision, recall, f1, iou = _prf(tp, fp, fn)
        per_class[CLASS_NAMES[k] if cm.num_classes == NUM_CLASSES else str(k)] = {
            "precision": precision, "recall": recall, "f1": f1, "iou": iou,
        }
    names = list(per_class)
    foreground = names[1:]  # background excluded from means
    def _mean(key):
        vals = [per_class[n][key] for n in foreground if not np.isnan(per_class[n][key])]
        return float(np.mean(vals)) if vals else np.nan
    recalls = [per_class[n]["recall"] for n in names if not np.isnan(per_class[n]["recall"])]
    return {
        "per_class": per_class,
        "mean_f1": _mean("f1"),
        "mean_iou": _mean("iou"),
        "pixel_accuracy": float(np.trace(c) / c.sum()),
        "mean_class_accuracy": float(np.mean(recalls)) if recalls else np.nan,
    }


def helen_overall_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean F1 over merged {brows, eyes, nose, mouth}.

    Rows/columns of each group are summed before scoring, so confusion inside
    a group does not count against it.
    """
    if cm.num_classes != NUM_CLASSES:
        raise MetricsError(f"merged overall F1 needs the {NUM_CLASSES}-class layout")
    c = cm.counts.astype(np.float64)
    f1s = []
    for group in MERGE_GROUPS.values():
        g = list(group)
        tp = c[np.ix_(g, g)].sum()
        fp = c[:, g].sum() - tp
        fn = c[g, :].sum() - tp
        _, _, f1, _ = _prf(tp, fp, fn)
        f1s.append(0.0 if np.isnan(f1) else f1)
    return float(np.mean(f1s))


def format_report(metrics: dict, overall_f1: float) -> str:
    """Tab-separated report: one row per class, mean rows, overall row."""
    lines = ["class\tprecision\trecall\tf1\tiou"]
    for name, m in metrics["per_class"].items():
        lines.append("%s\t%.4f\t%.4f\t%.4f\t%.4f"
                     % (name, m["precision"], m["recall"], m["f1"], m["iou"]))
    lines.append("mean_foreground\t-\t-\t%.4f\t%.4f"
                 % (metrics["mean_f1"], metrics["mean_iou"]))
    lines.append("pixel_accuracy\t-\t-\t%.4f\t-" % metrics["pixel_accuracy"])
    lines.append("mean_class_accuracy\t-\t%.4f\t-\t-" % metrics["mean_class_accuracy"])
    lines.append("overall_f1_merged\t-\t-\t%.4f\t-" % overall_f1)
    return "\n".join(lines) + "\n"
