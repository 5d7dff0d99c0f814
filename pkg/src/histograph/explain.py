"""Per-node importance: occlusion scoring and attention-score extraction.

Occlusion fixes the class predicted on the intact graph and reports, for
each node, the drop in that class's probability when the node and its k-hop
ball are zeroed out. Scores keep their sign (a node whose removal raises
confidence scores negative); min-max normalization maps them into [0, 1]
for rendering, with an all-equal map pinned at 0.5.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import UnsupportedMethodError, ValidationError
from .graph import NucleusGraph, occlude
from .model import Model, Variant


class Method(str, Enum):
    OCCLUSION = "occlusion"
    ATTENTION = "attention"


@dataclass
class ImportanceMap:
    graph: NucleusGraph
    raw_scores: np.ndarray
    normalized_scores: np.ndarray
    method: Method
    target_class: int
    hops: int | None = None


def _normalize(raw: np.ndarray) -> np.ndarray:
    lo, hi = raw.min(), raw.max()
    if hi > lo:
        return (raw - lo) / (hi - lo)
    return np.full(raw.shape, 0.5)


def occlusion_scores(model: Model, g: NucleusGraph, hops: int = 1,
                     workers: int = 1) -> ImportanceMap:
    """Probability drop of the intact graph's predicted class, per node.

    Each node's evaluation is independent; ``workers > 1`` fans them out
    over a thread pool with output identical to the serial order.
    """
    if hops < 1:
        raise ValidationError("hops must be >= 1")
    base = model.forward(g)
    target = base.predicted_class
    p_full = base.probabilities[target]

    def node_score(i: int) -> float:
        return p_full - model.forward(occlude(g, i, hops)).probabilities[target]

    indices = range(g.n_nodes)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            raw = np.fromiter(pool.map(node_score, indices), dtype=np.float64,
                              count=g.n_nodes)
    else:
        raw = np.fromiter(map(node_score, indices), dtype=np.float64, count=g.n_nodes)

    return ImportanceMap(
        graph=g,
        raw_scores=raw,
        normalized_scores=_normalize(raw),
        method=Method.OCCLUSION,
        target_class=target,
        hops=hops,
    )


def attention_scores(model: Model, g: NucleusGraph) -> ImportanceMap:
    """The attention gate's softmax weights, rescaled for rendering."""
    if model.spec.variant is not Variant.RSF_ATTENTION:
        raise UnsupportedMethodError(
            f"attention scores require the {Variant.RSF_ATTENTION.value} variant, "
            f"got {model.spec.variant.value}")
    pred = model.forward(g)
    raw = pred.attention
    return ImportanceMap(
        graph=g,
        raw_scores=raw,
        normalized_scores=_normalize(raw),
        method=Method.ATTENTION,
        target_class=pred.predicted_class,
    )


def export_scores(imap: ImportanceMap, path) -> None:
    """Write ``node_id,x,y,raw_score,normalized_score`` rows in node order."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node_id", "x", "y", "raw_score", "normalized_score"])
        for i in range(imap.graph.n_nodes):
            x, y = imap.graph.centroids[i]
            writer.writerow([
                i,
                f"{x:.17g}",
                f"{y:.17g}",
                f"{imap.raw_scores[i]:.17g}",
                f"{imap.normalized_scores[i]:.17g}",
            ])


def read_scores(path) -> tuple[np.ndarray, np.ndarray]:
    """Parse an exported score table back into (raw, normalized) arrays."""
    raw, norm = [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != [
                "node_id", "x", "y", "raw_score", "normalized_score"]:
            raise ValidationError("not a score table (bad header)")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 5:
                raise ValidationError(f"line {lineno}: expected 5 fields")
            try:
                raw.append(float(row[3]))
                norm.append(float(row[4]))
            except ValueError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from exc
    return np.array(raw), np.array(norm)
