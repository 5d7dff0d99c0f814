"""Nucleus graphs: build from centroid tables, perturb, and serialize.

Two nuclei are linked when their distance is strictly below the threshold,
with edge weight ``1 - dist/threshold`` so weights live in (0, 1]. The graph
carries a dense symmetric adjacency ``A`` of shape (N, N, L) and a vertex
feature matrix ``V`` of shape (N, F) assembled from a configurable recipe.
"""

from __future__ import annotations

import csv
import json
import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError

FEATURE_CHANNELS = ("const", "degree", "x", "y")
DEFAULT_FEATURES = ("const", "degree")

# The degree channel carries neighbor count scaled by this constant so the
# feature sits near O(1); raw degree inflates activations through stacked
# convolutions. graph_stats reports unscaled degrees.
DEGREE_FEATURE_SCALE = 1.0 / 16.0


@dataclass(frozen=True)
class NucleusRecord:
    """One detected nucleus centroid, in pixel coordinates."""

    id: int
    x: float
    y: float


@dataclass(frozen=True)
class GraphBuildConfig:
    distance_threshold: float = 100.0
    feature_recipe: tuple[str, ...] = DEFAULT_FEATURES
    seed: int = 0

    def __post_init__(self):
        if self.distance_threshold <= 0:
            raise ValidationError("distance_threshold must be positive")
        unknown = [f for f in self.feature_recipe if f not in FEATURE_CHANNELS]
        if unknown:
            raise ValidationError(f"unknown feature channels: {unknown}")
        if not self.feature_recipe:
            raise ValidationError("feature_recipe must name at least one channel")


@dataclass
class NucleusGraph:
    """Immutable-by-convention spatial graph over nucleus centroids."""

    vertex_features: np.ndarray  # (N, F)
    adjacency: np.ndarray  # (N, N, L), symmetric, zero diagonal
    centroids: np.ndarray  # (N, 2)
    feature_names: tuple[str, ...]
    label: int | None = None

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_features(self) -> int:
        return self.vertex_features.shape[1]

    @property
    def n_edge_channels(self) -> int:
        return self.adjacency.shape[2]


def euclidean_distance(a: NucleusRecord, b: NucleusRecord) -> float:
    """Pixel distance between two centroids."""
    dx = a.x - b.x
    dy = a.y - b.y
    return math.sqrt(dx * dx + dy * dy)


def build_graph(nuclei: list[NucleusRecord], config: GraphBuildConfig | None = None) -> NucleusGraph:
    """Link every pair closer than the threshold, weight 1 - dist/threshold."""
    cfg = config or GraphBuildConfig()
    if not nuclei:
        raise ValidationError("no nuclei")
    ids = [rec.id for rec in nuclei]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate nucleus ids")
    coords = np.array([[rec.x, rec.y] for rec in nuclei], dtype=np.float64)
    if not np.all(np.isfinite(coords)):
        raise ValidationError("non-finite centroid coordinates")
    if np.any(coords < 0):
        raise ValidationError("negative centroid coordinates")

    n = len(nuclei)
    dx = coords[:, 0][:, None] - coords[:, 0][None, :]
    dy = coords[:, 1][:, None] - coords[:, 1][None, :]
    dist = np.sqrt(dx * dx + dy * dy)
    thr = cfg.distance_threshold
    linked = (dist < thr) & ~np.eye(n, dtype=bool)
    weights = np.where(linked, 1.0 - dist / thr, 0.0)
    adjacency = weights[:, :, None]

    degree = linked.sum(axis=1).astype(np.float64)
    columns = []
    for name in cfg.feature_recipe:
        if name == "const":
            columns.append(np.ones(n))
        elif name == "degree":
            columns.append(degree * DEGREE_FEATURE_SCALE)
        elif name == "x":
            columns.append(_normalize_extent(coords[:, 0]))
        elif name == "y":
            columns.append(_normalize_extent(coords[:, 1]))
    vertex_features = np.column_stack(columns)

    return NucleusGraph(
        vertex_features=vertex_features,
        adjacency=adjacency,
        centroids=coords,
        feature_names=tuple(cfg.feature_recipe),
    )


def _normalize_extent(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.full(values.shape, 0.5)
    return (values - lo) / (hi - lo)


def neighbors_within(g: NucleusGraph, center: int, hops: int) -> set[int]:
    """BFS ball of the given radius over nonzero adjacency, center included."""
    if not 0 <= center < g.n_nodes:
        raise IndexError(f"node {center} out of range for graph with {g.n_nodes} nodes")
    if hops < 0:
        raise ValidationError("hops must be >= 0")
    linked = np.any(g.adjacency != 0.0, axis=2)
    seen = {center}
    frontier = deque([(center, 0)])
    while frontier:
        node, depth = frontier.popleft()
        if depth == hops:
            continue
        for nb in np.flatnonzero(linked[node]):
            nb = int(nb)
            if nb not in seen:
                seen.add(nb)
                frontier.append((nb, depth + 1))
    return seen


def occlude(g: NucleusGraph, center: int, hops: int = 1) -> NucleusGraph:
    """Zero out a node, its k-hop ball, and every edge touching the ball.

    Node count, centroids, and label are preserved so the occluded graph is
    directly comparable to the original under the same model.
    """
    if hops < 1:
        raise ValidationError("hops must be >= 1")
    ball = sorted(neighbors_within(g, center, hops))
    v = g.vertex_features.copy()
    a = g.adjacency.copy()
    v[ball, :] = 0.0
    a[ball, :, :] = 0.0
    a[:, ball, :] = 0.0
    return NucleusGraph(
        vertex_features=v,
        adjacency=a,
        centroids=g.centroids,
        feature_names=g.feature_names,
        label=g.label,
    )


@dataclass(frozen=True)
class GraphStats:
    n_nodes: int
    n_edges: int
    mean_degree: float
    mean_edge_weight: float


def graph_stats(g: NucleusGraph) -> GraphStats:
    """Node/edge counts plus mean degree and mean weight over existing edges."""
    linked = np.any(g.adjacency != 0.0, axis=2)
    iu = np.triu_indices(g.n_nodes, k=1)
    edge_mask = linked[iu]
    n_edges = int(edge_mask.sum())
    mean_degree = float(linked.sum()) / g.n_nodes
    if n_edges:
        mean_weight = float(g.adjacency[:, :, 0][iu][edge_mask].mean())
    else:
        mean_weight = 0.0
    return GraphStats(g.n_nodes, n_edges, mean_degree, mean_weight)


# ---------------------------------------------------------------------------
# Interchange formats


def read_centroids_csv(path) -> list[NucleusRecord]:
    """Parse an ``id,x,y`` centroid table; raises with the offending line."""
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValidationError("no nuclei")
        if [h.strip().lower() for h in header] != ["id", "x", "y"]:
            raise ValidationError(f"expected header 'id,x,y', got {','.join(header)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise ValidationError(f"line {lineno}: expected 3 fields, got {len(row)}")
            try:
                records.append(NucleusRecord(id=int(row[0]), x=float(row[1]), y=float(row[2])))
            except ValueError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from exc
    if not records:
        raise ValidationError("no nuclei")
    return records


def write_centroids_csv(path, records: list[NucleusRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "x", "y"])
        for rec in records:
            writer.writerow([rec.id, repr(float(rec.x)), repr(float(rec.y))])


def graph_to_json(g: NucleusGraph) -> dict:
    """Sparse JSON form; each undirected edge stored once as [i, j, l, w]."""
    n = g.n_nodes
    edges = []
    for l in range(g.n_edge_channels):
        sl = g.adjacency[:, :, l]
        ii, jj = np.nonzero(np.triu(sl != 0.0, k=1))
        for i, j in zip(ii.tolist(), jj.tolist()):
            edges.append([i, j, l, float(sl[i, j])])
    return {
        "n": n,
        "feature_names": list(g.feature_names),
        "V": g.vertex_features.tolist(),
        "A_sparse": edges,
        "centroids": g.centroids.tolist(),
        "label": g.label,
    }


def graph_from_json(obj: dict) -> NucleusGraph:
    try:
        n = int(obj["n"])
        feature_names = tuple(str(f) for f in obj["feature_names"])
        v = np.array(obj["V"], dtype=np.float64)
        centroids = np.array(obj["centroids"], dtype=np.float64)
        edges = obj["A_sparse"]
        label = obj["label"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed graph JSON: {exc}") from exc
    if v.shape[0] != n or centroids.shape != (n, 2):
        raise ValidationError("graph JSON arrays do not match node count")
    n_channels = 1 + max((int(e[2]) for e in edges), default=0)
    a = np.zeros((n, n, n_channels))
    for e in edges:
        i, j, l, w = int(e[0]), int(e[1]), int(e[2]), float(e[3])
        if not (0 <= i < j < n):
            raise ValidationError(f"invalid edge indices {e!r}")
        a[i, j, l] = w
        a[j, i, l] = w
    return NucleusGraph(
        vertex_features=v,
        adjacency=a,
        centroids=centroids,
        feature_names=feature_names,
        label=None if label is None else int(label),
    )


def save_graph(path, g: NucleusGraph) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_json(g), fh)
        fh.write("\n")


def load_graph(path) -> NucleusGraph:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed graph JSON: {exc}") from exc
    return graph_from_json(obj)


def with_label(g: NucleusGraph, label: int) -> NucleusGraph:
    return replace(g, label=label)
