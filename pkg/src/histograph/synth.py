"""Synthetic centroid fields: a ring class with a jittered boundary plus
interior nuclei, and a scatter class spread uniformly.

The ring class stands in for tissue whose diagnosis hinges on an intact
boundary; scatter stands in for diffuse growth. ``generate`` reports which
nuclei were placed on the ring so downstream checks can compare boundary
and interior importance without re-deriving geometry.

``sized_config`` mimics fixed-size cells: ring radius grows linearly with
the nucleus count (constant spacing along the boundary) and the scatter
field grows with its square root (constant density), so graph statistics
stay comparable across sizes instead of exploding with N.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ValidationError
from .graph import NucleusRecord
from .numerics import SplitMix64

TWO_PI = 6.283185307179586

RING_FRACTION = 0.7
INTERIOR_RADIUS_FRACTION = 0.8

RING_RADIUS_PER_NUCLEUS = 1.75
SCATTER_REFERENCE_FIELD = 1000.0
SCATTER_REFERENCE_COUNT = 200
FIELD_MARGIN = 60.0


class SynthClass(str, Enum):
    RING = "ring"
    SCATTER = "scatter"


@dataclass(frozen=True)
class SyntheticConfig:
    synth_class: SynthClass = SynthClass.RING
    n_nuclei_min: int = 100
    n_nuclei_max: int = 300
    ring_radius: float = 350.0
    ring_jitter: float = 12.0
    field_size: float = 1000.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "synth_class", SynthClass(self.synth_class))
        if self.n_nuclei_min < 10:
            raise ValidationError("n_nuclei_min must be at least 10")
        if self.n_nuclei_max < self.n_nuclei_min:
            raise ValidationError("n_nuclei_max must be >= n_nuclei_min")
        if self.ring_radius + self.ring_jitter >= self.field_size / 2:
            raise ValidationError("ring radius plus jitter must fit inside half the field")
        if self.ring_jitter < 0:
            raise ValidationError("ring_jitter must be non-negative")


def generate(cfg: SyntheticConfig) -> tuple[list[NucleusRecord], np.ndarray]:
    """Draw one centroid field. Returns (records, on_ring_mask).

    For the scatter class the mask is all False.
    """
    rng = SplitMix64(cfg.seed)
    n = cfg.n_nuclei_min + rng.randrange(cfg.n_nuclei_max - cfg.n_nuclei_min + 1)
    cx = cy = cfg.field_size / 2.0
    records: list[NucleusRecord] = []
    on_ring = np.zeros(n, dtype=bool)

    if cfg.synth_class is SynthClass.RING:
        n_ring = round(RING_FRACTION * n)
        for i in range(n):
            if i < n_ring:
                angle = rng.uniform(0.0, TWO_PI)
                radius = cfg.ring_radius + rng.uniform(-cfg.ring_jitter, cfg.ring_jitter)
                on_ring[i] = True
            else:
                # interior nuclei: uniform over the disk inside the ring
                angle = rng.uniform(0.0, TWO_PI)
                r_max = INTERIOR_RADIUS_FRACTION * cfg.ring_radius
                radius = r_max * rng.next_float() ** 0.5
            records.append(NucleusRecord(
                id=i,
                x=cx + radius * np.cos(angle),
                y=cy + radius * np.sin(angle),
            ))
    else:
        for i in range(n):
            records.append(NucleusRecord(
                id=i,
                x=rng.uniform(0.0, cfg.field_size),
                y=rng.uniform(0.0, cfg.field_size),
            ))
    return records, on_ring


def sized_config(synth_class: SynthClass, n_nuclei: int, seed: int,
                 jitter: float = 10.0) -> SyntheticConfig:
    """Config for an exact nucleus count with size-invariant geometry."""
    if synth_class is SynthClass.RING:
        radius = RING_RADIUS_PER_NUCLEUS * n_nuclei
        field = 2.0 * (radius + jitter + FIELD_MARGIN)
    else:
        field = SCATTER_REFERENCE_FIELD * (n_nuclei / SCATTER_REFERENCE_COUNT) ** 0.5
        radius = field / 4.0  # unused by scatter placement
    return SyntheticConfig(
        synth_class=synth_class,
        n_nuclei_min=n_nuclei,
        n_nuclei_max=n_nuclei,
        ring_radius=radius,
        ring_jitter=jitter,
        field_size=field,
        seed=seed,
    )


def dataset_configs(classes: list[SynthClass], count_per_class: int, seed: int,
                    n_min: int = 100, n_max: int = 300,
                    jitter_min: float = 6.0,
                    jitter_max: float = 80.0) -> list[tuple[SyntheticConfig, int]]:
    """Per-graph configs (with class labels by position in ``classes``).

    Jitter is drawn per graph: near ``jitter_max`` a ring blurs into an
    annular blob that genuinely borders the scatter class, which keeps a
    classifier from driving its margins arbitrarily high.
    """
    if count_per_class < 1:
        raise ValidationError("count_per_class must be at least 1")
    if n_min < 10 or n_max < n_min:
        raise ValidationError("need n_max >= n_min >= 10")
    if not 0 <= jitter_min <= jitter_max:
        raise ValidationError("need 0 <= jitter_min <= jitter_max")
    master = SplitMix64(seed)
    out = []
    for label, cls in enumerate(classes):
        for _ in range(count_per_class):
            n = n_min + master.randrange(n_max - n_min + 1)
            jitter = master.uniform(jitter_min, jitter_max)
            out.append((sized_config(cls, n, seed=master.next_u64(), jitter=jitter), label))
    return out


# ---------------------------------------------------------------------------
# Dataset manifests (CSV rows of ``path,label``)


def write_manifest(path, entries: list[tuple[str, int]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["path", "label"])
        for rel_path, label in entries:
            writer.writerow([rel_path, label])


def read_manifest(path) -> list[tuple[str, int]]:
    entries = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["path", "label"]:
            raise ValidationError("manifest must start with a 'path,label' header")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ValidationError(f"manifest line {lineno}: expected 2 fields")
            try:
                entries.append((row[0], int(row[1])))
            except ValueError as exc:
                raise ValidationError(f"manifest line {lineno}: {exc}") from exc
    if not entries:
        raise ValidationError("manifest lists no graphs")
    return entries
