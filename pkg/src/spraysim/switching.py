"""Boom sections, per-section velocities and flows, block switching and
overlap suppression (polygon tracker or occupancy grid)."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import QuadCell, SprayedPolygonState, polygon_centroid

LITRES_PER_HA_TO_M2 = 1.0 / 10000.0


class SwitchingError(RuntimeError):
    """Inconsistent plan labels."""


@dataclass(frozen=True)
class SectionLayout:
    """Nozzle-level sections across the boom.

    Cells are always discretised at section width ``w``; ``mode`` only
    decides how sections are grouped for on/off control and whether flows
    follow the per-section velocity.
    """

    working_width: float
    w: float
    mode: str = "multi"

    def __post_init__(self):
        n = self.working_width / self.w
        if abs(n - round(n)) > 1e-9 or round(n) % 2:
            raise ValueError("working width must be an even multiple of the section width")
        if self.mode not in ("one", "two", "multi"):
            raise ValueError(f"unknown section mode {self.mode!r}")

    @property
    def N(self) -> int:
        """Sections per boom side."""
        return int(round(self.working_width / self.w)) // 2

    @property
    def n_total(self) -> int:
        return 2 * self.N

    @cached_property
    def indices(self) -> np.ndarray:
        """Signed indices, left to right: ``-N..-1, 1..N``."""
        return np.concatenate([np.arange(-self.N, 0), np.arange(1, self.N + 1)])

    @cached_property
    def offsets(self) -> np.ndarray:
        """Signed lateral centre offsets ``l_i`` (positive to the right)."""
        i = self.indices
        return np.sign(i) * (np.abs(i) - 0.5) * self.w

    @cached_property
    def boundaries(self) -> np.ndarray:
        """Lateral positions of the ``2N+1`` section edges, left to right."""
        return -self.working_width / 2 + self.w * np.arange(self.n_total + 1)

    @cached_property
    def groups(self) -> np.ndarray:
        """Control group of each section."""
        if self.mode == "one":
            return np.zeros(self.n_total, dtype=int)
        if self.mode == "two":
            return (self.indices > 0).astype(int)
        return np.arange(self.n_total)

    @property
    def n_groups(self) -> int:
        return int(self.groups.max()) + 1


def layout_for(cfg, mode: str | None = None) -> SectionLayout:
    return SectionLayout(cfg.working_width, cfg.nozzle_spacing, mode or cfg.section_mode)


def section_velocities(v_ref: float, yaw_rate, layout: SectionLayout) -> np.ndarray:
    """``v_i = v_ref + l_i * yaw_rate``; broadcasts over an array of yaw rates."""
    yr = np.asarray(yaw_rate, dtype=float)
    return v_ref + yr[..., None] * layout.offsets


def nominal_flows(velocities, s_ref: float, w: float, mode: str = "multi", v_ref: float | None = None) -> np.ndarray:
    """Nominal section flow rates in l/s.

    ``multi`` follows each section's velocity and shuts off sections moving
    backwards; ``one``/``two`` apply the reference velocity to all sections.
    """
    if s_ref <= 0 or w <= 0:
        raise ValueError("s_ref and w must be positive")
    v = np.asarray(velocities, dtype=float)
    rate = s_ref * LITRES_PER_HA_TO_M2 * w
    if mode == "multi":
        return np.where(v < 0, 0.0, rate * v)
    vr = float(np.mean(v, axis=-1).mean()) if v_ref is None else v_ref
    return np.full(v.shape, rate * vr)


# --------------------------------------------------------------------------
# block switching


def block_state_m1(k: int, plan, needs) -> bool:
    """Reactive switching: on along planned spray segments while at least
    one section covers unsprayed field area (``needs`` per section)."""
    return bool(plan.spray[k]) and bool(np.any(needs))


def block_state_m2(k: int, plan) -> bool:
    """Predictive switching from the pattern labels alone."""
    phase = plan.phase[k]
    if not phase:
        raise SwitchingError(f"step {k} carries no pattern label")
    return bool(plan.spray[k])


def group_on(needs: np.ndarray, layout: SectionLayout) -> np.ndarray:
    """Per-section on bit: a group is on iff any of its sections needs spray."""
    g = layout.groups
    any_need = np.bincount(g, weights=needs.astype(float), minlength=layout.n_groups) > 0
    return any_need[g]


# --------------------------------------------------------------------------
# overlap filters


def filter_overlap_polygon(cells, state: SprayedPolygonState) -> list:
    """Keep cells whose centroid is outside the sprayed polygon, then add
    the kept cells to ``state`` as one sampling step."""
    cells = list(cells)
    if not cells:
        state.add_step([])
        return []
    cents = np.array([c.centroid if isinstance(c, QuadCell) else polygon_centroid(c) for c in cells])
    inside = state.contains_many(cents)
    kept = [c for c, hit in zip(cells, inside) if not hit]
    state.add_step(kept)
    return kept


class OccupancyTracker:
    """Recorded sprayed-cell centroids with a proximity threshold ``d_G``.

    Centroids are bucketed on a square grid of size ``d_G/2`` so a query
    inspects a fixed 5x5 neighbourhood.
    """

    def __init__(self, d_G: float):
        if not d_G > 0:
            raise ValueError("d_G must be positive")
        self.d_G = float(d_G)
        self.size = self.d_G / 2
        self._buckets: dict[tuple[int, int], list] = defaultdict(list)
        self.count = 0

    def _key(self, p) -> tuple[int, int]:
        return int(math.floor(p[0] / self.size)), int(math.floor(p[1] / self.size))

    def near(self, p) -> bool:
        """Is any recorded centroid strictly closer than ``d_G``?"""
        kx, ky = self._key(p)
        lim = self.d_G * (1 - 1e-9)
        for dx in (-2, -1, 0, 1, 2):
            for dy in (-2, -1, 0, 1, 2):
                for q in self._buckets.get((kx + dx, ky + dy), ()):
                    if math.hypot(p[0] - q[0], p[1] - q[1]) < lim:
                        return True
        return False

    def add(self, p) -> None:
        self._buckets[self._key(p)].append((float(p[0]), float(p[1])))
        self.count += 1


def filter_overlap_grid(cells, tracker: OccupancyTracker) -> list:
    """Drop cells whose centroid lies within ``d_G`` of a recorded centroid;
    record the centroids of the kept cells."""
    cells = list(cells)
    cents = [c.centroid if isinstance(c, QuadCell) else polygon_centroid(c) for c in cells]
    keep = [not tracker.near(p) for p in cents]
    kept = []
    for c, p, k in zip(cells, cents, keep):
        if k:
            kept.append(c)
            tracker.add(p)
    return kept
