"""Continuous path primitives (lines, circular arcs), closed rings with
filleted corners, and Dubins shortest paths between poses."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Wrap to [-pi, pi)."""
    return (np.asarray(a) + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass
class Line:
    p0: np.ndarray
    p1: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def length(self) -> float:
        return float(np.hypot(*(self.p1 - self.p0)))

    def at(self, s):
        s = np.asarray(s, dtype=float)
        length = self.length
        d = (self.p1 - self.p0) / length if length > 0 else np.zeros(2)
        pts = self.p0 + s[..., None] * d
        heading = np.full(s.shape, math.atan2(d[1], d[0]))
        return pts, heading

    def split(self, s: float) -> tuple["Line", "Line"]:
        pm = self.at(s)[0]
        return replace(self, p1=pm), replace(self, p0=pm)

    def reversed(self) -> "Line":
        return replace(self, p0=self.p1, p1=self.p0)


@dataclass
class Arc:
    """Circular arc; ``sweep`` > 0 turns left (counter-clockwise)."""

    center: np.ndarray
    radius: float
    start_angle: float
    sweep: float
    meta: dict = field(default_factory=dict)

    @property
    def length(self) -> float:
        return abs(self.sweep) * self.radius

    def at(self, s):
        s = np.asarray(s, dtype=float)
        sign = 1.0 if self.sweep >= 0 else -1.0
        ang = self.start_angle + sign * s / self.radius
        pts = self.center + self.radius * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        return pts, ang + sign * math.pi / 2

    def split(self, s: float) -> tuple["Arc", "Arc"]:
        sign = 1.0 if self.sweep >= 0 else -1.0
        a = s / self.radius
        first = replace(self, sweep=sign * a)
        second = replace(self, start_angle=self.start_angle + sign * a, sweep=self.sweep - sign * a)
        return first, second

    def reversed(self) -> "Arc":
        return replace(self, start_angle=self.start_angle + self.sweep, sweep=-self.sweep)


Primitive = Line | Arc


def with_meta(prims, **meta) -> list:
    return [replace(p, meta={**p.meta, **meta}) for p in prims]


class Path:
    """Concatenation of primitives parameterised by arc length."""

    def __init__(self, prims):
        self.prims = [p for p in prims if p.length > 1e-12]
        self.cum = np.concatenate([[0.0], np.cumsum([p.length for p in self.prims])])

    @property
    def length(self) -> float:
        return float(self.cum[-1])

    def _locate(self, s: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.cum, s, side="right") - 1
        return np.clip(idx, 0, len(self.prims) - 1)

    def at(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        idx = self._locate(s)
        pts = np.empty((len(s), 2))
        hdg = np.empty(len(s))
        for i in np.unique(idx):
            m = idx == i
            p, h = self.prims[i].at(s[m] - self.cum[i])
            pts[m], hdg[m] = p, h
        return pts, hdg

    def meta_at(self, s) -> list[dict]:
        idx = self._locate(np.atleast_1d(np.asarray(s, dtype=float)))
        return [self.prims[i].meta for i in idx]

    def start_pose(self) -> Pose:
        p, h = self.prims[0].at(0.0)
        return Pose(float(p[0]), float(p[1]), float(h))

    def end_pose(self) -> Pose:
        last = self.prims[-1]
        p, h = last.at(last.length)
        return Pose(float(p[0]), float(p[1]), float(h))

    def sub(self, s0: float, s1: float) -> list:
        """Primitives covering ``[s0, s1]`` (no wrap-around)."""
        out = []
        for i, prim in enumerate(self.prims):
            a, b = self.cum[i], self.cum[i + 1]
            lo, hi = max(a, s0), min(b, s1)
            if hi - lo <= 1e-12:
                continue
            piece = prim
            if hi < b - 1e-12:
                piece = piece.split(hi - a)[0]
            if lo > a + 1e-12:
                piece = piece.split(lo - a)[1]
            out.append(piece)
        return out


def polyline_prims(points, **meta) -> list:
    pts = np.asarray(points, dtype=float)
    return [Line(pts[i].copy(), pts[i + 1].copy(), dict(meta)) for i in range(len(pts) - 1)]


def fillet_ring(ring: np.ndarray, radius: float, min_angle: float = 1e-6) -> list:
    """Closed polyline with each corner replaced by a tangent arc.

    The arc radius shrinks locally when adjacent edges are too short to hold
    the full tangent length.
    """
    ring = np.asarray(ring, dtype=float)
    n = len(ring)
    edges = np.roll(ring, -1, axis=0) - ring
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    dirs = edges / lengths[:, None]
    corners = []  # (tangent_in_point, arc or None, tangent_out_point) per vertex
    for i in range(n):
        d_in = dirs[i - 1]
        d_out = dirs[i]
        turn = math.atan2(d_in[0] * d_out[1] - d_in[1] * d_out[0], float(np.dot(d_in, d_out)))
        if abs(turn) < min_angle:
            corners.append((ring[i], None, ring[i]))
            continue
        half = abs(turn) / 2
        t_max = 0.5 * min(lengths[i - 1], lengths[i])
        r = min(radius, t_max / math.tan(half))
        t = r * math.tan(half)
        p_in = ring[i] - d_in * t
        p_out = ring[i] + d_out * t
        sign = 1.0 if turn > 0 else -1.0
        normal = np.array([-d_in[1], d_in[0]]) * sign
        center = p_in + normal * r
        start = math.atan2(p_in[1] - center[1], p_in[0] - center[0])
        corners.append((p_in, Arc(center, r, start, turn), p_out))
    prims = []
    for i in range(n):
        _, arc, p_out = corners[i]
        if arc is not None:
            prims.append(arc)
        p_next_in = corners[(i + 1) % n][0]
        prims.append(Line(p_out.copy(), p_next_in.copy()))
    return [p for p in prims if p.length > 1e-9]


class Ring(Path):
    """Closed path; arc-length positions wrap modulo the perimeter."""

    def __init__(self, prims, name: str = "ring"):
        super().__init__(prims)
        self.name = name
        pts, _ = self.at(np.arange(0.0, self.length, 0.25))
        self._dense = pts
        self._dense_s = np.arange(0.0, self.length, 0.25)

    @classmethod
    def from_polygon(cls, ring, radius: float, name: str = "ring") -> "Ring":
        return cls(fillet_ring(ring, radius), name)

    def project(self, point) -> float:
        """Arc-length position of the closest ring point (0.25 m resolution, refined)."""
        p = np.asarray(point, dtype=float)
        d = np.hypot(*(self._dense - p).T)
        i = int(np.argmin(d))
        lo, hi = self._dense_s[i] - 0.25, self._dense_s[i] + 0.25
        ss = np.linspace(lo, hi, 51)
        pts, _ = self.at(np.mod(ss, self.length))
        j = int(np.argmin(np.hypot(*(pts - p).T)))
        return float(np.mod(ss[j], self.length))

    def distance(self, point) -> float:
        p = np.asarray(point, dtype=float)
        return float(np.hypot(*(self._dense - p).T).min())

    def pose(self, s: float, forward: bool = True) -> Pose:
        p, h = self.at(np.mod(s, self.length))
        hd = float(h[0]) if forward else float(wrap_angle(h[0] + math.pi))
        return Pose(float(p[0, 0]), float(p[0, 1]), hd)

    def run(self, s0: float, dist: float, forward: bool = True) -> list:
        """Primitives travelling ``dist`` metres from ``s0`` (wrapping)."""
        L = self.length
        s0 = float(np.mod(s0, L))
        if forward:
            out, s, left = [], s0, dist
            while left > 1e-9:
                take = min(left, L - s)
                out += self.sub(s, s + take)
                left -= take
                s = 0.0
            return out
        # backward: forward run from s0 - dist, reversed
        return [p.reversed() for p in reversed(self.run(s0 - dist, dist, True))]

    def forward_distance(self, s0: float, s1: float) -> float:
        return float(np.mod(s1 - s0, self.length))


# --------------------------------------------------------------------------
# Dubins


def _mod2pi(a: float) -> float:
    return a % TWO_PI


def _dubins_words(alpha, beta, d):
    sa, sb, ca, cb = math.sin(alpha), math.sin(beta), math.cos(alpha), math.cos(beta)
    cab = math.cos(alpha - beta)
    out = {}
    # LSL
    p2 = 2 + d * d - 2 * cab + 2 * d * (sa - sb)
    if p2 >= 0:
        tmp = math.atan2(cb - ca, d + sa - sb)
        out["LSL"] = (_mod2pi(-alpha + tmp), math.sqrt(p2), _mod2pi(beta - tmp))
    # RSR
    p2 = 2 + d * d - 2 * cab + 2 * d * (sb - sa)
    if p2 >= 0:
        tmp = math.atan2(ca - cb, d - sa + sb)
        out["RSR"] = (_mod2pi(alpha - tmp), math.sqrt(p2), _mod2pi(-beta + tmp))
    # LSR
    p2 = -2 + d * d + 2 * cab + 2 * d * (sa + sb)
    if p2 >= 0:
        p = math.sqrt(p2)
        tmp = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
        out["LSR"] = (_mod2pi(-alpha + tmp), p, _mod2pi(-_mod2pi(beta) + tmp))
    # RSL
    p2 = -2 + d * d + 2 * cab - 2 * d * (sa + sb)
    if p2 >= 0:
        p = math.sqrt(p2)
        tmp = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
        out["RSL"] = (_mod2pi(alpha - tmp), p, _mod2pi(beta - tmp))
    # RLR
    tmp = (6.0 - d * d + 2 * cab + 2 * d * (sa - sb)) / 8.0
    if abs(tmp) <= 1:
        p = _mod2pi(TWO_PI - math.acos(tmp))
        t = _mod2pi(alpha - math.atan2(ca - cb, d - sa + sb) + p / 2.0)
        out["RLR"] = (t, p, _mod2pi(alpha - beta - t + p))
    # LRL
    tmp = (6.0 - d * d + 2 * cab + 2 * d * (-sa + sb)) / 8.0
    if abs(tmp) <= 1:
        p = _mod2pi(TWO_PI - math.acos(tmp))
        t = _mod2pi(-alpha - math.atan2(ca - cb, d + sa - sb) + p / 2.0)
        out["LRL"] = (t, p, _mod2pi(_mod2pi(beta) - alpha - t + p))
    return out


def dubins_candidates(start: Pose, goal: Pose, radius: float) -> list[tuple[float, str, tuple]]:
    """All feasible Dubins words as ``(length, word, normalised params)``, shortest first."""
    dx, dy = goal.x - start.x, goal.y - start.y
    D = math.hypot(dx, dy)
    d = D / radius
    theta = _mod2pi(math.atan2(dy, dx)) if D > 0 else 0.0
    alpha = _mod2pi(start.heading - theta)
    beta = _mod2pi(goal.heading - theta)
    words = _dubins_words(alpha, beta, d)
    res = [(radius * sum(params), w, params) for w, params in words.items()]
    return sorted(res, key=lambda r: r[0])


def dubins_prims(start: Pose, word: str, params: tuple, radius: float) -> list:
    """Materialise a Dubins word as primitives starting at ``start``."""
    prims = []
    x, y, h = start.x, start.y, start.heading
    for letter, p in zip(word, params):
        if letter == "S":
            length = p * radius
            if length > 1e-12:
                p0 = np.array([x, y])
                p1 = p0 + length * np.array([math.cos(h), math.sin(h)])
                prims.append(Line(p0, p1))
                x, y = p1
        else:
            sign = 1.0 if letter == "L" else -1.0
            if p * radius > 1e-12:
                cx = x - sign * radius * math.sin(h)
                cy = y + sign * radius * math.cos(h)
                start_angle = math.atan2(y - cy, x - cx)
                arc = Arc(np.array([cx, cy]), radius, start_angle, sign * p)
                prims.append(arc)
                end, _ = arc.at(arc.length)
                x, y = end
                h = h + sign * p
    return prims


def dubins_path(start: Pose, goal: Pose, radius: float, word: str | None = None) -> list:
    """Shortest Dubins path primitives (or the requested word)."""
    cands = dubins_candidates(start, goal, radius)
    if word is not None:
        cands = [c for c in cands if c[1] == word]
    if not cands:
        raise ValueError(f"no Dubins path for word {word}")
    _, w, params = cands[0]
    return dubins_prims(start, w, params, radius)


def sample_prims(prims, ds: float):
    """Uniformly resample primitives at spacing ``L/round(L/ds)``.

    Returns positions ``(n+1, 2)``, headings ``(n+1,)`` and per-step metadata
    (the metadata of the primitive containing each step midpoint).
    """
    path = Path(prims)
    L = path.length
    n = max(1, int(round(L / ds)))
    s = np.linspace(0.0, L, n + 1)
    pts, hdg = path.at(s)
    mids = 0.5 * (s[:-1] + s[1:])
    metas = path.meta_at(mids)
    return pts, hdg, metas
