"""Field geometry and run configuration: loading, validation, persistence
and a seeded synthetic field generator."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence

import numpy as np
from shapely.geometry import Polygon as ShapelyPolygon

from .geometry import (
    GeometryError,
    as_ring,
    distance_to_ring,
    orient,
    point_in_ring,
    polygon_area,
    self_intersections,
)

EARTH_RADIUS = 6_371_008.8
GEODETIC_CRS = {"epsg:4326", "wgs84", "geodetic", "lonlat"}


class FieldValidationError(GeometryError):
    pass


class FieldParseError(ValueError):
    pass


@dataclass
class FieldSpec:
    id: str
    contour: np.ndarray
    obstacles: list = field(default_factory=list)
    entry_point: np.ndarray | None = None

    def __post_init__(self):
        self.contour = orient(self.contour, ccw=True)
        self.obstacles = [orient(o, ccw=False) for o in self.obstacles]
        if self.entry_point is None:
            self.entry_point = self.contour[0].copy()
        self.entry_point = np.asarray(self.entry_point, dtype=float).reshape(2)

    @property
    def area_m2(self) -> float:
        return polygon_area(self.contour) - sum(-polygon_area(o) for o in self.obstacles)

    @property
    def area_ha(self) -> float:
        return self.area_m2 / 10000.0

    def shapely(self) -> ShapelyPolygon:
        return ShapelyPolygon(self.contour, [o for o in self.obstacles])

    def validate(self) -> "FieldSpec":
        """Raise :class:`FieldValidationError` naming the offending ring/vertex."""
        rings = [("contour", self.contour)] + [(f"obstacle {i}", o) for i, o in enumerate(self.obstacles)]
        for name, ring in rings:
            bad = self_intersections(ring)
            if bad:
                i, j = bad[0]
                raise FieldValidationError(f"{name} self-intersects: edge {i} crosses edge {j}")
        for k, obs in enumerate(self.obstacles):
            for v, p in enumerate(obs):
                if not point_in_ring(p, self.contour) or distance_to_ring(p, self.contour) <= 1e-9:
                    raise FieldValidationError(f"obstacle {k} vertex {v} lies outside the contour")
            shp = ShapelyPolygon(obs)
            if ShapelyPolygon(self.contour).exterior.intersects(shp):
                raise FieldValidationError(f"obstacle {k} touches the contour")
            for m in range(k):
                if ShapelyPolygon(self.obstacles[m]).intersects(shp):
                    raise FieldValidationError(f"obstacle {k} overlaps obstacle {m}")
        if distance_to_ring(self.entry_point, self.contour) > 1.0:
            raise FieldValidationError("entry point is more than 1 m from the contour")
        return self

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "contour": self.contour.tolist(),
            "obstacles": [o.tolist() for o in self.obstacles],
            "entry": self.entry_point.tolist(),
        }


# --------------------------------------------------------------------------
# files


def _project_geodetic(doc: dict) -> dict:
    """Equirectangular projection about the contour centroid (lon/lat degrees in)."""
    lonlat = np.asarray(doc["contour"], dtype=float)
    lon0, lat0 = lonlat.mean(axis=0)
    k = math.cos(math.radians(lat0))

    def proj(pts):
        a = np.asarray(pts, dtype=float).reshape(-1, 2)
        x = np.radians(a[:, 0] - lon0) * EARTH_RADIUS * k
        y = np.radians(a[:, 1] - lat0) * EARTH_RADIUS
        return np.stack([x, y], axis=1)

    out = dict(doc)
    out["contour"] = proj(doc["contour"])
    out["obstacles"] = [proj(o) for o in doc.get("obstacles", [])]
    if doc.get("entry") is not None:
        out["entry"] = proj(doc["entry"])[0]
    return out


def field_from_json(doc: dict, default_id: str = "field") -> FieldSpec:
    try:
        if str(doc.get("crs", "")).lower() in GEODETIC_CRS:
            doc = _project_geodetic(doc)
        contour = as_ring(doc["contour"])
        obstacles = [as_ring(o) for o in doc.get("obstacles", [])]
        entry = doc.get("entry")
        if entry is not None:
            entry = np.asarray(entry, dtype=float).reshape(2)
    except KeyError as exc:
        raise FieldParseError(f"missing key {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, GeometryError):
            raise
        raise FieldParseError(str(exc)) from exc
    spec = FieldSpec(str(doc.get("id", default_id)), contour, obstacles, entry)
    return spec.validate()


def load_field(path) -> FieldSpec:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FieldParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise FieldParseError(f"{path}: expected a JSON object")
    return field_from_json(doc, default_id=os.path.splitext(os.path.basename(str(path)))[0])


def save_field(spec: FieldSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(spec.to_json(), fh, indent=1)


# --------------------------------------------------------------------------
# run configuration


@dataclass(frozen=True)
class RunConfig:
    working_width: float = 24.0
    nozzle_spacing: float = 0.5
    section_mode: str = "multi"
    v_ref: float = 2.0
    s_volume_ref: float = 46.78
    sample_spacing: float = 1.0
    min_turn_radius: float = 5.0
    method: str = "M1"

    @property
    def n_sections(self) -> int:
        """Number of nozzle-width sections across the boom."""
        return int(round(self.working_width / self.nozzle_spacing))

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)


SECTION_MODES = ("one", "two", "multi")
METHODS = ("M1", "M2")


def validate_config(cfg: RunConfig) -> list[str]:
    """List of violated constraints (empty if valid)."""
    out = []
    for name in ("working_width", "nozzle_spacing", "v_ref", "sample_spacing", "s_volume_ref"):
        v = getattr(cfg, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            out.append(f"{name} must be > 0")
    if cfg.min_turn_radius is None or not cfg.min_turn_radius > 0:
        out.append("min_turn_radius must be > 0")
    if not out or ("working_width must be > 0" not in out and "nozzle_spacing must be > 0" not in out):
        ratio = cfg.working_width / cfg.nozzle_spacing
        n = round(ratio)
        if abs(ratio - n) > 1e-9 * max(1.0, ratio) or n % 2 or n == 0:
            out.append("W/w_nozzle not an even integer")
    if cfg.section_mode not in SECTION_MODES:
        out.append(f"section_mode must be one of {SECTION_MODES}")
    if cfg.method not in METHODS:
        out.append(f"method must be one of {METHODS}")
    return out


def parse_kv(text: str) -> dict[str, str]:
    """Flat ``key = value`` parser; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FieldParseError(f"line {lineno}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip().strip('"').strip("'")
    return out


def config_from_mapping(values: dict) -> RunConfig:
    kw = {}
    names = {f.name: f for f in fields(RunConfig)}
    for k, v in values.items():
        if k not in names:
            continue
        kw[k] = v if k in ("section_mode", "method") else float(v)
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return config_from_mapping(parse_kv(fh.read()))


def config_to_text(cfg: RunConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in asdict(cfg).items())


# --------------------------------------------------------------------------
# synthetic fields


def rectangle(width: float, height: float, angle: float = 0.0, origin=(0.0, 0.0)) -> np.ndarray:
    pts = np.array([[0, 0], [width, 0], [width, height], [0, height]], dtype=float)
    c, s = math.cos(angle), math.sin(angle)
    return pts @ np.array([[c, s], [-s, c]]) + np.asarray(origin, dtype=float)


def _convex_ngon(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    # keep vertices reasonably spread so edges are not tiny
    angles = np.linspace(0, 2 * math.pi, n, endpoint=False) + rng.uniform(-0.25, 0.25, n) * (2 * math.pi / n)
    r = radius * rng.uniform(0.85, 1.0, n)
    return np.stack([r * np.cos(angles), r * np.sin(angles)], axis=1)


def synthetic_field(kind: str, rng: np.random.Generator, idx: int = 0) -> FieldSpec:
    """One random field of the requested ``kind``.

    Kinds: ``rectangle``, ``ngon`` (convex), ``lshape``, ``obstacle``
    (rectangle with 1-3 holes). Sizes fall roughly in 9-17 ha.
    """
    if kind == "rectangle":
        contour = rectangle(rng.uniform(330, 460), rng.uniform(290, 360), rng.uniform(-0.5, 0.5))
        obstacles = []
    elif kind == "ngon":
        contour = _convex_ngon(rng, int(rng.integers(5, 9)), rng.uniform(200, 250))
        obstacles = []
    elif kind == "lshape":
        a, b = rng.uniform(420, 500), rng.uniform(360, 420)
        ca, cb = rng.uniform(0.4, 0.55) * a, rng.uniform(0.4, 0.55) * b
        contour = np.array([[0, 0], [a, 0], [a, b - cb], [a - ca, b - cb], [a - ca, b], [0, b]], dtype=float)
        obstacles = []
    elif kind == "obstacle":
        w, h = rng.uniform(340, 440), rng.uniform(290, 350)
        contour = rectangle(w, h)
        obstacles = []
        n_obs = int(rng.integers(1, 4))
        tries = 0
        while len(obstacles) < n_obs and tries < 200:
            tries += 1
            ow, oh = rng.uniform(10, 25), rng.uniform(10, 25)
            ox, oy = rng.uniform(70, w - 70 - ow), rng.uniform(70, h - 70 - oh)
            cand = rectangle(ow, oh, origin=(ox, oy))
            shp = ShapelyPolygon(cand).buffer(60)
            if all(not shp.intersects(ShapelyPolygon(o)) for o in obstacles):
                obstacles.append(cand)
    else:
        raise ValueError(f"unknown field kind {kind!r}")
    contour = orient(contour)
    return FieldSpec(f"{kind}_{idx:02d}", contour, obstacles, contour[0].copy()).validate()


FIELD_KINDS = ("rectangle", "ngon", "lshape", "obstacle")


def generate_fields(n: int, seed: int = 0, kinds: Sequence[str] = FIELD_KINDS) -> list[FieldSpec]:
    rng = np.random.default_rng(seed)
    return [synthetic_field(kinds[i % len(kinds)], rng, i) for i in range(n)]
