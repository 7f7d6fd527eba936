"""Random aggregate mesostructure: circles, inscribed polygons, ITZ bands, tendon duct.

Coordinates are in mm with ``y`` measured downward from the exposed
surface, so ``y`` is depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import PackingIncomplete, ParameterError


class Material(IntEnum):
    MORTAR = 0
    AGGREGATE = 1
    ITZ = 2
    DUCT = 3


@dataclass(frozen=True)
class DomainRect:
    width: float = 300.0
    height: float = 200.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ParameterError("domain sides must be positive", width=self.width, height=self.height)

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class CircleAggregate:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ParameterError("radius must be positive", radius=self.radius)
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    def inside(self, domain: DomainRect) -> bool:
        x, y = self.center
        r = self.radius
        return r <= x <= domain.width - r and r <= y <= domain.height - r

    @property
    def area(self) -> float:
        return math.pi * self.radius**2


@dataclass(frozen=True)
class PolygonAggregate:
    """Convex polygon inscribed in ``circumscribed``, vertices counter-clockwise.

    Counter-clockwise here is in the usual (x right, y up) sense of the
    vertex coordinates; the signed shoelace area is positive.
    """

    vertices: tuple[tuple[float, float], ...]
    circumscribed: CircleAggregate

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise ParameterError("a polygon needs at least three vertices", n=len(self.vertices))
        object.__setattr__(self, "vertices", tuple((float(x), float(y)) for x, y in self.vertices))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    @property
    def signed_area(self) -> float:
        v = self.array
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    @property
    def area(self) -> float:
        return abs(self.signed_area)

    @property
    def perimeter(self) -> float:
        v = self.array
        return float(np.sum(np.hypot(*(np.roll(v, -1, axis=0) - v).T)))

    def is_convex(self) -> bool:
        v = self.array
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        return bool(np.all(cross > 0))

    def vertex_radius_residual(self) -> float:
        """Largest relative deviation of a vertex from the circumscribed circle."""
        c = self.circumscribed
        d = np.hypot(self.array[:, 0] - c.center[0], self.array[:, 1] - c.center[1])
        return float(np.max(np.abs(d - c.radius)) / c.radius)

    def translated(self, dx: float, dy: float) -> "PolygonAggregate":
        c = self.circumscribed
        return PolygonAggregate(
            tuple((x + dx, y + dy) for x, y in self.vertices),
            CircleAggregate((c.center[0] + dx, c.center[1] + dy), c.radius),
        )

    def contains(self, px: np.ndarray, py: np.ndarray) -> np.ndarray:
        """Points inside or on the boundary (half-plane test)."""
        v = self.array
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * (py[..., None] - v[:, 1]) - e[:, 1] * (px[..., None] - v[:, 0])
        return np.all(cross >= 0.0, axis=-1)

    def boundary_distance(self, px: np.ndarray, py: np.ndarray) -> np.ndarray:
        """Euclidean distance from each point to the polygon boundary."""
        a = self.array
        b = np.roll(a, -1, axis=0)
        ab = b - a
        ab2 = np.sum(ab * ab, axis=1)
        apx = px[..., None] - a[:, 0]
        apy = py[..., None] - a[:, 1]
        t = np.clip((apx * ab[:, 0] + apy * ab[:, 1]) / ab2, 0.0, 1.0)
        dx = apx - t * ab[:, 0]
        dy = apy - t * ab[:, 1]
        return np.sqrt(np.min(dx * dx + dy * dy, axis=-1))


@dataclass(frozen=True)
class TendonDuct:
    center: tuple[float, float]
    diameter: float = 60.0

    def __post_init__(self):
        if self.diameter <= 0:
            raise ParameterError("duct diameter must be positive", diameter=self.diameter)
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @classmethod
    def at_depth(cls, domain: DomainRect, depth: float = 140.0, diameter: float = 60.0, x: Optional[float] = None):
        duct = cls((domain.width / 2 if x is None else x, depth), diameter)
        if not duct.as_circle().inside(domain):
            raise ParameterError("tendon duct must lie inside the domain", depth=depth, diameter=diameter)
        return duct

    @property
    def radius(self) -> float:
        return self.diameter / 2

    @property
    def depth(self) -> float:
        return self.center[1]

    @property
    def shallowest_depth(self) -> float:
        return self.center[1] - self.radius

    @property
    def deepest_depth(self) -> float:
        return self.center[1] + self.radius

    def as_circle(self) -> CircleAggregate:
        return CircleAggregate(self.center, self.radius)

    def contains(self, px: np.ndarray, py: np.ndarray) -> np.ndarray:
        return np.hypot(px - self.center[0], py - self.center[1]) <= self.radius


@dataclass(frozen=True)
class Mesostructure:
    domain: DomainRect
    aggregates: tuple[PolygonAggregate, ...]
    itz_width: float
    duct: Optional[TendonDuct]
    seed: int
    achieved_area_fraction: float
    target_fraction: float = 0.0
    eta: float = 1.05

    @property
    def aggregate_area(self) -> float:
        return float(sum(p.area for p in self.aggregates))


@dataclass(frozen=True, eq=False)
class MaterialGrid:
    """Cell-centred raster of material codes. Row 0 touches the exposed surface."""

    nx: int
    ny: int
    h: float
    codes: np.ndarray  # shape (ny, nx), Material values
    domain: Optional[DomainRect] = None

    def __post_init__(self):
        codes = np.array(self.codes, dtype=np.int8)
        if codes.shape != (self.ny, self.nx):
            raise ParameterError("codes shape does not match (ny, nx)", shape=str(codes.shape))
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    @property
    def x_centers(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.h

    @property
    def depths(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.h

    @property
    def active(self) -> np.ndarray:
        return (self.codes == Material.MORTAR) | (self.codes == Material.ITZ)

    @property
    def extent_residual(self) -> tuple[float, float]:
        """(nx*h - width, ny*h - height); zero when h divides the domain."""
        if self.domain is None:
            return (0.0, 0.0)
        return (self.nx * self.h - self.domain.width, self.ny * self.h - self.domain.height)

    def fractions(self) -> dict[str, float]:
        n = self.codes.size
        return {m.name.lower(): float(np.count_nonzero(self.codes == m)) / n for m in Material}

    @classmethod
    def homogeneous(cls, nx: int, ny: int, h: float) -> "MaterialGrid":
        return cls(nx, ny, h, np.zeros((ny, nx), dtype=np.int8), DomainRect(nx * h, ny * h))

    def __eq__(self, other):
        if not isinstance(other, MaterialGrid):
            return NotImplemented
        return (self.nx, self.ny, self.h) == (other.nx, other.ny, other.h) and np.array_equal(self.codes, other.codes)


# --------------------------------------------------------------------------- grading


def fuller_fraction(diameter: float, max_diameter: float, exponent: float = 0.5) -> float:
    """Cumulative passing fraction of the Fuller curve."""
    if diameter <= 0 or diameter > max_diameter:
        raise ParameterError("diameter must lie in (0, max_diameter]", diameter=diameter, max_diameter=max_diameter)
    return (diameter / max_diameter) ** exponent


def fuller_inverse(u: float, d_min: float, d_max: float, exponent: float = 0.5) -> float:
    """Diameter at cumulative probability ``u`` of the Fuller curve truncated to [d_min, d_max]."""
    lo = (d_min / d_max) ** exponent
    return d_max * (lo + u * (1.0 - lo)) ** (1.0 / exponent)


def sample_radius(rng: np.random.Generator, d_min: float, d_max: float, exponent: float = 0.5) -> float:
    if not 0 < d_min <= d_max:
        raise ParameterError("grading needs 0 < d_min <= d_max", d_min=d_min, d_max=d_max)
    return fuller_inverse(rng.random(), d_min, d_max, exponent) / 2.0


def separation_ok(candidate: CircleAggregate, placed: Sequence[CircleAggregate], eta: float) -> bool:
    if not placed:
        return True
    centers = np.array([c.center for c in placed])
    radii = np.array([c.radius for c in placed])
    dist = np.hypot(centers[:, 0] - candidate.center[0], centers[:, 1] - candidate.center[1])
    return bool(np.all(dist >= eta * (candidate.radius + radii)))


# --------------------------------------------------------------------------- packing


class _ClearanceMap:
    """Upper-bounding helper for random sequential addition.

    Holds, on a fine lattice, g(p) = min(wall distance, min_j |p - c_j|/eta - R_j).
    A centre p can host radius r only if g(p) >= r. Since g is 1-Lipschitz,
    lattice cells with g(centre) < r - half_diagonal contain no feasible
    point and are skipped. Candidates are drawn uniformly from the remaining
    cells and tested exactly, so accepted centres stay uniform over the
    feasible set.
    """

    def __init__(self, domain: DomainRect, eta: float, r_cap: float, spacing: float):
        self.domain = domain
        self.eta = eta
        self.r_cap = r_cap
        self.g = spacing
        self.half_diag = spacing * math.sqrt(0.5)
        self.nx = int(math.ceil(domain.width / spacing))
        self.ny = int(math.ceil(domain.height / spacing))
        xc = (np.arange(self.nx) + 0.5) * spacing
        yc = (np.arange(self.ny) + 0.5) * spacing
        self.xc, self.yc = xc, yc
        wall = np.minimum.outer(np.minimum(yc, domain.height - yc), np.minimum(xc, domain.width - xc))
        self.field = wall
        self.centers = np.empty((0, 2))
        self.radii = np.empty(0)
        self._max = float(self.field.max())

    def add(self, center: tuple[float, float], radius: float) -> None:
        cx, cy = center
        reach = self.eta * (radius + self.r_cap) + self.half_diag
        i0 = max(int((cx - reach) / self.g), 0)
        i1 = min(int((cx + reach) / self.g) + 1, self.nx)
        j0 = max(int((cy - reach) / self.g), 0)
        j1 = min(int((cy + reach) / self.g) + 1, self.ny)
        if i0 < i1 and j0 < j1:
            d = np.hypot(self.xc[None, i0:i1] - cx, self.yc[j0:j1, None] - cy) / self.eta - radius
            window = self.field[j0:j1, i0:i1]
            np.minimum(window, d, out=window)
        self.centers = np.vstack([self.centers, [cx, cy]])
        self.radii = np.append(self.radii, radius)
        self._max = float(self.field.max())

    def feasible(self, x: float, y: float, radius: float) -> bool:
        w, h = self.domain.width, self.domain.height
        if not (radius <= x <= w - radius and radius <= y <= h - radius):
            return False
        if self.radii.size == 0:
            return True
        d = np.hypot(self.centers[:, 0] - x, self.centers[:, 1] - y)
        return bool(np.all(d >= self.eta * (radius + self.radii)))

    def find(self, radius: float, rng: np.random.Generator, attempts: int) -> tuple[Optional[tuple[float, float]], int]:
        """Try to place ``radius``; returns (centre or None, rejections spent)."""
        threshold = radius - self.half_diag
        if self._max < threshold:
            return None, 1
        cells = np.flatnonzero(self.field.ravel() >= threshold)
        if cells.size == 0:
            return None, 1
        for k in range(attempts):
            cell = cells[rng.integers(cells.size)]
            j, i = divmod(int(cell), self.nx)
            x = (i + rng.random()) * self.g
            y = (j + rng.random()) * self.g
            if self.feasible(x, y, radius):
                return (x, y), k
        return None, attempts


@dataclass
class _Particle:
    radius: float
    area: float
    shape: Optional[PolygonAggregate] = None  # centred at the origin


def _sequential_addition(
    domain: DomainRect,
    target_area: float,
    draw: Callable[[float], list[_Particle]],
    eta: float,
    r_cap: float,
    rng: np.random.Generator,
    max_attempts: int,
    obstacles: Sequence[CircleAggregate] = (),
    particle_attempts: int = 400,
    lattice_spacing: float = 0.5,
) -> list[tuple[CircleAggregate, _Particle]]:
    cmap = _ClearanceMap(domain, eta, r_cap, lattice_spacing)
    for obstacle in obstacles:
        cmap.add(obstacle.center, obstacle.radius)
    placed: list[tuple[CircleAggregate, _Particle]] = []
    achieved = 0.0
    rejections = 0
    while achieved < target_area:
        batch = sorted(draw(target_area - achieved), key=lambda p: -p.radius)
        for particle in batch:
            center, spent = cmap.find(particle.radius, rng, min(particle_attempts, max_attempts - rejections))
            if center is None:
                rejections += max(spent, 1)
                if rejections >= max_attempts:
                    raise PackingIncomplete(
                        "packing jammed before reaching the target fraction",
                        achieved_fraction=achieved / domain.area,
                        target_fraction=target_area / domain.area,
                        placed=len(placed),
                    )
                continue
            rejections = 0
            cmap.add(center, particle.radius)
            placed.append((CircleAggregate(center, particle.radius), particle))
            achieved += particle.area
            if achieved >= target_area:
                break
    return placed


def _draw_circles(rng, d_min, d_max, exponent):
    def draw(deficit: float) -> list[_Particle]:
        out, total = [], 0.0
        while total < deficit:
            r = sample_radius(rng, d_min, d_max, exponent)
            out.append(_Particle(r, math.pi * r * r))
            total += math.pi * r * r
        return out

    return draw


def place_circles(
    domain: DomainRect,
    target_fraction: float,
    grading: tuple[float, float] = (5.0, 20.0),
    eta: float = 1.05,
    seed: int = 42,
    max_attempts: int = 100_000,
    fuller_exponent: float = 0.5,
    obstacles: Sequence[CircleAggregate] = (),
) -> list[CircleAggregate]:
    """Random sequential addition of circles until their area reaches the target.

    Radii are drawn from the Fuller curve in batches that cover the remaining
    area, sorted largest-first, and each is given uniformly random centres
    until one satisfies the separation rule. A particle that does not fit is
    discarded and replaced by fresh draws in the next batch.
    """
    if not 0 < target_fraction < 1:
        raise ParameterError("target_fraction must lie in (0, 1)", target_fraction=target_fraction)
    if eta < 1:
        raise ParameterError("eta must be >= 1", eta=eta)
    d_min, d_max = grading
    rng = np.random.default_rng(seed)
    placed = _sequential_addition(
        domain,
        target_fraction * domain.area,
        _draw_circles(rng, d_min, d_max, fuller_exponent),
        eta,
        d_max / 2,
        rng,
        max_attempts,
        obstacles,
    )
    return [c for c, _ in placed]


def polygonize(
    circle: CircleAggregate,
    vertex_count_range: tuple[int, int] = (4, 8),
    min_angle_deg: float = 30.0,
    rng: Optional[np.random.Generator] = None,
    vertex_count: Optional[int] = None,
    equal_angles: bool = False,
) -> PolygonAggregate:
    """Inscribed convex polygon with random central angles.

    The central angles are ``min_angle + slack * w`` with ``w`` uniform on
    the simplex, so each is at least ``min_angle`` and they sum to 360 deg.
    """
    n_lo, n_hi = vertex_count_range
    if n_lo < 3 or n_hi < n_lo:
        raise ParameterError("vertex_count_range must satisfy 3 <= lo <= hi", lo=n_lo, hi=n_hi)
    rng = rng if rng is not None else np.random.default_rng()
    n = int(vertex_count) if vertex_count is not None else int(rng.integers(n_lo, n_hi + 1))
    min_angle = math.radians(min_angle_deg)
    slack = 2 * math.pi - n * min_angle
    if slack < -1e-12:
        raise ParameterError("angle rule cannot close the polygon", n=n, min_angle_deg=min_angle_deg)
    slack = max(slack, 0.0)
    if equal_angles:
        weights = np.full(n, 1.0 / n)
        start = 0.0
    else:
        weights = rng.dirichlet(np.ones(n))
        start = rng.uniform(0.0, 2 * math.pi)
    steps = min_angle + slack * weights
    theta = start + np.concatenate([[0.0], np.cumsum(steps[:-1])])
    cx, cy = circle.center
    r = circle.radius
    vertices = tuple((cx + r * math.cos(t), cy + r * math.sin(t)) for t in theta)
    return PolygonAggregate(vertices, circle)


# --------------------------------------------------------------------------- assembly


@dataclass(frozen=True)
class MesostructureConfig:
    domain: DomainRect = field(default_factory=DomainRect)
    target_fraction: float = 0.45
    grading: tuple[float, float] = (5.0, 20.0)
    fuller_exponent: float = 0.5
    eta: float = 1.05
    vertex_count_range: tuple[int, int] = (4, 8)
    min_angle_deg: float = 30.0
    itz_width: float = 0.5
    duct: Optional[TendonDuct] = None
    seed: int = 42
    max_attempts: int = 100_000

    def __post_init__(self):
        if not 0 <= self.target_fraction < 1:
            raise ParameterError("target_fraction must lie in [0, 1)", target_fraction=self.target_fraction)
        if self.eta < 1:
            raise ParameterError("eta must be >= 1", eta=self.eta)
        if self.itz_width < 0:
            raise ParameterError("itz_width must be >= 0", itz_width=self.itz_width)
        n_lo, n_hi = self.vertex_count_range
        if n_lo < 3 or n_hi < n_lo:
            raise ParameterError("vertex_count_range must satisfy 3 <= lo <= hi", lo=n_lo, hi=n_hi)
        if n_hi * self.min_angle_deg > 360.0 + 1e-9:
            raise ParameterError("angle rule cannot close the largest polygon", n=n_hi, min_angle_deg=self.min_angle_deg)

    @classmethod
    def default(cls, **kw) -> "MesostructureConfig":
        domain = kw.pop("domain", DomainRect())
        duct = kw.pop("duct", TendonDuct.at_depth(domain))
        return cls(domain=domain, duct=duct, **kw)


def build_mesostructure(config: MesostructureConfig) -> Mesostructure:
    """Polygonal aggregates packed until their area reaches the target fraction.

    Each particle's polygon is drawn before placement, so the stopping rule
    counts polygon area; placement interference is judged on the
    circumscribed circles, with the duct treated as a fixed obstacle.
    """
    domain = config.domain
    obstacles = [config.duct.as_circle()] if config.duct is not None else []
    aggregates: tuple[PolygonAggregate, ...] = ()
    if config.target_fraction > 0:
        rng = np.random.default_rng(config.seed)
        d_min, d_max = config.grading

        def draw(deficit: float) -> list[_Particle]:
            out, total = [], 0.0
            while total < deficit:
                r = sample_radius(rng, d_min, d_max, config.fuller_exponent)
                shape = polygonize(CircleAggregate((0.0, 0.0), r), config.vertex_count_range, config.min_angle_deg, rng)
                out.append(_Particle(r, shape.area, shape))
                total += shape.area
            return out

        placed = _sequential_addition(
            domain,
            config.target_fraction * domain.area,
            draw,
            config.eta,
            d_max / 2,
            rng,
            config.max_attempts,
            obstacles,
        )
        aggregates = tuple(p.shape.translated(*c.center) for c, p in placed)
    area = float(sum(p.area for p in aggregates))
    return Mesostructure(
        domain=domain,
        aggregates=aggregates,
        itz_width=config.itz_width,
        duct=config.duct,
        seed=config.seed,
        achieved_area_fraction=area / domain.area,
        target_fraction=config.target_fraction,
        eta=config.eta,
    )


def rasterize(meso: Mesostructure, h: float) -> MaterialGrid:
    """Classify each cell by its centre: duct, aggregate, ITZ band, else mortar."""
    if h <= 0:
        raise ParameterError("resolution h must be positive", h=h)
    if meso.aggregates:
        r_min = min(p.circumscribed.radius for p in meso.aggregates)
        if h > r_min:
            raise ParameterError("resolution coarser than the smallest aggregate radius", h=h, r_min=r_min)
    domain = meso.domain
    nx = max(int(round(domain.width / h)), 1)
    ny = max(int(round(domain.height / h)), 1)
    xc = (np.arange(nx) + 0.5) * h
    yc = (np.arange(ny) + 0.5) * h
    aggregate = np.zeros((ny, nx), dtype=bool)
    itz = np.zeros((ny, nx), dtype=bool)
    band = meso.itz_width
    for poly in meso.aggregates:
        v = poly.array
        i0 = max(int(np.floor((v[:, 0].min() - band) / h - 0.5)), 0)
        i1 = min(int(np.ceil((v[:, 0].max() + band) / h + 0.5)) + 1, nx)
        j0 = max(int(np.floor((v[:, 1].min() - band) / h - 0.5)), 0)
        j1 = min(int(np.ceil((v[:, 1].max() + band) / h + 0.5)) + 1, ny)
        if i0 >= i1 or j0 >= j1:
            continue
        px, py = np.meshgrid(xc[i0:i1], yc[j0:j1])
        inside = poly.contains(px, py)
        aggregate[j0:j1, i0:i1] |= inside
        if band > 0:
            itz[j0:j1, i0:i1] |= ~inside & (poly.boundary_distance(px, py) <= band)
    codes = np.full((ny, nx), Material.MORTAR, dtype=np.int8)
    codes[itz] = Material.ITZ
    codes[aggregate] = Material.AGGREGATE
    if meso.duct is not None:
        px, py = np.meshgrid(xc, yc)
        codes[meso.duct.contains(px, py)] = Material.DUCT
    return MaterialGrid(nx, ny, h, codes, domain)
