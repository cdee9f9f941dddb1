"""Random obstacle sets and their rasterization.

Two obstacle families are supported: unions of tubes around the edges of a
random geometric graph (points joined when their distance falls in a
prescribed band, or by a general distance-to-probability rule), and unions of
balls centered on the points.  Obstacles scale homothetically, rasterize to a
cell-flag mask by cell-center membership, and carry enough provenance to
reproduce themselves from a seed.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateConfigurationError, InvalidArgumentError
from .points import Box, PointConfiguration, scale as scale_points
from .rng import substream

MATERIAL, HOLE, EXTERIOR = 0, 1, 2
_FLAG_CHARS = {MATERIAL: "m", HOLE: "h", EXTERIOR: "x"}
_CHAR_FLAGS = {v: k for k, v in _FLAG_CHARS.items()}
MASK_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ConnectivityFunction:
    """Distance-to-probability rule for joining point pairs.

    kind "annulus": probability exactly 1 for c1 <= d <= c2 and 0 elsewhere.
    kind "general": piecewise-constant nonincreasing table of
    (distance, probability) breakpoints; left of the first breakpoint the
    first value applies, right of the last the last value applies.
    """

    kind: str
    c1: float = 0.0
    c2: float = 0.0
    table: tuple = ()

    def __post_init__(self):
        if self.kind == "annulus":
            if not (0 < self.c1 <= self.c2):
                raise InvalidArgumentError(f"annulus needs 0 < c1 <= c2, got {self.c1}, {self.c2}")
        elif self.kind == "general":
            tab = tuple((float(d), float(p)) for d, p in self.table)
            if not tab:
                raise InvalidArgumentError("general connectivity needs a non-empty table")
            ds = [d for d, _ in tab]
            ps = [p for _, p in tab]
            if any(d2 <= d1 for d1, d2 in zip(ds, ds[1:])):
                raise InvalidArgumentError("table distances must be strictly increasing")
            if any(p < 0 or p > 1 for p in ps):
                raise InvalidArgumentError("table probabilities must be in [0, 1]")
            if any(p2 > p1 for p1, p2 in zip(ps, ps[1:])):
                raise InvalidArgumentError("table probabilities must be nonincreasing")
            object.__setattr__(self, "table", tab)
        else:
            raise InvalidArgumentError(f"unknown connectivity kind {self.kind!r}")

    @staticmethod
    def annulus(c1, c2):
        return ConnectivityFunction(kind="annulus", c1=float(c1), c2=float(c2))

    @staticmethod
    def from_table(pairs):
        return ConnectivityFunction(kind="general", table=tuple(pairs))

    def probability(self, d):
        d = np.asarray(d, dtype=float)
        if self.kind == "annulus":
            return ((d >= self.c1) & (d <= self.c2)).astype(float)
        ds = np.asarray([x for x, _ in self.table])
        ps = np.asarray([p for _, p in self.table])
        idx = np.clip(np.searchsorted(ds, d, side="right") - 1, 0, len(ds) - 1)
        return ps[idx]

    def support_radius(self):
        """Largest distance at which the probability can be positive (inf if unbounded)."""
        if self.kind == "annulus":
            return self.c2
        ds = [x for x, _ in self.table]
        ps = [p for _, p in self.table]
        if ps[-1] > 0:
            return np.inf
        for d, p in zip(reversed(ds), reversed(ps)):
            if p > 0:
                return ds[min(ds.index(d) + 1, len(ds) - 1)]
        return ds[0]


@dataclass(frozen=True)
class EdgeSet:
    """Index pairs (i, j), i < j, into a PointConfiguration."""

    edges: np.ndarray
    seed: int = 0

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            if np.any(e[:, 0] >= e[:, 1]):
                raise InvalidArgumentError("edges must satisfy i < j")
            if np.unique(e, axis=0).shape[0] != e.shape[0]:
                raise InvalidArgumentError("duplicate edges")
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)

    @property
    def count(self):
        return self.edges.shape[0]


@dataclass(frozen=True)
class ObstacleSet:
    """Union of tubes around graph edges or of balls around points."""

    kind: str  # "tubes" | "balls"
    points: PointConfiguration
    edges: EdgeSet = None
    tube_radius: float = None
    ball_radii: np.ndarray = None
    scale_applied: float = 1.0

    def __post_init__(self):
        if self.kind not in ("tubes", "balls"):
            raise InvalidArgumentError(f"unknown obstacle kind {self.kind!r}")
        if self.kind == "tubes":
            if self.edges is None or self.tube_radius is None:
                raise InvalidArgumentError("tube obstacles need edges and a tube_radius")
            if self.tube_radius <= 0:
                raise InvalidArgumentError("tube_radius must be positive")
        else:
            r = np.asarray(self.ball_radii, dtype=float).reshape(-1)
            if r.shape[0] != self.points.count:
                raise InvalidArgumentError("one radius per point required")
            if r.size and np.any(r <= 0):
                raise InvalidArgumentError("ball radii must be positive")
            r.setflags(write=False)
            object.__setattr__(self, "ball_radii", r)

    @property
    def dim(self):
        return self.points.dim

    def min_feature(self):
        """Smallest cross-section radius present in the set (None if empty)."""
        if self.kind == "tubes":
            return self.tube_radius if self.edges.count else None
        return float(self.ball_radii.min()) if self.ball_radii.size else None

    def contains(self, pts):
        """Membership test for an (M, dim) array of probe points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        inside = np.zeros(pts.shape[0], dtype=bool)
        if self.kind == "balls":
            for c, r in zip(self.points.points, self.ball_radii):
                inside |= np.sum((pts - c) ** 2, axis=1) <= r * r
            return inside
        rho2 = self.tube_radius ** 2
        P = self.points.points
        for i, j in self.edges.edges:
            inside |= _segment_dist2(pts, P[i], P[j]) <= rho2
        return inside


def _segment_dist2(pts, a, b):
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom == 0.0:
        return np.sum((pts - a) ** 2, axis=1)
    t = np.clip((pts - a) @ ab / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.sum((pts - proj) ** 2, axis=1)


def build_rcm_edges(config, g, seed=0):
    """Edge set of the random connection model under connectivity rule `g`.

    The annulus kind is deterministic (an edge iff c1 <= d <= c2); the general
    kind draws an independent Bernoulli(g(d)) per pair from `seed`, in sorted
    pair order.
    """
    n = config.count
    if n < 2:
        return EdgeSet(edges=np.empty((0, 2), dtype=np.int64), seed=int(seed))
    cutoff = g.support_radius()
    if np.isfinite(cutoff):
        tree = cKDTree(config.points)
        pairs = tree.query_pairs(r=cutoff, output_type="ndarray")
        pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    else:
        ii, jj = np.triu_indices(n, k=1)
        pairs = np.column_stack([ii, jj])
    if pairs.size == 0:
        return EdgeSet(edges=np.empty((0, 2), dtype=np.int64), seed=int(seed))
    d = np.linalg.norm(config.points[pairs[:, 0]] - config.points[pairs[:, 1]], axis=1)
    p = g.probability(d)
    if g.kind == "annulus":
        keep = p >= 1.0
    else:
        rng = substream(seed, "rcm-edges")
        keep = rng.random(pairs.shape[0]) < p
    return EdgeSet(edges=pairs[keep], seed=int(seed))


def build_tubes(config, edges, tube_radius, max_allowed=None):
    """Union of tubes of radius `tube_radius` around the edge segments.

    If `max_allowed` is given (typically half the minimum connection
    distance) a larger radius only warns: variable stationary radii are a
    legitimate model.
    """
    if max_allowed is not None and tube_radius > max_allowed * (1 + 1e-12):
        warnings.warn(f"tube radius {tube_radius} exceeds {max_allowed}; "
                      "tubes may swallow their endpoints' neighborhoods",
                      stacklevel=2)
    return ObstacleSet(kind="tubes", points=config, edges=edges,
                       tube_radius=float(tube_radius))


@dataclass(frozen=True)
class BallRadiusRule:
    """How ball radii are assigned: a fixed value, a fraction of the minimum
    pairwise distance, or i.i.d. uniform radii capped at that fraction."""

    kind: str  # "fixed" | "min_distance_fraction" | "iid_uniform"
    value: float

    @staticmethod
    def fixed(r):
        return BallRadiusRule("fixed", float(r))

    @staticmethod
    def min_distance_fraction(theta):
        return BallRadiusRule("min_distance_fraction", float(theta))

    @staticmethod
    def iid_uniform(theta_max=0.5):
        return BallRadiusRule("iid_uniform", float(theta_max))


def min_pairwise_distance(config):
    if config.count < 2:
        raise DegenerateConfigurationError(
            "minimum pairwise distance needs at least two points")
    tree = cKDTree(config.points)
    d, _ = tree.query(config.points, k=2)
    return float(d[:, 1].min())


def build_balls(config, rule, seed=0):
    """Balls centered at the points with radii given by `rule`.

    With fractions <= 1/2 of the minimum pairwise distance, the balls are
    pairwise non-intersecting by construction.
    """
    n = config.count
    if rule.kind == "fixed":
        if rule.value <= 0:
            raise InvalidArgumentError("fixed radius must be positive")
        radii = np.full(n, rule.value)
    elif rule.kind == "min_distance_fraction":
        if not (0 < rule.value):
            raise InvalidArgumentError("fraction must be positive")
        d = min_pairwise_distance(config)
        radii = np.full(n, rule.value * d)
    elif rule.kind == "iid_uniform":
        if not (0 < rule.value):
            raise InvalidArgumentError("cap fraction must be positive")
        d = min_pairwise_distance(config)
        rng = substream(seed, "ball-radii")
        # uniform on (0, theta_max * min_dist]; zero radii excluded
        radii = (1.0 - rng.random(n)) * rule.value * d
    else:
        raise InvalidArgumentError(f"unknown radius rule {rule.kind!r}")
    return ObstacleSet(kind="balls", points=config, ball_radii=radii)


def rcm_obstacles(config, g, seed=0, tube_radius=None):
    """Edges plus tubes in one step; the default radius is c1/2 for annulus rules."""
    edges = build_rcm_edges(config, g, seed)
    if tube_radius is None:
        if g.kind != "annulus":
            raise InvalidArgumentError("tube_radius is required for general connectivity")
        tube_radius = g.c1 / 2.0
    max_allowed = g.c1 / 2.0 if g.kind == "annulus" else None
    return build_tubes(config, edges, tube_radius, max_allowed=max_allowed)


def scale_obstacles(obstacles, eps):
    """Homothety of the whole obstacle set (centers, radii, edge geometry)."""
    eps = float(eps)
    if not np.isfinite(eps) or eps <= 0:
        raise InvalidArgumentError(f"scale factor must be positive, got {eps}")
    pts = scale_points(obstacles.points, eps)
    if obstacles.kind == "tubes":
        return ObstacleSet(kind="tubes", points=pts, edges=obstacles.edges,
                           tube_radius=obstacles.tube_radius * eps,
                           scale_applied=obstacles.scale_applied * eps)
    return ObstacleSet(kind="balls", points=pts,
                       ball_radii=obstacles.ball_radii * eps,
                       scale_applied=obstacles.scale_applied * eps)


@dataclass(frozen=True)
class PerforatedMask:
    """Cell flags (material / hole / exterior) on a uniform grid over a box.

    A cell is a hole exactly when its center lies inside the obstacle set, so
    the mask realizes the binary obstacle indicator at cell centers.
    """

    flags: np.ndarray
    dx: float
    domain: Box
    epsilon: float = 1.0
    provenance: str = ""
    warnings: tuple = ()

    def __post_init__(self):
        f = np.ascontiguousarray(np.asarray(self.flags, dtype=np.uint8))
        f.setflags(write=False)
        object.__setattr__(self, "flags", f)

    @property
    def shape(self):
        return self.flags.shape

    @property
    def dim(self):
        return self.flags.ndim

    @property
    def material(self):
        return self.flags == MATERIAL

    @property
    def hole_count(self):
        return int(np.count_nonzero(self.flags == HOLE))

    @property
    def material_count(self):
        return int(np.count_nonzero(self.flags == MATERIAL))

    def axis_centers(self, axis):
        n = self.shape[axis]
        return self.domain.lower[axis] + (np.arange(n) + 0.5) * self.dx

    def cell_centers(self):
        """(N, dim) array of all cell centers in row-major cell order."""
        grids = np.meshgrid(*[self.axis_centers(a) for a in range(self.dim)], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def same_grid(self, other):
        return (self.shape == other.shape and self.dx == other.dx
                and self.domain == other.domain)


def _grid_shape(domain, dx):
    shape = []
    for side in domain.sides:
        m = side / dx
        if abs(m - round(m)) > 1e-9 * max(1.0, abs(m)):
            raise InvalidArgumentError(
                f"dx {dx} does not divide the domain side {side}")
        shape.append(int(round(m)))
    return tuple(shape)


def rasterize(obstacles, domain, dx, extra_provenance=""):
    """Flag grid cells whose centers fall inside the obstacle set as holes."""
    dx = float(dx)
    if dx <= 0:
        raise InvalidArgumentError("dx must be positive")
    shape = _grid_shape(domain, dx)
    if obstacles.dim != domain.dim:
        raise InvalidArgumentError("obstacle and domain dimensions differ")
    flags = np.zeros(shape, dtype=np.uint8)
    lo = np.asarray(domain.lower)
    notes = []
    feature = obstacles.min_feature()
    if feature is not None and dx > feature:
        notes.append(f"resolution-loss: dx={dx:.6g} exceeds smallest obstacle "
                     f"feature {feature:.6g}")
    if obstacles.kind == "balls":
        for c, r in zip(obstacles.points.points, obstacles.ball_radii):
            _flag_ball(flags, lo, dx, c, r)
    else:
        P = obstacles.points.points
        rho = obstacles.tube_radius
        for i, j in obstacles.edges.edges:
            _flag_capsule(flags, lo, dx, P[i], P[j], rho)
    prov = f"kind={obstacles.kind} scale={obstacles.scale_applied:.17g}"
    if extra_provenance:
        prov += " " + extra_provenance
    return PerforatedMask(flags=flags, dx=dx, domain=domain,
                          epsilon=obstacles.scale_applied,
                          provenance=prov, warnings=tuple(notes))


def _cell_range(lo, dx, n, a, b):
    """Index range of cells whose centers may lie in [a, b]."""
    i0 = int(np.ceil((a - lo) / dx - 0.5))
    i1 = int(np.floor((b - lo) / dx - 0.5))
    return max(i0, 0), min(i1, n - 1)


def _flag_ball(flags, lo, dx, center, r):
    dim = flags.ndim
    ranges = []
    for d in range(dim):
        i0, i1 = _cell_range(lo[d], dx, flags.shape[d], center[d] - r, center[d] + r)
        if i1 < i0:
            return
        ranges.append((i0, i1))
    axes = [lo[d] + (np.arange(r0, r1 + 1) + 0.5) * dx - center[d]
            for d, (r0, r1) in enumerate(ranges)]
    grids = np.meshgrid(*axes, indexing="ij")
    d2 = sum(g * g for g in grids)
    window = tuple(slice(r0, r1 + 1) for r0, r1 in ranges)
    flags[window][d2 <= r * r] = HOLE


def _flag_capsule(flags, lo, dx, a, b, rho):
    dim = flags.ndim
    ranges = []
    for d in range(dim):
        lo_d = min(a[d], b[d]) - rho
        hi_d = max(a[d], b[d]) + rho
        i0, i1 = _cell_range(lo[d], dx, flags.shape[d], lo_d, hi_d)
        if i1 < i0:
            return
        ranges.append((i0, i1))
    axes = [lo[d] + (np.arange(r0, r1 + 1) + 0.5) * dx
            for d, (r0, r1) in enumerate(ranges)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    inside = _segment_dist2(pts, np.asarray(a, float), np.asarray(b, float)) <= rho * rho
    window = tuple(slice(r0, r1 + 1) for r0, r1 in ranges)
    sub = flags[window]
    sub[inside.reshape(sub.shape)] = HOLE


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:  # path compression
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def connected_components(config, edges):
    """Partition of point indices into maximal connected sets."""
    uf = _UnionFind(config.count)
    for i, j in edges.edges:
        uf.union(int(i), int(j))
    groups = {}
    for i in range(config.count):
        groups.setdefault(uf.find(i), []).append(i)
    return [sorted(v) for _, v in sorted(groups.items())]


def volume_fraction(mask):
    """Hole cells over interior (hole + material) cells."""
    interior = mask.hole_count + mask.material_count
    if interior == 0:
        raise InvalidArgumentError("mask has no interior cells")
    return mask.hole_count / interior


def _segment_segment_dist2(p1, q1, p2, q2):
    # closest distance between two segments; Ericson's clamped parameters
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    if a == 0.0 and e == 0.0:
        return float(r @ r)
    if a == 0.0:
        t = np.clip(f / e, 0.0, 1.0)
        s = 0.0
    else:
        c = float(d1 @ r)
        if e == 0.0:
            t = 0.0
            s = np.clip(-c / a, 0.0, 1.0)
        else:
            b = float(d1 @ d2)
            denom = a * e - b * b
            s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom != 0.0 else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = np.clip(-c / a, 0.0, 1.0)
            elif t > 1.0:
                t = 1.0
                s = np.clip((b - c) / a, 0.0, 1.0)
    closest = (p1 + s * d1) - (p2 + t * d2)
    return float(closest @ closest)


def tube_overlap_count(obstacles, max_edges=1500):
    """Number of distinct tube pairs that intersect (None above `max_edges`).

    Purely diagnostic: the overlap set plays no quantitative role, but its
    size is reported with the geometry stats.
    """
    if obstacles.kind != "tubes":
        raise InvalidArgumentError("tube overlaps are defined for tube obstacles")
    edges = obstacles.edges.edges
    if edges.shape[0] > max_edges:
        return None
    P = obstacles.points.points
    reach = 2.0 * obstacles.tube_radius
    count = 0
    for a in range(edges.shape[0]):
        i, j = edges[a]
        for b in range(a + 1, edges.shape[0]):
            k, l = edges[b]
            d2 = _segment_segment_dist2(P[i], P[j], P[k], P[l])
            if d2 <= reach * reach:
                count += 1
    return count


@dataclass(frozen=True)
class DensityCheck:
    min_ratio: float
    max_ratio: float
    failed: bool
    probes: int
    radius: float


def density_ratio_check(mask, radius, probes, seed):
    """Uniform-density diagnostic for the hole set.

    For `probes` random centers x in the domain, computes
    |B(x, r) \\cap F| / (r^n |F|) from the rasterized hole cells and returns
    the extremes.  A zero minimum flags a density-condition failure.
    """
    if probes < 1:
        raise InvalidArgumentError("need at least one probe")
    hole_idx = np.argwhere(mask.flags == HOLE)
    n = mask.dim
    cell_vol = mask.dx ** n
    total = hole_idx.shape[0] * cell_vol
    if total == 0.0:
        raise DegenerateConfigurationError("hole set has zero volume; ratio undefined")
    lo = np.asarray(mask.domain.lower)
    centers = lo + (hole_idx + 0.5) * mask.dx
    tree = cKDTree(centers)
    rng = substream(seed, "density-probes")
    sides = np.asarray(mask.domain.sides)
    xs = lo + rng.random((probes, n)) * sides
    counts = np.asarray([len(tree.query_ball_point(x, radius)) for x in xs], dtype=float)
    ratios = counts * cell_vol / (radius ** n * total)
    return DensityCheck(min_ratio=float(ratios.min()), max_ratio=float(ratios.max()),
                        failed=bool(ratios.min() == 0.0), probes=probes,
                        radius=float(radius))


def mask_stats(mask, config=None, edges=None):
    """Summary record used by the geometry CLI output."""
    stats = {
        "format_version": MASK_FORMAT_VERSION,
        "dim": mask.dim,
        "shape": list(mask.shape),
        "dx": mask.dx,
        "epsilon": mask.epsilon,
        "volume_fraction": volume_fraction(mask),
        "hole_cells": mask.hole_count,
        "material_cells": mask.material_count,
        "warnings": list(mask.warnings),
    }
    if config is not None:
        stats["point_count"] = config.count
        if config.count >= 2:
            stats["min_pairwise_distance"] = min_pairwise_distance(config)
        if edges is not None:
            stats["edge_count"] = edges.count
            stats["component_count"] = len(connected_components(config, edges))
    return stats


def mask_stats_with_overlaps(mask, obstacles, config=None):
    stats = mask_stats(mask, config,
                       obstacles.edges if obstacles.kind == "tubes" else None)
    if obstacles.kind == "tubes":
        overlaps = tube_overlap_count(obstacles)
        if overlaps is not None:
            stats["tube_overlap_pairs"] = overlaps
    return stats


def save_mask(mask, path):
    """Text header plus run-length-encoded flags; round-trips bit-exactly."""
    with open(path, "w") as fh:
        _write_mask(mask, fh)


def _write_mask(mask, fh):
    fh.write(f"percohom-mask format_version {MASK_FORMAT_VERSION}\n")
    fh.write(f"dim {mask.dim}\n")
    fh.write("shape " + " ".join(str(s) for s in mask.shape) + "\n")
    fh.write("dx %.17g\n" % mask.dx)
    lo = ",".join("%.17g" % v for v in mask.domain.lower)
    hi = ",".join("%.17g" % v for v in mask.domain.upper)
    fh.write(f"domain {lo}..{hi}\n")
    fh.write("epsilon %.17g\n" % mask.epsilon)
    fh.write(f"provenance {mask.provenance}\n")
    fh.write(f"warnings {len(mask.warnings)}\n")
    for w in mask.warnings:
        fh.write(f"warning {w}\n")
    flat = mask.flags.ravel()
    tokens = []
    if flat.size:
        change = np.flatnonzero(np.diff(flat)) + 1
        starts = np.concatenate([[0], change])
        ends = np.concatenate([change, [flat.size]])
        for s, e in zip(starts, ends):
            tokens.append(f"{_FLAG_CHARS[int(flat[s])]}{e - s}")
    fh.write("rle " + " ".join(tokens) + "\n")


def load_mask(path):
    with open(path) as fh:
        return _read_mask(fh)


def _read_mask(fh):
    def expect(name):
        line = fh.readline().rstrip("\n")
        key, _, rest = line.partition(" ")
        if key != name:
            raise InvalidArgumentError(f"expected {name!r} in mask file, got {line!r}")
        return rest

    version = int(expect("percohom-mask").split()[-1])
    if version != MASK_FORMAT_VERSION:
        raise InvalidArgumentError(f"unsupported mask format version {version}")
    dim = int(expect("dim"))
    shape = tuple(int(s) for s in expect("shape").split())
    if len(shape) != dim:
        raise InvalidArgumentError("shape rank does not match dim")
    dx = float(expect("dx"))
    lo_s, hi_s = expect("domain").split("..")
    domain = Box(tuple(float(v) for v in lo_s.split(",")),
                 tuple(float(v) for v in hi_s.split(",")))
    epsilon = float(expect("epsilon"))
    provenance = expect("provenance")
    n_warn = int(expect("warnings"))
    warns = tuple(expect("warning") for _ in range(n_warn))
    rle = expect("rle").split()
    flat = np.empty(int(np.prod(shape)), dtype=np.uint8)
    pos = 0
    for tok in rle:
        flag = _CHAR_FLAGS[tok[0]]
        count = int(tok[1:])
        flat[pos:pos + count] = flag
        pos += count
    if pos != flat.size:
        raise InvalidArgumentError("rle stream does not cover the grid")
    return PerforatedMask(flags=flat.reshape(shape), dx=dx, domain=domain,
                          epsilon=epsilon, provenance=provenance, warnings=warns)


def hole_free_mask(domain, dx, provenance="hole-free"):
    shape = _grid_shape(domain, dx)
    return PerforatedMask(flags=np.zeros(shape, dtype=np.uint8), dx=float(dx),
                          domain=domain, epsilon=1.0, provenance=provenance)


@dataclass(frozen=True)
class GeometryFamily:
    """A scale-indexed family of random obstacle sets.

    kind "boolean": Poisson points of the given intensity in the blown-up
    box domain/eps, scaled back by eps (spacing ~ eps in the domain), each
    carrying a ball of final radius r0 * eps**radius_exponent.

    kind "rcm": same points; pairs at unscaled distance in [c1, c2] are
    joined and thickened into tubes of radius tube_radius (default c1/2),
    then the whole set is scaled by eps.

    kind "lattice": deterministic cell-centered lattice of balls at spacing
    lattice_spacing * eps with radius r0 * eps**radius_exponent; replicas
    coincide, which makes it the zero-variance control.
    """

    kind: str
    dim: int
    intensity: float = 1.0
    r0: float = 0.1
    radius_exponent: float = 1.0
    c1: float = 0.5
    c2: float = 1.0
    tube_radius: float = None
    lattice_spacing: float = 1.0

    def __post_init__(self):
        if self.kind not in ("boolean", "rcm", "lattice"):
            raise InvalidArgumentError(f"unknown family kind {self.kind!r}")
        if self.dim not in (2, 3):
            raise InvalidArgumentError("dimension must be 2 or 3")


def sample_family(family, eps, seed, domain):
    """One realization of the family at scale eps inside `domain`.

    Returns (obstacles, unscaled_config); the unscaled configuration (unit
    geometry, intensity as given) is kept for distributional diagnostics.
    The obstacle set is the eps-homothety of the unscaled construction, with
    ball radii adjusted to r0 * eps**radius_exponent in final coordinates.
    """
    eps = float(eps)
    if eps <= 0:
        raise InvalidArgumentError("eps must be positive")
    big_box = domain.scaled(1.0 / eps)
    if family.kind == "lattice":
        spacing = family.lattice_spacing
        axes = [np.arange(lo + spacing / 2, hi, spacing)
                for lo, hi in zip(big_box.lower, big_box.upper)]
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        config = PointConfiguration(points=pts, box=big_box,
                                    intensity=1.0 / spacing ** family.dim, seed=0)
        unscaled_r = family.r0 * eps ** (family.radius_exponent - 1.0)
        obstacles = build_balls(config, BallRadiusRule.fixed(unscaled_r))
        return scale_obstacles(obstacles, eps), config
    from .points import sample_poisson
    config = sample_poisson(big_box, family.intensity, seed)
    if family.kind == "boolean":
        if config.count == 0:
            obstacles = ObstacleSet(kind="balls", points=config,
                                    ball_radii=np.empty(0))
        else:
            unscaled_r = family.r0 * eps ** (family.radius_exponent - 1.0)
            obstacles = build_balls(config, BallRadiusRule.fixed(unscaled_r))
        return scale_obstacles(obstacles, eps), config
    g = ConnectivityFunction.annulus(family.c1, family.c2)
    obstacles = rcm_obstacles(config, g, seed=seed, tube_radius=family.tube_radius)
    return scale_obstacles(obstacles, eps), config
