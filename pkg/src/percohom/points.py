"""Homogeneous Poisson point processes in axis-aligned boxes.

Sampling is exact: the total count is Poisson(intensity * volume) and, given
the count, points are i.i.d. uniform in the box.  All coordinates live in the
half-open product [lower, upper), so partitioning a box into cells gives
exhaustive, disjoint counts.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .rng import substream

FORMAT_VERSION = 1


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with positive volume, dimension 2 or 3."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(hi):
            raise InvalidArgumentError("lower and upper must have the same length")
        if len(lo) not in (2, 3):
            raise InvalidArgumentError(f"dimension must be 2 or 3, got {len(lo)}")
        if not all(np.isfinite(lo)) or not all(np.isfinite(hi)):
            raise InvalidArgumentError("box corners must be finite")
        if any(h <= l for l, h in zip(lo, hi)):
            raise InvalidArgumentError(f"degenerate box: lower={lo}, upper={hi}")

    @property
    def dim(self):
        return len(self.lower)

    @property
    def sides(self):
        return tuple(h - l for l, h in zip(self.lower, self.upper))

    @property
    def volume(self):
        return float(np.prod(self.sides))

    def contains(self, pts):
        """Half-open membership test, vectorized over rows of `pts`."""
        pts = np.asarray(pts, dtype=float)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.all((pts >= lo) & (pts < hi), axis=-1)

    def translated(self, shift):
        shift = tuple(float(s) for s in shift)
        return Box(tuple(l + s for l, s in zip(self.lower, shift)),
                   tuple(h + s for h, s in zip(self.upper, shift)))

    def scaled(self, factor):
        f = float(factor)
        return Box(tuple(l * f for l in self.lower), tuple(h * f for h in self.upper))

    @staticmethod
    def unit(dim):
        return Box((0.0,) * dim, (1.0,) * dim)

    @staticmethod
    def cube(side, dim, origin=None):
        origin = (0.0,) * dim if origin is None else tuple(origin)
        return Box(origin, tuple(o + float(side) for o in origin))


@dataclass(frozen=True)
class PointConfiguration:
    """A finite realization of a point process, with its generating seed.

    `points` has shape (count, dim) and is read-only; regenerating with the
    same (box, intensity, seed) reproduces it bit for bit.
    """

    points: np.ndarray
    box: Box
    intensity: float
    seed: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, self.box.dim)
        if pts.size and not np.all(np.isfinite(pts)):
            raise InvalidArgumentError("point coordinates must be finite")
        lo = np.asarray(self.box.lower)
        hi = np.asarray(self.box.upper)
        if pts.size and not np.all((pts >= lo) & (pts <= hi)):
            raise InvalidArgumentError("points must lie inside the box")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if not np.isfinite(self.intensity) or self.intensity < 0:
            raise InvalidArgumentError(f"intensity must be finite and >= 0, got {self.intensity}")

    @property
    def count(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.box.dim


def sample_poisson(box, intensity, seed):
    """Sample a homogeneous Poisson process of the given intensity in `box`."""
    if not np.isfinite(intensity) or intensity < 0:
        raise InvalidArgumentError(f"intensity must be finite and >= 0, got {intensity}")
    rng = substream(seed)
    mean = intensity * box.volume
    count = int(rng.poisson(mean)) if mean > 0 else 0
    lo = np.asarray(box.lower)
    sides = np.asarray(box.sides)
    pts = lo + rng.random((count, box.dim)) * sides
    return PointConfiguration(points=pts, box=box, intensity=float(intensity), seed=int(seed))


def translate(config, shift):
    """Shift all points and the box by the same vector."""
    shift = np.asarray([float(s) for s in shift])
    if shift.shape != (config.dim,):
        raise InvalidArgumentError("shift length must match the dimension")
    return PointConfiguration(points=config.points + shift,
                              box=config.box.translated(shift),
                              intensity=config.intensity,
                              seed=config.seed)


def scale(config, factor):
    """Homothety by `factor` > 0; the stored intensity becomes lambda / factor^n."""
    factor = float(factor)
    if not np.isfinite(factor) or factor <= 0:
        raise InvalidArgumentError(f"scale factor must be positive, got {factor}")
    return PointConfiguration(points=config.points * factor,
                              box=config.box.scaled(factor),
                              intensity=config.intensity / factor ** config.dim,
                              seed=config.seed)


def count_in(config, region):
    """Number of points in `region` (closed lower faces, open upper faces)."""
    lo = np.asarray(region.lower)
    hi = np.asarray(region.upper)
    blo = np.asarray(config.box.lower)
    bhi = np.asarray(config.box.upper)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(bhi - blo))))
    if np.any(lo < blo - tol) or np.any(hi > bhi + tol):
        raise InvalidArgumentError("region must be contained in the configuration box")
    if config.count == 0:
        return 0
    return int(np.count_nonzero(np.all((config.points >= lo) & (config.points < hi), axis=1)))


def empty_cell_frequency(config, cell_size):
    """Fraction of grid cells of side `cell_size` containing zero points.

    The box must split into an integer grid of such cells (relative
    tolerance 1e-9).
    """
    cell_size = float(cell_size)
    if cell_size <= 0:
        raise InvalidArgumentError("cell_size must be positive")
    counts_per_axis = []
    for side in config.box.sides:
        m = side / cell_size
        if abs(m - round(m)) > 1e-9 * max(1.0, abs(m)):
            raise InvalidArgumentError(
                f"box side {side} is not an integer multiple of cell_size {cell_size}")
        counts_per_axis.append(int(round(m)))
    shape = tuple(counts_per_axis)
    total_cells = int(np.prod(shape))
    if config.count == 0:
        return 1.0
    lo = np.asarray(config.box.lower)
    idx = np.floor((config.points - lo) / cell_size).astype(np.int64)
    idx = np.minimum(idx, np.asarray(shape) - 1)  # guard points landing on the top face
    flat = np.ravel_multi_index(tuple(idx.T), shape)
    occupied = np.unique(flat).size
    return float(total_cells - occupied) / total_cells


def save_points(config, path):
    """Line-oriented text format; coordinates at 17 significant digits."""
    with open(path, "w") as fh:
        lo = ",".join("%.17g" % v for v in config.box.lower)
        hi = ",".join("%.17g" % v for v in config.box.upper)
        fh.write(f"dim {config.dim}; box {lo}..{hi}; "
                 f"intensity %.17g; seed {config.seed}\n" % config.intensity)
        for p in config.points:
            fh.write(" ".join("%.17g" % v for v in p) + "\n")


def load_points(path):
    with open(path) as fh:
        header = fh.readline().strip()
        parts = [p.strip() for p in header.split(";")]
        dim = int(parts[0].split()[1])
        lo_s, hi_s = parts[1].split()[1].split("..")
        box = Box(tuple(float(v) for v in lo_s.split(",")),
                  tuple(float(v) for v in hi_s.split(",")))
        intensity = float(parts[2].split()[1])
        seed = int(parts[3].split()[1])
        pts = [[float(v) for v in line.split()] for line in fh if line.strip()]
    pts = np.asarray(pts, dtype=float).reshape(-1, dim)
    return PointConfiguration(points=pts, box=box, intensity=intensity, seed=seed)
