"""Variational capacity functionals on rasterized obstacle sets.

Three related quadratic minimizations, kept strictly separate:

* `newton_capacity`: the condenser energy of an obstacle held at potential 1
  inside a grounded outer cube (3D only; the truncation of the whole-space
  problem).
* `local_capacity`: the Dirichlet energy of the cheapest field equal to 1 on
  the boundary of a cube and 0 on the obstacle cells inside it.  This is the
  absorption-type functional whose volume density estimates the effective
  extra reaction coefficient.
* `penalized_functional` / `conductivity_tensor`: the conduction-type
  functional with affine data (x - z, xi) on the cube boundary, an
  h^(-2-gamma) penalty pinning the field to that affine profile, and
  insulating (no-flux) obstacle cells.  On a hole-free cube its minimizer is
  the affine profile itself, exactly, so the tensor reduces to h^n times the
  identity.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidArgumentError, UnsupportedDimensionError
from .geometry import (EXTERIOR, HOLE, MATERIAL, Box, PerforatedMask,
                       rasterize, sample_family)
from .rng import substream_seed
from .solver import (SolveReport, cg_solve, make_operator, operator_diagonal,
                     shifted)


@dataclass(frozen=True)
class CapacityEstimate:
    value: float
    dx: float
    center: tuple
    h: float
    epsilon: float = 1.0
    seed: int = 0
    report: SolveReport = None
    refinement_increments: tuple = ()

    def __post_init__(self):
        if self.value < 0:
            raise InvalidArgumentError("capacity must be nonnegative")


@dataclass(frozen=True)
class ConductivityTensor:
    entries: np.ndarray
    gamma: float
    center: tuple
    h: float
    epsilon: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        scale = max(float(np.abs(a).max()), 1e-300)
        if np.abs(a - a.T).max() > 1e-10 * scale:
            raise InvalidArgumentError("conductivity tensor must be symmetric")
        a = 0.5 * (a + a.T)
        eig = np.linalg.eigvalsh(a)
        if eig.min() < -1e-10 * self.h ** a.shape[0]:
            raise InvalidArgumentError(f"tensor not positive semidefinite: {eig}")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    def quadratic_form(self, xi):
        xi = np.asarray(xi, dtype=float)
        return float(xi @ self.entries @ xi)


# ---------------------------------------------------------------------------
# Newton capacity (condenser with grounded cubic truncation)

def newton_capacity(obstacles, outer_radius, dx, tol=1e-7, max_iter=None):
    """Energy of the equilibrium potential: 1 on the obstacle cells, 0 on the
    boundary of the cube [-R, R]^3.  Returns (value, SolveReport)."""
    if obstacles.dim != 3:
        raise UnsupportedDimensionError(
            "Newton capacity requires dimension 3; the two-dimensional "
            "analogue is logarithmic and out of scope")
    R = float(outer_radius)
    box = Box((-R,) * 3, (R,) * 3)
    emask = rasterize(obstacles, box, dx)
    electrode = emask.flags == HOLE
    if not electrode.any():
        raise InvalidArgumentError(
            "obstacle covers no cell center at this resolution; refine dx")
    for axis in range(3):
        for side in (0, -1):
            sl = [slice(None)] * 3
            sl[axis] = side
            if electrode[tuple(sl)].any():
                raise InvalidArgumentError("obstacle must be strictly inside the outer box")
    work = PerforatedMask(flags=np.where(electrode, HOLE, MATERIAL).astype(np.uint8),
                          dx=dx, domain=box)
    apply_op = make_operator(work, 0.0)
    diag = operator_diagonal(work, 0.0)
    rhs = np.zeros(electrode.shape)
    e_float = electrode.astype(float)
    for axis in range(3):
        for step in (1, -1):
            rhs += shifted(e_float, axis, step)
    rhs = np.where(electrode, 0.0, rhs) / dx ** 2
    if max_iter is None:
        max_iter = 40 * max(work.shape)
    u, report = cg_solve(apply_op, rhs, tol=tol, max_iter=max_iter, diag=diag)
    v = np.where(electrode, 1.0, u)
    return _drop_energy(v, dx), report


def _drop_energy(v, dx):
    """Dirichlet energy of a full-grid potential with value 0 at the outer faces."""
    n = v.ndim
    w = dx ** n
    energy = 0.0
    for axis in range(n):
        diff = np.diff(v, axis=axis)
        energy += np.sum(diff * diff) / dx ** 2 * w
        for side in (0, -1):
            sl = [slice(None)] * n
            sl[axis] = side
            vb = v[tuple(sl)]
            energy += np.sum((2.0 * vb / dx) ** 2) * w / 2.0
    return float(energy)


# ---------------------------------------------------------------------------
# Local capacity on a cube window of a mask

def _window(mask, center, h):
    """Snap the cube of side h at `center` to whole cells; returns
    (slices, effective center, effective side)."""
    dx = mask.dx
    m = int(round(h / dx))
    if m < 1:
        raise InvalidArgumentError(f"cube side {h} is below one cell")
    slices = []
    eff_center = []
    for d in range(mask.dim):
        i0 = int(round((center[d] - h / 2.0 - mask.domain.lower[d]) / dx))
        if i0 < 0 or i0 + m > mask.shape[d]:
            raise InvalidArgumentError("cube must lie inside the mask domain")
        slices.append(slice(i0, i0 + m))
        eff_center.append(mask.domain.lower[d] + (i0 + m / 2.0) * dx)
    return tuple(slices), tuple(eff_center), m * dx


def local_capacity(mask, center, h, boundary_value=1.0, tol=1e-8, max_iter=None):
    """Capacity-type energy of the cube window; zero iff no obstacle cells
    intersect the cube.  See `local_capacity_minimizer` for the field."""
    est, _, _ = local_capacity_minimizer(mask, center, h,
                                         boundary_value=boundary_value,
                                         tol=tol, max_iter=max_iter)
    return est


def local_capacity_minimizer(mask, center, h, boundary_value=1.0, tol=1e-8,
                             max_iter=None):
    """Returns (CapacityEstimate, window slices, minimizer on the window).

    The minimizer equals `boundary_value` at the cube faces (data imposed at
    half-cell distance), 0 on hole cells, and is discrete harmonic on the
    material cells in between.
    """
    slices, _, _ = _window(mask, center, h)
    est, vals = capacity_minimizer_on_window(mask, slices,
                                             boundary_value=boundary_value,
                                             tol=tol, max_iter=max_iter)
    return est, slices, vals


def capacity_minimizer_on_window(mask, slices, boundary_value=1.0, tol=1e-8,
                                 max_iter=None):
    """Local capacity on an explicit index window of the mask.

    The window must be a cube in cell counts; returns (CapacityEstimate,
    minimizer values on the window).
    """
    sub = mask.flags[slices]
    dx = mask.dx
    # windows snapped from partitions may be off-cubic by a cell; use the
    # volume-equivalent side for the h bookkeeping
    eff_h = float(np.prod([s * dx for s in sub.shape])) ** (1.0 / mask.dim)
    eff_center = tuple(mask.domain.lower[d] + (slices[d].start + sub.shape[d] / 2.0) * dx
                       for d in range(mask.dim))
    g = float(boundary_value)
    if not np.any(sub != MATERIAL):
        vals = np.full(sub.shape, g)
        est = CapacityEstimate(value=0.0, dx=dx, center=eff_center, h=eff_h,
                               epsilon=mask.epsilon,
                               report=SolveReport(0, 0.0, 0.0))
        return est, vals
    subdomain = Box(tuple(c - eff_h / 2 for c in eff_center),
                    tuple(c + eff_h / 2 for c in eff_center))
    submask = PerforatedMask(flags=sub, dx=dx, domain=subdomain,
                             epsilon=mask.epsilon)
    apply_op = make_operator(submask, 0.0)
    diag = operator_diagonal(submask, 0.0)
    border = _border_face_count(sub.shape)
    rhs = np.where(submask.material, 2.0 * g * border / dx ** 2, 0.0)
    if max_iter is None:
        max_iter = 40 * max(sub.shape)
    u, report = cg_solve(apply_op, rhs, tol=tol, max_iter=max_iter, diag=diag)
    vals = np.where(sub == MATERIAL, u, 0.0)
    value = _window_energy(vals, sub, dx, g)
    est = CapacityEstimate(value=value, dx=dx, center=eff_center, h=eff_h,
                           epsilon=mask.epsilon, report=report)
    return est, vals


def _border_face_count(shape):
    count = np.zeros(shape)
    for axis in range(len(shape)):
        for side in (0, -1):
            sl = [slice(None)] * len(shape)
            sl[axis] = side
            count[tuple(sl)] += 1.0
    return count


def _window_energy(v, flags, dx, g):
    """Face energy on a window with Dirichlet data g at the window border."""
    n = v.ndim
    w = dx ** n
    energy = 0.0
    for axis in range(n):
        diff = np.diff(v, axis=axis)
        energy += np.sum(diff * diff) / dx ** 2 * w
        for side in (0, -1):
            sl = [slice(None)] * n
            sl[axis] = side
            vb = v[tuple(sl)]
            fb = flags[tuple(sl)]
            interior = fb != EXTERIOR
            energy += np.sum((2.0 * (g - vb[interior]) / dx) ** 2) * w / 2.0
    return float(energy)


def local_capacity_refined(mask_builder, center, h, dx_list, **kwargs):
    """Capacity at successively finer grids; records the value increments.

    `mask_builder(dx)` must return the mask of the same geometry at grid
    spacing dx.  Used to exhibit the shrinking refinement increments.
    """
    values = []
    for dx in dx_list:
        est = local_capacity(mask_builder(dx), center, h, **kwargs)
        values.append(est.value)
    increments = tuple(abs(b - a) for a, b in zip(values, values[1:]))
    final = local_capacity(mask_builder(dx_list[-1]), center, h, **kwargs)
    return CapacityEstimate(value=final.value, dx=dx_list[-1], center=final.center,
                            h=final.h, epsilon=final.epsilon, report=final.report,
                            refinement_increments=increments)


# ---------------------------------------------------------------------------
# Conduction-type functional with affine data and penalty

def _affine_cell_problem(mask, center, h, xi, penalty, tol=1e-10, max_iter=None):
    """Minimize sum_MM (dv/dx)^2 + penalty*|v - l|^2 on the material cells of
    the cube window, with v = l := (x - z, xi) on the window boundary and
    no-flux (insulating) obstacle cells.

    Returns (value, window slices, minimizer values, context) where context
    carries what the cross-energy needs.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (mask.dim,):
        raise InvalidArgumentError("direction must match the dimension")
    if not np.all(np.isfinite(xi)):
        raise InvalidArgumentError("direction must be finite")
    slices, eff_center, eff_h = _window(mask, center, h)
    sub = mask.flags[slices]
    mat = sub == MATERIAL
    dx = mask.dx
    n = mask.dim
    # absolute cell centers of the window
    axes = [mask.domain.lower[d] + (np.arange(slices[d].start, slices[d].stop) + 0.5) * dx
            for d in range(n)]
    grids = np.meshgrid(*axes, indexing="ij")
    ell = sum((grids[d] - eff_center[d]) * xi[d] for d in range(n))

    mat_f = mat.astype(float)
    mm_faces = np.zeros(sub.shape)
    for axis in range(n):
        for step in (1, -1):
            mm_faces += shifted(mat_f, axis, step)
    mm_faces *= mat_f
    border = _border_face_count(sub.shape) * mat_f
    diag_arr = mm_faces / dx ** 2 + 2.0 * border / dx ** 2 + penalty
    # material pockets sealed off from the border have nothing anchoring them
    # when penalty == 0; they contribute zero energy with any constant value
    free = mat.copy()
    if penalty == 0.0:
        structure = ndimage.generate_binary_structure(n, 1)
        labels, n_lab = ndimage.label(mat, structure=structure)
        touching = set()
        for axis in range(n):
            for side in (0, -1):
                sl = [slice(None)] * n
                sl[axis] = side
                touching.update(np.unique(labels[tuple(sl)]))
        touching.discard(0)
        keep = np.isin(labels, sorted(touching))
        free = mat & keep

    free_f = free.astype(float)

    def apply_op(u):
        out = diag_arr * u
        for axis in range(n):
            for step in (1, -1):
                out -= shifted(u, axis, step) * shifted(free_f, axis, step) / dx ** 2
        return np.where(free, out, 0.0)

    rhs = penalty * ell * mat_f
    for axis in range(n):
        for step in (1, -1):
            sl = [slice(None)] * n
            sl[axis] = -1 if step == 1 else 0
            face_ell = np.zeros(sub.shape)
            face_ell[tuple(sl)] = (ell[tuple(sl)]
                                   + 0.5 * dx * step * xi[axis])
            rhs += 2.0 * face_ell / dx ** 2
    rhs = np.where(free, rhs, 0.0)
    if max_iter is None:
        max_iter = 40 * max(sub.shape)
    diag_sys = np.where(free, diag_arr, 1.0)
    u, report = cg_solve(apply_op, rhs, tol=tol, max_iter=max_iter, diag=diag_sys)
    u = np.where(free, u, 0.0)
    ctx = {"slices": slices, "center": eff_center, "h": eff_h, "dx": dx,
           "mat": mat, "free": free, "penalty": penalty, "xi": xi, "ell": ell,
           "report": report}
    value = _affine_cross_energy(u, ctx, u, ctx)
    return value, slices, u, ctx


def _affine_cross_energy(u1, ctx1, u2, ctx2):
    """Symmetric bilinear form shared by P(xi) and the tensor entries."""
    dx = ctx1["dx"]
    n = u1.ndim
    w = dx ** n
    mat = ctx1["mat"]
    free_f = ctx1["free"].astype(float)
    energy = 0.0
    for axis in range(n):
        fa = [slice(None)] * n
        fb = [slice(None)] * n
        fa[axis] = slice(None, -1)
        fb[axis] = slice(1, None)
        mm = ctx1["free"][tuple(fa)] & ctx1["free"][tuple(fb)]
        d1 = (u1[tuple(fb)] - u1[tuple(fa)])[mm]
        d2 = (u2[tuple(fb)] - u2[tuple(fa)])[mm]
        energy += np.sum(d1 * d2) / dx ** 2 * w
        for side, step in ((0, -1), (-1, 1)):
            sl = [slice(None)] * n
            sl[axis] = side
            m_here = ctx1["free"][tuple(sl)]
            f1 = (ctx1["ell"][tuple(sl)] + 0.5 * dx * step * ctx1["xi"][axis])[m_here]
            f2 = (ctx2["ell"][tuple(sl)] + 0.5 * dx * step * ctx2["xi"][axis])[m_here]
            v1 = u1[tuple(sl)][m_here]
            v2 = u2[tuple(sl)][m_here]
            energy += np.sum(2.0 * (f1 - v1) * (f2 - v2)) * dx ** (n - 2)
    p = ctx1["penalty"]
    if p > 0.0:
        r1 = (u1 - ctx1["ell"])[mat]
        r2 = (u2 - ctx2["ell"])[mat]
        energy += p * np.sum(r1 * r2) * w
    return float(energy)


def penalized_functional(mask, z, h, gamma, xi, tol=1e-10):
    """The conduction characteristic P(xi) and its minimizer field."""
    if not (0.0 < gamma < 2.0):
        raise InvalidArgumentError(f"penalty exponent must be in (0, 2), got {gamma}")
    slices, eff_center, eff_h = _window(mask, z, h)
    penalty = eff_h ** (-2.0 - gamma)
    value, slices, u, ctx = _affine_cell_problem(mask, z, h, xi, penalty, tol=tol)
    sub = mask.flags[slices]
    subdomain = Box(tuple(c - eff_h / 2 for c in eff_center),
                    tuple(c + eff_h / 2 for c in eff_center))
    submask = PerforatedMask(flags=sub, dx=mask.dx, domain=subdomain,
                             epsilon=mask.epsilon)
    from .solver import GridField
    minimizer = GridField(submask, np.where(submask.material, u, 0.0))
    return value, minimizer


def conductivity_tensor(mask, z, h, gamma, tol=1e-10):
    """Solve the n coordinate-direction problems and assemble the tensor by
    cross energies; symmetric positive semidefinite by construction."""
    if not (0.0 < gamma < 2.0):
        raise InvalidArgumentError(f"penalty exponent must be in (0, 2), got {gamma}")
    n = mask.dim
    slices, eff_center, eff_h = _window(mask, z, h)
    penalty = eff_h ** (-2.0 - gamma)
    sols = []
    for i in range(n):
        xi = np.zeros(n)
        xi[i] = 1.0
        _, _, u, ctx = _affine_cell_problem(mask, z, h, xi, penalty, tol=tol)
        sols.append((u, ctx))
    a = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            a[i, j] = a[j, i] = _affine_cross_energy(sols[i][0], sols[i][1],
                                                     sols[j][0], sols[j][1])
    return ConductivityTensor(entries=0.5 * (a + a.T), gamma=float(gamma),
                              center=eff_center, h=eff_h, epsilon=mask.epsilon)


def affine_dirichlet_energy(mask, z, h, xi, tol=1e-10):
    """Minimum Dirichlet energy with affine data (x - z, xi) on the cube
    boundary and insulating obstacles; the penalty-free conduction value."""
    value, _, _, _ = _affine_cell_problem(mask, z, h, xi, 0.0, tol=tol)
    return value


# ---------------------------------------------------------------------------
# Effective absorption constant from the local capacity density

@dataclass(frozen=True)
class StrangeTermRow:
    h: float
    eps: float
    replica: int
    seed: int
    cap: float
    cap_per_hn: float
    iterations: int
    dx: float


@dataclass(frozen=True)
class StrangeTermResult:
    rows: tuple
    c: float
    spread: float
    eps_then_h: tuple   # (h, mean cap/h^n at the smallest eps) per h, h decreasing
    h_then_eps: tuple   # (eps, mean cap/h^n at the smallest h) per eps, eps decreasing
    limsup_bound: float = None
    limsup_flagged: bool = False


def strange_term(family, h_list, eps_list, replicas, master_seed, domain,
                 cells_per_h=32, center=None, limsup_bound=None, tol=1e-8,
                 precomputed=None):
    """Table of local capacity densities cap(x, h, eps) / h^n and the
    iterated-limit estimate of the effective absorption constant.

    The geometry realization for a given (eps, replica) is shared across all
    h (common random numbers).  `precomputed` may map (eps_index, replica) to
    (ObstacleSet, seed) pairs to reuse realizations built elsewhere.  Scale
    ordering is enforced: every eps must satisfy eps < h/4 for every h in use.
    """
    h_list = sorted(float(h) for h in h_list)[::-1]
    eps_list = sorted(float(e) for e in eps_list)[::-1]
    if len(h_list) < 2:
        raise InvalidArgumentError("need at least 2 cube sizes h")
    if len(eps_list) < 3:
        raise InvalidArgumentError("need at least 3 scales eps")
    if replicas < 1:
        raise InvalidArgumentError("need at least 1 replica")
    for h in h_list:
        for eps in eps_list:
            if not eps < h / 4.0:
                raise InvalidArgumentError(
                    f"scale ordering violated: eps={eps} is not < h/4 = {h / 4.0}")
    if center is None:
        center = tuple(0.5 * (lo + hi) for lo, hi in zip(domain.lower, domain.upper))
    for h in h_list:
        half = h / 2.0
        for d in range(domain.dim):
            if center[d] - half < domain.lower[d] - 1e-12 or \
               center[d] + half > domain.upper[d] + 1e-12:
                raise InvalidArgumentError("capacity cube escapes the domain")
    rows = []
    n = domain.dim
    for ie, eps in enumerate(eps_list):
        for k in range(replicas):
            if precomputed is not None and (ie, k) in precomputed:
                obstacles, seed = precomputed[(ie, k)]
            else:
                seed = substream_seed(master_seed, "strange-term", ie, k)
                obstacles, _ = sample_family(family, eps, seed, domain)
            for h in h_list:
                dx_local = h / cells_per_h
                cube = Box(tuple(c - h / 2 for c in center),
                           tuple(c + h / 2 for c in center))
                cube_mask = rasterize(obstacles, cube, dx_local)
                est = local_capacity(cube_mask, center, h, tol=tol)
                rows.append(StrangeTermRow(
                    h=est.h, eps=eps, replica=k, seed=seed, cap=est.value,
                    cap_per_hn=est.value / est.h ** n,
                    iterations=est.report.iterations if est.report else 0,
                    dx=dx_local))
    h_min = min(r.h for r in rows)
    eps_min = eps_list[-1]
    at_corner = [r.cap_per_hn for r in rows
                 if r.h == h_min and r.eps == eps_min]
    c = float(np.mean(at_corner))
    spread = float(np.std(at_corner))
    eps_then_h = tuple(
        (h, float(np.mean([r.cap_per_hn for r in rows
                           if abs(r.h / h - 1) < 1e-9 and r.eps == eps_min])))
        for h in sorted({r.h for r in rows})[::-1])
    h_then_eps = tuple(
        (eps, float(np.mean([r.cap_per_hn for r in rows
                             if r.eps == eps and r.h == h_min])))
        for eps in eps_list)
    flagged = False
    if limsup_bound is not None:
        flagged = any(r.cap_per_hn >= limsup_bound for r in rows if r.eps == eps_min)
    return StrangeTermResult(rows=tuple(rows), c=c, spread=spread,
                             eps_then_h=eps_then_h, h_then_eps=h_then_eps,
                             limsup_bound=limsup_bound, limsup_flagged=flagged)


def boolean_capacity_constant(obstacles, domain):
    """Capacity sum of the balls strongly contained in the domain, per unit
    volume: sum of 4*pi*r over balls whose distance to the boundary is at
    least twice their radius, divided by |domain|.  3D only."""
    if obstacles.kind != "balls":
        raise InvalidArgumentError("capacity constant is defined for ball obstacles")
    if obstacles.dim != 3:
        raise UnsupportedDimensionError("capacity constant requires dimension 3")
    total = 0.0
    counted = 0
    lo = np.asarray(domain.lower)
    hi = np.asarray(domain.upper)
    for c, r in zip(obstacles.points.points, obstacles.ball_radii):
        dist = float(min(np.min(c - lo), np.min(hi - c)))
        if dist >= 2.0 * r:
            total += 4.0 * math.pi * r
            counted += 1
    return total / domain.volume, counted
