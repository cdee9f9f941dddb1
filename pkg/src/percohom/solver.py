"""Finite differences on perforated masks.

Discretization, fixed once and used consistently everywhere:

* cell-centered uniform grid, 5-point (2D) / 7-point (3D) stencil;
* hole cells are eliminated with value 0: a face between a material cell and
  a hole contributes the one-sided difference (0 - u)/dx;
* the domain boundary carries Dirichlet data at the face itself, i.e. at half
  a cell distance, which keeps the scheme second order in L2; cells flagged
  exterior behave like the domain boundary;
* the sign convention is  lap(u) - reaction*u = f  with reaction >= 0; the
  assembled SPD system is  (-lap_h + reaction) u = -f.

The discrete energy functional
    gamma(u) = sum_faces (du/dx)^2 w + reaction*||u||^2 + 2<f, u>
uses exactly the face terms whose Euler-Lagrange equations are the stencil
above (boundary faces enter with weight dx^n/2 and gradient over dx/2), so
the computed solution is the exact minimizer of gamma over fields vanishing
on holes, up to the CG tolerance.
"""

import time
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, SolverFailureError
from .expressions import evaluate_on_mask
from .geometry import EXTERIOR, MATERIAL, PerforatedMask, hole_free_mask


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_rel_residual: float
    wall_time: float
    converged: bool = True


@dataclass(frozen=True)
class GridField:
    """Scalar values on the material cells of a mask, extended by zero.

    `values` is stored on the full grid with exact zeros on hole and exterior
    cells, so integrals over the domain and over the material region agree by
    construction.
    """

    mask: PerforatedMask
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.mask.shape:
            raise InvalidArgumentError("values shape does not match the mask grid")
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("field values must be finite")
        v = np.where(self.mask.material, v, 0.0)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @staticmethod
    def zeros(mask):
        return GridField(mask, np.zeros(mask.shape))

    @staticmethod
    def constant(mask, value):
        return GridField(mask, np.full(mask.shape, float(value)))

    @staticmethod
    def from_expression(mask, expr_text):
        return GridField(mask, evaluate_on_mask(expr_text, mask))


def shifted(a, axis, step, fill=0.0):
    """Neighbor values in the +step direction along `axis`, fill at the edge."""
    out = np.full_like(a, fill)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if step == 1:
        src[axis] = slice(1, None)
        dst[axis] = slice(None, -1)
    else:
        src[axis] = slice(None, -1)
        dst[axis] = slice(1, None)
    out[tuple(dst)] = a[tuple(src)]
    return out


def exterior_face_count(mask):
    """Per-cell count of faces whose far side is exterior or off-grid."""
    extra = np.zeros(mask.shape)
    for axis in range(mask.dim):
        for step in (1, -1):
            nb = shifted(mask.flags, axis, step, fill=EXTERIOR)
            extra += nb == EXTERIOR
    return extra


def make_operator(mask, reaction):
    """Matrix-free application of (-lap_h + reaction) on material cells."""
    if reaction < 0:
        raise InvalidArgumentError("reaction coefficient must be >= 0")
    mat = mask.material
    inv_dx2 = 1.0 / mask.dx ** 2
    diag_faces = 2 * mask.dim + exterior_face_count(mask)

    def apply(u):
        out = diag_faces * u
        for axis in range(mask.dim):
            out -= shifted(u, axis, 1) + shifted(u, axis, -1)
        out *= inv_dx2
        out += reaction * u
        return np.where(mat, out, 0.0)

    return apply


def operator_diagonal(mask, reaction):
    diag = (2 * mask.dim + exterior_face_count(mask)) / mask.dx ** 2 + reaction
    return np.where(mask.material, diag, 1.0)


def cg_solve(apply_op, b, tol=1e-8, max_iter=None, diag=None, x0=None):
    """Preconditioned conjugate gradients with a fixed summation order.

    All reductions go through np.sum (pairwise, single-threaded), so the
    iteration path and result are bit-stable across thread counts.  Returns
    (solution, SolveReport); raises SolverFailureError with the residual
    history on non-convergence.
    """
    t0 = time.perf_counter()
    b_norm = np.sqrt(np.sum(b * b))
    if b_norm == 0.0:
        return np.zeros_like(b), SolveReport(0, 0.0, time.perf_counter() - t0)
    if max_iter is None:
        max_iter = 20 * max(b.shape)
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - apply_op(x)
    z = r / diag if diag is not None else r
    p = z.copy()
    rz = np.sum(r * z)
    history = [float(np.sqrt(np.sum(r * r)) / b_norm)]
    if history[-1] <= tol:
        return x, SolveReport(0, history[-1], time.perf_counter() - t0)
    for k in range(1, max_iter + 1):
        Ap = apply_op(p)
        pAp = np.sum(p * Ap)
        if pAp <= 0.0:
            raise SolverFailureError(f"CG breakdown at iteration {k}: <Ap, p> = {pAp}",
                                     history)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rel = float(np.sqrt(np.sum(r * r)) / b_norm)
        history.append(rel)
        if rel <= tol:
            return x, SolveReport(k, rel, time.perf_counter() - t0)
        z = r / diag if diag is not None else r
        rz_new = np.sum(r * z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverFailureError(
        f"CG did not reach tol={tol} in {max_iter} iterations "
        f"(residual {history[-1]:.3e})", history)


def as_source(f, mask):
    """Accept a GridField, an expression string, a scalar, or a full array."""
    if isinstance(f, GridField):
        if not f.mask.same_grid(mask):
            raise InvalidArgumentError("source field lives on a different grid")
        return f.values
    if isinstance(f, str):
        return evaluate_on_mask(f, mask)
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 0:
        return np.full(mask.shape, float(arr))
    if arr.shape != mask.shape:
        raise InvalidArgumentError("source array shape does not match the grid")
    return arr


def solve_dirichlet_perforated(mask, reaction, f, tol=1e-8, max_iter=None):
    """Solve lap(u) - reaction*u = f on material cells, u = 0 on holes and on
    the domain boundary.  Returns (GridField, SolveReport)."""
    if mask.material_count == 0:
        raise InvalidArgumentError("mask has no material cells")
    if tol <= 0:
        raise InvalidArgumentError("tol must be positive")
    source = as_source(f, mask)
    b = np.where(mask.material, -source, 0.0)
    apply_op = make_operator(mask, reaction)
    diag = operator_diagonal(mask, reaction)
    if max_iter is None:
        max_iter = 20 * max(mask.shape)
    x, report = cg_solve(apply_op, b, tol=tol, max_iter=max_iter, diag=diag)
    return GridField(mask, x), report


def solve_homogenized(domain, reaction, strange_c, f, dx, tol=1e-8, max_iter=None):
    """Solve lap(u) - (reaction + c) u = f on the unperforated grid.

    Deliberately routed through the perforated solver on a hole-free mask so
    that c = 0 reproduces it bit for bit.
    """
    if strange_c < 0:
        raise InvalidArgumentError("the effective absorption constant must be >= 0")
    mask = hole_free_mask(domain, dx)
    return solve_dirichlet_perforated(mask, reaction + strange_c, f,
                                      tol=tol, max_iter=max_iter)


def _interior_volume(mask):
    return mask.flags != EXTERIOR


def l2_norm(u):
    v = np.where(_interior_volume(u.mask), u.values, 0.0)
    return float(np.sqrt(np.sum(v * v) * u.mask.dx ** u.mask.dim))


def l2_distance(u, v):
    """L2 distance over the domain; holes contribute through the zero extension."""
    if not u.mask.same_grid(v.mask):
        raise InvalidArgumentError("fields live on different grids")
    d = u.values - v.values
    d = np.where(_interior_volume(u.mask), d, 0.0)
    return float(np.sqrt(np.sum(d * d) * u.mask.dx ** u.mask.dim))


def gradient_energy(u):
    """sum over faces of (du/dx)^2 with the scheme's face weights.

    Interior faces (including faces into holes, whose stored value is an
    exact zero) carry weight dx^n; faces against the domain boundary or an
    exterior cell carry the half-cell weight with gradient over dx/2.
    """
    mask = u.mask
    v = u.values
    flags = mask.flags
    dx = mask.dx
    n = mask.dim
    w_full = dx ** n
    energy = 0.0
    for axis in range(n):
        lo = [slice(None)] * n
        hi = [slice(None)] * n
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        a, bvals = v[tuple(lo)], v[tuple(hi)]
        fa, fb = flags[tuple(lo)], flags[tuple(hi)]
        both_interior = (fa != EXTERIOR) & (fb != EXTERIOR)
        diff = bvals - a
        energy += np.sum(diff[both_interior] ** 2) / dx ** 2 * w_full
        # material against an exterior-flagged cell: boundary at the face
        mx = ((fa == MATERIAL) & (fb == EXTERIOR)) | ((fa == EXTERIOR) & (fb == MATERIAL))
        if np.any(mx):
            um = np.where(fa == MATERIAL, a, bvals)
            energy += np.sum((2.0 * um[mx] / dx) ** 2) * w_full / 2.0
        # grid-edge faces
        for side in (0, -1):
            edge = [slice(None)] * n
            edge[axis] = side
            fe = flags[tuple(edge)]
            ve = v[tuple(edge)]
            m = fe == MATERIAL
            energy += np.sum((2.0 * ve[m] / dx) ** 2) * w_full / 2.0
    return float(energy)


def energy_gamma(u, reaction, f):
    """Discrete energy  grad-part + reaction*||u||^2 + 2 <f, u>."""
    mask = u.mask
    source = as_source(f, mask)
    vol = mask.dx ** mask.dim
    interior = _interior_volume(mask)
    uu = float(np.sum(np.where(interior, u.values * u.values, 0.0)) * vol)
    fu = float(np.sum(np.where(interior, source * u.values, 0.0)) * vol)
    return gradient_energy(u) + reaction * uu + 2.0 * fu


def h1_norm(u):
    return float(np.sqrt(l2_norm(u) ** 2 + gradient_energy(u)))


def friedrichs_constant(domain, dx, tol=1e-10, max_iter=200):
    """C such that ||u||_L2 <= C ||grad u||_L2 for fields vanishing on the
    boundary, from the smallest eigenvalue of the discrete Laplacian on the
    hole-free grid (inverse power iteration; deterministic start)."""
    mask = hole_free_mask(domain, dx)
    apply_op = make_operator(mask, 0.0)
    diag = operator_diagonal(mask, 0.0)
    v = np.ones(mask.shape)
    v /= np.sqrt(np.sum(v * v))
    lam_old = 0.0
    for _ in range(max_iter):
        w, _ = cg_solve(apply_op, v, tol=1e-10, max_iter=20 * max(mask.shape), diag=diag)
        v = w / np.sqrt(np.sum(w * w))
        lam = float(np.sum(v * apply_op(v)))
        if abs(lam - lam_old) <= tol * abs(lam):
            break
        lam_old = lam
    return 1.0 / np.sqrt(lam)


FIELD_FORMAT_VERSION = 1


def save_field(field, path):
    """Mask header and flags followed by the material-cell values, row major,
    as 17-significant-digit decimals (exact float64 round trip)."""
    from .geometry import _write_mask
    with open(path, "w") as fh:
        fh.write(f"percohom-field format_version {FIELD_FORMAT_VERSION}\n")
        _write_mask(field.mask, fh)
        vals = field.values[field.mask.material]
        fh.write(f"values {vals.size}\n")
        for chunk_start in range(0, vals.size, 8):
            chunk = vals[chunk_start:chunk_start + 8]
            fh.write(" ".join("%.17g" % x for x in chunk) + "\n")


def load_field(path):
    from .geometry import _read_mask
    with open(path) as fh:
        header = fh.readline().split()
        if header[:2] != ["percohom-field", "format_version"]:
            raise InvalidArgumentError("not a field file")
        if int(header[2]) != FIELD_FORMAT_VERSION:
            raise InvalidArgumentError("unsupported field format version")
        mask = _read_mask(fh)
        count = int(fh.readline().split()[1])
        vals = []
        while len(vals) < count:
            vals.extend(float(t) for t in fh.readline().split())
    full = np.zeros(mask.shape)
    full[mask.material] = np.asarray(vals[:count])
    return GridField(mask, full)
