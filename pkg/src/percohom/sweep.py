"""Scale sweeps for the vanishing-obstacle limit.

A sweep fixes a geometry family, a list of scales eps, and a PDE setup, then
for every (eps, replica): builds one obstacle realization, rasterizes it,
solves the perforated problem, and accumulates norms, energies, and
diagnostics.  The same realizations feed the capacity pipeline that
estimates the effective extra absorption constant c, and a single
unperforated solve with reaction + c provides the comparison field for the
L2 error column.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict

import numpy as np

from .capacity import (boolean_capacity_constant, capacity_minimizer_on_window,
                       strange_term)
from .errors import InvalidArgumentError
from .geometry import (Box, GeometryFamily, hole_free_mask, rasterize,
                       sample_family, volume_fraction)
from .points import empty_cell_frequency
from .rng import substream_seed
from .solver import (GridField, as_source, energy_gamma, gradient_energy,
                     h1_norm, l2_distance, l2_norm, solve_dirichlet_perforated,
                     solve_homogenized)

DEFAULT_SOURCE = "-1"
DEFAULT_REACTION = 1.0


@dataclass(frozen=True)
class SweepSpec:
    """Everything needed to reproduce a sweep from its master seed."""

    family: GeometryFamily
    domain: Box
    eps_list: tuple
    h_list: tuple
    reaction: float = DEFAULT_REACTION
    source: str = DEFAULT_SOURCE
    grid_cells: int = 64          # cells per domain side for the PDE grid
    capacity_cells_per_h: int = 32
    replicas: int = 1
    master_seed: int = 0
    tol: float = 1e-8

    def dx(self):
        return self.domain.sides[0] / self.grid_cells

    def validate(self):
        """All violated invariants at once, as diagnostics dicts."""
        diags = []
        eps = [float(e) for e in self.eps_list]
        if len(eps) < 3:
            diags.append({"field": "eps_list",
                          "message": "need at least 3 eps values"})
        if any(b >= a for a, b in zip(eps, eps[1:])):
            diags.append({"field": "eps_list",
                          "message": "eps list must be strictly decreasing"})
        if len(self.h_list) < 2:
            diags.append({"field": "h_list",
                          "message": "need at least 2 cube sizes h"})
        hmin = min(self.h_list) if self.h_list else math.inf
        for e in eps:
            if not e < hmin / 4.0:
                diags.append({"field": "eps_list",
                              "message": f"scale ordering requires eps << h: eps={e} "
                                         f"is not < min(h)/4 = {hmin / 4.0}"})
        sides = self.domain.sides
        if any(abs(s - sides[0]) > 1e-12 for s in sides):
            diags.append({"field": "domain", "message": "domain must be a cube"})
        if max(self.h_list, default=0.0) >= min(sides):
            diags.append({"field": "h_list",
                          "message": "cube sizes must fit inside the domain"})
        if self.reaction < 0:
            diags.append({"field": "reaction", "message": "reaction must be >= 0"})
        if self.replicas < 1:
            diags.append({"field": "replicas", "message": "need at least one replica"})
        if self.grid_cells < 4:
            diags.append({"field": "grid_cells", "message": "grid too coarse"})
        return diags

    def resolution_warnings(self):
        warns = []
        dx = self.dx()
        for e in self.eps_list:
            if self.family.kind in ("boolean", "lattice"):
                feature = self.family.r0 * float(e) ** self.family.radius_exponent
            else:
                tube = self.family.tube_radius or self.family.c1 / 2.0
                feature = tube * float(e)
            if feature < 2 * dx:
                warns.append(f"eps={e}: obstacle feature {feature:.3g} spans fewer "
                             f"than 2 cells at dx={dx:.3g}")
        for h in self.h_list:
            if h / dx < 32:
                warns.append(f"h={h}: cube spans fewer than 32 PDE cells at dx={dx:.3g}")
        return warns


@dataclass(frozen=True)
class SweepRow:
    eps: float
    replica: int
    seed: int
    volume_fraction: float
    hole_cells: int
    h1: float
    gamma: float
    energy_lhs: float        # grad part + reaction * ||u||^2
    energy_rhs: float        # 2 ||u|| ||f||
    l2_error: float = math.nan
    iterations: int = 0
    residual: float = 0.0
    empty_cell_freq: float = math.nan
    boolean_constant: float = math.nan
    failure: str = ""


@dataclass(frozen=True)
class HomogenizationReport:
    spec: SweepSpec
    rows: tuple
    cap_rows: tuple
    c: float
    c_spread: float
    summary: dict


def _sweep_row_core(spec, ie, k):
    """Geometry + solve + norms for one (eps, replica); the parallel unit."""
    eps = float(spec.eps_list[ie])
    seed = substream_seed(spec.master_seed, "geometry", ie, k)
    obstacles, config = sample_family(spec.family, eps, seed, spec.domain)
    dx = spec.dx()
    mask = rasterize(obstacles, spec.domain, dx)
    vf = volume_fraction(mask)
    u, report = solve_dirichlet_perforated(mask, spec.reaction, spec.source,
                                           tol=spec.tol)
    f_arr = as_source(spec.source, mask)
    f_norm = float(np.sqrt(np.sum(f_arr * f_arr) * dx ** mask.dim))
    grad_plus = gradient_energy(u) + spec.reaction * l2_norm(u) ** 2
    ecf = math.nan
    if spec.family.kind == "rcm" and config is not None:
        sides = config.box.sides
        if all(abs(s - round(s)) < 1e-9 and s >= 2 for s in sides):
            ecf = empty_cell_frequency(config, 1.0)
    bc = math.nan
    if spec.family.kind in ("boolean", "lattice") and obstacles.dim == 3:
        bc, _ = boolean_capacity_constant(obstacles, spec.domain)
    row = SweepRow(eps=eps, replica=k, seed=seed, volume_fraction=vf,
                   hole_cells=mask.hole_count, h1=h1_norm(u),
                   gamma=energy_gamma(u, spec.reaction, spec.source),
                   energy_lhs=grad_plus,
                   energy_rhs=2.0 * l2_norm(u) * f_norm,
                   iterations=report.iterations,
                   residual=report.final_rel_residual,
                   empty_cell_freq=ecf, boolean_constant=bc)
    return row, obstacles, u


def _sweep_job(args):
    spec, ie, k = args
    try:
        row, obstacles, u = _sweep_row_core(spec, ie, k)
        return row, (obstacles, row.seed), u
    except Exception as exc:  # recorded per row; the sweep continues
        return _failure_row(spec, ie, k, exc), None, None


def _failure_row(spec, ie, k, exc):
    return SweepRow(eps=float(spec.eps_list[ie]), replica=k,
                    seed=substream_seed(spec.master_seed, "geometry", ie, k),
                    volume_fraction=math.nan, hole_cells=0, h1=math.nan,
                    gamma=math.nan, energy_lhs=math.nan, energy_rhs=math.nan,
                    failure=f"{type(exc).__name__}: {exc}")


def run_sweep(spec, threads=1):
    """Execute the sweep; failures are recorded per row and do not abort."""
    diags = spec.validate()
    if diags:
        raise InvalidArgumentError("; ".join(d["message"] for d in diags))
    jobs = [(ie, k) for ie in range(len(spec.eps_list))
            for k in range(spec.replicas)]
    rows, fields, precomputed = {}, {}, {}
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_job, [(spec, ie, k) for ie, k in jobs]))
    else:
        results = [_sweep_job((spec, ie, k)) for ie, k in jobs]
    for (ie, k), (row, pre, u) in zip(jobs, results):
        rows[(ie, k)] = row
        if pre is not None:
            precomputed[(ie, k)] = pre
            fields[(ie, k)] = u
    if spec.family.dim == 3:
        st = strange_term(spec.family, spec.h_list, spec.eps_list, spec.replicas,
                          spec.master_seed, spec.domain,
                          cells_per_h=spec.capacity_cells_per_h,
                          precomputed=precomputed or None)
    else:
        # the absorption-constant pipeline is a dimension-3 construction; 2D
        # sweeps exercise the solver and energies only
        from .capacity import StrangeTermResult
        st = StrangeTermResult(rows=(), c=0.0, spread=0.0,
                               eps_then_h=(), h_then_eps=())
    u_hom, _ = solve_homogenized(spec.domain, spec.reaction, st.c, spec.source,
                                 spec.dx(), tol=spec.tol)
    final_rows = []
    for ie, k in jobs:
        row = rows[(ie, k)]
        if row.failure:
            final_rows.append(row)
            continue
        err = l2_distance(fields[(ie, k)], u_hom)
        final_rows.append(SweepRow(**{**asdict(row), "l2_error": err}))
    summary = _summarize(spec, final_rows, st)
    return HomogenizationReport(spec=spec, rows=tuple(final_rows),
                                cap_rows=st.rows, c=st.c, c_spread=st.spread,
                                summary=summary)


def _summarize(spec, rows, st):
    ok = [r for r in rows if not r.failure]
    by_eps = {}
    for r in ok:
        by_eps.setdefault(r.eps, []).append(r)
    eps_sorted = sorted(by_eps, reverse=True)
    err_means = [float(np.mean([r.l2_error for r in by_eps[e]])) for e in eps_sorted]
    slope = math.nan
    pos = [(e, m) for e, m in zip(eps_sorted, err_means) if m > 0]
    if len(pos) >= 2:
        slope = float(np.polyfit(np.log([p[0] for p in pos]),
                                 np.log([p[1] for p in pos]), 1)[0])
    gamma_ok = all(r.gamma <= 1e-8 * max(r.energy_rhs, 1e-30) for r in ok)
    energy_ok = all(r.energy_lhs <= r.energy_rhs * (1 + 1e-8) + 1e-14 for r in ok)
    h1s = [r.h1 for r in ok]
    bc_vals = [r.boolean_constant for r in ok if not math.isnan(r.boolean_constant)]
    return {
        "format_version": 1,
        "c_note": ("" if spec.family.dim == 3 else
                   "absorption pipeline requires dimension 3; c fixed to 0"),
        "c": st.c,
        "c_spread": st.spread,
        "eps_then_h": [list(t) for t in st.eps_then_h],
        "h_then_eps": [list(t) for t in st.h_then_eps],
        "l2_error_by_eps": [[e, m] for e, m in zip(eps_sorted, err_means)],
        "l2_decay_slope": slope,
        "gamma_nonpositive": gamma_ok,
        "energy_bound_holds": energy_ok,
        "max_h1": max(h1s) if h1s else math.nan,
        "partial": len(ok) != len(rows),
        "resolution_warnings": spec.resolution_warnings(),
        "boolean_constant_mean": float(np.mean(bc_vals)) if bc_vals else math.nan,
    }


# ---------------------------------------------------------------------------
# Spatial-average decay experiments

@dataclass(frozen=True)
class ErgodicSpec:
    functional: str            # "local_capacity" | "affine_energy"
    family: GeometryFamily
    t_list: tuple
    replicas: int
    dx: float
    master_seed: int = 0
    xi: tuple = None           # direction for affine_energy


@dataclass(frozen=True)
class ErgodicResult:
    rows: tuple                # (t, mean, rel_std)
    values: dict               # t -> tuple of per-replica values
    decays: bool


def ergodic_average_experiment(spec, threads=1):
    """Per-volume functional on growing cubes: mean and relative spread
    across replicas, and whether the spread decays from the smallest to the
    largest cube."""
    if len(spec.t_list) < 1:
        raise InvalidArgumentError("need at least one cube size")
    if spec.replicas < 2:
        raise InvalidArgumentError("spread needs at least two replicas")
    if spec.functional not in ("local_capacity", "affine_energy"):
        raise InvalidArgumentError(f"unknown functional {spec.functional!r}")
    jobs = [(it, k) for it in range(len(spec.t_list)) for k in range(spec.replicas)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(_ergodic_job, [(spec, it, k) for it, k in jobs]))
    else:
        vals = [_ergodic_job((spec, it, k)) for it, k in jobs]
    values = {}
    for (it, k), v in zip(jobs, vals):
        values.setdefault(float(spec.t_list[it]), []).append(v)
    rows = []
    for t in sorted(values):
        arr = np.asarray(values[t])
        if np.all(arr == arr[0]):  # identical replicas have zero spread, exactly
            rows.append((t, float(arr[0]), 0.0))
            continue
        mean = float(arr.mean())
        rel = float(arr.std() / abs(mean)) if mean != 0 else 0.0
        rows.append((t, mean, rel))
    decays = rows[-1][2] < rows[0][2] if len(rows) >= 2 else True
    return ErgodicResult(rows=tuple(rows),
                         values={t: tuple(v) for t, v in values.items()},
                         decays=decays)


def _ergodic_job(args):
    spec, it, k = args
    t = float(spec.t_list[it])
    seed = substream_seed(spec.master_seed, "ergodic", it, k)
    box = Box.cube(t, spec.family.dim)
    obstacles, _ = sample_family(spec.family, 1.0, seed, box)
    cells = max(int(round(t / spec.dx)), 4)
    dx = t / cells
    mask = rasterize(obstacles, box, dx)
    window = tuple(slice(0, n) for n in mask.shape)
    if spec.functional == "local_capacity":
        est, _ = capacity_minimizer_on_window(mask, window)
        value = est.value
    else:
        from .capacity import affine_dirichlet_energy
        xi = spec.xi if spec.xi is not None else (1.0,) + (0.0,) * (spec.family.dim - 1)
        center = tuple(0.5 * t for _ in range(spec.family.dim))
        value = affine_dirichlet_energy(mask, center, t, xi)
    return value / t ** spec.family.dim


# ---------------------------------------------------------------------------
# Partition of unity and the glued corrector

@dataclass(frozen=True)
class PartitionWeight:
    center: tuple
    slices: tuple
    weights: np.ndarray


def _smoothstep(t):
    # C2 quintic ramp with s(t) + s(1-t) = 1
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def _axis_layout(lo, hi, h, r):
    """Cube centers along one axis with uniform pitch and overlap >= r.

    Stretching the overlap (never shrinking it) keeps the ramps of
    consecutive cubes exactly complementary, so the weights sum to one.
    """
    side = hi - lo
    if h >= side - 1e-12:
        return [lo + side / 2.0], side, 0.0
    count = int(math.ceil((side - h) / (h - r) - 1e-12)) + 1
    pitch = (side - h) / (count - 1)
    overlap = h - pitch
    centers = [lo + h / 2.0 + j * pitch for j in range(count)]
    return centers, h, overlap


def build_partition_of_unity(domain, h, r, dx):
    """Overlapping cubes of size h with overlap width >= r, C2 ramp profiles.

    Properties, tested exactly: weights in [0, 1]; 1 on cells covered by a
    single cube; sum 1 at every cell center; discrete gradient <= 8/r.
    """
    if not r < h / 2:
        raise InvalidArgumentError("need overlap r < h/2")
    if r < 4 * dx:
        raise InvalidArgumentError("grid must resolve the overlap width by >= 4 cells")
    dim = domain.dim
    axis_profiles = []
    for d in range(dim):
        lo, hi = domain.lower[d], domain.upper[d]
        centers, width, overlap = _axis_layout(lo, hi, h, r)
        n_cells = int(round((hi - lo) / dx))
        xs = lo + (np.arange(n_cells) + 0.5) * dx
        profiles = []
        for j, c in enumerate(centers):
            left, right = c - width / 2.0, c + width / 2.0
            prof = np.ones_like(xs)
            if j > 0:
                prof = prof * _smoothstep((xs - left) / overlap)
            if j < len(centers) - 1:
                prof = prof * _smoothstep((right - xs) / overlap)
            prof = np.where((xs >= left - 1e-12) & (xs <= right + 1e-12), prof, 0.0)
            profiles.append((c, prof))
        axis_profiles.append(profiles)
    weights = []
    for idx in np.ndindex(*[len(p) for p in axis_profiles]):
        center = tuple(axis_profiles[d][idx[d]][0] for d in range(dim))
        profs = [axis_profiles[d][idx[d]][1] for d in range(dim)]
        nz = [np.nonzero(p > 0.0)[0] for p in profs]
        if any(len(z) == 0 for z in nz):
            continue
        slices = tuple(slice(int(z[0]), int(z[-1]) + 1) for z in nz)
        local = profs[0][slices[0]]
        for d in range(1, dim):
            local = np.multiply.outer(local, profs[d][slices[d]])
        weights.append(PartitionWeight(center=center, slices=slices, weights=local))
    return weights


def partition_sum(partition, shape):
    total = np.zeros(shape)
    for w in partition:
        total[w.slices] += w.weights
    return total


def local_minimizers_for_partition(mask, partition, tol=1e-10):
    """Capacity-minimizer field on each partition cube (1 on the cube faces,
    0 on holes), on the mask's own grid and the cubes' own windows."""
    out = []
    for w in partition:
        _, vals = capacity_minimizer_on_window(mask, w.slices, tol=tol)
        out.append(vals)
    return out


def build_corrector(w_field, partition, minimizers, mask, reaction, strange_c, f):
    """Glue the local capacity minimizers under a smooth field:
    corrector = sum_a w * v_a * phi_a.  Vanishes on every hole cell by
    construction.  Returns (GridField, energy gap against the unperforated
    energy of w with reaction + c)."""
    w_vals = w_field.values if isinstance(w_field, GridField) else np.asarray(w_field)
    acc = np.zeros(mask.shape)
    for part, vals in zip(partition, minimizers):
        acc[part.slices] += w_vals[part.slices] * vals * part.weights
    corrector = GridField(mask, np.where(mask.material, acc, 0.0))
    gamma_eps = energy_gamma(corrector, reaction, f)
    flat = hole_free_mask(mask.domain, mask.dx)
    w_flat = GridField(flat, np.asarray(w_vals))
    f_arr = as_source(f, flat)
    vol = flat.dx ** flat.dim
    gamma_bar = (gradient_energy(w_flat)
                 + (reaction + strange_c) * l2_norm(w_flat) ** 2
                 + 2.0 * float(np.sum(f_arr * w_flat.values) * vol))
    return corrector, gamma_eps - gamma_bar


# ---------------------------------------------------------------------------
# Uniform energy bound audit

@dataclass(frozen=True)
class AuditResult:
    passed: bool
    max_h1: float
    max_l2: float
    max_grad: float
    ceiling_h1: float
    ceiling_l2: float
    ceiling_grad: float


def uniform_bound_audit(solutions, f_norm, friedrichs_c, tolerance=1e-10):
    """Check the chain  ||grad u|| <= 2 C ||f||,  ||u|| <= 2 C^2 ||f||, and
    the combined ceiling on the H1 norm, across an eps sweep.

    `solutions` holds GridFields or precomputed (h1, l2, grad) triples.
    """
    if len(solutions) < 1:
        raise InvalidArgumentError("nothing to audit")
    triples = []
    for s in solutions:
        if isinstance(s, GridField):
            g = math.sqrt(gradient_energy(s))
            l2 = l2_norm(s)
            triples.append((math.sqrt(l2 ** 2 + g ** 2), l2, g))
        else:
            triples.append(tuple(float(x) for x in s))
    max_h1 = max(t[0] for t in triples)
    max_l2 = max(t[1] for t in triples)
    max_grad = max(t[2] for t in triples)
    ceiling_grad = 2.0 * friedrichs_c * f_norm
    ceiling_l2 = 2.0 * friedrichs_c ** 2 * f_norm
    ceiling_h1 = math.hypot(ceiling_l2, ceiling_grad)
    passed = (max_grad <= ceiling_grad + tolerance
              and max_l2 <= ceiling_l2 + tolerance
              and max_h1 <= ceiling_h1 + tolerance)
    return AuditResult(passed=passed, max_h1=max_h1, max_l2=max_l2,
                       max_grad=max_grad, ceiling_h1=ceiling_h1,
                       ceiling_l2=ceiling_l2, ceiling_grad=ceiling_grad)
