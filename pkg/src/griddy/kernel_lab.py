"""Finite-state verification lab for coordinate-sweep kernels.

Every sampler in this package induces a transition kernel on the box; this
module discretizes those kernels on a modest cell grid (midpoint rule, rows
renormalized), computes invariant measures by direct linear algebra, and
checks the quantitative statements the samplers rely on: a Doeblin floor with
its geometric convergence envelope, norm inequalities for the kernel action,
a spectral gap for the fixed vector, and the linear response of the invariant
measure to kernel perturbations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import null_space, svdvals

from .conditional import ClampBounds, Grid1D, InterpScheme, RelativeClamp, build_conditional
from .errors import (
    DegenerateConditionalError,
    GriddyError,
    ReducibilityError,
    StateSpaceError,
    TailBoundError,
)
from .targets import BoxDomain, TargetDensity, TruncationSpec

__all__ = [
    "StateGrid",
    "KernelMatrix",
    "InvariantMeasure",
    "PerturbationReport",
    "RegularityReport",
    "TruncationBoundReport",
    "vector_lp",
    "kernel_lp",
    "discretize_gibbs_kernel",
    "discretize_griddy_kernel",
    "discretize_metropolized_kernel",
    "invariant_measure",
    "doeblin_constant",
    "tv_convergence",
    "fixed_space_dimension",
    "spectral_gap_alpha",
    "perturbation_report",
    "regularity_check",
    "truncation_bound_report",
]

# Dense matrices get unwieldy past this many cells.
MAX_STATES = 20_000


@dataclass(frozen=True)
class StateGrid:
    """Uniform cell partition of a box; states sit at cell centers (C order)."""

    domain: BoxDomain
    shape: tuple[int, ...]

    def __post_init__(self) -> None:
        shape = tuple(int(m) for m in self.shape)
        object.__setattr__(self, "shape", shape)
        if len(shape) != self.domain.dim:
            raise StateSpaceError(
                f"shape {shape} does not match domain dimension {self.domain.dim}"
            )
        if any(m < 1 for m in shape):
            raise StateSpaceError(f"cell counts must be positive, got {shape}")
        total = int(np.prod(shape))
        if total > MAX_STATES:
            raise StateSpaceError(
                f"{total} states exceeds the supported maximum of {MAX_STATES}"
            )

    @property
    def n_states(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        w = 1.0
        for (a, b), m in zip(zip(self.domain.lower, self.domain.upper), self.shape):
            w *= (b - a) / m
        return w

    def axis_step(self, axis: int) -> float:
        a, b = self.domain.interval(axis)
        return (b - a) / self.shape[axis]

    def axis_centers(self, axis: int) -> np.ndarray:
        a, b = self.domain.interval(axis)
        h = (b - a) / self.shape[axis]
        return a + h * (np.arange(self.shape[axis]) + 0.5)

    def points(self) -> np.ndarray:
        """(n_states, d) matrix of all cell centers."""
        axes = [self.axis_centers(i) for i in range(self.domain.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)


class KernelMatrix:
    """Transition densities between cell centers; rows integrate to one."""

    __slots__ = ("density", "grid", "_cache")

    def __init__(self, density: np.ndarray, grid: StateGrid, check: bool = True):
        density = np.asarray(density, dtype=float)
        s = grid.n_states
        if density.shape != (s, s):
            raise GriddyError(f"kernel must be {s} x {s}, got {density.shape}")
        if check:
            if not np.all(np.isfinite(density)) or density.min() < 0.0:
                raise GriddyError("kernel densities must be finite and nonnegative")
            rows = density.sum(axis=1) * grid.cell_volume
            drift = np.max(np.abs(rows - 1.0))
            if drift > 1e-10:
                raise GriddyError(f"kernel rows deviate from unit mass by {drift:.3e}")
        self.density = density
        self.grid = grid
        self._cache: dict = {}

    def mass(self) -> np.ndarray:
        """Row-stochastic transition probabilities between cells."""
        return self.density * self.grid.cell_volume

    def action_matrix(self) -> np.ndarray:
        """Matrix pushing a density vector forward one step."""
        return self.mass().T


@dataclass(frozen=True)
class InvariantMeasure:
    """Fixed density of a kernel with its commonly used norms."""

    density: np.ndarray
    grid: StateGrid
    lp_norms: dict = field(default_factory=dict)

    def norm(self, p: float) -> float:
        key = float(p)
        if key not in self.lp_norms:
            self.lp_norms[key] = vector_lp(self.density, self.grid.cell_volume, p)
        return self.lp_norms[key]


def vector_lp(v: np.ndarray, cell_volume: float, p: float) -> float:
    """L^p norm of a state vector under the cell quadrature measure."""
    v = np.asarray(v, dtype=float)
    if np.isinf(p):
        return float(np.max(np.abs(v)))
    if p < 1:
        raise GriddyError(f"norm index must satisfy p >= 1, got {p}")
    return float((np.abs(v) ** p).sum() * cell_volume) ** (1.0 / p)


def kernel_lp(k_density: np.ndarray, cell_volume: float, p: float) -> float:
    """L^p norm of a kernel density on the product of two state spaces."""
    k = np.asarray(k_density, dtype=float)
    if np.isinf(p):
        return float(np.max(np.abs(k)))
    if p < 1:
        raise GriddyError(f"norm index must satisfy p >= 1, got {p}")
    return float((np.abs(k) ** p).sum() * cell_volume**2) ** (1.0 / p)


def _axis_slices(grid: StateGrid, axis: int):
    """Yield (flat state ids along axis, fixed point rows) per 1D slice."""
    dim = grid.domain.dim
    shape = grid.shape
    strides = [int(np.prod(shape[i + 1:], dtype=np.int64)) for i in range(dim)]
    other = [i for i in range(dim) if i != axis]
    axis_ids = np.arange(shape[axis], dtype=np.int64) * strides[axis]
    centers = [grid.axis_centers(i) for i in range(dim)]
    pts = np.empty((shape[axis], dim))
    pts[:, axis] = centers[axis]
    reduced = tuple(shape[i] for i in other)
    for combo in np.ndindex(*reduced) if other else [()]:
        base = 0
        for j, i in enumerate(other):
            base += combo[j] * strides[i]
            pts[:, i] = centers[i][combo[j]]
        yield base + axis_ids, pts.copy()


def _compose(factors: Sequence[np.ndarray], grid: StateGrid) -> KernelMatrix:
    mass = factors[0]
    for f in factors[1:]:
        mass = mass @ f
    mass /= mass.sum(axis=1, keepdims=True)
    return KernelMatrix(mass / grid.cell_volume, grid)


def _gibbs_factor(target: TargetDensity, grid: StateGrid, axis: int) -> np.ndarray:
    s = grid.n_states
    factor = np.zeros((s, s))
    for ids, pts in _axis_slices(grid, axis):
        vals = target.evaluate(pts)
        total = vals.sum()
        if total <= 0.0:
            raise DegenerateConditionalError(
                f"target '{target.label}' has zero mass on a cell slice along axis {axis}"
            )
        factor[np.ix_(ids, ids)] = vals / total
    return factor


def _approx_conditional_mass(target: TargetDensity, grid: StateGrid, axis: int,
                             grid1d: Grid1D, scheme, clamp, pts: np.ndarray) -> np.ndarray:
    cond = build_conditional(target, axis, pts[0], grid1d, scheme, clamp)
    dens = cond.density(grid.axis_centers(axis))
    mass = dens * grid.axis_step(axis)
    return mass / mass.sum()


def _griddy_factor(target: TargetDensity, grid: StateGrid, axis: int,
                   grid1d: Grid1D, scheme, clamp) -> np.ndarray:
    s = grid.n_states
    factor = np.zeros((s, s))
    for ids, pts in _axis_slices(grid, axis):
        factor[np.ix_(ids, ids)] = _approx_conditional_mass(
            target, grid, axis, grid1d, scheme, clamp, pts
        )
    return factor


def _metropolized_factor(target: TargetDensity, grid: StateGrid, axis: int,
                         grid1d: Grid1D, scheme, clamp) -> np.ndarray:
    s = grid.n_states
    factor = np.zeros((s, s))
    for ids, pts in _axis_slices(grid, axis):
        q = _approx_conditional_mass(target, grid, axis, grid1d, scheme, clamp, pts)
        p = target.evaluate(pts)
        if p.min() <= 0.0:
            raise DegenerateConditionalError(
                f"target '{target.label}' vanishes at a cell center along axis {axis}; "
                "the accept ratio is undefined there"
            )
        # accept[t, t'] = min(1, p[t'] q[t] / (p[t] q[t'])); detailed balance
        # against the cell-center target masses holds row by row.
        accept = np.minimum(1.0, np.outer(q / p, p / q))
        block = accept * q[None, :]
        np.fill_diagonal(block, 0.0)
        np.fill_diagonal(block, 1.0 - block.sum(axis=1))
        factor[np.ix_(ids, ids)] = block
    return factor


def _resolve_axis_grids(grid: StateGrid,
                        grids: Union[Grid1D, Sequence[Grid1D]]) -> list[Grid1D]:
    dim = grid.domain.dim
    if isinstance(grids, Grid1D):
        return [grids] * dim
    out = list(grids)
    if len(out) != dim:
        raise GriddyError(f"expected {dim} grids, got {len(out)}")
    return out


def discretize_gibbs_kernel(target: TargetDensity, grid: StateGrid) -> KernelMatrix:
    """Exact-conditional sweep kernel on the cell grid.

    Each axis factor renormalizes midpoint target values on the slice; the
    sweep kernel is the matrix product of the factors in scan order.
    """
    factors = [_gibbs_factor(target, grid, axis) for axis in range(grid.domain.dim)]
    return _compose(factors, grid)


def discretize_griddy_kernel(target: TargetDensity, grid: StateGrid,
                             grids: Union[Grid1D, Sequence[Grid1D]],
                             scheme: Union[InterpScheme, str] = "pl",
                             clamp: Union[ClampBounds, RelativeClamp, None] = RelativeClamp(),
                             ) -> KernelMatrix:
    """Sweep kernel whose factors draw from the grid-built conditionals."""
    scheme = InterpScheme.parse(scheme)
    axis_grids = _resolve_axis_grids(grid, grids)
    factors = [
        _griddy_factor(target, grid, axis, axis_grids[axis], scheme, clamp)
        for axis in range(grid.domain.dim)
    ]
    return _compose(factors, grid)


def discretize_metropolized_kernel(target: TargetDensity, grid: StateGrid,
                                   grids: Union[Grid1D, Sequence[Grid1D]],
                                   scheme: Union[InterpScheme, str] = "pl",
                                   clamp: Union[ClampBounds, RelativeClamp, None] = RelativeClamp(),
                                   ) -> KernelMatrix:
    """Sweep kernel for the accept/reject variant of the grid sampler."""
    scheme = InterpScheme.parse(scheme)
    axis_grids = _resolve_axis_grids(grid, grids)
    factors = [
        _metropolized_factor(target, grid, axis, axis_grids[axis], scheme, clamp)
        for axis in range(grid.domain.dim)
    ]
    return _compose(factors, grid)


def invariant_measure(kernel: KernelMatrix) -> InvariantMeasure:
    """Fixed density of the kernel via dense solve, cross-checked by iteration."""
    if "invariant" in kernel._cache:
        return kernel._cache["invariant"]
    action = kernel.action_matrix()
    s = kernel.grid.n_states
    w = kernel.grid.cell_volume

    system = action - np.eye(s)
    system[-1, :] = w
    rhs = np.zeros(s)
    rhs[-1] = 1.0
    try:
        solved = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError:
        solved = np.linalg.lstsq(system, rhs, rcond=None)[0]

    v = np.full(s, 1.0 / (w * s))
    for _ in range(1_000_000):
        nxt = action @ v
        nxt /= nxt.sum() * w
        if np.max(np.abs(nxt - v)) <= 1e-12 * np.max(np.abs(nxt)):
            v = nxt
            break
        v = nxt
    else:
        raise ReducibilityError("power iteration did not settle on a fixed vector")

    scale = np.max(np.abs(solved))
    if np.max(np.abs(solved - v)) > 1e-8 * scale:
        raise ReducibilityError(
            "direct solve and power iteration disagree on the invariant measure"
        )
    if solved.min() < -1e-12 * scale:
        raise ReducibilityError("invariant measure has a negative component")
    solved = np.maximum(solved, 0.0)
    solved /= solved.sum() * w

    residual = np.max(np.abs(action @ solved - solved))
    if residual > 1e-10 * scale:
        raise ReducibilityError(f"invariant residual {residual:.3e} is too large")

    out = InvariantMeasure(
        density=solved,
        grid=kernel.grid,
        lp_norms={
            1.0: vector_lp(solved, w, 1.0),
            2.0: vector_lp(solved, w, 2.0),
            float("inf"): vector_lp(solved, w, np.inf),
        },
    )
    kernel._cache["invariant"] = out
    return out


def doeblin_constant(kernel: KernelMatrix) -> float:
    """Largest c with density >= c everywhere, so K(x, C) >= c Vol(C)."""
    return float(kernel.density.min())


def tv_convergence(kernel: KernelMatrix, n_max: int = 50
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Worst-row TV distance to the invariant measure for 1..n_max steps,
    next to the geometric envelope (1 - c Vol)^(n-1) from the Doeblin floor.
    """
    eta_mass = invariant_measure(kernel).density * kernel.grid.cell_volume
    contraction = doeblin_constant(kernel) * kernel.grid.domain.volume
    mass = kernel.mass()
    power = mass.copy()
    tv = np.empty(n_max)
    envelope = np.empty(n_max)
    for n in range(1, n_max + 1):
        tv[n - 1] = 0.5 * np.max(np.abs(power - eta_mass[None, :]).sum(axis=1))
        envelope[n - 1] = (1.0 - contraction) ** (n - 1)
        if n < n_max:
            power = power @ mass
    return tv, envelope


def _singular_values(kernel: KernelMatrix) -> np.ndarray:
    if "fixed_svals" not in kernel._cache:
        action = kernel.action_matrix()
        kernel._cache["fixed_svals"] = svdvals(action - np.eye(action.shape[0]))
    return kernel._cache["fixed_svals"]


def fixed_space_dimension(kernel: KernelMatrix, tol: float = 1e-8) -> int:
    """Number of numerically fixed directions of the kernel action."""
    return int(np.sum(_singular_values(kernel) < tol))


def spectral_gap_alpha(kernel: KernelMatrix,
                       u: Optional[InvariantMeasure] = None) -> float:
    """Smallest stretch of (action - I) on the complement of the fixed vector.

    This is the alpha controlling how strongly the invariant measure resists
    perturbation; values at numerical zero mean the fixed vector is not
    isolated.  The fixed vector defaults to the kernel's own invariant
    measure but can be supplied, e.g. to reuse one already computed.
    """
    cacheable = u is None
    if cacheable and "gap_alpha" in kernel._cache:
        return kernel._cache["gap_alpha"]
    action = kernel.action_matrix()
    fixed = invariant_measure(kernel).density if u is None else u.density
    fixed = fixed / np.linalg.norm(fixed)
    basis = null_space(fixed[None, :])
    alpha = float(svdvals((action - np.eye(action.shape[0])) @ basis)[-1])
    if alpha < 1e-12:
        warnings.warn(
            f"spectral gap alpha = {alpha:.3e} is numerically degenerate",
            RuntimeWarning,
            stacklevel=2,
        )
    if cacheable:
        kernel._cache["gap_alpha"] = alpha
    return alpha


def _operator_l2(kernel: KernelMatrix) -> float:
    if "op_l2" not in kernel._cache:
        kernel._cache["op_l2"] = float(svdvals(kernel.action_matrix())[0])
    return kernel._cache["op_l2"]


@dataclass(frozen=True)
class PerturbationReport:
    """Side-by-side comparison of a reference kernel and its approximation."""

    p: float
    kernel_dist: float
    measure_dist: float
    implied_constant: float
    gap_alpha: float
    overlap_lambda: float
    doeblin_eps: float
    fixed_space_dim_reference: int
    fixed_space_dim_approx: int
    approx_l2_within_2x: bool
    l2_operator_to_kernel_ratio: float

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "kernel_dist": self.kernel_dist,
            "measure_dist": self.measure_dist,
            "implied_constant": self.implied_constant,
            "gap_alpha": self.gap_alpha,
            "overlap_lambda": self.overlap_lambda,
            "doeblin_eps": self.doeblin_eps,
            "fixed_space_dim_reference": self.fixed_space_dim_reference,
            "fixed_space_dim_approx": self.fixed_space_dim_approx,
            "approx_l2_within_2x": self.approx_l2_within_2x,
            "l2_operator_to_kernel_ratio": self.l2_operator_to_kernel_ratio,
        }


def perturbation_report(reference: KernelMatrix, approx: KernelMatrix,
                        p: float) -> PerturbationReport:
    """Measure how far the approximate kernel and its invariant measure drift.

    kernel_dist and measure_dist share the norm index p; their ratio is the
    constant a linear perturbation bound would need.  The report also carries
    the reference kernel's spectral gap, the overlap of the two invariant
    measures, the approximate kernel's Doeblin floor, fixed-space dimensions,
    and the L2 operator-to-kernel-norm ratio (operator norm never exceeds the
    kernel norm).
    """
    if reference.grid != approx.grid:
        raise GriddyError("kernels live on different state grids")
    w = reference.grid.cell_volume
    eta_ref = invariant_measure(reference)
    eta_apx = invariant_measure(approx)
    kdist = kernel_lp(reference.density - approx.density, w, p)
    mdist = vector_lp(eta_ref.density - eta_apx.density, w, p)
    implied = mdist / kdist if kdist > 0 else float("nan")
    overlap = float(
        np.dot(eta_ref.density, eta_apx.density) * w
        / (eta_ref.norm(2) * eta_apx.norm(2))
    )
    hs = kernel_lp(reference.density, w, 2.0)
    ratio = _operator_l2(reference) / hs
    if ratio > 1.0 + 1e-8:
        raise GriddyError(
            f"operator norm exceeds the L2 kernel norm by ratio {ratio:.12f}"
        )
    return PerturbationReport(
        p=float(p),
        kernel_dist=kdist,
        measure_dist=mdist,
        implied_constant=implied,
        gap_alpha=spectral_gap_alpha(reference),
        overlap_lambda=overlap,
        doeblin_eps=doeblin_constant(approx),
        fixed_space_dim_reference=fixed_space_dimension(reference),
        fixed_space_dim_approx=fixed_space_dimension(approx),
        approx_l2_within_2x=bool(eta_apx.norm(2) < 2.0 * eta_ref.norm(2)),
        l2_operator_to_kernel_ratio=ratio,
    )


@dataclass(frozen=True)
class RegularityReport:
    """Norm inequalities for the kernel action applied to a density."""

    sup_lhs: float
    sup_rhs: float
    action_bounds: dict

    @property
    def all_ok(self) -> bool:
        tol = 1e-9
        if self.sup_lhs > self.sup_rhs + tol:
            return False
        return all(lhs <= rhs + tol for lhs, rhs in self.action_bounds.values())


def regularity_check(kernel: KernelMatrix,
                     density: Union[np.ndarray, InvariantMeasure, None] = None,
                     p_values: Sequence[float] = (2.0, 4.0, np.inf),
                     ) -> RegularityReport:
    """Check sup and L^p bounds for the kernel action on a density.

    The sup bound is ||g||_inf <= ||K||_inf ||g||_1 applied to the invariant
    density; the action bound is ||Sg||_p <= ||K||_p max(||g||_1, ||g||_2).
    """
    w = kernel.grid.cell_volume
    if density is None:
        g = invariant_measure(kernel).density
    elif isinstance(density, InvariantMeasure):
        g = density.density
    else:
        g = np.asarray(density, float)
    action = kernel.action_matrix()
    sg = action @ g
    g1 = vector_lp(g, w, 1.0)
    g2 = vector_lp(g, w, 2.0)
    bounds = {}
    for p in p_values:
        lhs = vector_lp(sg, w, p)
        rhs = kernel_lp(kernel.density, w, p) * max(g1, g2)
        bounds[float(p)] = (lhs, rhs)
    return RegularityReport(
        sup_lhs=vector_lp(g, w, np.inf),
        sup_rhs=kernel_lp(kernel.density, w, np.inf) * g1,
        action_bounds=bounds,
    )


@dataclass(frozen=True)
class TruncationBoundReport:
    """Three-term error budget for sampling a truncated unbounded density."""

    p: float
    t: float
    c1: float
    c2: float
    perturbation_term: float
    cap_term: float
    tail_term: float

    @property
    def total(self) -> float:
        return self.perturbation_term + self.cap_term + self.tail_term

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "t": self.t,
            "c1": self.c1,
            "c2": self.c2,
            "perturbation_term": self.perturbation_term,
            "cap_term": self.cap_term,
            "tail_term": self.tail_term,
            "total": self.total,
        }


def truncation_bound_report(spec: TruncationSpec, p: float, lp_norm_pi: float,
                            report: PerturbationReport) -> TruncationBoundReport:
    """Assemble the truncated-sampling error bound from measured pieces.

    The three terms are the measured linear response to the kernel
    perturbation, the boundary cap c2 / (2t) * ||pi||_p, and the tail term
    c1 / (t ||pi||_p).  The box must satisfy t >= c2 / 2 for the tail control
    to apply at all.
    """
    if not spec.has_constants():
        raise TailBoundError("tail terms unavailable: supply (c1, c2) or (c3, c4)")
    if not (np.isfinite(lp_norm_pi) and lp_norm_pi > 0):
        raise TailBoundError(f"lp_norm_pi must be positive, got {lp_norm_pi}")
    c1, c2 = spec.resolve_constants(p)
    if spec.t < c2 / 2.0:
        raise TailBoundError(
            f"tail control requires half-width t >= c2 / 2 = {c2 / 2.0}, got t = {spec.t}"
        )
    return TruncationBoundReport(
        p=float(p),
        t=float(spec.t),
        c1=c1,
        c2=c2,
        perturbation_term=report.implied_constant * report.kernel_dist,
        cap_term=c2 / (2.0 * spec.t) * lp_norm_pi,
        tail_term=c1 / (spec.t * lp_norm_pi),
    )
