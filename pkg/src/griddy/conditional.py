"""Grid-built 1D conditionals: interpolate, clamp, normalize, invert.

A conditional is built from exactly n evaluations of the target along one
axis.  The knot values are interpolated (piecewise-constant, piecewise-linear,
or piecewise-polynomial), clamped into a positive band, and normalized with
exact per-segment integrals, so the resulting object is a genuine probability
density whose CDF can be inverted deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateConditionalError, DomainError, GridMismatchError

__all__ = [
    "Grid1D",
    "ClampBounds",
    "RelativeClamp",
    "InterpScheme",
    "ApproxConditional",
    "build_conditional",
    "build_from_values",
    "eval_density",
    "eval_cdf",
    "sample_inverse_cdf",
]

# Bisection width for CDF inversion on polynomial segments.
_POLY_PPF_TOL = 1e-12


@dataclass(frozen=True)
class Grid1D:
    """Strictly increasing evaluation knots along one axis."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 2:
            raise DomainError("grid needs at least two points")
        if not np.all(np.isfinite(pts)) or np.any(np.diff(pts) <= 0):
            raise DomainError("grid points must be finite and strictly increasing")

    @property
    def n(self) -> int:
        return int(self.points.size)

    @property
    def a(self) -> float:
        return float(self.points[0])

    @property
    def b(self) -> float:
        return float(self.points[-1])

    @classmethod
    def uniform(cls, a: float, b: float, n: int) -> "Grid1D":
        if n < 2:
            raise DomainError(f"uniform grid needs n >= 2, got {n}")
        return cls(np.linspace(float(a), float(b), int(n)))


@dataclass(frozen=True)
class ClampBounds:
    """Absolute positive band [epsilon, m] applied to interpolated values."""

    epsilon: float
    m: float

    def __post_init__(self) -> None:
        if not (0.0 < self.epsilon < self.m < np.inf):
            raise DegenerateConditionalError(
                f"clamp requires 0 < epsilon < m, got [{self.epsilon}, {self.m}]"
            )

    def resolve(self, raw_max: float) -> "ClampBounds":
        return self


@dataclass(frozen=True)
class RelativeClamp:
    """Default clamp policy: band scaled off the largest raw knot value."""

    floor_factor: float = 1e-8
    cap_factor: float = 10.0

    def __post_init__(self) -> None:
        if not (0.0 < self.floor_factor < self.cap_factor):
            raise DegenerateConditionalError(
                f"relative clamp requires 0 < floor < cap, got "
                f"({self.floor_factor}, {self.cap_factor})"
            )

    def resolve(self, raw_max: float) -> ClampBounds:
        if raw_max <= 0.0:
            raise DegenerateConditionalError(
                "all raw values are zero; a relative clamp cannot normalize this slice"
            )
        return ClampBounds(self.floor_factor * raw_max, self.cap_factor * raw_max)


@dataclass(frozen=True)
class InterpScheme:
    """Interpolation rule: 'pc', 'pl', or 'poly' with a panel order >= 2.

    Piecewise-constant interpolation snaps to the nearest knot.  Polynomial
    order k fits one degree-k polynomial per panel of k consecutive cells, so
    the knot count must satisfy (n - 1) % k == 0; k = n - 1 is a single
    global polynomial.
    """

    kind: str
    order: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in ("pc", "pl", "poly"):
            raise DomainError(f"unknown interpolation kind '{self.kind}'")
        if self.kind == "poly":
            if self.order is None or self.order < 2:
                raise DomainError("polynomial scheme needs an order of at least 2")
        elif self.order is not None:
            raise DomainError(f"scheme '{self.kind}' takes no order")

    @classmethod
    def parse(cls, text: Union[str, "InterpScheme"]) -> "InterpScheme":
        if isinstance(text, InterpScheme):
            return text
        s = str(text).strip()
        if s in ("pc", "pl"):
            return cls(s)
        if s.startswith("poly:"):
            try:
                order = int(s.split(":", 1)[1])
            except ValueError:
                raise DomainError(f"bad polynomial order in scheme '{text}'") from None
            return cls("poly", order)
        raise DomainError(f"unknown interpolation scheme '{text}'")

    def validate_for(self, n: int) -> None:
        if self.kind == "poly":
            k = self.order
            if k > n - 1:
                raise DomainError(
                    f"polynomial order {k} exceeds n - 1 = {n - 1} for this grid"
                )
            if (n - 1) % k != 0:
                raise DomainError(
                    f"grid with {n} knots cannot be split into panels of order {k}"
                )

    def __str__(self) -> str:
        return self.kind if self.order is None else f"{self.kind}:{self.order}"


@lru_cache(maxsize=32)
def _gauss_nodes(count: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(count)


class _Panel:
    """One polynomial panel: barycentric nodes plus clamp-aware integration."""

    __slots__ = ("nodes", "values", "weights", "quad_count")

    def __init__(self, nodes: np.ndarray, values: np.ndarray):
        self.nodes = nodes
        self.values = values
        diffs = nodes[:, None] - nodes[None, :]
        np.fill_diagonal(diffs, 1.0)
        w = 1.0 / np.prod(diffs, axis=1)
        self.weights = w / np.max(np.abs(w))
        # Exact for the panel degree: ceil((k + 1) / 2) Gauss nodes.
        self.quad_count = (nodes.size + 1) // 2 + 1

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = np.atleast_1d(t)
        out = np.empty(tt.shape)
        diff = tt[:, None] - self.nodes[None, :]
        exact = diff == 0.0
        hit = exact.any(axis=1)
        if np.any(hit):
            out[hit] = self.values[exact.argmax(axis=1)[hit]]
        rest = ~hit
        if np.any(rest):
            ratio = self.weights[None, :] / diff[rest]
            out[rest] = (ratio @ self.values) / ratio.sum(axis=1)
        return float(out[0]) if scalar else out

    def integrate(self, lo: float, hi: float) -> float:
        """Integral of the raw panel polynomial over [lo, hi], Gauss-exact."""
        if hi <= lo:
            return 0.0
        x, w = _gauss_nodes(self.quad_count)
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        return float(half * np.dot(w, self.eval(mid + half * x)))


class ApproxConditional:
    """Normalized 1D density from clamped interpolation of grid values.

    Internally the density is a list of segments delimited by the grid knots,
    the piecewise-constant midpoints, and any clamp crossings.  Linear
    segments invert in closed form; polynomial segments fall back to
    bracketed bisection on the exact CDF.
    """

    __slots__ = (
        "grid", "raw_values", "clamp", "scheme", "normalizer",
        "_brk", "_vlo", "_vhi", "_poly_id", "_cum", "_knots_u", "_panels",
        "_has_poly",
    )

    def __init__(self, grid, raw_values, clamp, scheme, brk, vlo, vhi, poly_id, panels):
        self.grid = grid
        self.raw_values = raw_values
        self.clamp = clamp
        self.scheme = scheme
        self._brk = brk
        self._vlo = vlo
        self._vhi = vhi
        self._poly_id = poly_id
        self._panels = panels
        self._has_poly = bool(panels)
        widths = np.diff(brk)
        mass = 0.5 * (vlo + vhi) * widths
        if panels:
            for j in np.nonzero(poly_id >= 0)[0]:
                mass[j] = panels[poly_id[j]].integrate(brk[j], brk[j + 1])
        if np.any(mass < 0):
            raise DegenerateConditionalError(
                "interpolant dips negative; clamping is required for this slice"
            )
        cum = np.concatenate(([0.0], np.cumsum(mass)))
        if cum[-1] <= 0.0:
            raise DegenerateConditionalError(
                "slice has zero mass and no clamp floor to normalize against"
            )
        self._cum = cum
        self.normalizer = float(cum[-1])
        self._knots_u = cum / self.normalizer

    @property
    def cdf_knots(self) -> np.ndarray:
        """Normalized CDF values at the internal breakpoints."""
        return self._knots_u

    @property
    def breakpoints(self) -> np.ndarray:
        return self._brk

    def _segment_of(self, t: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self._brk, t, side="right") - 1
        return np.clip(idx, 0, self._brk.size - 2)

    def density(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = np.atleast_1d(t)
        if np.any(tt < self._brk[0]) or np.any(tt > self._brk[-1]):
            raise DomainError("density evaluation outside the grid interval")
        idx = self._segment_of(tt)
        lo, hi = self._brk[idx], self._brk[idx + 1]
        s = (tt - lo) / (hi - lo)
        out = self._vlo[idx] * (1.0 - s) + self._vhi[idx] * s
        if self._has_poly:
            for j in np.nonzero(self._poly_id[idx] >= 0)[0]:
                panel = self._panels[self._poly_id[idx[j]]]
                v = panel.eval(tt[j])
                if self.clamp is not None:
                    v = min(max(v, self.clamp.epsilon), self.clamp.m)
                out[j] = v
        out /= self.normalizer
        return float(out[0]) if scalar else out

    def _partial_mass(self, idx: int, t: float) -> float:
        """Unnormalized mass of segment idx over [brk[idx], t]."""
        lo, hi = self._brk[idx], self._brk[idx + 1]
        pid = self._poly_id[idx] if self._has_poly else -1
        if pid >= 0:
            return self._panels[pid].integrate(lo, min(t, hi))
        dt = t - lo
        slope = (self._vhi[idx] - self._vlo[idx]) / (hi - lo)
        return dt * (self._vlo[idx] + 0.5 * slope * dt)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = np.atleast_1d(t)
        if np.any(tt < self._brk[0]) or np.any(tt > self._brk[-1]):
            raise DomainError("CDF evaluation outside the grid interval")
        idx = self._segment_of(tt)
        out = np.empty(tt.shape)
        for j in range(tt.size):
            out[j] = self._cum[idx[j]] + self._partial_mass(int(idx[j]), float(tt[j]))
        out = np.clip(out / self.normalizer, 0.0, 1.0)
        return float(out[0]) if scalar else out

    def ppf(self, u: float) -> float:
        """Inverse CDF; u = 0 and u = 1 map to the grid endpoints exactly.

        A u landing exactly on an internal CDF knot resolves to the left
        endpoint of the next segment.
        """
        if not 0.0 <= u <= 1.0:
            raise ValueError(f"u must lie in [0, 1], got {u}")
        if u == 0.0:
            return float(self._brk[0])
        if u == 1.0:
            return float(self._brk[-1])
        knots_u = self.cdf_knots
        idx = int(np.clip(np.searchsorted(knots_u, u, side="right") - 1,
                          0, self._brk.size - 2))
        lo, hi = float(self._brk[idx]), float(self._brk[idx + 1])
        m = (u - knots_u[idx]) * self.normalizer
        if m <= 0.0:
            return lo
        pid = self._poly_id[idx] if self._has_poly else -1
        if pid >= 0:
            panel = self._panels[pid]
            a, b = lo, hi
            while b - a > _POLY_PPF_TOL:
                mid = 0.5 * (a + b)
                if panel.integrate(lo, mid) < m:
                    a = mid
                else:
                    b = mid
            return 0.5 * (a + b)
        h = hi - lo
        vlo = float(self._vlo[idx])
        slope = (float(self._vhi[idx]) - vlo) / h
        seg_mass = float(self._cum[idx + 1] - self._cum[idx])
        if seg_mass <= 0.0:
            return lo
        if m >= seg_mass:
            return hi
        disc = vlo * vlo + 2.0 * slope * m
        if disc < 0.0:
            disc = 0.0
        denom = vlo + np.sqrt(disc)
        if denom <= 0.0:
            return lo
        s = 2.0 * m / denom
        return lo + min(max(s, 0.0), h)


def _clip_or_pass(values: np.ndarray, clamp: Optional[ClampBounds]) -> np.ndarray:
    if clamp is None:
        return values
    return np.clip(values, clamp.epsilon, clamp.m)


def _lerp_at(pts: np.ndarray, vals: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Linear interpolation that reproduces knot values bit-exactly."""
    idx = np.clip(np.searchsorted(pts, x, side="right") - 1, 0, pts.size - 2)
    s = (x - pts[idx]) / (pts[idx + 1] - pts[idx])
    out = vals[idx] * (1.0 - s) + vals[idx + 1] * s
    out[x == pts[-1]] = vals[-1]
    return out


def _level_cuts(pts: np.ndarray, vals: np.ndarray, level: float) -> np.ndarray:
    """Interior points where the piecewise-linear interpolant crosses level."""
    if level <= vals.min() or level >= vals.max():
        return np.empty(0)
    v0, v1 = vals[:-1], vals[1:]
    mask = (v0 - level) * (v1 - level) < 0.0
    if not np.any(mask):
        return np.empty(0)
    frac = (level - v0[mask]) / (v1[mask] - v0[mask])
    return pts[:-1][mask] + frac * np.diff(pts)[mask]


def _poly_cuts(panel: _Panel, level: float) -> list[float]:
    """Crossings of the panel polynomial with a clamp level, scan plus refine."""
    lo, hi = float(panel.nodes[0]), float(panel.nodes[-1])
    probes = np.linspace(lo, hi, 32 * panel.nodes.size + 1)
    vals = panel.eval(probes) - level
    cuts = []
    sign = np.sign(vals)
    flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    for j in flips:
        cuts.append(brentq(lambda t: panel.eval(t) - level,
                           probes[j], probes[j + 1], xtol=1e-14))
    cuts.extend(probes[1:-1][vals[1:-1] == 0.0].tolist())
    return cuts


def build_from_values(grid: Grid1D, raw_values: np.ndarray, scheme: InterpScheme,
                      clamp: Union[ClampBounds, RelativeClamp, None],
                      ) -> ApproxConditional:
    """Assemble the normalized conditional from precomputed knot values."""
    scheme = InterpScheme.parse(scheme)
    raw = np.asarray(raw_values, dtype=float)
    pts = grid.points
    if raw.shape != pts.shape:
        raise DomainError(
            f"expected {pts.size} values for the grid, got shape {raw.shape}"
        )
    if not np.all(np.isfinite(raw)) or np.any(raw < 0):
        raise DegenerateConditionalError("raw knot values must be finite and nonnegative")
    scheme.validate_for(grid.n)

    bounds: Optional[ClampBounds]
    if clamp is None:
        bounds = None
    else:
        bounds = clamp.resolve(float(raw.max()))

    panels: list[_Panel] = []

    if scheme.kind == "pc":
        # Nearest-knot constants: cells split at their midpoints.
        cv = _clip_or_pass(raw, bounds)
        mids = 0.5 * (pts[:-1] + pts[1:])
        brk = np.empty(2 * pts.size - 1)
        brk[0::2] = pts
        brk[1::2] = mids
        seg_vals = np.repeat(cv, 2)[1:-1]
        vlo = seg_vals
        vhi = seg_vals.copy()
        poly_id = np.full(brk.size - 1, -1, dtype=np.int64)
    elif scheme.kind == "pl":
        if bounds is None or (raw.min() >= bounds.epsilon and raw.max() <= bounds.m):
            brk = pts
            vals = _clip_or_pass(raw, bounds)
        else:
            cuts = np.concatenate([
                _level_cuts(pts, raw, bounds.epsilon),
                _level_cuts(pts, raw, bounds.m),
            ])
            brk = np.unique(np.concatenate([pts, cuts]))
            vals = np.clip(_lerp_at(pts, raw, brk), bounds.epsilon, bounds.m)
        vlo = vals[:-1]
        vhi = vals[1:]
        poly_id = np.full(brk.size - 1, -1, dtype=np.int64)
    else:
        k = scheme.order
        brk_list: list[np.ndarray] = []
        vlo_l: list[float] = []
        vhi_l: list[float] = []
        pid_l: list[int] = []
        for p0 in range(0, pts.size - 1, k):
            nodes = pts[p0:p0 + k + 1]
            panel = _Panel(nodes, raw[p0:p0 + k + 1])
            pid = len(panels)
            panels.append(panel)
            cuts: list[float] = []
            if bounds is not None:
                cuts = _poly_cuts(panel, bounds.epsilon) + _poly_cuts(panel, bounds.m)
            sub = np.unique(np.concatenate([nodes, np.asarray(cuts)]))
            for lo, hi in zip(sub[:-1], sub[1:]):
                mid_val = panel.eval(0.5 * (lo + hi))
                if bounds is not None and mid_val < bounds.epsilon:
                    vlo_l.append(bounds.epsilon)
                    vhi_l.append(bounds.epsilon)
                    pid_l.append(-1)
                elif bounds is not None and mid_val > bounds.m:
                    vlo_l.append(bounds.m)
                    vhi_l.append(bounds.m)
                    pid_l.append(-1)
                else:
                    lo_val = panel.eval(float(lo))
                    hi_val = panel.eval(float(hi))
                    if bounds is not None:
                        lo_val = min(max(lo_val, bounds.epsilon), bounds.m)
                        hi_val = min(max(hi_val, bounds.epsilon), bounds.m)
                    vlo_l.append(lo_val)
                    vhi_l.append(hi_val)
                    pid_l.append(pid)
                brk_list.append(lo)
        brk_list.append(pts[-1])
        brk = np.asarray(brk_list)
        vlo = np.asarray(vlo_l)
        vhi = np.asarray(vhi_l)
        poly_id = np.asarray(pid_l, dtype=np.int64)

    return ApproxConditional(grid, raw, bounds, scheme, brk,
                             np.asarray(vlo, dtype=float),
                             np.asarray(vhi, dtype=float),
                             poly_id, panels)


def build_conditional(target, axis: int, fixed: np.ndarray, grid: Grid1D,
                      scheme: Union[InterpScheme, str] = "pl",
                      clamp: Union[ClampBounds, RelativeClamp, None] = RelativeClamp(),
                      ) -> ApproxConditional:
    """Evaluate the target along one axis and build the conditional.

    Exactly grid.n target evaluations are performed.  The grid must span the
    domain's axis interval; no extrapolation is allowed.
    """
    dim = target.domain.dim
    if not 0 <= axis < dim:
        raise DomainError(f"axis {axis} out of range for dimension {dim}")
    lo, hi = target.domain.interval(axis)
    scale = max(abs(lo), abs(hi), 1.0)
    if abs(grid.a - lo) > 1e-12 * scale or abs(grid.b - hi) > 1e-12 * scale:
        raise GridMismatchError(
            f"grid [{grid.a}, {grid.b}] does not span axis interval [{lo}, {hi}]"
        )
    fixed = np.asarray(fixed, dtype=float)
    if fixed.shape != (dim,):
        raise DomainError(f"fixed point must have shape ({dim},), got {fixed.shape}")
    pts = np.repeat(fixed[None, :], grid.n, axis=0)
    pts[:, axis] = grid.points
    raw = target.evaluate(pts)
    return build_from_values(grid, raw, InterpScheme.parse(scheme), clamp)


def eval_density(cond: ApproxConditional, t):
    """Normalized density of the built conditional at t."""
    return cond.density(t)


def eval_cdf(cond: ApproxConditional, t):
    """CDF of the built conditional at t."""
    return cond.cdf(t)


def sample_inverse_cdf(cond: ApproxConditional, u: float) -> float:
    """Deterministic inverse-transform draw from the built conditional."""
    return cond.ppf(u)
