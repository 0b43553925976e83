"""Target densities on box domains.

A target is an unnormalized density on an axis-aligned box, evaluated in
batches.  Targets may optionally carry closed-form extras (exact axis
conditionals, marginal and joint CDFs) that samplers and diagnostics use when
available; everything else works from batch evaluation alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, EvaluationError, DegenerateConditionalError

__all__ = [
    "BoxDomain",
    "TargetDensity",
    "TruncationSpec",
    "beta_mixture_2d",
    "piecewise_linear_density",
    "residual_posterior",
    "linear_trend_model",
    "truncate",
]


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box, stored as per-axis lower/upper bounds."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(hi) or not lo:
            raise DomainError("lower and upper must be nonempty and equal length")
        for a, b in zip(lo, hi):
            if not (np.isfinite(a) and np.isfinite(b) and a < b):
                raise DomainError(f"invalid axis interval [{a}, {b}]")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        out = 1.0
        for a, b in zip(self.lower, self.upper):
            out *= b - a
        return out

    def interval(self, axis: int) -> tuple[float, float]:
        return self.lower[axis], self.upper[axis]

    def center(self) -> np.ndarray:
        return 0.5 * (np.array(self.lower) + np.array(self.upper))

    def contains(self, point: np.ndarray) -> bool:
        p = np.asarray(point, dtype=float)
        if p.shape != (self.dim,):
            return False
        return bool(np.all(p >= self.lower) and np.all(p <= self.upper))


@dataclass(frozen=True)
class TruncationSpec:
    """Half-width and tail-control constants for truncating an unbounded density.

    Either the pair (c1, c2) is given directly, or it is derived from (c3, c4)
    as c1 = sqrt(c3 * c4**p) and c2 = 1 + c4 once the norm index p is known.
    With no constants at all, truncation still works but tail terms are
    unavailable.
    """

    t: float
    c1: Optional[float] = None
    c2: Optional[float] = None
    c3: Optional[float] = None
    c4: Optional[float] = None

    def __post_init__(self) -> None:
        if not (np.isfinite(self.t) and self.t > 0):
            raise DomainError(f"truncation half-width must be positive, got {self.t}")
        # c1 = c2 = 0 encodes a compactly supported density (no tail mass);
        # the derived pair (c3, c4) has no such degenerate reading.
        for name in ("c1", "c2"):
            v = getattr(self, name)
            if v is not None and not (np.isfinite(v) and v >= 0):
                raise DomainError(f"constant {name} must be nonnegative, got {v}")
        for name in ("c3", "c4"):
            v = getattr(self, name)
            if v is not None and not (np.isfinite(v) and v > 0):
                raise DomainError(f"constant {name} must be positive, got {v}")

    def has_constants(self) -> bool:
        return (self.c1 is not None and self.c2 is not None) or (
            self.c3 is not None and self.c4 is not None
        )

    def resolve_constants(self, p: float) -> tuple[float, float]:
        """Resolved (C1, C2) for norm index p; explicit values win."""
        if self.c1 is not None and self.c2 is not None:
            return float(self.c1), float(self.c2)
        if self.c3 is not None and self.c4 is not None:
            return float(np.sqrt(self.c3 * self.c4**p)), 1.0 + float(self.c4)
        raise DomainError("tail constants unavailable: supply (c1, c2) or (c3, c4)")

    def tail_terms(self, p: float, lp_norm: float) -> Optional[tuple[float, float]]:
        """Cap and tail error terms for a density with the given L^p norm.

        Returns None when no constants were supplied.  Both terms scale as
        1/t, so enlarging the box strictly tightens them.
        """
        if not self.has_constants():
            return None
        if not (np.isfinite(lp_norm) and lp_norm > 0):
            raise DomainError(f"lp_norm must be positive, got {lp_norm}")
        c1, c2 = self.resolve_constants(p)
        return c2 / (2.0 * self.t) * lp_norm, c1 / (self.t * lp_norm)


@dataclass(frozen=True)
class TargetDensity:
    """Unnormalized density on a box, with optional closed-form extras.

    density_fn maps a (k, d) batch of points to (k,) nonnegative values.
    exact_conditional(axis, fixed) returns an object with density/cdf/ppf for
    the 1D conditional along `axis` given the other coordinates of `fixed`.
    marginal_cdf(axis, t) and joint_cdf(ax, ay) are normalized reference CDFs;
    joint_cdf evaluates on the outer grid of its two argument vectors.
    """

    domain: BoxDomain
    density_fn: Callable[[np.ndarray], np.ndarray]
    label: str = "target"
    exact_conditional: Optional[Callable[[int, np.ndarray], object]] = None
    marginal_cdf: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    joint_cdf: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    tail_bound: Optional[TruncationSpec] = None

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[1] != self.domain.dim:
            raise DomainError(
                f"expected points of dimension {self.domain.dim}, got shape {pts.shape}"
            )
        vals = np.asarray(self.density_fn(pts), dtype=float)
        if vals.shape != (pts.shape[0],):
            raise EvaluationError(
                f"target '{self.label}' returned shape {vals.shape} for {pts.shape[0]} points"
            )
        if not np.all(np.isfinite(vals)):
            bad = pts[~np.isfinite(vals)][0]
            raise EvaluationError(f"target '{self.label}' is non-finite at {bad.tolist()}")
        if np.any(vals < 0.0):
            bad = pts[vals < 0.0][0]
            raise EvaluationError(f"target '{self.label}' is negative at {bad.tolist()}")
        return float(vals[0]) if single else vals


# Shifted beta building blocks on z = (t + 1) / 2, z in [0, 1].
# Beta(2, 5) has density 30 z (1-z)^4 and Beta(2, 2) has density 6 z (1-z);
# their CDFs reduce to the polynomials below.


def _beta25_pdf(z):
    return 30.0 * z * (1.0 - z) ** 4


def _beta22_pdf(z):
    return 6.0 * z * (1.0 - z)


def _beta25_cdf(z):
    return 1.0 - (1.0 - z) ** 5 * (1.0 + 5.0 * z)


def _beta22_cdf(z):
    return z * z * (3.0 - 2.0 * z)


class BetaMixtureConditional:
    """1D conditional of the beta mixture: a two-component beta mix on [-1, 1].

    Weights are the other coordinate's component densities, so the mixture
    proportions shift along the conditioning axis.
    """

    __slots__ = ("w1", "w2")

    def __init__(self, w1: float, w2: float):
        if w1 < 0 or w2 < 0 or w1 + w2 <= 0:
            raise DegenerateConditionalError(
                f"conditional weights degenerate: w1={w1}, w2={w2}"
            )
        self.w1 = float(w1)
        self.w2 = float(w2)

    def density(self, t):
        z = 0.5 * (np.asarray(t, dtype=float) + 1.0)
        out = (self.w1 * _beta25_pdf(z) + self.w2 * _beta22_pdf(z)) / (
            2.0 * (self.w1 + self.w2)
        )
        return out if out.ndim else float(out)

    def cdf(self, t):
        z = 0.5 * (np.asarray(t, dtype=float) + 1.0)
        out = (self.w1 * _beta25_cdf(z) + self.w2 * _beta22_cdf(z)) / (self.w1 + self.w2)
        return out if out.ndim else float(out)

    def ppf(self, u: float) -> float:
        if not 0.0 <= u <= 1.0:
            raise ValueError(f"u must lie in [0, 1], got {u}")
        if u == 0.0:
            return -1.0
        if u == 1.0:
            return 1.0
        w1, w2, wsum = self.w1, self.w2, self.w1 + self.w2

        def shifted(t: float) -> float:
            z = 0.5 * (t + 1.0)
            omz = 1.0 - z
            i25 = 1.0 - omz**5 * (1.0 + 5.0 * z)
            i22 = z * z * (3.0 - 2.0 * z)
            return (w1 * i25 + w2 * i22) / wsum - u

        return brentq(shifted, -1.0, 1.0, xtol=1e-14, rtol=8.881784197001252e-16)


def beta_mixture_2d() -> TargetDensity:
    """Equal-weight mixture of two product-beta components on [-1, 1]^2.

    Component 1 is Beta(2, 5) x Beta(2, 5) and component 2 is Beta(2, 2) x
    Beta(2, 2), both mapped affinely from [0, 1] to [-1, 1] per axis (the
    0.25 factor below is the Jacobian of that map, keeping total mass 1).
    The first-coordinate mean is -3/14 exactly, which makes the target a
    handy end-to-end estimator check.
    """
    domain = BoxDomain((-1.0, -1.0), (1.0, 1.0))

    def density(points: np.ndarray) -> np.ndarray:
        z = 0.5 * (points + 1.0)
        zx, zy = z[:, 0], z[:, 1]
        return 0.125 * (
            _beta25_pdf(zx) * _beta25_pdf(zy) + _beta22_pdf(zx) * _beta22_pdf(zy)
        )

    def exact_conditional(axis: int, fixed: np.ndarray) -> BetaMixtureConditional:
        other = float(fixed[1 - axis])
        z = 0.5 * (other + 1.0)
        return BetaMixtureConditional(_beta25_pdf(z), _beta22_pdf(z))

    def marginal_cdf(axis: int, t) -> np.ndarray:
        z = 0.5 * (np.asarray(t, dtype=float) + 1.0)
        return 0.5 * (_beta25_cdf(z) + _beta22_cdf(z))

    def joint_cdf(ax, ay) -> np.ndarray:
        za = 0.5 * (np.atleast_1d(np.asarray(ax, dtype=float)) + 1.0)
        zb = 0.5 * (np.atleast_1d(np.asarray(ay, dtype=float)) + 1.0)
        return 0.5 * (
            np.outer(_beta25_cdf(za), _beta25_cdf(zb))
            + np.outer(_beta22_cdf(za), _beta22_cdf(zb))
        )

    return TargetDensity(
        domain=domain,
        density_fn=density,
        label="beta-mixture-2d",
        exact_conditional=exact_conditional,
        marginal_cdf=marginal_cdf,
        joint_cdf=joint_cdf,
    )


def _validate_knots(knots: np.ndarray, what: str) -> np.ndarray:
    k = np.asarray(knots, dtype=float)
    if k.ndim != 1 or k.size < 2:
        raise DomainError(f"{what} needs at least two knots")
    if not np.all(np.isfinite(k)) or np.any(np.diff(k) <= 0):
        raise DomainError(f"{what} knots must be finite and strictly increasing")
    return k


def piecewise_linear_density(knots, table, label: str = "piecewise-linear"):
    """Multilinear table density: linear along every axis line (d = 1 or 2).

    The exact conditional along an axis is the piecewise-linear function
    through the table slice, built with the same machinery the grid sampler
    uses; a grid sampler whose knots match therefore reproduces this target
    without approximation error.
    """
    from .conditional import Grid1D, InterpScheme, build_from_values

    table = np.asarray(table, dtype=float)
    if table.ndim == 1:
        if isinstance(knots, (list, tuple)) and len(knots) == 1:
            knots = knots[0]
        axes = [_validate_knots(knots, "axis 0")]
    elif table.ndim == 2:
        if not isinstance(knots, (list, tuple)) or len(knots) != 2:
            raise DomainError("2D table needs a pair of knot vectors")
        axes = [_validate_knots(knots[i], f"axis {i}") for i in range(2)]
    else:
        raise DomainError(f"only 1D and 2D tables supported, got ndim={table.ndim}")
    for i, ax in enumerate(axes):
        if ax.size != table.shape[i]:
            raise DomainError(
                f"axis {i} has {ax.size} knots but table extent {table.shape[i]}"
            )
    if not np.all(np.isfinite(table)) or np.any(table < 0):
        raise DomainError("table values must be finite and nonnegative")
    if table.max() <= 0:
        raise DomainError("table must have positive mass")

    dim = table.ndim
    domain = BoxDomain(
        tuple(ax[0] for ax in axes), tuple(ax[-1] for ax in axes)
    )
    pl = InterpScheme.parse("pl")

    def _locate(ax: np.ndarray, x: np.ndarray):
        idx = np.clip(np.searchsorted(ax, x, side="right") - 1, 0, ax.size - 2)
        s = (x - ax[idx]) / (ax[idx + 1] - ax[idx])
        return idx, s

    if dim == 1:
        k0 = axes[0]

        def density(points: np.ndarray) -> np.ndarray:
            idx, s = _locate(k0, points[:, 0])
            return table[idx] * (1.0 - s) + table[idx + 1] * s

    else:
        kx, ky = axes

        def density(points: np.ndarray) -> np.ndarray:
            ix, sx = _locate(kx, points[:, 0])
            iy, sy = _locate(ky, points[:, 1])
            return (
                table[ix, iy] * (1.0 - sx) * (1.0 - sy)
                + table[ix + 1, iy] * sx * (1.0 - sy)
                + table[ix, iy + 1] * (1.0 - sx) * sy
                + table[ix + 1, iy + 1] * sx * sy
            )

    target_holder: list[TargetDensity] = []

    def exact_conditional(axis: int, fixed: np.ndarray):
        ax = axes[axis]
        pts = np.repeat(np.asarray(fixed, dtype=float)[None, :], ax.size, axis=0)
        pts[:, axis] = ax
        vals = target_holder[0].evaluate(pts)
        return build_from_values(Grid1D(ax), vals, pl, clamp=None)

    def marginal_cdf(axis: int, t) -> np.ndarray:
        ax = axes[axis]
        if dim == 1:
            vals = table
        else:
            vals = np.trapezoid(table, axes[1 - axis], axis=1 - axis)
        cond = build_from_values(Grid1D(ax), vals, pl, clamp=None)
        return cond.cdf(t)

    joint = None
    if dim == 2:
        kx, ky = axes
        hx, hy = np.diff(kx), np.diff(ky)
        # Exact cell masses of the bilinear interpolant: corner average x area.
        corner4 = table[:-1, :-1] + table[1:, :-1] + table[:-1, 1:] + table[1:, 1:]
        cell = 0.25 * corner4 * np.outer(hx, hy)
        cum = np.zeros((kx.size, ky.size))
        cum[1:, 1:] = np.cumsum(np.cumsum(cell, axis=0), axis=1)
        total = cum[-1, -1]

        def joint(ax_vals, ay_vals) -> np.ndarray:
            a = np.atleast_1d(np.asarray(ax_vals, dtype=float))
            b = np.atleast_1d(np.asarray(ay_vals, dtype=float))
            ix, sx = _locate(kx, a)
            iy, sy = _locate(ky, b)
            # Antiderivatives over the local coordinate: A weighs the lower
            # corner pair, B the upper.
            ax_lo, ax_hi = sx - 0.5 * sx * sx, 0.5 * sx * sx
            ay_lo, ay_hi = sy - 0.5 * sy * sy, 0.5 * sy * sy
            # Complete cells below and to the left of the partial cell.
            full = cum[np.ix_(ix, iy)]
            # Partial strip over complete y-cells at the x fringe.
            t_lo = (table[ix, :-1] + table[ix, 1:]) * hy  # (P, ny-1)
            t_hi = (table[ix + 1, :-1] + table[ix + 1, 1:]) * hy
            strip_x = 0.5 * (ax_lo[:, None] * t_lo + ax_hi[:, None] * t_hi)
            strip_x *= hx[ix][:, None]
            cum_x = np.concatenate(
                [np.zeros((a.size, 1)), np.cumsum(strip_x, axis=1)], axis=1
            )
            # Partial strip over complete x-cells at the y fringe.
            u_lo = (table[:-1, iy] + table[1:, iy]) * hx[:, None]  # (nx-1, Q)
            u_hi = (table[:-1, iy + 1] + table[1:, iy + 1]) * hx[:, None]
            strip_y = 0.5 * (u_lo * ay_lo[None, :] + u_hi * ay_hi[None, :])
            strip_y *= hy[iy][None, :]
            cum_y = np.concatenate(
                [np.zeros((1, b.size)), np.cumsum(strip_y, axis=0)], axis=0
            )
            # Corner cell, integrated bilinear over [0, sx] x [0, sy].
            t00 = table[np.ix_(ix, iy)]
            t10 = table[np.ix_(ix + 1, iy)]
            t01 = table[np.ix_(ix, iy + 1)]
            t11 = table[np.ix_(ix + 1, iy + 1)]
            corner = (
                np.outer(ax_lo, ay_lo) * t00
                + np.outer(ax_hi, ay_lo) * t10
                + np.outer(ax_lo, ay_hi) * t01
                + np.outer(ax_hi, ay_hi) * t11
            ) * np.outer(hx[ix], hy[iy])
            return (full + cum_x[:, iy] + cum_y[ix, :] + corner) / total

    target = TargetDensity(
        domain=domain,
        density_fn=density,
        label=label,
        exact_conditional=exact_conditional,
        marginal_cdf=marginal_cdf,
        joint_cdf=joint,
    )
    target_holder.append(target)
    return target


def linear_trend_model(params: np.ndarray, t: float) -> np.ndarray:
    """Two-parameter synthetic response: intercept plus slope times time."""
    return params[:, 0] + params[:, 1] * t


def load_time_series_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Read (time, value) pairs from a two-column CSV with a header row."""
    import csv

    times: list[float] = []
    values: list[float] = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or len(header) != 2:
            raise DomainError(f"{path}: expected a two-column header row")
        try:
            float(header[0])
        except ValueError:
            pass
        else:
            raise DomainError(f"{path}: first row must be a header, got numbers")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DomainError(f"{path}:{lineno}: expected two columns")
            try:
                times.append(float(row[0]))
                values.append(float(row[1]))
            except ValueError as exc:
                raise DomainError(f"{path}:{lineno}: {exc}") from None
    if not times:
        raise DomainError(f"{path}: no data rows")
    return np.asarray(times), np.asarray(values)


def residual_posterior(model, times, values, domain: BoxDomain,
                       label: str = "residual-posterior") -> TargetDensity:
    """Posterior-style density exp(-sum of squared residuals) on a box.

    model(params, t) maps a (k, d) parameter batch and a scalar time to (k,)
    predicted values.  No closed-form conditionals exist, so only grid-based
    samplers apply.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.ndim != 1 or times.shape != values.shape or times.size == 0:
        raise DomainError("times and values must be equal-length nonempty vectors")
    if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
        raise DomainError("times and values must be finite")

    def density(points: np.ndarray) -> np.ndarray:
        sse = np.zeros(points.shape[0])
        for t, v in zip(times, values):
            pred = np.asarray(model(points, float(t)), dtype=float)
            if pred.shape != (points.shape[0],):
                raise EvaluationError(
                    f"model returned shape {pred.shape} at time {t}"
                )
            if not np.all(np.isfinite(pred)):
                bad = points[~np.isfinite(pred)][0]
                raise EvaluationError(
                    f"model is non-finite at time {t}, parameters {bad.tolist()}"
                )
            r = pred - v
            sse += r * r
        return np.exp(-sse)

    return TargetDensity(domain=domain, density_fn=density, label=label)


def truncate(density_fn: Callable[[np.ndarray], np.ndarray], dim: int,
             spec: TruncationSpec, label: str = "truncated") -> TargetDensity:
    """Restrict a density on R^d to the centered box of half-width spec.t.

    Values inside the box are passed through unchanged; mass outside is
    discarded.  The spec rides along on the result so downstream error
    reports can assemble tail terms.
    """
    if dim < 1:
        raise DomainError(f"dimension must be positive, got {dim}")
    t = float(spec.t)
    domain = BoxDomain((-t,) * dim, (t,) * dim)
    return TargetDensity(
        domain=domain,
        density_fn=density_fn,
        label=label,
        tail_bound=spec,
    )
