"""Chain diagnostics: ECDF distances to reference CDFs, the grid-size
convergence study, and autocorrelation summaries.

Everything here is a pure function of chain output and closed-form reference
CDFs; sampling quality is always judged through CDFs, never through density
estimates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .conditional import ClampBounds, Grid1D, InterpScheme, RelativeClamp
from .errors import GriddyError, UnsupportedTargetError, ZeroVarianceError
from .samplers import ChainConfig, ChainOutput, gibbs_chain, griddy_chain
from .targets import TargetDensity

__all__ = [
    "EcdfTable",
    "AcfSeries",
    "StudyRow",
    "StudyResult",
    "ecdf",
    "cdf_distance",
    "autocorrelation",
    "grid_convergence_study",
]


class EcdfTable:
    """Right-continuous empirical CDF of a 1D or 2D sample set.

    Calling the table evaluates F-hat at points; ``evaluate_grid`` fills the
    outer grid of probe axes in O(N + P*Q) using cumulative bin counts.
    """

    __slots__ = ("samples", "sorted_axes", "n_samples")

    def __init__(self, samples: np.ndarray):
        samples = np.asarray(samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2 or samples.shape[0] == 0:
            raise GriddyError("ecdf needs a nonempty (n,) or (n, d) sample array")
        if samples.shape[1] not in (1, 2):
            raise GriddyError(f"ecdf supports 1 or 2 columns, got {samples.shape[1]}")
        if not np.all(np.isfinite(samples)):
            raise GriddyError("ecdf samples must be finite")
        self.samples = samples
        self.sorted_axes = tuple(
            np.sort(samples[:, j]) for j in range(samples.shape[1])
        )
        self.n_samples = samples.shape[0]

    @property
    def dim(self) -> int:
        return len(self.sorted_axes)

    def marginal(self, axis: int) -> "EcdfTable":
        return EcdfTable(self.samples[:, axis])

    def __call__(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if self.dim == 1:
            t = points if points.ndim else points[None]
            out = np.searchsorted(self.sorted_axes[0], t, side="right") / self.n_samples
            return out if points.ndim else float(out[0])
        pts = points[None, :] if points.ndim == 1 else points
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise GriddyError(f"expected points with 2 columns, got shape {points.shape}")
        x, y = self.samples[:, 0], self.samples[:, 1]
        out = np.array([
            np.count_nonzero((x <= a) & (y <= b)) for a, b in pts
        ]) / self.n_samples
        return float(out[0]) if points.ndim == 1 else out

    def evaluate_grid(self, *axes: np.ndarray) -> np.ndarray:
        if len(axes) != self.dim:
            raise GriddyError(f"expected {self.dim} probe axes, got {len(axes)}")
        if self.dim == 1:
            return self(np.asarray(axes[0], dtype=float))
        ax = np.asarray(axes[0], dtype=float)
        ay = np.asarray(axes[1], dtype=float)
        # Bucket each sample by the first probe >= it on each axis; samples
        # beyond the last probe never enter the cumulative count.
        ci = np.searchsorted(ax, self.samples[:, 0], side="left")
        cj = np.searchsorted(ay, self.samples[:, 1], side="left")
        keep = (ci < ax.size) & (cj < ay.size)
        counts = np.zeros((ax.size, ay.size))
        np.add.at(counts, (ci[keep], cj[keep]), 1.0)
        return counts.cumsum(axis=0).cumsum(axis=1) / self.n_samples


def ecdf(samples: np.ndarray) -> EcdfTable:
    """Empirical CDF table of samples given as (n,) values or (n, d) columns."""
    return EcdfTable(samples)


def _probe_axis(lo: float, hi: float, count: int) -> np.ndarray:
    return np.linspace(lo, hi, count)


def cdf_distance(table: EcdfTable, reference: Callable, p: float,
                 probe_count: Optional[int] = None,
                 probe_range: Optional[Sequence[tuple[float, float]]] = None,
                 ) -> float:
    """Distance between an ECDF and a reference CDF in the p = 2 or sup norm.

    1D references map a value array to CDF values; 2D references map two probe
    axes to the CDF on their outer grid.  The sup norm is exact in 1D (both
    one-sided limits at every jump); in 2D both norms are probed on a grid,
    256 points per axis by default.  probe_range defaults to the sample range,
    which contains the sup for any monotone reference.
    """
    if probe_count is None:
        probe_count = 512 if table.dim == 1 else 256
    if probe_count < 100:
        raise GriddyError(f"probe_count must be at least 100, got {probe_count}")
    if not (p == 2 or np.isinf(p)):
        raise GriddyError(f"cdf_distance supports p in {{2, inf}}, got {p}")
    if probe_range is None:
        probe_range = [
            (s[0], s[-1]) for s in table.sorted_axes
        ]
    elif len(probe_range) != table.dim:
        raise GriddyError(
            f"probe_range needs {table.dim} intervals, got {len(probe_range)}"
        )

    if table.dim == 1:
        s = table.sorted_axes[0]
        n = table.n_samples
        ref_at_jumps = np.asarray(reference(s), dtype=float)
        upper = np.arange(1, n + 1) / n
        lower = np.arange(0, n) / n
        probes = _probe_axis(*probe_range[0], probe_count)
        diff = table(probes) - np.asarray(reference(probes), dtype=float)
        if np.isinf(p):
            return float(max(
                np.max(np.abs(upper - ref_at_jumps)),
                np.max(np.abs(lower - ref_at_jumps)),
                np.max(np.abs(diff)),
            ))
        return float(np.sqrt(np.trapezoid(diff * diff, probes)))

    ax = _probe_axis(*probe_range[0], probe_count)
    ay = _probe_axis(*probe_range[1], probe_count)
    diff = table.evaluate_grid(ax, ay) - np.asarray(reference(ax, ay), dtype=float)
    if np.isinf(p):
        return float(np.max(np.abs(diff)))
    inner = np.trapezoid(diff * diff, ay, axis=1)
    return float(np.sqrt(np.trapezoid(inner, ax)))


@dataclass(frozen=True)
class AcfSeries:
    """Autocorrelation coefficients by lag with the integrated time."""

    lags: np.ndarray
    values: np.ndarray
    iat: float


def autocorrelation(out: Union[ChainOutput, np.ndarray], coordinate: int = 0,
                    max_lag: Optional[int] = None) -> AcfSeries:
    """Biased-normalized ACF of one chain coordinate, with IAT.

    The IAT sums 1 + 2 rho(l) over lags up to (and excluding) the first
    negative coefficient.
    """
    samples = out.samples if isinstance(out, ChainOutput) else np.asarray(out, float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if not 0 <= coordinate < samples.shape[1]:
        raise GriddyError(
            f"coordinate {coordinate} out of range for {samples.shape[1]} columns"
        )
    x = samples[:, coordinate]
    n = x.size
    if max_lag is None:
        max_lag = min(max(n // 10 - 1, 1), 1000)
    if not 1 <= max_lag < n / 10:
        raise GriddyError(f"max_lag must be in [1, n/10), got {max_lag} for n = {n}")

    centered = x - x.mean()
    scale = max(1.0, float(np.max(np.abs(x))))
    if float(centered @ centered) / n <= (1e-12 * scale) ** 2:
        raise ZeroVarianceError(
            "chain coordinate is constant; autocorrelation is undefined"
        )
    m = 1 << int(2 * n - 1).bit_length()
    f = np.fft.rfft(centered, m)
    acov = np.fft.irfft(f * np.conj(f), m)[: max_lag + 1] / n
    rho = np.clip(acov / acov[0], -1.0, 1.0)
    rho[0] = 1.0

    iat = 1.0
    for lag in range(1, max_lag + 1):
        if rho[lag] < 0.0:
            break
        iat += 2.0 * rho[lag]
    return AcfSeries(lags=np.arange(max_lag + 1), values=rho, iat=float(iat))


@dataclass(frozen=True)
class StudyRow:
    """Errors of one chain run against the closed-form reference CDFs."""

    grid_size: int
    marginal_sup: float
    marginal_l2: float
    joint_sup: float
    joint_l2: float
    target_eval_count: int


@dataclass(frozen=True)
class StudyResult:
    """Grid-size convergence table with its Monte Carlo floor and fit."""

    rows: tuple[StudyRow, ...]
    floor: StudyRow
    slope_marginal_sup: float
    pre_floor_sizes: tuple[int, ...]
    n_steps: int
    seed: int
    scheme: str
    replicates: int


def _chain_errors(output: ChainOutput, target: TargetDensity,
                  marginal_axis: int, probe_marginal: int, probe_joint: int,
                  ) -> tuple[float, float, float, float]:
    domain = target.domain
    table = ecdf(output.samples)
    marg = table.marginal(marginal_axis)

    def ref_marginal(t):
        return target.marginal_cdf(marginal_axis, t)

    span = [domain.interval(marginal_axis)]
    msup = cdf_distance(marg, ref_marginal, np.inf, probe_marginal, span)
    ml2 = cdf_distance(marg, ref_marginal, 2, probe_marginal, span)
    if domain.dim == 1:
        return msup, ml2, msup, ml2
    span2 = [domain.interval(0), domain.interval(1)]
    jsup = cdf_distance(table, target.joint_cdf, np.inf, probe_joint, span2)
    jl2 = cdf_distance(table, target.joint_cdf, 2, probe_joint, span2)
    return msup, ml2, jsup, jl2


def grid_convergence_study(target: TargetDensity,
                           grid_sizes: Sequence[int],
                           n_steps: int,
                           seed: int,
                           scheme: Union[InterpScheme, str] = "pl",
                           clamp: Union[ClampBounds, RelativeClamp, None] = RelativeClamp(),
                           replicates: int = 1,
                           marginal_axis: int = 0,
                           probe_marginal: int = 512,
                           probe_joint: int = 256,
                           ) -> StudyResult:
    """ECDF error of the grid sampler per grid size, with an exact-conditional
    reference run at the same chain length as the Monte Carlo floor.

    The pre-floor regime collects the leading grid sizes whose marginal sup
    error exceeds three times the floor; the reported slope is the least
    squares fit of log error against log grid size over that regime.
    """
    if target.marginal_cdf is None or (target.domain.dim == 2 and target.joint_cdf is None):
        raise UnsupportedTargetError(
            f"target '{target.label}' has no closed-form reference CDFs"
        )
    sizes = [int(n) for n in grid_sizes]
    if not sizes or any(n < 2 for n in sizes):
        raise GriddyError(f"grid sizes must all be at least 2, got {sizes}")
    if replicates < 1:
        raise GriddyError(f"replicates must be positive, got {replicates}")
    scheme = InterpScheme.parse(scheme)
    domain = target.domain

    def averaged(run_one) -> tuple[np.ndarray, int]:
        errs = np.zeros(4)
        evals = 0
        for r in range(replicates):
            output = run_one(seed + r)
            errs += np.array(_chain_errors(
                output, target, marginal_axis, probe_marginal, probe_joint
            ))
            evals += output.target_eval_count
        return errs / replicates, evals

    floor_errs, floor_evals = averaged(
        lambda s: gibbs_chain(target, ChainConfig(n_steps=n_steps, seed=s))
    )
    floor = StudyRow(0, *map(float, floor_errs), floor_evals)

    rows = []
    for n in sizes:
        grids = [Grid1D.uniform(*domain.interval(i), n) for i in range(domain.dim)]
        row_errs, row_evals = averaged(
            lambda s: griddy_chain(
                target, grids, ChainConfig(n_steps=n_steps, seed=s), scheme, clamp
            )
        )
        rows.append(StudyRow(n, *map(float, row_errs), row_evals))

    pre_floor = []
    for row in rows:
        if row.marginal_sup > 3.0 * floor.marginal_sup:
            pre_floor.append(row)
        else:
            break
    if len(pre_floor) >= 2:
        logs = np.log([r.grid_size for r in pre_floor])
        errs = np.log([r.marginal_sup for r in pre_floor])
        slope = float(np.polyfit(logs, errs, 1)[0])
    else:
        slope = float("nan")

    return StudyResult(
        rows=tuple(rows),
        floor=floor,
        slope_marginal_sup=slope,
        pre_floor_sizes=tuple(r.grid_size for r in pre_floor),
        n_steps=n_steps,
        seed=seed,
        scheme=str(scheme),
        replicates=replicates,
    )
