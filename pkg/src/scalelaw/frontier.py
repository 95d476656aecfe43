"""Compute-efficient frontier: envelope of loss-vs-FLOPs curves across model
sizes, per-model optimal-compute points, and the power laws tying loss,
parameters, tokens, steps, and batch size to compute.

The N and S laws are regressed freely; D and B are derived from them so the
identities C = 6*N*D and D = S*B hold exactly in the reported law set.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    EmptyEnvelopeError,
    InsufficientDataError,
    InsufficientFrontierError,
    ValidationError,
)
from .runlog import FLOPS_PER_PARAM_TOKEN, RunSet, smooth_run

GRID_POINTS_PER_DECADE = 64
# heavier smoothing than the per-run default: envelope winners are decided
# by shallow crossings between adjacent model sizes, where raw checkpoint
# noise flips the winner back and forth
ENVELOPE_HALF_LIFE_FRACTION = 0.05


@dataclass(frozen=True)
class PowerLaw:
    """y = k * x^p with the regressor range the fit actually covered."""

    k: float
    p: float
    x_min: float
    x_max: float

    def __post_init__(self) -> None:
        if self.k <= 0:
            raise ValidationError(f"coefficient must be positive, got {self.k}")
        if not 0 < self.x_min <= self.x_max:
            raise ValidationError("need 0 < x_min <= x_max")

    def __call__(self, x):
        x_arr = np.asarray(x, dtype=float)
        out = self.k * x_arr**self.p
        return out.item() if out.ndim == 0 else out

    def solve(self, y: float) -> float:
        """x at which the law reaches y (requires a nonzero exponent)."""
        if self.p == 0:
            raise ValidationError("cannot invert a flat power law")
        return (y / self.k) ** (1.0 / self.p)

    def extrapolates(self, x: float) -> bool:
        return x < self.x_min or x > self.x_max

    def to_dict(self) -> dict:
        return {"k": self.k, "p": self.p, "x_min": self.x_min, "x_max": self.x_max}

    @classmethod
    def from_dict(cls, d: dict) -> "PowerLaw":
        return cls(k=float(d["k"]), p=float(d["p"]), x_min=float(d["x_min"]), x_max=float(d["x_max"]))


@dataclass(frozen=True)
class EnvelopeSample:
    """One grid point of the frontier envelope."""

    C: float
    loss: float
    run_id: str


@dataclass(frozen=True)
class FrontierPoint:
    """The compute-optimal operating point of one model size.

    edge_clipped marks points whose winning interval was cut off by the end
    of the data rather than by a competing model; their C is a lower-quality
    estimate of the true optimum.
    """

    C: float
    loss: float
    N: float
    D: float
    S: float
    B: float
    edge_clipped: bool = False

    def __post_init__(self) -> None:
        if min(self.C, self.loss, self.N, self.D, self.S, self.B) <= 0:
            raise ValidationError("all FrontierPoint fields must be positive")
        if abs(self.C / (FLOPS_PER_PARAM_TOKEN * self.N * self.D) - 1.0) > 0.005:
            raise ValidationError("C must equal 6*N*D within 0.5%")
        if abs(self.D - self.S * self.B) > self.B:
            raise ValidationError("D must equal S*B within one batch")


@dataclass(frozen=True)
class FrontierReport:
    """Frontier points and the five fitted/derived power laws of compute."""

    points: tuple[FrontierPoint, ...]
    L_opt: PowerLaw
    N_opt: PowerLaw
    D_opt: PowerLaw
    S_opt: PowerLaw
    B_opt: PowerLaw
    consistency_residuals: dict[str, float]
    excluded: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "L_opt": self.L_opt.to_dict(),
            "N_opt": self.N_opt.to_dict(),
            "D_opt": self.D_opt.to_dict(),
            "S_opt": self.S_opt.to_dict(),
            "B_opt": self.B_opt.to_dict(),
            "consistency_residuals": dict(self.consistency_residuals),
            "n_points": len(self.points),
            "excluded_model_sizes": list(self.excluded),
        }

    @classmethod
    def from_laws(
        cls,
        L_opt: PowerLaw,
        N_opt: PowerLaw,
        D_opt: PowerLaw,
        S_opt: PowerLaw,
        B_opt: PowerLaw,
    ) -> "FrontierReport":
        """Assemble a report from externally supplied laws (no points)."""
        return cls(
            points=(),
            L_opt=L_opt,
            N_opt=N_opt,
            D_opt=D_opt,
            S_opt=S_opt,
            B_opt=B_opt,
            consistency_residuals={},
        )


def _run_curve_log(
    run, smooth: bool = False, half_life_fraction: float = ENVELOPE_HALF_LIFE_FRACTION
) -> tuple[np.ndarray, np.ndarray]:
    """(log C, loss) arrays of a run's finite points, optionally smoothed."""
    if smooth:
        try:
            run = smooth_run(run, half_life_fraction=half_life_fraction)
        except InsufficientDataError:
            return np.empty(0), np.empty(0)
    pts = [p for p in run.points if math.isfinite(p.loss)]
    if len(pts) < 2:
        return np.empty(0), np.empty(0)
    log_c = np.log(
        [FLOPS_PER_PARAM_TOKEN * run.model.n_params * p.tokens for p in pts]
    )
    loss = np.array([p.loss for p in pts])
    return log_c, loss


def _interp_on_grid(log_grid: np.ndarray, log_c: np.ndarray, loss: np.ndarray) -> np.ndarray:
    """Piecewise-linear loss in log C; NaN outside the curve's range."""
    if log_c.size == 0:
        return np.full(log_grid.shape, np.nan)
    vals = np.interp(log_grid, log_c, loss)
    vals[(log_grid < log_c[0]) | (log_grid > log_c[-1])] = np.nan
    return vals


def default_grid(runset: RunSet) -> np.ndarray:
    """Log-spaced compute grid covering the union of the runs' C ranges."""
    c_lo = math.inf
    c_hi = 0.0
    for run in runset:
        log_c, _ = _run_curve_log(run)
        if log_c.size:
            c_lo = min(c_lo, math.exp(log_c[0]))
            c_hi = max(c_hi, math.exp(log_c[-1]))
    if not c_hi > 0 or not math.isfinite(c_lo):
        raise InsufficientDataError("no run has two finite curve points")
    n = max(2, int(math.ceil(math.log10(c_hi / c_lo) * GRID_POINTS_PER_DECADE)) + 1)
    return np.geomspace(c_lo, c_hi, n)


def compute_envelope(
    runset: RunSet,
    grid: Sequence[float] | None = None,
    smooth: bool = True,
    half_life_fraction: float = ENVELOPE_HALF_LIFE_FRACTION,
) -> list[EnvelopeSample]:
    """Pointwise minimum of all per-run loss curves on a log-C grid.

    Each run's curve is smoothed (unless smooth=False) and interpolated in
    (log C, loss); grid points covered by no run are omitted.  Ties go to
    the run appearing first in the set.
    """
    if len(runset) == 0:
        raise InsufficientDataError("empty run set")
    grid_arr = np.asarray(grid, dtype=float) if grid is not None else default_grid(runset)
    if np.any(grid_arr <= 0):
        raise ValidationError("grid values must be positive")
    log_grid = np.log(grid_arr)
    best = np.full(grid_arr.shape, np.inf)
    winner = np.full(grid_arr.shape, -1, dtype=int)
    run_ids = []
    for idx, run in enumerate(runset):
        run_ids.append(run.run_id)
        log_c, loss = _run_curve_log(run, smooth, half_life_fraction)
        vals = _interp_on_grid(log_grid, log_c, loss)
        better = vals < best  # NaN never wins
        best[better] = vals[better]
        winner[better] = idx
    covered = winner >= 0
    if not covered.any():
        raise EmptyEnvelopeError("no run covers any grid point")
    return [
        EnvelopeSample(C=float(grid_arr[i]), loss=float(best[i]), run_id=run_ids[winner[i]])
        for i in np.nonzero(covered)[0]
    ]


def _longest_contiguous(indices: list[int]) -> list[int]:
    best_start = indices[0]
    best_len = 1
    start = indices[0]
    length = 1
    for prev, cur in zip(indices, indices[1:]):
        if cur == prev + 1:
            length += 1
        else:
            start, length = cur, 1
        if length > best_len:
            best_start, best_len = start, length
    return list(range(best_start, best_start + best_len))


def extract_frontier_points(
    envelope: Sequence[EnvelopeSample],
    runset: RunSet,
    smooth: bool = True,
    half_life_fraction: float = ENVELOPE_HALF_LIFE_FRACTION,
) -> list[FrontierPoint]:
    """One compute-optimal point per model size that wins somewhere.

    A model's C* is the geometric mean of its winning interval's endpoints;
    loss is read from the model's own curve (pointwise min across its runs,
    smoothed the same way as the envelope) at C*, and B from the run
    achieving that minimum.  Models that never win are skipped with a
    warning.
    """
    if not envelope:
        raise EmptyEnvelopeError("empty envelope")
    model_of_run = {run.run_id: run.model.n_params for run in runset}
    win_model = [model_of_run[s.run_id] for s in envelope]

    # per-model grid coverage, to tell competitive losses from absent data
    log_grid = np.log([s.C for s in envelope])
    coverage: dict[float, np.ndarray] = {}
    curves: dict[float, list] = {}
    for run in runset:
        curves.setdefault(run.model.n_params, []).append(run)
    for n_params, runs in curves.items():
        cov = np.zeros(log_grid.shape, dtype=bool)
        for run in runs:
            log_c, loss = _run_curve_log(run, smooth, half_life_fraction)
            cov |= ~np.isnan(_interp_on_grid(log_grid, log_c, loss))
        coverage[n_params] = cov

    points = []
    seen_models = []
    for n_params in curves:
        indices = [i for i, m in enumerate(win_model) if m == n_params]
        if not indices:
            warnings.warn(
                f"model {n_params:.3g} never wins the envelope; excluded from the frontier"
            )
            continue
        seen_models.append(n_params)
        interval = _longest_contiguous(indices)
        if len(interval) < len(indices):
            warnings.warn(
                f"model {n_params:.3g} wins a fragmented set; using the longest interval"
            )
        i_lo, i_hi = interval[0], interval[-1]
        c_star = math.sqrt(envelope[i_lo].C * envelope[i_hi].C)

        cov = coverage[n_params]
        clipped_low = i_lo == 0 or not cov[i_lo - 1]
        clipped_high = i_hi == len(envelope) - 1 or not cov[i_hi + 1]

        # model curve readout at C*: min across this model's runs
        best_loss = math.inf
        best_run = None
        for run in curves[n_params]:
            log_c, loss = _run_curve_log(run, smooth, half_life_fraction)
            val = _interp_on_grid(np.asarray([math.log(c_star)]), log_c, loss)[0]
            if not math.isnan(val) and val < best_loss:
                best_loss = val
                best_run = run
        if best_run is None:
            warnings.warn(f"model {n_params:.3g}: no run covers C* = {c_star:.3g}; skipped")
            continue
        d_star = c_star / (FLOPS_PER_PARAM_TOKEN * n_params)
        b = best_run.batch_size_tokens
        points.append(
            FrontierPoint(
                C=c_star,
                loss=best_loss,
                N=n_params,
                D=d_star,
                S=d_star / b,
                B=b,
                edge_clipped=clipped_low or clipped_high,
            )
        )
    return points


def fit_power_law(x, y) -> PowerLaw:
    """Least-squares power law through (x, y): log y regressed on log x."""
    x_arr = np.asarray(x, dtype=float)
    y_arr = np.asarray(y, dtype=float)
    if x_arr.size != y_arr.size or x_arr.size < 2:
        raise InsufficientDataError("need at least 2 (x, y) points")
    if np.any(x_arr <= 0) or np.any(y_arr <= 0):
        raise ValidationError("power-law fits need positive values")
    slope, intercept = np.polyfit(np.log(x_arr), np.log(y_arr), 1)
    return PowerLaw(
        k=float(np.exp(intercept)),
        p=float(slope),
        x_min=float(x_arr.min()),
        x_max=float(x_arr.max()),
    )


def frontier_laws(
    points: Sequence[FrontierPoint], excluded: Sequence[float] = ()
) -> FrontierReport:
    """Regress the five power laws of compute from frontier points.

    N_opt and S_opt are fitted; D_opt = C/(6*N_opt) and B_opt = D_opt/S_opt
    are derived so the compute and step identities hold exactly.  The
    consistency residuals record the worst relative gap between each
    derived law and the extracted point values.  Edge-clipped points are
    excluded when at least 3 clean points remain.
    """
    pts = list(points)
    if len(pts) < 3:
        raise InsufficientFrontierError(f"need at least 3 frontier points, got {len(pts)}")
    clean = [pt for pt in pts if not pt.edge_clipped]
    usable = clean if len(clean) >= 3 else pts

    c = np.array([pt.C for pt in usable])
    l_opt = fit_power_law(c, [pt.loss for pt in usable])
    n_opt = fit_power_law(c, [pt.N for pt in usable])
    s_opt = fit_power_law(c, [pt.S for pt in usable])

    d_opt = PowerLaw(
        k=1.0 / (FLOPS_PER_PARAM_TOKEN * n_opt.k),
        p=1.0 - n_opt.p,
        x_min=n_opt.x_min,
        x_max=n_opt.x_max,
    )
    b_k = d_opt.k / s_opt.k
    b_p = d_opt.p - s_opt.p
    # the batch law is only meaningful above the smallest batch the data
    # actually contains; push x_min up to where it crosses that floor.
    # the crossing amplifies coefficient noise by exp(1/p), so a law this
    # close to flat (single-batch sweeps) keeps the data range instead
    b_x_min = d_opt.x_min
    b_floor = min(pt.B for pt in usable)
    if b_p > 0.01:
        crossing = (b_floor / b_k) ** (1.0 / b_p)
        b_x_min = max(b_x_min, min(crossing, d_opt.x_max))
    b_opt = PowerLaw(k=b_k, p=b_p, x_min=b_x_min, x_max=d_opt.x_max)

    # a free fit of a derived quantity equals the derived law exactly
    # (least squares is linear in log space), so residuals compare the
    # derived laws against the extracted point values instead
    residuals = {
        "D_opt": float(np.max(np.abs(d_opt(c) / np.array([pt.D for pt in usable]) - 1.0))),
        "B_opt": float(np.max(np.abs(b_opt(c) / np.array([pt.B for pt in usable]) - 1.0))),
    }
    return FrontierReport(
        points=tuple(pts),
        L_opt=l_opt,
        N_opt=n_opt,
        D_opt=d_opt,
        S_opt=s_opt,
        B_opt=b_opt,
        consistency_residuals=residuals,
        excluded=tuple(excluded),
    )


def frontier_report(
    runset: RunSet,
    grid: Sequence[float] | None = None,
    smooth: bool = True,
    half_life_fraction: float = ENVELOPE_HALF_LIFE_FRACTION,
) -> FrontierReport:
    """Full pipeline: envelope, per-model points, fitted laws."""
    envelope = compute_envelope(runset, grid, smooth, half_life_fraction)
    points = extract_frontier_points(envelope, runset, smooth, half_life_fraction)
    present = {pt.N for pt in points}
    excluded = [m for m in runset.model_sizes() if m not in present]
    return frontier_laws(points, excluded=excluded)
