"""Tail exponent fitting and the prefactor cross-check.

``fit_tail`` reads the exact tail out of a solved stationary table, fits
the log-log slope on a truncation-safe window, and tracks the compensated
ratio tail(x) * exp(R(x)) / x, which should flatten onto the constant in
front of the tail law. ``predict_constant`` prices that constant from the
other side: the boundary integral of pi against the killed-harmonic V,
times the closed-form prefactor, refined by pushing the measured renewal
function of the transformed chain through the change-of-measure identity
for the tail.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .rates import RateFunctions

__all__ = ["TailFitReport", "fit_tail", "ConstantPrediction", "predict_constant"]

_UNDERFLOW = 1e-300
_MIN_POINTS = 8

# 12-point Gauss-Legendre on unit segments, for integrals of 1/(t*U(t))
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


@dataclass(frozen=True, eq=False)
class TailFitReport:
    """Fitted tail exponent plus the compensated-ratio diagnostics.

    ``window`` is the window actually used; it shrinks from the right when
    the tail underflows before the requested top. ``ell_ratio`` holds
    tail(x) * exp(R(x)) / x on that window and ``c_empirical`` is its
    median over the upper half (x >= top/2).
    """

    exponent_fit: float
    exponent_stderr: float
    exponent_theory: float
    window: tuple[int, int]
    requested_window: tuple[int, int]
    x_ratio: np.ndarray
    ell_ratio: np.ndarray
    c_empirical: float
    ratio_flatness: float
    exponent_tol: float
    flatness_tol: float
    n_points: int
    underflow_clipped: bool
    c_predicted: float | None = None

    @property
    def exponent_ok(self) -> bool:
        return abs(self.exponent_fit - self.exponent_theory) <= self.exponent_tol

    @property
    def flatness_ok(self) -> bool:
        return self.ratio_flatness <= 1.0 + self.flatness_tol

    @property
    def verdict(self) -> str:
        return "pass" if (self.exponent_ok and self.flatness_ok) else "fail"

    def with_prediction(self, c_predicted: float) -> "TailFitReport":
        return dataclasses.replace(self, c_predicted=float(c_predicted))

    def as_dict(self) -> dict:
        out = {
            "exponent_fit": self.exponent_fit,
            "exponent_stderr": self.exponent_stderr,
            "exponent_theory": self.exponent_theory,
            "window": list(self.window),
            "requested_window": list(self.requested_window),
            "c_empirical": self.c_empirical,
            "ratio_flatness": self.ratio_flatness,
            "exponent_tol": self.exponent_tol,
            "flatness_tol": self.flatness_tol,
            "n_points": self.n_points,
            "underflow_clipped": self.underflow_clipped,
            "verdict": self.verdict,
        }
        if self.c_predicted is not None:
            out["c_predicted"] = self.c_predicted
            out["c_ratio"] = self.c_empirical / self.c_predicted
        return out

    def write_csv(self, path) -> None:
        from .io_utils import write_csv

        write_csv(path, "x,ratio", [self.x_ratio, self.ell_ratio])


def default_window(trunc_n: int) -> tuple[int, int]:
    """Fit window [N/40, N/4]: deep enough for asymptotics, truncation-safe."""
    return max(trunc_n // 40, 2), trunc_n // 4


def fit_tail(stat, rate: RateFunctions, window: tuple[int, int] | None = None,
             *, exponent_tol: float = 0.1,
             flatness_tol: float = 0.1) -> TailFitReport:
    """Least-squares slope of log tail(x) vs log x plus ratio diagnostics.

    The verdict passes only when the slope lands within ``exponent_tol`` of
    the predicted exponent 2 - rho and the compensated ratio stays flat
    (max/min <= 1 + flatness_tol) over the upper half of the window, so
    loosening either tolerance can only flip fail to pass.
    """
    n = stat.trunc_n
    if window is None:
        window = default_window(n)
    lo, hi = int(window[0]), int(window[1])
    if lo < 1 or hi <= lo:
        raise ValueError(f"fit window [{lo}, {hi}] is empty or starts below 1")
    if hi > n // 2:
        raise ValueError(
            f"fit window top {hi} exceeds the truncation-safe bound {n // 2}")

    x = stat.grid
    inside = (x >= lo) & (x <= hi)
    xs = x[inside].astype(np.float64)
    tails = stat.tail[inside]

    clipped = False
    usable = tails >= _UNDERFLOW
    if not usable.all():
        # the tail is nonincreasing, so underflow eats a suffix of the window
        clipped = True
        keep = int(np.argmin(usable))
        xs, tails = xs[:keep], tails[:keep]
    if len(xs) < _MIN_POINTS:
        raise ValueError(
            f"tail underflows below {_UNDERFLOW:g} across the window "
            f"[{lo}, {hi}]; fewer than {_MIN_POINTS} usable points remain")
    hi_used = int(xs[-1])

    lx = np.log(xs)
    ly = np.log(tails)
    design = np.column_stack([lx, np.ones_like(lx)])
    coef, rss, _, _ = np.linalg.lstsq(design, ly, rcond=None)
    slope = float(coef[0])
    dof = len(xs) - 2
    if dof > 0 and rss.size:
        sigma2 = float(rss[0]) / dof
        slope_se = math.sqrt(sigma2 / float(np.sum((lx - lx.mean()) ** 2)))
    else:
        slope_se = 0.0

    ratio = tails * np.asarray(rate.exp_R(xs)) / xs
    upper = xs >= hi_used / 2.0
    if not upper.any():
        upper = np.ones_like(xs, dtype=bool)
    top = ratio[upper]
    c_emp = float(np.median(top))
    flatness = float(top.max() / top.min())

    return TailFitReport(
        exponent_fit=slope,
        exponent_stderr=slope_se,
        exponent_theory=2.0 - rate.rho,
        window=(int(xs[0]), hi_used),
        requested_window=(lo, hi),
        x_ratio=xs.astype(np.int64),
        ell_ratio=ratio,
        c_empirical=c_emp,
        ratio_flatness=flatness,
        exponent_tol=float(exponent_tol),
        flatness_tol=float(flatness_tol),
        n_points=len(xs),
        underflow_clipped=clipped,
    )


@dataclass(frozen=True, eq=False)
class ConstantPrediction:
    """Tail constant priced from the boundary integral of pi against V.

    ``closed_form`` is prefactor * boundary_integral with the prefactor
    2*rho / ((2*mu+b) * (rho-2)). ``repres_value`` reprices the constant
    from the measured renewal function of the transformed chain via
    -H(x*)/U(x*) + rho * integral of H(y)/(y*U(y)) over [x*, inf); its
    stderr comes from the per-replica spread, so it shrinks like one over
    the square root of the replica budget.
    """

    closed_form: float
    prefactor: float
    boundary_integral: float
    rho: float
    repres_value: float
    repres_stderr: float
    x_eval: int
    grid_top: int
    h_scale_check: float
    n_replicas: int

    def __float__(self) -> float:
        return self.closed_form

    def as_dict(self) -> dict:
        return {
            "closed_form": self.closed_form,
            "prefactor": self.prefactor,
            "boundary_integral": self.boundary_integral,
            "rho": self.rho,
            "repres_value": self.repres_value,
            "repres_stderr": self.repres_stderr,
            "x_eval": self.x_eval,
            "grid_top": self.grid_top,
            "h_scale_check": self.h_scale_check,
            "n_replicas": self.n_replicas,
        }


def _inv_tu_weights(rf: RateFunctions, lo: int, hi: int) -> np.ndarray:
    """Integrals of 1/(t*U(t)) over each unit segment [y, y+1), y in [lo, hi)."""
    starts = np.arange(lo, hi, dtype=np.float64)
    nodes = starts[:, None] + 0.5 + 0.5 * _GL_NODES[None, :]
    flat = nodes.ravel()
    u_flat = rf.U_grid(flat)
    integrand = 1.0 / (flat * u_flat)
    return 0.5 * integrand.reshape(nodes.shape) @ _GL_WEIGHTS


def _analytic_tail(rf: RateFunctions, mu: float, b: float,
                   lo: int, x_eval: int) -> float:
    """Integral of H(t)/(t*U(t)) beyond the measured grid, H(t) = t**2/(2mu+b).

    Exact quadrature with the true U out to a comfortable multiple of the
    evaluation point, then the leading closed-form scrap where U has
    converged onto t*exp(R(t))/rho.
    """
    far = max(4 * x_eval, 4 * lo)
    starts = np.arange(lo, far, dtype=np.float64)
    nodes = starts[:, None] + 0.5 + 0.5 * _GL_NODES[None, :]
    flat = nodes.ravel()
    u_flat = rf.U_grid(flat)
    piece = float(np.sum(0.5 * (flat / u_flat).reshape(nodes.shape) @ _GL_WEIGHTS))
    p = mu / b
    scrap = rf.rho * float(far) ** (1.0 - 2.0 * p) / (2.0 * p - 1.0)
    return (piece + scrap) / (2.0 * mu + b)


def predict_constant(stat, harm, tc, ren, *, x_eval: int | None = None
                     ) -> ConstantPrediction:
    """Price the tail constant two ways from one solved spec.

    Requires the stationary table, the harmonic table, the transformed
    chain built with that table attached, and a renewal estimate for the
    transformed chain on a dense integer grid with per-replica counts.
    """
    if stat is None or harm is None or tc is None or ren is None:
        raise ValueError("predict_constant needs the stationary table, the "
                         "harmonic table, the transformed chain, and the "
                         "renewal estimate together")
    mu = tc.base.profile.mu
    b = tc.base.profile.b
    if mu / b <= 0.55:
        raise ValueError(f"mu/b = {mu / b:.3f} sits too close to the "
                         "prefactor pole at 1/2; need mu/b > 0.55")
    rf = harm.rates
    rho = rf.rho
    x0 = harm.x0

    boundary = float(np.dot(stat.pi[: x0 + 1], harm.v[: x0 + 1]))
    if boundary <= 0.0:
        raise ValueError("boundary integral of pi against V is not positive")
    if tc.boundary_integral is not None and not math.isclose(
            boundary, tc.boundary_integral, rel_tol=1e-9):
        raise ValueError("transform carries a different boundary law; all "
                         "inputs must come from the same solved spec")
    prefactor = 2.0 * rho / ((2.0 * mu + b) * (rho - 2.0))
    closed = prefactor * boundary

    grid = np.asarray(ren.x_grid, dtype=np.int64)
    if ren.per_replica is None:
        raise ValueError("renewal estimate lacks per-replica counts; rerun "
                         "with keep_replica_counts=True")
    if grid[0] <= x0:
        raise ValueError("renewal grid must live above the boundary")
    if x_eval is None:
        x_eval = int(grid[len(grid) // 2])
    pos = np.searchsorted(grid, x_eval)
    if pos >= len(grid) or grid[pos] != x_eval:
        raise ValueError(f"x_eval={x_eval} is not on the renewal grid")
    tail_grid = grid[pos:]
    if np.any(np.diff(tail_grid) != 1):
        raise ValueError("renewal grid must cover every integer state "
                         "between x_eval and its top")
    top = int(tail_grid[-1])

    # per-replica visit counts, +1 because the renewal function counts the
    # starting state inside the boundary as its zeroth term
    h_rep = ren.per_replica[:, pos:].astype(np.float64) + 1.0
    n_rep = h_rep.shape[0]

    u_eval = rf.U(x_eval)
    weights = _inv_tu_weights(rf, x_eval, top + 1)
    tail_part = _analytic_tail(rf, mu, b, top + 1, x_eval)
    g_rep = -h_rep[:, 0] / u_eval + rho * (h_rep @ weights + tail_part)

    scale = boundary * float(rf.exp_R(x_eval)) / float(x_eval)
    values = scale * g_rep
    repres = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(n_rep)) if n_rep > 1 else 0.0

    h_scale = float(h_rep[:, -1].mean()) * (2.0 * mu + b) / float(top) ** 2

    return ConstantPrediction(
        closed_form=closed,
        prefactor=prefactor,
        boundary_integral=boundary,
        rho=rho,
        repres_value=repres,
        repres_stderr=stderr,
        x_eval=int(x_eval),
        grid_top=top,
        h_scale_check=h_scale,
        n_replicas=n_rep,
    )
