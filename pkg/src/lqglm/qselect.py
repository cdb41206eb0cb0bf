"""Distortion-parameter selection over a q-grid.

Two data-driven rules are provided: a stability rule based on the movement
of successive grid estimates, and an efficiency rule minimizing the trace
of the sandwich covariance.  Both fit the whole grid with warm starts
(each fit starts from the previous grid point's surrogate solution).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import SelectionError, UsageError
from .fit import FitControl, fit_mlq, matrices_ab
from .numerics import inv_spd

__all__ = [
    "QGrid",
    "QSelectResult",
    "fisher_information",
    "are",
    "select_q_stability",
    "select_q_efficiency",
]


class QGrid:
    """Decreasing grid ``1 >= q_1 > q_2 > ... > q_m`` of distortion values.

    ``rho_factor`` scales the stability threshold
    ``rho = rho_factor * ||beta at q_m||``.  ``prune`` drops grid values
    whose surrogate natural parameters would leave the family domain.
    """

    def __init__(self, q_values=None, q_min=0.70, step=0.01, rho_factor=0.05):
        if q_values is None:
            m = int(round((1.0 - q_min) / step))
            q_values = np.round(1.0 - step * np.arange(m + 1), 12)
        q_values = np.asarray(sorted(set(float(q) for q in q_values), reverse=True))
        if np.any(q_values <= 0.0) or np.any(q_values > 1.0):
            raise UsageError("grid values must lie in (0, 1]")
        if len(q_values) < 1:
            raise UsageError("grid is empty")
        self.q_values = q_values
        self.step = step
        self.q_min = float(q_values[-1])
        self.rho_factor = rho_factor
        self.pruned = []

    def prune(self, family, theta_ref):
        """Drop q values whose surrogate ``theta_ref / q`` leaves the domain.

        ``theta_ref`` holds natural-parameter values on the calibrated
        scale (e.g. from a q = 1 fit); fitting at q requires the surrogate
        ``theta / q`` to stay inside the family's parameter space.
        """
        theta_ref = np.asarray(theta_ref, dtype=float)
        keep, pruned = [], []
        for q in self.q_values:
            if family.in_theta_domain(theta_ref / q):
                keep.append(q)
            else:
                pruned.append(float(q))
        if len(keep) < 2:
            raise SelectionError("grid pruning left fewer than two usable q values")
        out = QGrid(q_values=keep, step=self.step, rho_factor=self.rho_factor)
        out.pruned = pruned
        return out


@dataclass
class QSelectResult:
    q_opt: float
    qv_profile: dict
    rho: float
    fits: dict
    method: str
    dropped: list = field(default_factory=list)
    pruned: list = field(default_factory=list)


def fisher_information(data, fit):
    """Classical information ``phi X' W X`` at the calibrated predictors.

    This is the q = 1 sensitivity matrix evaluated at the same fit, the
    reference against which the sandwich covariance is compared.
    """
    theta = data.link.k(fit.eta_q)
    kdot = data.link.k_dot(fit.eta_q)
    W = data.family.b_ddot(theta) * kdot * kdot
    return fit.phi_hat * (data.X.T @ (W[:, None] * data.X))


def are(fit, data=None):
    """Asymptotic relative efficiency ``tr(F_n^{-1}) / tr(cov)``.

    Compares the MLq sandwich covariance with the classical information at
    the calibrated fit; equals 1 at q = 1.
    """
    data = data if data is not None else fit.data
    if data is None:
        raise UsageError("fit does not carry its data; pass it explicitly")
    F = fisher_information(data, fit)
    return float(np.trace(inv_spd(F)) / np.trace(fit.cov))


def _coef_distance(data, fit_a, fit_b):
    if fit_a.beta_q is not None and fit_b.beta_q is not None:
        return float(np.linalg.norm(fit_a.beta_q - fit_b.beta_q))
    return float(np.linalg.norm(fit_a.eta_q - fit_b.eta_q) / np.sqrt(data.n))


def _coef_norm(data, fit):
    if fit.beta_q is not None:
        return float(np.linalg.norm(fit.beta_q))
    return float(np.linalg.norm(fit.eta_q) / np.sqrt(data.n))


def _grid_fits(data, grid, control, independent_starts=False):
    """Warm-started fits down the grid; non-convergent q's are dropped.

    Grid fits default to a higher iteration cap than single fits: the
    low-q end of the grid converges slowly near indeterminacy and the
    stability profile needs those points.
    """
    ctl = control if control is not None else FitControl(max_iter=100)
    fits, dropped = {}, []
    start = None
    for q in grid.q_values:
        kwargs = dict(max_iter=ctl.max_iter, tol=ctl.tol,
                      step_halving_max=ctl.step_halving_max, stop_rule=ctl.stop_rule)
        c = FitControl(q=float(q), init="ml-warm-start" if start is None else start, **kwargs)
        try:
            res = fit_mlq(data, c)
        except Exception as e:  # singular weights etc.: treat as non-convergent
            warnings.warn(f"grid fit at q={q:.4g} failed: {e}", stacklevel=3)
            dropped.append(float(q))
            continue
        if not res.converged:
            warnings.warn(
                f"grid fit at q={q:.4g} did not converge ({res.message}); dropped",
                stacklevel=3,
            )
            dropped.append(float(q))
            continue
        fits[float(q)] = res
        if not independent_starts:
            start = res.beta_star.copy()
    if len(fits) < 3:
        raise SelectionError(
            f"only {len(fits)} grid fits converged; selection needs at least 3"
        )
    return fits, dropped


def select_q_stability(data, grid=None, control=None, independent_starts=False):
    """Stability selection of the distortion parameter.

    Fits every grid value and computes the movement
    ``QV_j = ||beta_{q_j} - beta_{q_{j+1}}||`` of consecutive (calibrated)
    estimates, with threshold ``rho = rho_factor * ||beta at q_m||``.  The
    selected value is the largest q whose movement still reaches ``rho``,
    i.e. the onset of the stable plateau when approaching q = 1; when the
    whole path is stable (no movement reaches ``rho``, the uncontaminated
    case) the largest grid value is returned.

    With ``independent_starts=True`` every fit starts from the q = 1
    estimate instead of chaining; if that changes any estimate the chained
    (sequential) result wins.
    """
    grid = grid if grid is not None else QGrid()
    fits, dropped = _grid_fits(data, grid, control)
    if independent_starts:
        fits_ind, dropped_ind = _grid_fits(data, grid, control, independent_starts=True)
        agree = set(fits) == set(fits_ind) and all(
            _coef_distance(data, fits[q], fits_ind[q]) <= 1e-6 * (1.0 + _coef_norm(data, fits[q]))
            for q in fits
        )
        if agree:
            fits, dropped = fits_ind, dropped_ind
    qs = sorted(fits, reverse=True)
    qv = {qs[j]: _coef_distance(data, fits[qs[j]], fits[qs[j + 1]]) for j in range(len(qs) - 1)}
    rho = grid.rho_factor * _coef_norm(data, fits[qs[-1]])
    moving = [q for q, v in qv.items() if v >= rho]
    q_opt = max(moving) if moving else qs[0]
    return QSelectResult(
        q_opt=float(q_opt),
        qv_profile=qv,
        rho=float(rho),
        fits={q: _summary(data, f) for q, f in fits.items()},
        method="stability",
        dropped=dropped,
        pruned=list(grid.pruned),
    )


def select_q_efficiency(data, grid=None, control=None):
    """Efficiency selection: minimize the trace of the sandwich covariance.

    Ties break toward larger q.
    """
    grid = grid if grid is not None else QGrid()
    if len(grid.q_values) == 1:
        q = float(grid.q_values[0])
        res = fit_mlq(data, FitControl(q=q))
        return QSelectResult(q, {}, 0.0, {q: _summary(data, res)}, "efficiency")
    fits, dropped = _grid_fits(data, grid, control)
    traces = {q: float(np.trace(f.cov)) for q, f in fits.items()}
    best = min(traces.values())
    q_opt = max(q for q, t in traces.items() if t <= best * (1.0 + 1e-12))
    return QSelectResult(
        q_opt=float(q_opt),
        qv_profile=traces,
        rho=0.0,
        fits={q: _summary(data, f) for q, f in fits.items()},
        method="efficiency",
        dropped=dropped,
        pruned=list(grid.pruned),
    )


def _summary(data, fit):
    return {
        "beta_q": None if fit.beta_q is None else fit.beta_q.tolist(),
        "se": fit.se.tolist(),
        "trace_cov": float(np.trace(fit.cov)),
        "lq_value": fit.lq_value,
        "iterations": fit.iterations,
        "converged": fit.converged,
    }
