"""L1-penalized linear regression by cyclic coordinate descent.

Features are z-scored and the target centered internally; the intercept
is never penalized and coefficients are reported back on the original
scale. Penalty selection runs k-fold cross-validation on contiguous
time blocks (the rows are serially dependent, so shuffled folds would
leak) and breaks ties toward the larger penalty.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, ConvergenceError, StatsError, ValidationError

__all__ = [
    "CvResult",
    "Dataset",
    "LassoFit",
    "cv_select",
    "default_grid",
    "fit",
    "lam_max",
    "predict",
]

log = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 50
GRID_SPAN = 1e-4

# Two mean CV errors this close count as a tie and the larger penalty wins.
TIE_RTOL = 1e-9
TIE_ATOL = 1e-10


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix, target, and per-column standardization stats.

    ``center``/``scale`` are the population mean/std of each feature
    column; constant columns carry ``scale == 0`` and always receive a
    zero coefficient.
    """

    x: np.ndarray
    y: np.ndarray
    columns: tuple[str, ...]
    center: np.ndarray
    scale: np.ndarray

    @classmethod
    def from_arrays(
        cls,
        x: np.ndarray,
        y: np.ndarray,
        columns: Sequence[str] | None = None,
    ) -> "Dataset":
        x = np.ascontiguousarray(x, dtype=float)
        y = np.ascontiguousarray(y, dtype=float)
        if x.ndim != 2:
            raise ConfigError("feature matrix must be 2-dimensional")
        if y.ndim != 1:
            raise ConfigError("target must be 1-dimensional")
        if x.shape[0] != y.shape[0]:
            raise ConfigError(
                f"row mismatch: {x.shape[0]} feature rows vs {y.shape[0]} targets"
            )
        if x.shape[0] == 0 or x.shape[1] == 0:
            raise ConfigError("dataset needs at least one row and one column")
        if columns is None:
            columns = tuple(f"x{j}" for j in range(x.shape[1]))
        else:
            columns = tuple(str(c) for c in columns)
            if len(columns) != x.shape[1]:
                raise ConfigError(
                    f"{len(columns)} column names for {x.shape[1]} columns"
                )
        if not np.isfinite(x).all() or not np.isfinite(y).all():
            raise ValidationError("dataset contains non-finite values")
        center = x.mean(axis=0)
        scale = x.std(axis=0)
        for arr in (x, y, center, scale):
            arr.setflags(write=False)
        return cls(x=x, y=y, columns=columns, center=center, scale=scale)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def standardized(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (z-scored features, centered target).

        Constant columns map to all-zero columns rather than dividing
        by zero.
        """
        safe = np.where(self.scale > 0, self.scale, 1.0)
        return (self.x - self.center) / safe, self.y - self.y.mean()


@dataclass(frozen=True, eq=False)
class LassoFit:
    """Solution of one penalized regression, on the original scale.

    ``final_update`` is the largest coordinate move of the last sweep
    (standardized scale); ``converged`` is true only when it dropped
    below the tolerance. ``objective_path`` records the standardized
    objective after each sweep and is non-increasing.
    """

    coef: np.ndarray
    intercept: float
    lam: float
    n_iter: int
    final_update: float
    converged: bool
    columns: tuple[str, ...]
    objective_path: tuple[float, ...]

    def as_dict(self) -> dict:
        """JSON-ready summary for audit sidecars."""
        return {
            "columns": list(self.columns),
            "coef": [float(c) for c in self.coef],
            "intercept": float(self.intercept),
            "lam": float(self.lam),
            "n_iter": int(self.n_iter),
            "final_update": float(self.final_update),
            "converged": bool(self.converged),
            "objective": float(self.objective_path[-1]),
        }


def _soft(z: float, g: float) -> float:
    if z > g:
        return z - g
    if z < -g:
        return z + g
    return 0.0


def _finish(
    dataset: Dataset,
    beta: np.ndarray,
    lam: float,
    n_iter: int,
    final_update: float,
    converged: bool,
    path: list,
) -> LassoFit:
    safe = np.where(dataset.scale > 0, dataset.scale, 1.0)
    coef = beta / safe
    coef[dataset.scale == 0] = 0.0
    intercept = float(dataset.y.mean() - coef @ dataset.center)
    coef.setflags(write=False)
    return LassoFit(
        coef=coef,
        intercept=intercept,
        lam=float(lam),
        n_iter=n_iter,
        final_update=float(final_update),
        converged=converged,
        columns=dataset.columns,
        objective_path=tuple(path),
    )


def fit(
    dataset: Dataset,
    lam: float,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    warm_start: np.ndarray | None = None,
) -> LassoFit:
    """Minimize (1/2N)||y - X beta - alpha||^2 + lam * ||beta||_1.

    Cyclic coordinate descent with soft-thresholding on the
    standardized problem. ``warm_start`` is an optional initial
    coefficient vector on the standardized scale (used by the
    cross-validation path). Raises ConvergenceError carrying the last
    iterate if ``max_iter`` sweeps do not reach ``tol``.
    """
    if lam < 0:
        raise ConfigError("penalty must be non-negative")
    if tol <= 0:
        raise ConfigError("tolerance must be positive")
    if max_iter < 1:
        raise ConfigError("max_iter must be at least 1")

    xs, yc = dataset.standardized()
    n, p = xs.shape
    cols = [np.ascontiguousarray(xs[:, j]) for j in range(p)]
    norms = np.array([float(c @ c) / n for c in cols])

    if warm_start is None:
        beta = np.zeros(p)
    else:
        beta = np.array(warm_start, dtype=float)
        if beta.shape != (p,):
            raise ConfigError(f"warm start must have shape ({p},)")
        beta[norms == 0.0] = 0.0

    resid = yc - xs @ beta
    path: list[float] = []
    delta = np.inf
    for sweep in range(1, max_iter + 1):
        delta = 0.0
        for j in range(p):
            if norms[j] == 0.0:
                continue
            b_old = beta[j]
            rho = float(cols[j] @ resid) / n + norms[j] * b_old
            b_new = _soft(rho, lam) / norms[j]
            if b_new != b_old:
                resid += cols[j] * (b_old - b_new)
                beta[j] = b_new
                delta = max(delta, abs(b_new - b_old))
        path.append(0.5 * float(resid @ resid) / n + lam * float(np.abs(beta).sum()))
        if delta < tol:
            return _finish(dataset, beta, lam, sweep, delta, True, path)

    last = _finish(dataset, beta, lam, max_iter, delta, False, path)
    raise ConvergenceError(
        f"coordinate descent did not converge in {max_iter} sweeps "
        f"(last update {delta:.3e}, tol {tol:.3e})",
        last_iterate=last,
    )


def lam_max(dataset: Dataset) -> float:
    """Smallest penalty at which every coefficient is exactly zero.

    Mirrors the per-column dot products of the descent loop so that
    fit(dataset, lam_max(dataset)) soft-thresholds every coordinate to
    exactly zero, not merely to rounding dust.
    """
    xs, yc = dataset.standardized()
    n = dataset.n
    return max(
        abs(float(np.ascontiguousarray(xs[:, j]) @ yc) / n)
        for j in range(xs.shape[1])
    )


def default_grid(dataset: Dataset, size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """Log-spaced penalty grid in [1e-4 * lam_max, lam_max], ascending."""
    top = lam_max(dataset)
    if top <= 0.0:
        return np.array([0.0])
    return np.geomspace(GRID_SPAN * top, top, size)


class CvResult(NamedTuple):
    lam_star: float
    cv_error: np.ndarray
    lam_grid: np.ndarray


def cv_select(
    dataset: Dataset,
    k: int = 5,
    lam_grid: np.ndarray | None = None,
    tol: float = 1e-8,
    max_iter: int = 10_000,
) -> CvResult:
    """Pick the penalty minimizing mean held-out MSE over k folds.

    Folds are contiguous time blocks. Within each fold the training
    rows are re-standardized from scratch, the penalty path is solved
    from the largest penalty down with warm starts, and the held-out
    block is scored on the original scale. Ties in mean CV error go to
    the larger penalty. A fold whose training target has zero variance
    is skipped with a warning.
    """
    if k < 2:
        raise ConfigError("cross-validation needs at least 2 folds")
    if dataset.n < k:
        raise ConfigError(f"{k} folds but only {dataset.n} rows")
    if lam_grid is None:
        grid = default_grid(dataset)
    else:
        grid = np.sort(np.asarray(lam_grid, dtype=float))
        if grid.ndim != 1 or grid.size == 0:
            raise ConfigError("penalty grid must be a non-empty 1-d sequence")
        if grid[0] < 0 or not np.isfinite(grid).all():
            raise ConfigError("penalty grid values must be finite and non-negative")

    folds = np.array_split(np.arange(dataset.n), k)
    fold_err = np.zeros((k, grid.size))
    used = np.zeros(k, dtype=bool)
    for fi, held in enumerate(folds):
        mask = np.ones(dataset.n, dtype=bool)
        mask[held] = False
        y_tr = dataset.y[mask]
        if np.all(y_tr == y_tr[0]):
            log.warning(
                "cv fold %d/%d skipped: training target has zero variance", fi + 1, k
            )
            continue
        sub = Dataset.from_arrays(dataset.x[mask], y_tr, dataset.columns)
        x_val = dataset.x[held]
        y_val = dataset.y[held]
        warm = np.zeros(dataset.p)
        safe = np.where(sub.scale > 0, sub.scale, 1.0)
        for gi in range(grid.size - 1, -1, -1):
            model = fit(sub, float(grid[gi]), tol=tol, max_iter=max_iter,
                        warm_start=warm)
            warm = model.coef * safe
            err = predict(model, x_val) - y_val
            fold_err[fi, gi] = float(err @ err) / held.size
        used[fi] = True

    if not used.any():
        raise StatsError("every cross-validation fold was skipped")
    cv_error = fold_err[used].mean(axis=0)
    best = cv_error.min()
    tied = np.isclose(cv_error, best, rtol=TIE_RTOL, atol=TIE_ATOL)
    lam_star = float(grid[np.flatnonzero(tied)[-1]])
    cv_error.setflags(write=False)
    return CvResult(lam_star=lam_star, cv_error=cv_error, lam_grid=grid)


def predict(fit_result: LassoFit, rows: np.ndarray) -> np.ndarray | float:
    """Evaluate alpha + X beta; a 1-d input is one row and yields a float."""
    x = np.asarray(rows, dtype=float)
    one_row = x.ndim == 1
    x = np.atleast_2d(x)
    if x.ndim != 2 or x.shape[1] != fit_result.coef.shape[0]:
        raise ConfigError(
            f"expected {fit_result.coef.shape[0]} feature columns, "
            f"got {x.shape[-1] if x.ndim else 0}"
        )
    out = fit_result.intercept + x @ fit_result.coef
    if one_row:
        return float(out[0])
    return out
