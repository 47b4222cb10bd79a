"""Zero-intercept Poisson regression fitted by Newton's method.

The model for a response count y given covariate counts x is
``y ~ Pois(exp(<theta, x>))``. The objective is the rescaled negative
log-likelihood

    nll(theta) = (1/n) sum_i [ -y_i <theta, x_i> + log(y_i!) + exp(<theta, x_i>) ]

which is convex in theta. Its Hessian, ``(1/n) sum_i exp(<theta, x_i>)
x_i x_i^T``, does not depend on y, so the observed and (conditionally)
expected Fisher information coincide; the fitted Hessian is reported as the
sample Fisher information and feeds the Wald test of a single coefficient.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np
from numpy.linalg import LinAlgError
from scipy.special import gammaln

from .data import InvalidData

_STD_NORMAL = NormalDist()

#: Sentinel covariate index used for the optional intercept column.
INTERCEPT = -1


class SingularInformation(RuntimeError):
    """Fisher information not invertible, even after the ridge rescue."""


@dataclass(frozen=True)
class FitOptions:
    """Newton solver knobs; the defaults fit every use in this package."""

    tol: float = 1e-8            # gradient max-norm at convergence
    max_iter: int = 100
    theta_cap: float = 20.0      # freeze coefficients diverging below -theta_cap
    lp_cap: float = 30.0         # clamp linear predictors inside exp during fitting
    max_halvings: int = 30
    intercept: bool = False


@dataclass
class GlmFit:
    """Fitted zero-intercept Poisson regression of one node on covariates K."""

    covariates: tuple[int, ...]
    theta: np.ndarray
    fisher: np.ndarray
    nll: float
    converged: bool
    iterations: int
    diverged: np.ndarray
    lp_capped: bool = False

    def coefficient(self, target: int) -> float:
        return float(self.theta[self.covariates.index(target)])


@dataclass(frozen=True)
class WaldTest:
    """Wald test of H0: theta_target = 0 at significance level alpha."""

    target: int
    z: float
    alpha: float
    reject: bool


def _log_factorial(y: np.ndarray) -> np.ndarray:
    # log(y!) via log-gamma; math.lgamma is scalar-only, gammaln vectorizes.
    return gammaln(y + 1.0)


def _prepare(theta, y, X):
    theta = np.asarray(theta, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidData(f"covariate matrix must be 2-D, got shape {X.shape}")
    n, k = X.shape
    if y.shape != (n,):
        raise InvalidData(f"response length {y.shape} does not match {n} rows")
    if theta.shape != (k,):
        raise InvalidData(f"theta length {theta.shape[0]} does not match {k} columns")
    if n < 1:
        raise InvalidData("need at least one observation")
    return theta, y, X


def nll(theta, y, X, lp_cap: float | None = None) -> float:
    """Rescaled negative log-likelihood at ``theta``.

    ``lp_cap`` clamps linear predictors inside the exponential (optimization
    guard); leave it None for exact evaluation.
    """
    theta, y, X = _prepare(theta, y, X)
    lp = X @ theta
    lpe = lp if lp_cap is None else np.minimum(lp, lp_cap)
    return float(np.mean(-y * lp + _log_factorial(y) + np.exp(lpe)))


def gradient(theta, y, X, lp_cap: float | None = None) -> np.ndarray:
    """Gradient of :func:`nll`: component t is (1/n) sum_i x_it (exp(<theta,x_i>) - y_i)."""
    theta, y, X = _prepare(theta, y, X)
    lp = X @ theta
    if lp_cap is not None:
        lp = np.minimum(lp, lp_cap)
    return X.T @ (np.exp(lp) - y) / len(y)


def fisher_information(theta, y, X, lp_cap: float | None = None) -> np.ndarray:
    """Sample Fisher information (1/n) sum_i exp(<theta,x_i>) x_i x_i^T."""
    theta, y, X = _prepare(theta, y, X)
    lp = X @ theta
    if lp_cap is not None:
        lp = np.minimum(lp, lp_cap)
    w = np.exp(lp)
    J = (X.T * w) @ X / len(y)
    return (J + J.T) / 2.0


def _solve_plain(H: np.ndarray, rhs: np.ndarray) -> np.ndarray | None:
    """Solve H x = rhs; None signals a singular system. Small systems are
    solved directly, avoiding LAPACK call overhead in the learner hot loop."""
    k = H.shape[0]
    if k == 1:
        h = H[0, 0]
        if h == 0.0 or not math.isfinite(h):
            return None
        return rhs / h
    if k == 2:
        det = H[0, 0] * H[1, 1] - H[0, 1] * H[1, 0]
        if det == 0.0 or not math.isfinite(det):
            return None
        out = np.empty(2)
        out[0] = (H[1, 1] * rhs[0] - H[0, 1] * rhs[1]) / det
        out[1] = (H[0, 0] * rhs[1] - H[1, 0] * rhs[0]) / det
        return out
    try:
        return np.linalg.solve(H, rhs)
    except LinAlgError:
        return None


def _solve_with_ridge(H: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve H x = rhs, adding ridge 1e-10 * trace/k on failure."""
    out = _solve_plain(H, rhs)
    if out is not None:
        return out
    k = H.shape[0]
    ridge = 1e-10 * float(np.trace(H)) / max(k, 1)
    if ridge <= 0.0 or not math.isfinite(ridge):
        raise SingularInformation("information matrix singular; ridge rescue impossible")
    out = _solve_plain(H + ridge * np.eye(k), rhs)
    if out is None:
        raise SingularInformation("information matrix singular after ridge rescue")
    return out


def fit(y, X, opts: FitOptions = FitOptions(), covariates=None) -> GlmFit:
    """Minimize :func:`nll` by Newton iterations with step-halving.

    ``covariates`` names the columns of X (node indices); defaults to
    0..k-1. Coefficients trending below ``-theta_cap`` (separation, MLE at
    -infinity) are frozen at the cap and flagged in ``diverged``.
    """
    y = np.asarray(y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if y.shape != (n,):
        raise InvalidData(f"response length {len(y)} does not match {n} rows")
    if n < 1:
        raise InvalidData("need at least one observation")
    if not np.all(np.isfinite(y)) or not np.all(np.isfinite(X)):
        raise InvalidData("non-finite values in regression data")
    if y.size and y.min() < 0:
        raise InvalidData("negative response counts")

    if covariates is None:
        covariates = tuple(range(X.shape[1]))
    else:
        covariates = tuple(int(c) for c in covariates)
        if len(covariates) != X.shape[1]:
            raise InvalidData("covariate name list does not match X columns")
    if opts.intercept:
        X = np.hstack([X, np.ones((n, 1))])
        covariates = covariates + (INTERCEPT,)
    return _fit_core(y, X, opts, covariates, float(np.mean(_log_factorial(y))))


def _fit_core(
    y: np.ndarray,
    X: np.ndarray,
    opts: FitOptions,
    covariates: tuple[int, ...],
    log_fact: float,
) -> GlmFit:
    """Newton solver on pre-validated float arrays (hot path for learners)."""
    n, k = X.shape
    if k == 0:
        # Empty covariate set: rate exp(0)=1 for every row.
        return GlmFit(
            covariates=(),
            theta=np.zeros(0),
            fisher=np.zeros((0, 0)),
            nll=log_fact + 1.0,
            converged=True,
            iterations=0,
            diverged=np.zeros(0, dtype=bool),
        )

    cap = opts.lp_cap
    inv_n = 1.0 / n
    theta = np.zeros(k)
    diverged = np.zeros(k, dtype=bool)
    lp_capped = False

    def evaluate(th: np.ndarray) -> tuple[float, np.ndarray, np.ndarray, bool]:
        """objective, linear predictor, capped rates, cap flag at th."""
        lp = X @ th
        capped = bool(lp.max(initial=-math.inf) > cap)
        w = np.exp(np.minimum(lp, cap) if capped else lp)
        value = (w.sum() - y @ lp) * inv_n + log_fact
        return value, lp, w, capped

    current, lp, w, capped = evaluate(theta)
    lp_capped |= capped
    if not math.isfinite(current):
        raise InvalidData("objective non-finite at theta = 0")

    converged = False
    iterations = 0
    for _ in range(opts.max_iter):
        grad = (X.T @ (w - y)) * inv_n
        if diverged.any():
            free = ~diverged
            if not free.any():
                converged = True
                break
            Xf = X[:, free]
            H = ((Xf.T * w) @ Xf) * inv_n
            grad_free = grad[free]
        else:
            free = None
            H = ((X.T * w) @ X) * inv_n
            grad_free = grad
        step = _solve_with_ridge(H, grad_free)
        # Under separation the gradient vanishes while the Newton step stays
        # O(1) (curvature collapses as fast as the gradient), so a small
        # gradient alone cannot certify an interior optimum.
        if (
            float(np.abs(grad_free).max()) <= opts.tol
            and float(np.abs(step).max()) <= 1e-4
        ):
            converged = True
            break

        eta = 1.0
        accepted = False
        for _ in range(opts.max_halvings + 1):
            if free is None:
                trial = theta - eta * step
            else:
                trial = theta.copy()
                trial[free] = theta[free] - eta * step
            hit = trial <= -opts.theta_cap
            any_hit = bool(hit.any())
            if any_hit:
                trial[hit] = -opts.theta_cap
            value, lp_t, w_t, capped = evaluate(trial)
            if value < current and math.isfinite(value):
                theta, current, lp, w = trial, value, lp_t, w_t
                lp_capped |= capped
                if any_hit:
                    diverged |= hit
                accepted = True
                break
            eta /= 2.0
        iterations += 1
        if not accepted:
            # No descent direction left at floating-point resolution; the
            # final convergence check below decides the flag.
            break

    grad = (X.T @ (w - y)) * inv_n
    if not converged:
        free_grad = grad[~diverged]
        converged = free_grad.size == 0 or float(np.abs(free_grad).max()) <= opts.tol
    J = ((X.T * w) @ X) * inv_n
    J = (J + J.T) / 2.0
    return GlmFit(
        covariates=covariates,
        theta=theta,
        fisher=J,
        nll=current,
        converged=converged,
        iterations=iterations,
        diverged=diverged,
        lp_capped=lp_capped,
    )


def wald(fit: GlmFit, target: int, n: int, alpha: float) -> WaldTest:
    """Wald test of H0: theta_target = 0.

    z = sqrt(n) theta_hat / sqrt([J^-1]_tt); the null is rejected iff
    |z| strictly exceeds the two-sided normal quantile. A diverged
    coefficient never rejects: a -infinity MLE has unbounded variance and
    carries no finite evidence under the Wald construction.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must be in [0, 1), got {alpha}")
    try:
        idx = fit.covariates.index(target)
    except ValueError:
        raise ValueError(f"covariate {target} not in fit ({fit.covariates})") from None
    if fit.diverged[idx]:
        return WaldTest(target=target, z=0.0, alpha=alpha, reject=False)
    k = len(fit.covariates)
    rhs = np.zeros(k)
    rhs[idx] = 1.0
    inv_col = _solve_with_ridge(fit.fisher, rhs)
    var_tt = float(inv_col[idx])
    if not math.isfinite(var_tt) or var_tt <= 0.0:
        raise SingularInformation(
            f"non-positive variance estimate for covariate {target}"
        )
    z = math.sqrt(n) * float(fit.theta[idx]) / math.sqrt(var_tt)
    if alpha == 0.0:
        return WaldTest(target=target, z=z, alpha=alpha, reject=False)
    crit = -_STD_NORMAL.inv_cdf(alpha / 2.0)
    return WaldTest(target=target, z=z, alpha=alpha, reject=bool(abs(z) > crit))


def alpha_schedule(n: int, b: float) -> float:
    """Sample-size-driven significance level 2(1 - Phi(n^b)).

    Evaluated through erfc to keep full relative accuracy in the upper tail.
    """
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    if not 0.0 < b < 0.5:
        raise ValueError(f"exponent b must lie in (0, 0.5), got {b}")
    return math.erfc(float(n) ** b / math.sqrt(2.0))
