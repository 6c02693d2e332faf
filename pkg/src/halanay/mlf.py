"""Two-parameter Mittag-Leffler function on the real line.

The evaluator works in float64 and splits the axis into regimes: the
Taylor series wherever it is numerically safe, the algebraic tail
expansion for large negative arguments, and a quadrature of the
spectral representation inside the cancellation window between the two
(where the alternating series loses roughly half its digits).
"""

import math
import threading
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.special import gammaln, gammasgn

from .errors import MlfDomainError, MlfOverflowError, SeriesCapError

__all__ = ["MlQuery", "ml", "mittag_leffler", "mittag_leffler_deriv"]

SERIES_CAP = 10_000
ASYM_CAP = 2_000

# regime bounds on u = |x|^(1/alpha), kept in log form so routing never
# has to exponentiate a potentially overflowing power
_LN_U_SERIES = math.log(6.5)
_LN_U_ASYM = math.log(25.0)

_EXP_MAX = 709.782712893384
_LN_OVER = math.log(740.0)

_MP_LOCK = threading.Lock()


@dataclass(frozen=True)
class MlQuery:
    """One evaluation request E_{alpha,beta}(x)."""

    alpha: float
    beta: float
    x: float


def ml(x, alpha, beta=1.0):
    """Evaluate E_{alpha,beta}(x) for real x, alpha in (0,1], beta > 0."""
    if not math.isfinite(alpha) or not 0.0 < alpha <= 1.0:
        raise MlfDomainError(f"alpha must lie in (0, 1], got {alpha!r}")
    if not math.isfinite(beta) or beta <= 0.0:
        raise MlfDomainError(f"beta must be finite and positive, got {beta!r}")
    if not math.isfinite(x):
        raise MlfDomainError(f"argument must be finite, got {x!r}")

    if alpha == 1.0 and beta == 1.0:
        if x > _EXP_MAX:
            raise MlfOverflowError(f"exp({x}) exceeds float64 range")
        return math.exp(x)

    if x == 0.0:
        try:
            return 1.0 / math.gamma(beta)
        except OverflowError:
            return 0.0

    if x > 0.0:
        # the sum grows like exp(x^(1/alpha)); refuse clearly doomed inputs
        if x > 1.0 and math.log(x) > alpha * _LN_OVER:
            raise MlfOverflowError(
                f"E_({alpha},{beta})({x}) exceeds float64 range"
            )
        return _series(x, alpha, beta)

    y = -x
    ln_y = math.log(y)
    lu = ln_y / alpha
    if lu > _LN_U_ASYM:
        val, crude = _asym_neg(alpha, beta, ln_y)
        if not crude or lu > math.log(60.0):
            return val
        # truncation too coarse this close to the seam; use a denser route
    elif lu <= _LN_U_SERIES:
        return _series(x, alpha, beta)
    if alpha <= 0.995 and (beta == 1.0 or beta == alpha):
        return _spectral(math.exp(lu), alpha, beta)
    return _mp_series(x, alpha, beta)


def mittag_leffler(q):
    """Evaluate a query object; see ml()."""
    return ml(q.x, q.alpha, q.beta)


def mittag_leffler_deriv(alpha, x):
    """d/dx E_alpha(x), computed as E_{alpha,alpha}(x)/alpha."""
    return ml(x, alpha, alpha) / alpha


def _series(x, alpha, beta):
    """Taylor sum in log space, vectorized over chunks of terms."""
    ln_ax = math.log(abs(x))
    neg = x < 0.0
    chunk = 64 + int(32.0 / alpha)
    chunk += chunk & 1  # even length keeps term parity aligned per chunk
    total = 0.0
    k0 = 0
    while k0 < SERIES_CAP:
        hi = min(k0 + chunk, SERIES_CAP)
        ks = np.arange(k0, hi, dtype=np.float64)
        with np.errstate(over="ignore"):
            terms = np.exp(ks * ln_ax - gammaln(alpha * ks + beta))
        if neg:
            terms[1::2] *= -1.0
        total += float(terms.sum())
        if not math.isfinite(total):
            raise MlfOverflowError(
                f"E_({alpha},{beta})({x}) exceeds float64 range"
            )
        tail = float(np.max(np.abs(terms[-4:])))
        if tail < 1e-16 * (abs(total) + 1.0):
            return total
        k0 = hi
    raise SeriesCapError(
        f"series for E_({alpha},{beta})({x}) did not converge "
        f"within {SERIES_CAP} terms"
    )


def _asym_neg(alpha, beta, ln_y):
    """Algebraic tail expansion at x = -y, truncated at its smallest term.

    Term magnitudes dip sharply next to the Gamma poles (where the
    coefficient 1/Gamma(beta - alpha*k) vanishes), so the truncation
    point is chosen on the smooth reflection-formula envelope
    y^-k * Gamma(alpha*k + 1 - beta) / pi, not on the raw magnitudes.
    Returns (value, crude); crude signals that even the optimal
    truncation leaves more than ~1e-11 relative error.
    """
    lts = []
    sgs = []
    envs = []
    scale = None
    emin = math.inf
    k0 = 1
    while k0 <= ASYM_CAP:
        hi = min(k0 + 128, ASYM_CAP + 1)
        ks = np.arange(k0, hi, dtype=np.float64)
        z = beta - alpha * ks
        lt = -ks * ln_y - gammaln(z)
        sg = gammasgn(z) * (2.0 * (ks % 2.0) - 1.0)
        # gammasgn is NaN at the poles where the coefficient vanishes
        sg = np.where(np.isfinite(lt), sg, 0.0)
        env = np.where(
            z >= 0.5,
            lt,
            -ks * ln_y + gammaln(1.0 - z) - math.log(math.pi),
        )
        lts.append(lt)
        sgs.append(sg)
        envs.append(env)
        if scale is None:
            scale = math.exp(min(float(env.max()), 300.0))
        emin = min(emin, float(env.min()))
        if emin < math.log(1e-18 * scale + 1e-300):
            break
        if float(env[-1]) > emin + 2.0:
            break
        k0 = hi
    if len(lts) > 1:
        lt = np.concatenate(lts)
        sg = np.concatenate(sgs)
        env = np.concatenate(envs)
    m = int(np.argmin(env))
    with np.errstate(over="ignore"):
        vals = sg[: m + 1] * np.exp(lt[: m + 1])
    crude = math.exp(min(env[m], 300.0)) > 1e-11 * (scale + 1.0)
    return float(vals.sum()), crude


def _spectral(u, alpha, beta):
    """Quadrature of the spectral density, for beta in {1, alpha} only.

    E_alpha(-u^alpha) = sin(pi a)/(pi a) * int_0^inf exp(-w^(1/a) u) /
    (w^2 + 2 cos(pi a) w + 1) dw; substituting w = e^v makes the
    integrand analytic in a strip around the real v-axis, so the
    trapezoid rule converges geometrically in 1/step. The step is tied
    to the strip half-width: poles of the density sit at height
    (1-alpha)*pi and the double-exponential factor turns to growth at
    height alpha*pi/2.
    """
    c = math.cos(math.pi * alpha)
    s = math.sin(math.pi * alpha)
    # keep >= 5 (resp. 10) grid points per unit of strip half-width
    step = min(math.pi * (1.0 - alpha) / 5.0, math.pi * alpha / 10.0)
    v_hi = alpha * math.log(46.0 / u)
    n = int(math.ceil((v_hi + 40.0) / step)) + 1
    v = -40.0 + step * np.arange(n)
    w = np.exp(v)
    damp = np.exp(-np.exp(v / alpha) * u)
    den = (w + 2.0 * c) * w + 1.0
    if beta == 1.0:
        total = float((w * damp / den).sum())
        return s / (alpha * math.pi) * step * total
    total = float((w * np.exp(v / alpha) * damp / den).sum())
    return u ** (1.0 - alpha) * s / (alpha * math.pi) * step * total


def _mp_series(x, alpha, beta):
    """High-precision fallback for the rare regimes the fast paths skip."""
    with _MP_LOCK, mpmath.workdps(60):
        xm = mpmath.mpf(x)
        am = mpmath.mpf(alpha)
        total = mpmath.mpf(0)
        eps = mpmath.mpf("1e-40")
        small = 0
        for k in range(100_000):
            term = xm**k / mpmath.gamma(am * k + beta)
            total += term
            if abs(term) < eps * (abs(total) + 1):
                small += 1
                if small >= 4:
                    return float(total)
            else:
                small = 0
    raise SeriesCapError(
        f"high-precision series for E_({alpha},{beta})({x}) stalled"
    )
