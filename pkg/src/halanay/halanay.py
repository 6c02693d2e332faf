"""Decay-rate certificates for delayed comparison inequalities.

Given sampled nonnegative coefficients a(t), b_k(t), c(t) and bounded
delays q_k(t), each grid point t carries a unique rate lambda(t) > 0
solving

    lambda - a(t) + sum_k b_k(t) / E_alpha(-lambda q_k(t)^alpha) = 0,

and the certificate takes the grid minimum together with an offset w0
determined by which smallness condition the coefficients satisfy. The
resulting envelope is w0 + M E_alpha(-lambda* t^alpha).
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import HalanayError, InfeasiblePointError, VerdictNoneError
from .mlf import ml

__all__ = [
    "ScanGrid",
    "ConditionVerdict",
    "HalanayCertificate",
    "HalanayInput",
    "lambda_at",
    "classify_conditions",
    "certify",
    "envelope",
]

BOUNDED_GAP = "BOUNDED_GAP"
RATIO = "RATIO"
NONE = "NONE"

RESIDUAL_BOUND = 1e-10


@dataclass(frozen=True)
class ScanGrid:
    """Uniform samples of [0, t_max] standing in for 'all t >= 0'."""

    t_max: float
    n_points: int

    def __post_init__(self):
        if not (math.isfinite(self.t_max) and self.t_max > 0):
            raise ValueError(f"t_max must be positive, got {self.t_max}")
        if self.n_points < 2:
            raise ValueError(f"n_points must be >= 2, got {self.n_points}")

    def times(self):
        return np.linspace(0.0, self.t_max, self.n_points)


@dataclass(frozen=True)
class ConditionVerdict:
    case_tag: str  # BOUNDED_GAP, RATIO or NONE
    sigma: float  # min over grid of a - sum_k b_k
    a0: float  # min over grid of a
    p: float  # max over grid of (sum_k b_k) / a
    c_star: float  # max over grid of c
    a_bounded: bool  # boundedness heuristic (or user assertion) outcome


@dataclass(frozen=True)
class HalanayCertificate:
    lambda_star: float
    w0: float
    M: float
    residual_max: float
    grid_argmin: float  # t achieving the minimal rate
    case_tag: str
    t_max: float
    n_points: int


@dataclass(frozen=True)
class HalanayInput:
    alpha: float
    a: object  # TimeExpr
    b: list  # list of TimeExpr
    q: list  # list of TimeExpr, same length as b
    c: object  # TimeExpr
    tau: float
    scan: ScanGrid
    # None = detect boundedness of a from the grid; True/False = assert it
    a_bounded: object = field(default=None)

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ValueError(f"tau must be positive, got {self.tau}")
        if len(self.b) != len(self.q) or not self.b:
            raise ValueError("b and q must have equal nonzero length")


def _h(lam, alpha, a_val, b_vals, q_vals):
    acc = lam - a_val
    for b, q in zip(b_vals, q_vals):
        acc += b / ml(-lam * q**alpha, alpha)
    return acc


def _h_prime(lam, alpha, a_val, b_vals, q_vals):
    acc = 1.0
    for b, q in zip(b_vals, q_vals):
        qa = q**alpha
        e1 = ml(-lam * qa, alpha)
        eaa = ml(-lam * qa, alpha, alpha)
        acc += b * qa * eaa / (alpha * e1 * e1)
    return acc


def lambda_at(alpha, a_val, b_vals, q_vals):
    """Unique positive root of the rate equation at one sample point.

    Bisection on (0, a] (the root is bracketed there since the left side
    is strictly increasing, negative at 0 and nonnegative at a), followed
    by a short Newton polish.
    """
    b_vals = [float(b) for b in b_vals]
    q_vals = [float(q) for q in q_vals]
    if len(b_vals) != len(q_vals):
        raise ValueError("b_vals and q_vals must have equal length")
    if a_val < 0 or any(b < 0 for b in b_vals) or any(q < 0 for q in q_vals):
        raise ValueError("a, b and q samples must be nonnegative")
    sb = sum(b_vals)
    if a_val <= sb:
        raise InfeasiblePointError(
            f"a={a_val} does not exceed sum(b)={sb}; no positive rate exists"
        )
    if sb == 0.0:
        return a_val
    lo, hi = 0.0, a_val
    width = 1e-14 * max(1.0, a_val)
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if _h(mid, alpha, a_val, b_vals, q_vals) < 0.0:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    for _ in range(3):
        step = _h(lam, alpha, a_val, b_vals, q_vals) / _h_prime(
            lam, alpha, a_val, b_vals, q_vals
        )
        lam -= step
        if not 0.0 < lam <= a_val:
            lam = min(max(lam, width), a_val)
    return lam


def _sample(input_):
    """Evaluate all coefficient expressions on the scan grid."""
    ts = input_.scan.times()
    a = input_.a.eval_array(ts)
    bs = np.vstack([b.eval_array(ts) for b in input_.b])
    qs = np.vstack([q.eval_array(ts) for q in input_.q])
    c = input_.c.eval_array(ts)
    if np.min(a) < 0 or np.min(bs) < 0 or np.min(c) < 0:
        raise InfeasiblePointError("a, b and c must be nonnegative on the grid")
    slack = 1e-9 * max(1.0, input_.tau)
    if np.min(qs) < -slack or np.max(qs) > input_.tau + slack:
        raise InfeasiblePointError(
            f"delays must stay within [0, {input_.tau}] on the grid"
        )
    return ts, a, bs, np.clip(qs, 0.0, None), c


def classify_conditions(input_):
    """Decide which smallness condition the sampled coefficients satisfy.

    The gap condition needs a bounded above; since boundedness is not
    decidable from finitely many samples, it is taken from the input
    flag when given, else from a two-half growth heuristic (grid max of
    a must not grow by more than 1% between halves).
    """
    ts, a, bs, qs, c = _sample(input_)
    sum_b = bs.sum(axis=0)
    sigma = float(np.min(a - sum_b))
    a0 = float(np.min(a))
    if a0 > 0.0:
        p = float(np.max(sum_b / a))
    else:
        p = math.inf
    c_star = float(np.max(c))
    if input_.a_bounded is None:
        half = len(a) // 2
        bounded = float(np.max(a[half:])) <= 1.01 * float(np.max(a[:half]))
    else:
        bounded = bool(input_.a_bounded)
    if sigma > 0.0 and bounded:
        tag = BOUNDED_GAP
    elif a0 > 0.0 and p < 1.0:
        tag = RATIO
    else:
        tag = NONE
    return ConditionVerdict(
        case_tag=tag, sigma=sigma, a0=a0, p=p, c_star=c_star, a_bounded=bounded
    )


def _workers():
    raw = os.environ.get("HALANAY_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, min(n, 32))


def certify(input_, M):
    """Scan the grid for the minimal rate and assemble the certificate."""
    if M < 0:
        raise ValueError(f"amplitude M must be nonnegative, got {M}")
    verdict = classify_conditions(input_)
    if verdict.case_tag == NONE:
        raise VerdictNoneError(
            "neither decay condition holds on the grid "
            f"(sigma={verdict.sigma:.6g}, a0={verdict.a0:.6g}, p={verdict.p:.6g})"
        )
    ts, a, bs, qs, _ = _sample(input_)
    alpha = input_.alpha

    def rate(i):
        lam = lambda_at(alpha, float(a[i]), bs[:, i], qs[:, i])
        res = abs(_h(lam, alpha, float(a[i]), bs[:, i], qs[:, i]))
        return lam, res

    n = len(ts)
    workers = _workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(rate, range(n)))
    else:
        pairs = [rate(i) for i in range(n)]
    lams = np.array([p[0] for p in pairs])
    residual_max = float(max(p[1] for p in pairs))
    if residual_max > RESIDUAL_BOUND:
        raise HalanayError(
            f"rate-equation residual {residual_max:.3e} exceeds {RESIDUAL_BOUND}"
        )
    arg = int(np.argmin(lams))
    if verdict.case_tag == BOUNDED_GAP:
        w0 = verdict.c_star / verdict.sigma
    else:
        w0 = verdict.c_star / ((1.0 - verdict.p) * verdict.a0)
    return HalanayCertificate(
        lambda_star=float(lams[arg]),
        w0=w0,
        M=float(M),
        residual_max=residual_max,
        grid_argmin=float(ts[arg]),
        case_tag=verdict.case_tag,
        t_max=input_.scan.t_max,
        n_points=input_.scan.n_points,
    )


def envelope(cert, alpha, t):
    """Certified bound w0 + M E_alpha(-lambda* t^alpha) at time t >= 0."""
    if t < 0:
        raise ValueError(f"envelope time must be nonnegative, got {t}")
    return cert.w0 + cert.M * ml(-cert.lambda_star * t**alpha, alpha)
