"""Order-preserving structure checks and the l1 decay certificate.

A delay system x' (in the Caputo sense) = A(t) x + B(t) x(t - q(t)) is
order preserving when A(t) is Metzler and B(t) is nonnegative. Column
sums of A and B then bound the l1 norm of any nonnegative solution by a
scalar comparison inequality, which the halanay module certifies. The
resulting envelope is sup_s ||phi(s)||_1 times E_alpha(-lambda* t^alpha).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import halanay as _hal
from .errors import StructureError
from .expr import parse

__all__ = [
    "DelaySystem",
    "PositivityVerdict",
    "structure_check",
    "column_sums",
    "certify_positive",
    "split_initial",
    "initial_amplitude",
]

SIGN_SLACK = -1e-12  # absorbs expression-evaluation rounding
AMPLITUDE_SAMPLES = 10_000


@dataclass(frozen=True)
class DelaySystem:
    alpha: float
    dim: int
    A: list  # dim x dim nested list of TimeExpr
    B: list  # dim x dim nested list of TimeExpr
    q: object  # TimeExpr, single delay
    tau: float
    phi: list  # dim TimeExpr in the history variable on [-tau, 0]

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ValueError(f"tau must be positive, got {self.tau}")
        for name, mat in (("A", self.A), ("B", self.B)):
            if len(mat) != self.dim or any(len(row) != self.dim for row in mat):
                raise ValueError(f"{name} must be {self.dim}x{self.dim}")
        if len(self.phi) != self.dim:
            raise ValueError(f"phi must have {self.dim} components")


@dataclass(frozen=True)
class PositivityVerdict:
    metzler_ok: bool
    nonneg_ok: bool
    a_fun: np.ndarray  # sampled -max_j sum_i A_ij(t)
    b_fun: np.ndarray  # sampled  max_j sum_i B_ij(t)
    a0: float
    p: float
    theorem_33_ok: bool  # ratio route: a0 > 0 and p < 1
    remark_34_ok: bool  # gap route: min(a - b) > 0 with a bounded
    sigma: float


def _eval_matrix(mat, ts):
    d = len(mat)
    out = np.empty((d, d, len(ts)))
    for i in range(d):
        for j in range(d):
            out[i, j] = mat[i][j].eval_array(ts)
    return out


class _ColumnSumBound:
    """Pointwise column-sum reduction of a matrix of expressions.

    Duck-types the TimeExpr eval interface so halanay can sample it on
    whatever grid it uses. With negate set it yields -max_j sum_i M_ij
    (the decay coefficient a); otherwise max_j sum_i M_ij clamped at 0
    (the coupling coefficient b; structure_check has already vetted the
    entries, clamping only absorbs rounding in the sums).
    """

    def __init__(self, mat, negate):
        self._mat = mat
        self._negate = negate

    def eval_array(self, ts):
        ts = np.asarray(ts, dtype=float)
        col = _eval_matrix(self._mat, ts).sum(axis=0).max(axis=0)
        if self._negate:
            return -col
        return np.maximum(col, 0.0)

    def eval(self, t):
        return float(self.eval_array(np.array([float(t)]))[0])


def structure_check(sys, grid):
    """(Metzler A, nonnegative B) sampled on the grid, with rounding slack."""
    ts = grid.times()
    a_vals = _eval_matrix(sys.A, ts)
    b_vals = _eval_matrix(sys.B, ts)
    off = ~np.eye(sys.dim, dtype=bool)
    metzler_ok = bool(np.min(a_vals[off], initial=np.inf) >= SIGN_SLACK)
    nonneg_ok = bool(np.min(b_vals) >= SIGN_SLACK)
    return metzler_ok, nonneg_ok


def column_sums(sys, grid):
    """Sampled a(t) = -max_j sum_i A_ij(t) and b(t) = max_j sum_i B_ij(t)."""
    ts = grid.times()
    a_fun = -_eval_matrix(sys.A, ts).sum(axis=0).max(axis=0)
    b_fun = _eval_matrix(sys.B, ts).sum(axis=0).max(axis=0)
    return a_fun, b_fun


def initial_amplitude(sys, kind="l1", n_samples=AMPLITUDE_SAMPLES):
    """sup over s in [-tau, 0] of ||phi(s)||_1 ('l1') or phi(s)^T phi(s) ('sq').

    Uniform sampling; phi is assumed smooth enough that the grid sup is
    an adequate stand-in for the continuous one.
    """
    ss = np.linspace(-sys.tau, 0.0, n_samples)
    vals = np.vstack([p.eval_array(ss) for p in sys.phi])
    if kind == "l1":
        return float(np.max(np.abs(vals).sum(axis=0)))
    if kind == "sq":
        return float(np.max((vals * vals).sum(axis=0)))
    raise ValueError(f"kind must be 'l1' or 'sq', got {kind!r}")


def certify_positive(sys, grid, a_bounded=None):
    """Run both column-sum decay conditions and certify the l1 envelope.

    Returns (verdict, certificate); the certificate is None when neither
    condition holds (the verdict carries the diagnostics). Structure
    violations raise, since the comparison argument needs them.
    """
    metzler_ok, nonneg_ok = structure_check(sys, grid)
    if not (metzler_ok and nonneg_ok):
        bad = []
        if not metzler_ok:
            bad.append("A has a negative off-diagonal entry on the grid")
        if not nonneg_ok:
            bad.append("B has a negative entry on the grid")
        raise StructureError("; ".join(bad))
    a_fun, b_fun = column_sums(sys, grid)
    a0 = float(np.min(a_fun))
    p = float(np.max(b_fun / a_fun)) if a0 > 0.0 else math.inf
    sigma = float(np.min(a_fun - b_fun))
    if a_bounded is None:
        half = len(a_fun) // 2
        bounded = float(np.max(a_fun[half:])) <= 1.01 * float(np.max(a_fun[:half]))
    else:
        bounded = bool(a_bounded)
    theorem_33_ok = a0 > 0.0 and p < 1.0
    remark_34_ok = sigma > 0.0 and bounded
    verdict = PositivityVerdict(
        metzler_ok=metzler_ok,
        nonneg_ok=nonneg_ok,
        a_fun=a_fun,
        b_fun=b_fun,
        a0=a0,
        p=p,
        theorem_33_ok=theorem_33_ok,
        remark_34_ok=remark_34_ok,
        sigma=sigma,
    )
    if not (theorem_33_ok or remark_34_ok):
        return verdict, None
    input_ = _hal.HalanayInput(
        alpha=sys.alpha,
        a=_ColumnSumBound(sys.A, negate=True),
        b=[_ColumnSumBound(sys.B, negate=False)],
        q=[sys.q],
        c=parse("0", "t"),
        tau=sys.tau,
        scan=grid,
        a_bounded=bounded,
    )
    cert = _hal.certify(input_, M=initial_amplitude(sys, "l1"))
    return verdict, cert


def split_initial(phi_samples):
    """Componentwise envelope pair phi_minus <= phi <= phi_plus.

    phi_plus = |phi|, phi_minus = -|phi|; both are valid initial data for
    the comparison system whenever phi is.
    """
    mag = np.abs(np.asarray(phi_samples, dtype=float))
    return mag, -mag
