"""Time-parametrized matrix-inequality route to an l2 decay envelope.

At each grid time the block matrix

    S(t) = [ A(t)^T + A(t) + gamma(t) I    B(t)      ]
           [ B(t)^T                       -sigma(t) I ]

must be negative semidefinite. Together with gamma bounded away from 0
and sup sigma/gamma < 1, the squared norm V = x^T x then obeys the same
scalar comparison inequality the halanay module certifies, giving
||x(t)|| <= sqrt(M2 * E_alpha(-lambda* t^alpha)) with M2 = sup phi^T phi.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import halanay as _hal
from .errors import InfeasiblePointError
from .expr import parse

__all__ = ["LmiInput", "LmiReport", "lmi_block", "max_eigen_sym", "certify_lmi"]

OFFDIAG_TARGET = 1e-14  # Jacobi sweep stop, relative to the Frobenius norm


@dataclass(frozen=True)
class LmiInput:
    sys: object  # DelaySystem
    gamma: object  # TimeExpr, >= 0 on the grid
    sigma: object  # TimeExpr, >= 0 on the grid
    grid: object  # ScanGrid
    tol: float = 1e-10  # semidefiniteness slack

    def __post_init__(self):
        if not (math.isfinite(self.tol) and self.tol >= 0):
            raise ValueError(f"tol must be a nonnegative real, got {self.tol}")


@dataclass(frozen=True)
class LmiReport:
    feasible: bool
    worst_eigen: float  # max over grid of the largest block eigenvalue
    worst_t: float
    a0: float  # min over grid of gamma
    p: float  # max over grid of sigma/gamma
    certificate: object  # HalanayCertificate, or None when infeasible


def lmi_block(A, B, gamma_val, sigma_val):
    """Assemble [[A^T+A+gamma I, B], [B^T, -sigma I]]; exactly symmetric."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    if B.shape != A.shape:
        raise ValueError(f"B shape {B.shape} does not match A shape {A.shape}")
    d = A.shape[0]
    eye = np.eye(d)
    return np.block([[A.T + A + gamma_val * eye, B], [B.T, -sigma_val * eye]])


def max_eigen_sym(S):
    """Largest eigenvalue of a symmetric matrix via cyclic Jacobi sweeps.

    Rotations run until the off-diagonal Frobenius mass falls below
    1e-14 relative to the matrix norm, so the returned value carries an
    error well under 1e-10 * (1 + max|S_ij|).
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"matrix must be square, got shape {S.shape}")
    scale = float(np.max(np.abs(S))) if S.size else 0.0
    if float(np.max(np.abs(S - S.T), initial=0.0)) > 1e-12 * max(1.0, scale):
        raise ValueError("matrix is not symmetric within tolerance")
    n = S.shape[0]
    if n == 1:
        return float(S[0, 0])
    a = 0.5 * (S + S.T)
    target = OFFDIAG_TARGET * max(1.0, float(np.linalg.norm(a)))
    for _ in range(100):
        upper = a[np.triu_indices(n, 1)]
        if math.sqrt(2.0 * float(upper @ upper)) < target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                t = -math.copysign(1.0, theta) / (
                    abs(theta) + math.hypot(1.0, theta)
                )
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                rot = np.array([[c, -s], [s, c]])
                a[[p, q], :] = rot.T @ a[[p, q], :]
                a[:, [p, q]] = a[:, [p, q]] @ rot
                a[p, q] = a[q, p] = 0.0
    else:
        raise RuntimeError("Jacobi sweep failed to converge")
    return float(np.max(np.diagonal(a)))


def certify_lmi(input_, M2):
    """Scan the grid for block feasibility and certify the l2 envelope.

    Infeasibility (a positive eigenvalue beyond tol, gamma touching 0,
    or sigma/gamma reaching 1) is reported, not raised; the certificate
    field is then None.
    """
    if M2 < 0:
        raise ValueError(f"amplitude M2 must be nonnegative, got {M2}")
    sys, grid = input_.sys, input_.grid
    ts = grid.times()
    g_vals = input_.gamma.eval_array(ts)
    s_vals = input_.sigma.eval_array(ts)
    if np.min(g_vals) < 0 or np.min(s_vals) < 0:
        raise InfeasiblePointError("gamma and sigma must be nonnegative on the grid")
    a_vals = np.empty((sys.dim, sys.dim, len(ts)))
    b_vals = np.empty_like(a_vals)
    for i in range(sys.dim):
        for j in range(sys.dim):
            a_vals[i, j] = sys.A[i][j].eval_array(ts)
            b_vals[i, j] = sys.B[i][j].eval_array(ts)

    def eig(i):
        return max_eigen_sym(
            lmi_block(a_vals[:, :, i], b_vals[:, :, i], g_vals[i], s_vals[i])
        )

    n = len(ts)
    workers = _hal._workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            eigs = np.fromiter(pool.map(eig, range(n)), dtype=float, count=n)
    else:
        eigs = np.fromiter((eig(i) for i in range(n)), dtype=float, count=n)
    arg = int(np.argmax(eigs))
    worst_eigen = float(eigs[arg])
    a0 = float(np.min(g_vals))
    p = float(np.max(s_vals / g_vals)) if a0 > 0.0 else math.inf
    feasible = worst_eigen <= input_.tol and a0 > 0.0 and p < 1.0
    cert = None
    if feasible:
        h_input = _hal.HalanayInput(
            alpha=sys.alpha,
            a=input_.gamma,
            b=[input_.sigma],
            q=[sys.q],
            c=parse("0", "t"),
            tau=sys.tau,
            scan=grid,
        )
        cert = _hal.certify(h_input, M=M2)
    return LmiReport(
        feasible=feasible,
        worst_eigen=worst_eigen,
        worst_t=float(ts[arg]),
        a0=a0,
        p=p,
        certificate=cert,
    )
