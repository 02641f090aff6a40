"""Preconditioned MINRES (Paige and Saunders) with an SPD preconditioner.

The recurrence estimates ``||r_m||_{M^{-1}}``. Two stopping rules:

``"relative"`` (default)
    ``||r_m||_{M^{-1}} / ||b||_{M^{-1}} <= tol``.
``"backward"``
    the SOL MINRES test ``||r_m||_{M^{-1}} / (||T_m||_F ||x_m||) <= tol``,
    where ``T_m`` is the Lanczos tridiagonal matrix (an estimate of the
    preconditioned operator norm). Looser than ``"relative"`` when the
    solution is large.

``residual_history`` always holds the relative residual estimates. The
initial guess is always zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import Breakdown, DimensionMismatch, MaxIterations

ABSOLUTE_FLOOR = 1e-14
MAXIT_CAP = 50_000


@dataclass
class MinresResult:
    solution: np.ndarray
    iterations: int
    residual_history: list = field(default_factory=list)
    converged: bool = False
    backward_history: list = field(default_factory=list)

    @property
    def relative_residual(self):
        return self.residual_history[-1]


def _as_operator(A):
    if A is None:
        return lambda v: v.copy()
    if callable(A) and not hasattr(A, "shape"):
        return A
    return lambda v: A @ v


STOPPING_RULES = ("relative", "backward")


def minres_solve(apply_A, apply_Minv, b, tol=1e-10, maxit=None, strict=False,
                 stopping="relative") -> MinresResult:
    """Solve ``A x = b`` for symmetric (possibly indefinite) ``A``.

    Parameters
    ----------
    apply_A : matrix or callable ``v -> A v``.
    apply_Minv : matrix, callable ``v -> M^{-1} v`` (SPD), or None for identity.
    b : right-hand side.
    tol : tolerance for the chosen stopping rule.
    maxit : iteration cap; defaults to ``min(10 * len(b), 50000)``.
    strict : raise ``MaxIterations`` instead of returning an unconverged result.
    stopping : ``"relative"`` or ``"backward"``, see the module docstring.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if stopping not in STOPPING_RULES:
        raise ValueError(f"stopping must be one of {STOPPING_RULES}")
    A = _as_operator(apply_A)
    Minv = _as_operator(apply_Minv)
    b = np.asarray(b, dtype=float)
    if b.ndim != 1:
        raise DimensionMismatch("right-hand side must be a vector")
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side has non-finite entries")
    n = b.shape[0]
    if maxit is None:
        maxit = min(10 * n, MAXIT_CAP)
    stop = max(tol, ABSOLUTE_FLOOR)

    x = np.zeros(n)
    r1 = b.copy()
    y = Minv(r1)
    beta1_sq = float(r1 @ y)
    if beta1_sq < 0:
        raise Breakdown("preconditioner is not positive definite")
    beta1 = math.sqrt(beta1_sq)
    history = [1.0]
    backward = [math.inf]
    if beta1 == 0.0:
        return MinresResult(x, 0, history, True, [0.0])

    oldb = 0.0
    beta = beta1
    dbar = 0.0
    epsln = 0.0
    phibar = beta1
    cs, sn = -1.0, 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    r2 = r1
    eps = np.finfo(float).eps
    tnorm2 = 0.0

    for itn in range(1, maxit + 1):
        v = y / beta
        y = A(v)
        if itn >= 2:
            y = y - (beta / oldb) * r1
        alfa = float(v @ y)
        y = y - (alfa / beta) * r2
        r1, r2 = r2, y
        y = Minv(r2)
        oldb = beta
        beta_sq = float(r2 @ y)
        if beta_sq < 0:
            raise Breakdown(f"preconditioner is not positive definite (iteration {itn})")
        beta = math.sqrt(beta_sq)
        tnorm2 += alfa * alfa + oldb * oldb + beta * beta

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(math.hypot(gbar, beta), eps)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1, w2 = w2, w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w

        rel = phibar / beta1
        history.append(rel)
        xnorm = float(np.linalg.norm(x))
        backward.append(phibar / (math.sqrt(tnorm2) * xnorm) if xnorm > 0 else math.inf)
        if (rel if stopping == "relative" else backward[-1]) <= stop or phibar == 0.0:
            return MinresResult(x, itn, history, True, backward)
        # invariant Krylov subspace reached without convergence
        if beta <= eps * math.sqrt(tnorm2):
            raise Breakdown(f"Lanczos breakdown with relative residual {rel:.3e} (iteration {itn})")

    if strict:
        raise MaxIterations(f"no convergence in {maxit} iterations (relative residual {history[-1]:.3e})")
    return MinresResult(x, maxit, history, False, backward)
