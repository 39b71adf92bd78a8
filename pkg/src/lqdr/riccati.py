"""Backward Riccati recursions for the disturbance-rejection tracking problem.

The finite-horizon solve iterates, from the terminal weight down to k = 0,

    Upsilon_k = B' (R + P_{k+1}) B
    M_k       = B' P_{k+1} A
    P_k       = Q + A' P_{k+1} A - M_k' Upsilon_k^{-1} M_k

and stores the feedback gains K_k = Upsilon_k^{-1} M_k.  In strict mode each
Upsilon_k must be positive definite (the solvability condition for a unique
optimal controller).  In non-strict mode a Moore-Penrose pseudo-inverse is
used instead, which is legitimate exactly when the consistency condition
Upsilon_k Upsilon_k^+ M_k = M_k holds at every step.

The stationary equation

    P = Q + A' P A - M' Upsilon^+ M

is solved by running the same recursion from P = 0 until the iterates stop
moving, which mirrors how the infinite-horizon solution arises as the limit
of finite-horizon ones.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError, RegularityError, SolvabilityError, StabilizationError
from .model import check_detectability

#: Relative singular-value cutoff for all pseudo-inverses in this module.
PINV_RCOND = 1e-10
#: Smallest eigenvalue of Upsilon_k accepted as positive definite.
PD_MIN_EIG = 1e-10
#: Tolerance for the pseudo-inverse consistency check inside solves.
REGULARITY_TOL = 1e-9


def _sym(mat):
    return (mat + mat.T) / 2


def spectral_radius(mat):
    """Largest eigenvalue modulus."""
    return float(np.max(np.abs(np.linalg.eigvals(mat))))


def check_regularity(Upsilon, M, tol):
    """True iff ||Upsilon Upsilon^+ M - M|| <= tol * (1 + ||M||) (Frobenius)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    Upsilon = np.atleast_2d(np.asarray(Upsilon, dtype=float))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    pinv = np.linalg.pinv(Upsilon, rcond=PINV_RCOND)
    residual = np.linalg.norm(Upsilon @ pinv @ M - M)
    return bool(residual <= tol * (1 + np.linalg.norm(M)))


@dataclass(frozen=True)
class RiccatiSolution:
    """Backward-recursion output over a horizon of N + 1 control steps.

    Attributes:
        horizon: N; controls exist for k = 0..N.
        P: (N+2, n, n) value matrices, P[N+1] is the terminal weight.
        Upsilon: (N+1, m, m) input-channel Gram matrices.
        M: (N+1, m, n) cross terms.
        K: (N+1, m, n) feedback gains, Upsilon_k K_k = M_k.
        regular: (N+1,) per-step consistency flags (all True in strict mode).
        strict: whether gains were computed with true inverses.
    """

    horizon: int
    P: np.ndarray
    Upsilon: np.ndarray
    M: np.ndarray
    K: np.ndarray
    regular: np.ndarray
    strict: bool

    def __post_init__(self):
        for name in ("P", "Upsilon", "M", "K", "regular"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def upsilon_solve(self, k, rhs):
        """Apply Upsilon_k^{-1} (or its pseudo-inverse in non-strict mode)."""
        if self.strict:
            return np.linalg.solve(self.Upsilon[k], rhs)
        return np.linalg.pinv(self.Upsilon[k], rcond=PINV_RCOND) @ rhs


@dataclass(frozen=True)
class GareSolution:
    """Stationary solution with its feedback gain and convergence evidence.

    ``residual`` is the elementwise-max defect of P under one more iteration
    map application; ``closed_loop_radius`` is the spectral radius of A - B K.
    """

    P: np.ndarray
    Upsilon: np.ndarray
    M: np.ndarray
    K: np.ndarray
    closed_loop_radius: float
    iterations: int
    residual: float

    def __post_init__(self):
        for name in ("P", "Upsilon", "M", "K"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def solve_finite_horizon(model, cost, N, strict=True):
    """Run the backward recursion from the terminal weight down to step 0.

    Args:
        model: SystemModel.
        cost: CostSpec whose P_terminal seeds the recursion.
        N: final control index; N + 1 gains are produced.
        strict: require every Upsilon_k positive definite.  When False the
            pseudo-inverse is used and the per-step consistency condition is
            verified instead.

    Raises:
        SolvabilityError: strict mode and some Upsilon_k is not positive
            definite (the failing step is reported).
        RegularityError: non-strict mode and the pseudo-inverse solve is
            inconsistent at some step.
    """
    if N < 0:
        raise ValueError("horizon N must be >= 0")
    if cost.n != model.n:
        raise ValueError("cost and model dimensions differ")
    A, B = model.A, model.B
    Q, R = cost.Q, cost.R
    n, m = model.n, model.m

    P = np.zeros((N + 2, n, n))
    Upsilon = np.zeros((N + 1, m, m))
    M = np.zeros((N + 1, m, n))
    K = np.zeros((N + 1, m, n))
    regular = np.zeros(N + 1, dtype=bool)
    P[N + 1] = _sym(cost.P_terminal)

    for k in range(N, -1, -1):
        RP = R + P[k + 1]
        Upsilon[k] = _sym(B.T @ RP @ B)
        M[k] = B.T @ P[k + 1] @ A
        if strict:
            min_eig = float(np.min(np.linalg.eigvalsh(Upsilon[k])))
            if min_eig <= PD_MIN_EIG:
                raise SolvabilityError(
                    f"Upsilon_{k} is not positive definite "
                    f"(min eigenvalue {min_eig:.3e}); no unique optimal input",
                    step=k, min_eigenvalue=min_eig)
            K[k] = np.linalg.solve(Upsilon[k], M[k])
            regular[k] = True
        else:
            pinv = np.linalg.pinv(Upsilon[k], rcond=PINV_RCOND)
            defect = np.linalg.norm(Upsilon[k] @ pinv @ M[k] - M[k])
            if defect > REGULARITY_TOL * (1 + np.linalg.norm(M[k])):
                raise RegularityError(
                    f"pseudo-inverse solve inconsistent at step {k} "
                    f"(defect {defect:.3e}); the problem is unsolvable",
                    step=k, residual=float(defect))
            K[k] = pinv @ M[k]
            regular[k] = True
        P[k] = _sym(Q + A.T @ P[k + 1] @ A - M[k].T @ K[k])

    return RiccatiSolution(horizon=N, P=P, Upsilon=Upsilon, M=M, K=K,
                           regular=regular, strict=strict)


def _gare_step(P, A, B, Q, R):
    Upsilon = _sym(B.T @ (R + P) @ B)
    M = B.T @ P @ A
    pinv = np.linalg.pinv(Upsilon, rcond=PINV_RCOND)
    P_next = _sym(Q + A.T @ P @ A - M.T @ (pinv @ M))
    return P_next, Upsilon, M, pinv


def gare_fixed_point(model, cost, tol=1e-12, max_iters=100000):
    """Iterate the stationary equation from P = 0 until the update stalls.

    Warns when (A, Q^(1/2)) is not detectable, since convergence is then not
    guaranteed.  The returned solution is NOT checked for a contracting
    closed loop; use ``solve_gare`` for the certified variant.

    Raises:
        ConvergenceError: the update never fell below ``tol`` (the last
            increment is attached), or the limit lost semidefiniteness.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if cost.n != model.n:
        raise ValueError("cost and model dimensions differ")
    if not check_detectability(model.A, cost.Q):
        warnings.warn("(A, Q^(1/2)) is not detectable; the stationary solve "
                      "may diverge or fail to stabilize", stacklevel=2)
    A, B = model.A, model.B
    Q, R = cost.Q, cost.R

    P = np.zeros((model.n, model.n))
    iterations = 0
    delta = np.inf
    while iterations < max_iters:
        P_next, _, _, _ = _gare_step(P, A, B, Q, R)
        delta = float(np.max(np.abs(P_next - P)))
        P = P_next
        iterations += 1
        if not np.isfinite(P).all():
            raise ConvergenceError(
                f"stationary iteration diverged after {iterations} iterations",
                residual=delta, iterations=iterations)
        if delta <= tol:
            break
    else:
        raise ConvergenceError(
            f"stationary iteration still moving by {delta:.3e} after "
            f"{max_iters} iterations (tol {tol:g})",
            residual=delta, iterations=max_iters)

    P_check, Upsilon, M, pinv = _gare_step(P, A, B, Q, R)
    residual = float(np.max(np.abs(P_check - P)))
    min_eig = float(np.min(np.linalg.eigvalsh(P)))
    if min_eig < -1e-8:
        raise ConvergenceError(
            f"stationary iterate lost semidefiniteness (min eigenvalue {min_eig:.3e})",
            residual=residual, iterations=iterations)
    K = pinv @ M
    radius = spectral_radius(A - B @ K)
    return GareSolution(P=P, Upsilon=Upsilon, M=M, K=K,
                        closed_loop_radius=radius,
                        iterations=iterations, residual=residual)


def solve_gare(model, cost, tol=1e-12, max_iters=100000):
    """Certified stationary solve: fixed point plus a contraction check.

    Raises:
        ConvergenceError: as in ``gare_fixed_point``.
        StabilizationError: the iteration converged but rho(A - B K) >= 1,
            so the stationary law does not stabilize the plant.
    """
    solution = gare_fixed_point(model, cost, tol=tol, max_iters=max_iters)
    if solution.closed_loop_radius >= 1.0:
        raise StabilizationError(
            f"stationary solution exists but rho(A - B K) = "
            f"{solution.closed_loop_radius:.6f} >= 1",
            spectral_radius=solution.closed_loop_radius)
    return solution
