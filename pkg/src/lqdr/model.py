"""Plant, cost, and disturbance-signal definitions plus problem diagnostics.

The plant is the linear difference equation

    x[k+1] = A x[k] + B u[k] + E d[k],      z[k] = c_o x[k],

where z is the regulated output that should follow the reference c_o r.
Performance is measured by a quadratic form in the tracking error x - r and
in the combined channel B u + E d, so the weight R acts on state-space
vectors: it is n by n, not m by m.

A disturbance is *matched* when its channel lies inside the input channel,
i.e. E = B G for some G; then its effect on the state can be cancelled
exactly through the input.  Everything else is mismatched and can at best be
removed from the regulated output.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

#: Symmetry tolerance used when flagging weight matrices.
SYMMETRY_TOL = 1e-12
#: Eigenvalue floor below which a symmetric matrix is flagged as indefinite.
PSD_EIG_FLOOR = -1e-10
#: Singular values below this fraction of the largest one count as zero.
RANK_REL_TOL = 1e-9

MATCHED = "Matched"
MISMATCHED = "Mismatched"


def _freeze(arr):
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


def _as_matrix(value, name):
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got ndim={arr.ndim}")
    return arr


def _as_column_matrix(value, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return _as_matrix(arr, name)


def _as_vector(value, name, length=None):
    arr = np.asarray(value, dtype=float).reshape(-1)
    if length is not None and arr.shape[0] != length:
        raise ValueError(f"{name} must have length {length}, got {arr.shape[0]}")
    return arr


@dataclass(frozen=True)
class SystemModel:
    """Discrete-time plant with separate input and disturbance channels.

    Attributes:
        A: state transition matrix, n x n.
        B: input map, n x m.
        E: disturbance map, n x m (the disturbance has the same dimension
           as the input).
        c_o: regulated-output selector, l x n.
    """

    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    c_o: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_column_matrix(self.B, "B")
        E = _as_column_matrix(self.E, "E")
        c_o = _as_matrix(self.c_o, "c_o")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {B.shape}")
        if E.shape != B.shape:
            raise ValueError(f"E must have the same shape as B {B.shape}, got {E.shape}")
        if c_o.shape[1] != n:
            raise ValueError(f"c_o must have {n} columns, got {c_o.shape}")
        if min(n, B.shape[1], c_o.shape[0]) < 1:
            raise ValueError("all dimensions must be at least 1")
        for name, arr in (("A", A), ("B", B), ("E", E), ("c_o", c_o)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        object.__setattr__(self, "A", _freeze(A))
        object.__setattr__(self, "B", _freeze(B))
        object.__setattr__(self, "E", _freeze(E))
        object.__setattr__(self, "c_o", _freeze(c_o))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def l(self):
        return self.c_o.shape[0]


@dataclass(frozen=True)
class CostSpec:
    """Quadratic weights and reference for the tracking problem.

    J = sum_k [(x_k - r)' Q (x_k - r) + (B u_k + E d_k)' R (B u_k + E d_k)]
        + (x_{N+1} - r)' P_terminal (x_{N+1} - r)

    All three weights are n x n and expected symmetric positive
    semidefinite; ``validate`` flags violations instead of raising so that
    diagnostics can describe bad problem data.
    """

    Q: np.ndarray
    R: np.ndarray
    P_terminal: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        Q = _as_matrix(self.Q, "Q")
        n = Q.shape[0]
        if Q.shape != (n, n):
            raise ValueError(f"Q must be square, got {Q.shape}")
        R = _as_matrix(self.R, "R")
        P_terminal = _as_matrix(self.P_terminal, "P_terminal")
        if R.shape != (n, n):
            raise ValueError(f"R must be {n}x{n} (it weights B u + E d), got {R.shape}")
        if P_terminal.shape != (n, n):
            raise ValueError(f"P_terminal must be {n}x{n}, got {P_terminal.shape}")
        r = _as_vector(self.r, "r", length=n)
        for name, arr in (("Q", Q), ("R", R), ("P_terminal", P_terminal), ("r", r)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        object.__setattr__(self, "Q", _freeze(Q))
        object.__setattr__(self, "R", _freeze(R))
        object.__setattr__(self, "P_terminal", _freeze(P_terminal))
        object.__setattr__(self, "r", _freeze(r))

    @property
    def n(self):
        return self.Q.shape[0]

    @classmethod
    def from_model(cls, model, R, P_terminal=None, r=None):
        """Build the tracking cost with Q = c_o' c_o taken from the model."""
        Q = model.c_o.T @ model.c_o
        if P_terminal is None:
            P_terminal = np.zeros((model.n, model.n))
        if r is None:
            r = np.zeros(model.n)
        return cls(Q=Q, R=R, P_terminal=P_terminal, r=r)


@dataclass(frozen=True)
class DisturbanceProfile:
    """Deterministic disturbance signal, zero before ``start_step``.

    Kinds:
        constant: d_k = amplitude for k >= start_step.
        sinusoid: d_k = amplitude * sin(rate * (k - start_step)).
        ramp:     d_k = rate * (k - start_step), clipped at ``limit``.
        table:    d_k = values[k - start_step], holding the last row once
                  the table is exhausted.

    Scalar kinds replicate their value across ``dim`` components.
    """

    kind: str
    amplitude: float = 0.0
    rate: float = 0.0
    limit: float = 0.0
    start_step: int = 0
    dim: int = 1
    values: np.ndarray = None

    _KINDS = ("constant", "sinusoid", "ramp", "table")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if self.start_step < 0:
            raise ValueError("start_step must be >= 0")
        if self.kind == "table":
            if self.values is None:
                raise ValueError("table profile needs a values array")
            vals = np.asarray(self.values, dtype=float)
            if vals.ndim == 1:
                vals = vals.reshape(-1, 1)
            if vals.ndim != 2 or vals.shape[0] < 1:
                raise ValueError("table values must be a non-empty (steps, m) array")
            object.__setattr__(self, "values", _freeze(vals))
            object.__setattr__(self, "dim", vals.shape[1])
        elif self.dim < 1:
            raise ValueError("dim must be >= 1")

    @classmethod
    def constant(cls, amplitude, start_step=0, dim=1):
        return cls(kind="constant", amplitude=float(amplitude),
                   start_step=start_step, dim=dim)

    @classmethod
    def sinusoid(cls, amplitude, rate, start_step=0, dim=1):
        return cls(kind="sinusoid", amplitude=float(amplitude), rate=float(rate),
                   start_step=start_step, dim=dim)

    @classmethod
    def ramp(cls, rate, limit, start_step=0, dim=1):
        return cls(kind="ramp", rate=float(rate), limit=float(limit),
                   start_step=start_step, dim=dim)

    @classmethod
    def table(cls, values, start_step=0):
        return cls(kind="table", values=values, start_step=start_step)

    def limit_value(self):
        """Asymptotic value of the signal, for stationary controller design."""
        if self.kind == "constant":
            return np.full(self.dim, self.amplitude)
        if self.kind == "ramp":
            return np.full(self.dim, self.limit)
        if self.kind == "table":
            return self.values[-1].copy()
        if self.amplitude == 0.0:
            return np.zeros(self.dim)
        raise ValueError("a sinusoid has no limit value")


def sample_disturbance(profile, k):
    """Evaluate a disturbance profile at step ``k`` (an m-vector)."""
    if k < 0:
        raise ValueError("step index must be >= 0")
    if k < profile.start_step:
        return np.zeros(profile.dim)
    t = k - profile.start_step
    if profile.kind == "constant":
        return np.full(profile.dim, profile.amplitude)
    if profile.kind == "sinusoid":
        return np.full(profile.dim, profile.amplitude * math.sin(profile.rate * t))
    if profile.kind == "ramp":
        value = profile.rate * t
        if profile.rate >= 0:
            value = min(value, profile.limit)
        else:
            value = max(value, profile.limit)
        return np.full(profile.dim, value)
    return profile.values[min(t, profile.values.shape[0] - 1)].copy()


def disturbance_sequence(d, steps, dim=None):
    """Materialize ``steps`` samples of a profile (or validate a raw array).

    Accepts either a DisturbanceProfile or an array-like of shape (steps, m)
    or (steps,), so solvers and the brute-force oracle can share a
    bit-identical disturbance sequence.
    """
    if isinstance(d, DisturbanceProfile):
        seq = np.stack([sample_disturbance(d, k) for k in range(steps)])
    else:
        seq = np.asarray(d, dtype=float)
        if seq.ndim == 1:
            seq = seq.reshape(-1, 1)
        if seq.shape[0] < steps:
            raise ValueError(f"disturbance sequence has {seq.shape[0]} rows, needs {steps}")
        seq = seq[:steps]
    if dim is not None and seq.shape[1] != dim:
        raise ValueError(f"disturbance dimension {seq.shape[1]} does not match m={dim}")
    return seq


@dataclass(frozen=True)
class ValidationReport:
    """Diagnostic summary of a (model, cost) pair.  Never raises; only flags."""

    dimension_ok: bool
    psd_flags: dict
    detectable: bool
    disturbance_class: str
    messages: tuple

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))


def _rank(mat):
    """Numerical rank with singular values below RANK_REL_TOL * sigma_max as zero."""
    sigma = np.linalg.svd(mat, compute_uv=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0
    return int(np.sum(sigma > RANK_REL_TOL * sigma[0]))


def classify_disturbance(B, E):
    """MATCHED iff the columns of E lie in the column span of B."""
    B = _as_column_matrix(B, "B")
    E = _as_column_matrix(E, "E")
    if _rank(np.hstack([B, E])) == _rank(B):
        return MATCHED
    return MISMATCHED


def _psd_check(name, mat, messages):
    sym = np.max(np.abs(mat - mat.T)) <= SYMMETRY_TOL
    if not sym:
        messages.append(f"{name} is not symmetric to {SYMMETRY_TOL:g}")
        return False
    min_eig = float(np.min(np.linalg.eigvalsh((mat + mat.T) / 2)))
    if min_eig < PSD_EIG_FLOOR:
        messages.append(f"{name} has eigenvalue {min_eig:.3e} below the PSD floor")
        return False
    return True


def sqrtm_psd(mat):
    """Symmetric square root of a (nearly) PSD matrix, negative modes clipped."""
    sym = (mat + mat.T) / 2
    w, V = np.linalg.eigh(sym)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def check_detectability(A, Q):
    """Eigenvector test: every mode of A with |eig| >= 1 must be visible in Q^(1/2).

    Returns True iff rank([A - lambda I; Q^(1/2)]) = n for every eigenvalue
    lambda of A on or outside the unit circle.  Rank uses a relative
    singular-value cutoff of RANK_REL_TOL.
    """
    A = _as_matrix(A, "A")
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"A must be square, got {A.shape}")
    Q = _as_matrix(Q, "Q")
    if Q.shape != (n, n):
        raise ValueError(f"Q must be {n}x{n}, got {Q.shape}")
    Qhalf = sqrtm_psd(Q)
    for lam in np.linalg.eigvals(A):
        if abs(lam) < 1.0:
            continue
        pencil = np.vstack([A - lam * np.eye(n), Qhalf])
        if _rank(pencil) < n:
            return False
    return True


def validate(model, cost):
    """Collect diagnostics for a problem instance without raising.

    Checks cross-consistency of dimensions, semidefiniteness of the weights,
    detectability of the unregulated dynamics, and whether the disturbance
    channel is matched to the input channel.
    """
    messages = []
    dimension_ok = True
    n = model.n
    if cost.n != n:
        dimension_ok = False
        messages.append(f"cost matrices are {cost.n}x{cost.n} but the state dimension is {n}")
    if model.E.shape != model.B.shape:
        dimension_ok = False
        messages.append("disturbance map E must have the input map's shape")

    psd_flags = {
        "Q": _psd_check("Q", cost.Q, messages) if dimension_ok else False,
        "R": _psd_check("R", cost.R, messages) if dimension_ok else False,
        "P_terminal": _psd_check("P_terminal", cost.P_terminal, messages) if dimension_ok else False,
    }

    detectable = False
    if dimension_ok and psd_flags["Q"]:
        detectable = check_detectability(model.A, cost.Q)
        if not detectable:
            messages.append("(A, Q^(1/2)) is not detectable; stationary design is not certified")

    disturbance_class = classify_disturbance(model.B, model.E)
    if disturbance_class == MATCHED:
        messages.append("disturbance is matched: it can be cancelled through the input channel")

    return ValidationReport(
        dimension_ok=dimension_ok,
        psd_flags=psd_flags,
        detectable=detectable,
        disturbance_class=disturbance_class,
        messages=messages,
    )


def discretize_zoh(A_c, B_c, E_c, Ts, c_o=None):
    """Exact sampled-data model assuming inputs held constant over each interval.

    Computes A_d = exp(A_c Ts) and B_d = (int_0^Ts exp(A_c s) ds) B_c through
    the exponential of the augmented block matrix [[A_c, I], [0, 0]] * Ts;
    the same integral is applied to the disturbance map.

    Args:
        A_c, B_c, E_c: continuous-time matrices (n x n, n x m, n x m).
        Ts: sample interval in seconds, > 0.
        c_o: regulated-output selector carried over unchanged; identity
            when omitted.
    """
    if Ts <= 0:
        raise ValueError(f"sample interval must be positive, got {Ts}")
    A_c = _as_matrix(A_c, "A_c")
    B_c = _as_column_matrix(B_c, "B_c")
    E_c = _as_column_matrix(E_c, "E_c")
    n = A_c.shape[0]
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = A_c
    block[:n, n:] = np.eye(n)
    exp_block = expm(block * Ts)
    A_d = exp_block[:n, :n]
    integral = exp_block[:n, n:]
    if c_o is None:
        c_o = np.eye(n)
    return SystemModel(A=A_d, B=integral @ B_c, E=integral @ E_c, c_o=c_o)
