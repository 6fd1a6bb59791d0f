"""Truncated vector-valued Hardy-space machinery.

A ``HardyOp`` is the multiplication operator by the linear pencil A + zB on
H^2(F) truncated to coefficients of degree <= N, together with an optional
finite unitary summand W: the dense matrix acts on F^(N+1) (+) E with
coefficient blocks ordered by ascending degree.  Commutativity questions are
always decided at the symbol level, never on truncations: truncation
introduces spurious top-degree noncommutativity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .numkit import DEFAULT_TOL, TolerancePolicy, as_matrix, operator_norm
from .tuples import defect

__all__ = [
    "HardyOp",
    "BCLTuple",
    "pencil_op",
    "symbol_commutator",
    "induced_commuting_pair",
    "check_bcl_necessary",
    "bcl_model_ops",
    "schaffer_lift",
]


@dataclass(frozen=True)
class HardyOp:
    """M_{A + zB} (+) W on F^(N+1) (+) E, reproducible from (A, B, W, N)."""

    A: np.ndarray
    B: np.ndarray
    W: np.ndarray
    N: int

    @property
    def coeff_dim(self) -> int:
        return self.A.shape[0]

    @property
    def finite_dim(self) -> int:
        return self.W.shape[0]

    @property
    def total_dim(self) -> int:
        return self.coeff_dim * (self.N + 1) + self.finite_dim

    def materialize(self) -> np.ndarray:
        f, e, n = self.coeff_dim, self.finite_dim, self.N
        out = np.zeros((self.total_dim, self.total_dim), dtype=np.complex128)
        for k in range(n + 1):
            out[k * f : (k + 1) * f, k * f : (k + 1) * f] = self.A
            if k:
                out[k * f : (k + 1) * f, (k - 1) * f : k * f] = self.B
        if e:
            out[f * (n + 1) :, f * (n + 1) :] = self.W
        return out

    def materialize_adjoint(self) -> np.ndarray:
        """Adjoint built from the degree-lowering symbol structure (A*, B*)."""
        f, e, n = self.coeff_dim, self.finite_dim, self.N
        out = np.zeros((self.total_dim, self.total_dim), dtype=np.complex128)
        for k in range(n + 1):
            out[k * f : (k + 1) * f, k * f : (k + 1) * f] = self.A.conj().T
            if k < n:
                out[k * f : (k + 1) * f, (k + 1) * f : (k + 2) * f] = self.B.conj().T
        if e:
            out[f * (n + 1) :, f * (n + 1) :] = self.W.conj().T
        return out

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Apply to stacked coordinates (degree blocks then finite block)."""
        f, e, n = self.coeff_dim, self.finite_dim, self.N
        x = np.atleast_2d(np.asarray(x, dtype=np.complex128))
        out = np.empty_like(x)
        if f:
            head = x[: f * (n + 1)].reshape(n + 1, f, -1)
            y = np.einsum("ij,kjm->kim", self.A, head)
            y[1:] += np.einsum("ij,kjm->kim", self.B, head[:-1])
            out[: f * (n + 1)] = y.reshape(f * (n + 1), -1)
        if e:
            out[f * (n + 1) :] = self.W @ x[f * (n + 1) :]
        return out

    def apply_adjoint(self, x: np.ndarray) -> np.ndarray:
        f, e, n = self.coeff_dim, self.finite_dim, self.N
        x = np.atleast_2d(np.asarray(x, dtype=np.complex128))
        out = np.empty_like(x)
        if f:
            head = x[: f * (n + 1)].reshape(n + 1, f, -1)
            y = np.einsum("ij,kjm->kim", self.A.conj().T, head)
            y[:-1] += np.einsum("ij,kjm->kim", self.B.conj().T, head[1:])
            out[: f * (n + 1)] = y.reshape(f * (n + 1), -1)
        if e:
            out[f * (n + 1) :] = self.W.conj().T @ x[f * (n + 1) :]
        return out


def pencil_op(a: np.ndarray, b: np.ndarray, w=None, n: int = 8) -> HardyOp:
    """Structured multiplication operator by A + zB with finite summand W."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"pencil blocks must be square and equal: {a.shape} vs {b.shape}")
    w = np.zeros((0, 0), dtype=np.complex128) if w is None else as_matrix(w)
    if w.shape[0] != w.shape[1]:
        raise DimensionMismatch(f"finite summand must be square, got {w.shape}")
    if n < 0:
        raise ValueError("truncation degree must be nonnegative")
    return HardyOp(a, b, w, int(n))


def symbol_commutator(op1: HardyOp, op2: HardyOp) -> float:
    """Exact symbol-level commutator norm of two pencil operators.

    Coefficient-wise norm of [A1 + zB1, A2 + zB2] (z^0, z^1, z^2 blocks)
    plus the commutator of the finite summands; zero iff the untruncated
    multiplication operators commute.
    """
    if op1.coeff_dim != op2.coeff_dim or op1.finite_dim != op2.finite_dim:
        raise DimensionMismatch("operators act on different coefficient spaces")
    a1, b1, a2, b2 = op1.A, op1.B, op2.A, op2.B
    c0 = a1 @ a2 - a2 @ a1
    c1 = a1 @ b2 + b1 @ a2 - a2 @ b1 - b2 @ a1
    c2 = b1 @ b2 - b2 @ b1
    cw = op1.W @ op2.W - op2.W @ op1.W
    return max(operator_norm(c0), operator_norm(c1), operator_norm(c2), operator_norm(cw))


@dataclass(frozen=True)
class BCLTuple:
    """Projections P_j and unitaries U_j on F plus commuting unitaries W_j on E."""

    P: tuple
    U: tuple
    W: tuple

    @property
    def calF_dim(self) -> int:
        return self.P[0].shape[0] if self.P else 0

    @property
    def calE_dim(self) -> int:
        return self.W[0].shape[0] if self.W else 0

    @property
    def d(self) -> int:
        return len(self.P)


def induced_commuting_pair(u1: np.ndarray, p1: np.ndarray) -> BCLTuple:
    """The d=2 BCL tuple induced by (U1, P1) whose model pair commutes.

    The companion data is U2 = U1* and P2 = U1 P1^perp U1*; when U1 commutes
    with P1 this reduces to the familiar P2 = I - P1.
    """
    u1 = as_matrix(u1)
    p1 = as_matrix(p1)
    n = u1.shape[0]
    p2 = u1 @ (np.eye(n) - p1) @ u1.conj().T
    e = np.zeros((0, 0), dtype=np.complex128)
    return BCLTuple((p1, p2), (u1, u1.conj().T), (e, e))


def bcl_model_ops(b: BCLTuple, n: int = 8) -> list:
    """The isometric pencil operators M_{U_j P_j^perp + z U_j P_j} (+) W_j."""
    eye = np.eye(b.calF_dim, dtype=np.complex128)
    return [
        pencil_op(b.U[j] @ (eye - b.P[j]), b.U[j] @ b.P[j], b.W[j], n)
        for j in range(b.d)
    ]


def check_bcl_necessary(b: BCLTuple, tol: TolerancePolicy = DEFAULT_TOL) -> dict:
    """Residuals of the commutativity-necessary conditions for a BCL tuple.

    Product of the U's equal to the identity, pairwise U-commutation, and
    for every permutation the telescoped conjugated-projection sum equal to
    the identity.  The final summand uses the projection indexed by the last
    permutation entry (the printed source is ambiguous there; the report
    records the convention).
    """
    d = b.d
    f = b.calF_dim
    eye = np.eye(f, dtype=np.complex128)
    prod = eye.copy()
    for u in b.U:
        prod = prod @ u
    u_product = operator_norm(prod - eye)
    u_commute = [
        operator_norm(b.U[i] @ b.U[j] - b.U[j] @ b.U[i])
        for i in range(d)
        for j in range(i + 1, d)
    ]
    projection_sums = {}
    for perm in itertools.permutations(range(d)):
        total = np.zeros((f, f), dtype=np.complex128)
        prefix = eye.copy()
        for k in perm:
            total = total + prefix.conj().T @ b.P[k] @ prefix
            prefix = b.U[k] @ prefix
        projection_sums[perm] = operator_norm(total - eye)
    worst = max([u_product] + u_commute + list(projection_sums.values()) + [0.0])
    return {
        "u_product": u_product,
        "u_commutators": u_commute,
        "projection_sums": projection_sums,
        "passes": worst <= tol.residual_tol,
        "index_convention": "final summand uses the last permutation entry",
    }


def schaffer_lift(a: np.ndarray, n: int, tol: TolerancePolicy = DEFAULT_TOL):
    """Schaffer isometric lift of a single contraction, truncated at degree n.

    Returns (embedding, V) on H (+) F^(n+1) with F the defect space of A:
    V = [[A, 0], [e0* D_A, M_z]].  The lift identity V*|_H = A* is exact even
    after truncation; the isometry defect is supported on top-degree
    coefficients only.
    """
    a = as_matrix(a)
    dd = defect(a, tol)
    dim = a.shape[0]
    r = dd.rank
    total = dim + r * (n + 1)
    v = np.zeros((total, total), dtype=np.complex128)
    v[:dim, :dim] = a
    if r:
        v[dim : dim + r, :dim] = dd.basis.basis.conj().T @ dd.D
        for k in range(n):
            v[dim + (k + 1) * r : dim + (k + 2) * r, dim + k * r : dim + (k + 1) * r] = np.eye(r)
    emb = np.zeros((total, dim), dtype=np.complex128)
    emb[:dim, :dim] = np.eye(dim)
    return emb, v
