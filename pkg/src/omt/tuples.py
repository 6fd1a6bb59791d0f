"""Commuting contraction tuples: validation, defects, generation, and the
canonical unitary (+) completely-nonunitary decomposition.

A tuple is ``d`` commuting contractions on C^n.  At finite dimension the
product operator splits the space into the span of its unimodular
eigenvectors (where it acts unitarily) and a complement on which its
spectral radius is strictly below one; every factor is block diagonal with
respect to that splitting, which is what ``canonical_decomposition``
computes and certifies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BlockLeakage, NotCommuting, NotContraction, UnsupportedKind, ValidationError
from .numkit import (
    DEFAULT_TOL,
    fix_column_phases,
    SubspaceBasis,
    TolerancePolicy,
    as_matrix,
    hermitian_sqrt,
    operator_norm,
    orthonormal_complement,
    range_basis,
    spectral_radius,
)

__all__ = [
    "ContractionTuple",
    "DefectData",
    "DecompositionResult",
    "GENERATOR_KINDS",
    "violations",
    "validate",
    "product",
    "partial_product",
    "defect",
    "adjoint_tuple",
    "canonical_decomposition",
    "generate",
    "haar_unitary",
]

# Generated instances keep every pure-side singular value of the product at
# or below this bound: it guarantees a clean gap between zero and nonzero
# defect eigenvalues and geometric decay of observability tails.
PURE_SIDE_NORM = 0.9

GENERATOR_KINDS = (
    "diag",
    "joint-unitary-conjugated-diag",
    "compressed-commuting-unitaries",
    "upper-triangular-commuting",
    "mixed-unitary-plus-pure",
)


@dataclass(frozen=True)
class ContractionTuple:
    """d commuting contraction matrices on C^n plus the tolerance policy."""

    ops: tuple
    tol: TolerancePolicy = DEFAULT_TOL

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]

    @property
    def d(self) -> int:
        return len(self.ops)

    def op(self, j: int) -> np.ndarray:
        return self.ops[j]


@dataclass(frozen=True)
class DefectData:
    """Defect operator D = (I - A*A)^(1/2) with a basis of its range."""

    D: np.ndarray
    basis: SubspaceBasis

    @property
    def rank(self) -> int:
        return self.basis.rank


@dataclass(frozen=True)
class DecompositionResult:
    """Unitary/c.n.u. splitting of a tuple; report carries the residuals."""

    P_u: np.ndarray
    unitary_part: ContractionTuple
    cnu_part: ContractionTuple
    change_of_basis: np.ndarray
    report: dict = field(default_factory=dict)

    @property
    def unitary_dim(self) -> int:
        return self.unitary_part.ops[0].shape[0]

    @property
    def cnu_dim(self) -> int:
        return self.cnu_part.ops[0].shape[0]


def violations(ops, tol: TolerancePolicy = DEFAULT_TOL) -> list:
    """Detailed violation list: norm excesses and failing commutator pairs."""
    mats = [as_matrix(a) for a in ops]
    if len(mats) < 2:
        raise ValueError("a tuple needs at least two operators")
    n = mats[0].shape[0]
    out = []
    for i, a in enumerate(mats):
        if a.shape != (n, n):
            raise ValueError(f"operator {i + 1} has shape {a.shape}, expected {(n, n)}")
        nrm = operator_norm(a)
        if nrm > 1.0 + tol.residual_tol:
            out.append(NotContraction(i, nrm))
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            comm = operator_norm(mats[i] @ mats[j] - mats[j] @ mats[i])
            if comm > tol.residual_tol * n:
                out.append(NotCommuting(i, j, comm))
    return out


def validate(ops, tol: TolerancePolicy = DEFAULT_TOL) -> ContractionTuple:
    """Validate raw matrices into a ContractionTuple or raise ValidationError."""
    bad = violations(ops, tol)
    if bad:
        raise ValidationError(bad)
    return ContractionTuple(tuple(as_matrix(a) for a in ops), tol)


def product(t: ContractionTuple) -> np.ndarray:
    out = t.ops[0]
    for a in t.ops[1:]:
        out = out @ a
    return out


def partial_product(t: ContractionTuple, j: int) -> np.ndarray:
    """Product of all factors except the j-th (0-based)."""
    out = np.eye(t.dim, dtype=np.complex128)
    for i, a in enumerate(t.ops):
        if i != j:
            out = out @ a
    return out


def adjoint_tuple(t: ContractionTuple) -> ContractionTuple:
    return ContractionTuple(tuple(a.conj().T for a in t.ops), t.tol)


def defect(a: np.ndarray, tol: TolerancePolicy = DEFAULT_TOL) -> DefectData:
    """Defect data of a single contraction.

    The rank decision is made on the eigenvalues of I - A*A (the squared
    scale): an isometric direction carries roundoff ~1e-16 there, which the
    square root would inflate to ~1e-8 in D itself, far above the rank
    threshold.  Thresholding before the square root keeps the zero/nonzero
    gap clean.
    """
    a = as_matrix(a)
    nrm = operator_norm(a)
    if nrm > 1.0 + tol.residual_tol:
        raise NotContraction(None, nrm)
    n = a.shape[0]
    gram = np.eye(n) - a.conj().T @ a
    gram = (gram + gram.conj().T) / 2.0
    w, v = np.linalg.eigh(gram)
    if w.size and w[0] < -tol.residual_tol * (1.0 + operator_norm(gram)):
        raise NotContraction(None, nrm)
    w = np.clip(w, 0.0, None)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    # defect eigenvalues of a contraction live on the absolute scale [0, 2];
    # a purely relative threshold would promote roundoff to rank when the
    # defect vanishes entirely (unitary input)
    top = max(float(w[0]), 1.0) if w.size else 1.0
    rank = int(np.count_nonzero(w > tol.rank_rel_tol * top))
    w[rank:] = 0.0
    d = (v * np.sqrt(w)) @ v.conj().T
    d = (d + d.conj().T) / 2.0
    basis = SubspaceBasis(n, fix_column_phases(v[:, :rank]))
    return DefectData(d, basis)


def _q_limit(tmat: np.ndarray, tol: TolerancePolicy) -> np.ndarray:
    """Limit of T^n T*^n by iteration (geometric off the unitary part)."""
    n = tmat.shape[0]
    a = np.eye(n, dtype=np.complex128)
    cap = max(8, int(10 * n * math.log(1.0 / tol.residual_tol)))
    for _ in range(cap):
        nxt = tmat @ a @ tmat.conj().T
        if operator_norm(nxt - a) < 1e-12:
            return nxt
        a = nxt
    return a


def canonical_decomposition(t: ContractionTuple) -> DecompositionResult:
    """Split C^n = H_u (+) H_c so the product is unitary on H_u and has
    spectral radius < 1 on H_c, and every factor is block diagonal.

    H_u is the span of eigenvectors of the product with unimodular
    eigenvalue (each such eigenvector reduces a contraction); the slower
    power-limit of T^n T*^n is computed as a cross-check and its gap to the
    eigenvector projection is reported.  Eigenvalues inside the annulus
    (1 - rank_rel_tol, 1) are classified unitary-side and flagged.
    """
    tol = t.tol
    n = t.dim
    tmat = product(t)
    w, vecs = np.linalg.eig(tmat)
    mags = np.abs(w)
    sel = mags >= 1.0 - tol.rank_rel_tol
    near = [complex(x) for x in w[(mags >= 1.0 - tol.rank_rel_tol) & (mags < 1.0 - 1e-13)]]
    if np.any(sel):
        b_u = range_basis(vecs[:, sel], tol)
    else:
        b_u = SubspaceBasis(n, np.zeros((n, 0), dtype=np.complex128))
    b_c = orthonormal_complement(b_u, tol)

    leakage = []
    for j, a in enumerate(t.ops):
        off = max(
            operator_norm(b_c.basis.conj().T @ a @ b_u.basis),
            operator_norm(b_u.basis.conj().T @ a @ b_c.basis),
        )
        leakage.append(off)
        if off > tol.residual_tol:
            raise BlockLeakage(j, off)

    uni_ops = tuple(b_u.basis.conj().T @ a @ b_u.basis for a in t.ops)
    cnu_ops = tuple(b_c.basis.conj().T @ a @ b_c.basis for a in t.ops)
    unitary_part = ContractionTuple(uni_ops, tol)
    cnu_part = ContractionTuple(cnu_ops, tol)
    p_u = b_u.basis @ b_u.basis.conj().T
    v = np.hstack([b_u.basis, b_c.basis])

    # cross-check: eigenvalues of lim T^n T*^n cluster at 0 and 1
    q = _q_limit(tmat, tol)
    qs, qv = np.linalg.eigh((q + q.conj().T) / 2.0)
    keep = qs > 0.5
    p_q = qv[:, keep] @ qv[:, keep].conj().T
    q_gap = operator_norm(p_q - p_u)

    t_u = product(unitary_part) if b_u.rank else np.zeros((0, 0), dtype=np.complex128)
    uni_residual = (
        operator_norm(t_u.conj().T @ t_u - np.eye(b_u.rank)) if b_u.rank else 0.0
    )
    factor_unitarity = [
        operator_norm(a.conj().T @ a - np.eye(b_u.rank)) if b_u.rank else 0.0
        for a in uni_ops
    ]
    cnu_rho = spectral_radius(product(cnu_part)) if b_c.rank else 0.0
    recompose = []
    for j, a in enumerate(t.ops):
        rebuilt = (
            b_u.basis @ uni_ops[j] @ b_u.basis.conj().T
            + b_c.basis @ cnu_ops[j] @ b_c.basis.conj().T
        )
        recompose.append(operator_norm(rebuilt - a))

    report = {
        "leakage": leakage,
        "q_projection_gap": q_gap,
        "near_boundary_eigenvalues": near,
        "product_unitarity": uni_residual,
        "factor_unitarity": factor_unitarity,
        "cnu_spectral_radius": cnu_rho,
        "recompose": recompose,
    }
    return DecompositionResult(p_u, unitary_part, cnu_part, v, report)


# ---------------------------------------------------------------------------
# Instance generation
# ---------------------------------------------------------------------------


def haar_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-distributed unitary from a QR of a complex Gaussian matrix."""
    if n == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    ph = np.diagonal(r).copy()
    ph /= np.abs(ph)
    return q * ph


def _diag_factors(rng, dim, d):
    """Diagonal contractions; magnitudes are exactly 1 or at most 0.9.

    Coordinates drawn into the unimodular mask are unimodular in every
    factor, so the product has an honest unitary part there.
    """
    mask = rng.random(dim) < 0.25
    ops = []
    for _ in range(d):
        phases = np.exp(2j * np.pi * rng.random(dim))
        radii = np.where(mask, 1.0, PURE_SIDE_NORM * rng.random(dim))
        ops.append(np.diag(radii * phases).astype(np.complex128))
    return ops


def _poly_of(rng, m: np.ndarray, degree: int, scale: float) -> np.ndarray:
    """Random polynomial of a fixed matrix, rescaled to norm ``scale``."""
    n = m.shape[0]
    coeffs = (rng.standard_normal(degree + 1) + 1j * rng.standard_normal(degree + 1))
    coeffs /= np.arange(1, degree + 2)
    out = np.zeros((n, n), dtype=np.complex128)
    for c in coeffs[::-1]:
        out = out @ m + c * np.eye(n)
    nrm = operator_norm(out)
    if nrm < 1e-8:
        out = out + np.eye(n)
        nrm = operator_norm(out)
    return out * (scale / nrm)


def _compressed_factors(rng, dim, d, scale=PURE_SIDE_NORM):
    """Polynomials of the truncated shift: commuting, genuinely non-normal.

    The truncated shift is the compression of the cyclic-shift unitary on
    C^(2 dim) to its first dim coordinates; polynomials in it model the
    compressions of the corresponding commuting multiplication unitaries to
    that jointly co-invariant coordinate patch.
    """
    s = np.zeros((dim, dim), dtype=np.complex128)
    if dim > 1:
        s[np.arange(1, dim), np.arange(dim - 1)] = 1.0
    ops = [_poly_of(rng, s, max(dim, 2), scale) for _ in range(d)]
    u = haar_unitary(rng, dim)
    return [u @ a @ u.conj().T for a in ops]


def _upper_triangular_factors(rng, dim, d):
    m = np.triu(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    return [_poly_of(rng, m, max(dim - 1, 1), 0.88) for _ in range(d)]


def generate(
    kind: str,
    dim: int,
    d: int,
    seed: int,
    tol: TolerancePolicy = DEFAULT_TOL,
) -> ContractionTuple:
    """Deterministic seeded test instances; output always passes validate.

    Pure-side factors are scaled to norm <= 0.9 and unitary-side eigenvalues
    are exactly unimodular, so the singular spectrum of every product stays
    away from the open interval (0.9, 1): rank decisions on defects and the
    adaptive truncation degree both rely on that gap.
    """
    if dim < 1 or d < 2:
        raise ValueError("need dim >= 1 and d >= 2")
    if kind not in GENERATOR_KINDS:
        raise UnsupportedKind(kind, GENERATOR_KINDS)
    rng = np.random.default_rng(seed)
    if kind == "diag":
        ops = _diag_factors(rng, dim, d)
    elif kind == "joint-unitary-conjugated-diag":
        diag_ops = _diag_factors(rng, dim, d)
        u = haar_unitary(rng, dim)
        ops = [u @ a @ u.conj().T for a in diag_ops]
    elif kind == "compressed-commuting-unitaries":
        ops = _compressed_factors(rng, dim, d)
    elif kind == "upper-triangular-commuting":
        ops = _upper_triangular_factors(rng, dim, d)
    else:  # mixed-unitary-plus-pure
        n_u = dim // 2
        n_c = dim - n_u
        u_small = haar_unitary(rng, n_u)
        uni = [
            u_small @ np.diag(np.exp(2j * np.pi * rng.random(n_u))) @ u_small.conj().T
            for _ in range(d)
        ]
        pure = _compressed_factors(rng, n_c, d, scale=0.85)
        big = haar_unitary(rng, dim)
        ops = []
        for j in range(d):
            blk = np.zeros((dim, dim), dtype=np.complex128)
            blk[:n_u, :n_u] = uni[j]
            blk[n_u:, n_u:] = pure[j]
            ops.append(big @ blk @ big.conj().T)
    return validate(ops, tol)
