"""Isometric and pseudo-commutative lifts on the truncated Hardy model.

The minimal isometric lift of the product operator T is realized on
D_{T*}-coefficient blocks of degree 0..N plus the unitary subspace of T:
the embedding stacks the observability rows D_{T*} T*^k together with the
projection onto the unitary part.  At finite dimension the power limit of
T^n T*^n is exactly that orthogonal projection, so no infinite minimal
unitary extension ever enters: the canonical commutative unitary tuple is
the restriction of the factors to the unitary subspace.

The truncation degree N is adaptive: tails of the observability operator
decay geometrically at the spectral radius of the completely-nonunitary
part, and N is raised until the certified tail norm is inside the residual
budget (capped at 200).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ando import AndoTuple, build_ando
from .errors import MinimalityFailure, ResidualExceeded, TailBoundExceeded
from .fundamental import AdjointFundamentalOps, adjoint_fundamental_ops
from .hardy import HardyOp, pencil_op, symbol_commutator
from .numkit import operator_norm
from .tuples import (
    ContractionTuple,
    DecompositionResult,
    DefectData,
    adjoint_tuple,
    canonical_decomposition,
    defect,
    partial_product,
    product,
)

__all__ = [
    "DouglasModel",
    "LiftBundle",
    "PccLift",
    "FunctionalModel",
    "douglas_model",
    "noncommutative_lift",
    "pcc_lift",
    "pcc_uniqueness_check",
    "functional_model",
]

N_CAP = 200


@dataclass(frozen=True)
class DouglasModel:
    """Minimal isometric lift data for the product operator."""

    Q: np.ndarray
    R_D_basis: np.ndarray
    W_D: np.ndarray
    W_partial: tuple
    N: int
    Pi_D: np.ndarray
    defect_star: DefectData
    decomposition: DecompositionResult
    tail_bound: float
    report: dict = field(default_factory=dict)

    @property
    def unitary_dim(self) -> int:
        return self.R_D_basis.shape[1]

    @property
    def lift_dim(self) -> int:
        return self.Pi_D.shape[0]

    def lift_isometry(self) -> HardyOp:
        """V_D = M_z (+) W_D as a structured operator."""
        r = self.defect_star.rank
        return pencil_op(
            np.zeros((r, r), dtype=np.complex128), np.eye(r, dtype=np.complex128),
            self.W_D, self.N,
        )


@dataclass(frozen=True)
class LiftBundle:
    """A (generally noncommutative) isometric lift in BCL form."""

    Pi: np.ndarray
    lift_ops: tuple
    companion_ops: tuple
    V: np.ndarray
    ando_star: AndoTuple
    douglas: DouglasModel
    report: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PccLift:
    """Pseudo-commutative contractive lift on the minimal lift space."""

    douglas: DouglasModel
    S: tuple
    S_prime: tuple
    V: HardyOp
    adjoint_fund: AdjointFundamentalOps
    report: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FunctionalModel:
    """Compression of the pcc lift to the embedded copy of the space."""

    ops: tuple
    product_op: np.ndarray
    basis: np.ndarray
    certificate: np.ndarray
    report: dict = field(default_factory=dict)


def _observability_rows(bs_ds: np.ndarray, t_star: np.ndarray, n_deg: int) -> np.ndarray:
    """Stack of D_{T*} T*^k rows (defect coordinates), k = 0..n_deg."""
    rows = [bs_ds]
    cur = bs_ds
    for _ in range(n_deg):
        cur = cur @ t_star
        rows.append(cur)
    return np.vstack(rows) if rows[0].size else np.zeros((0, t_star.shape[0]))


def _adaptive_degree(bs_ds, t_star, p_c, rho_c, tol) -> tuple:
    """Smallest N (capped) whose certified observability tail is in budget."""
    target = tol.residual_tol / 4.0
    if bs_ds.shape[0] == 0 or p_c.shape[0] == 0 or operator_norm(p_c) < 0.5:
        return 0, 0.0
    if rho_c <= 1e-12:
        guess = t_star.shape[0]
    else:
        guess = int(math.ceil(math.log(target) / math.log(min(rho_c, 1.0 - 1e-12))))
    n_deg = max(8, min(N_CAP, guess))
    while True:
        tail = operator_norm(bs_ds @ np.linalg.matrix_power(t_star, n_deg + 1) @ p_c)
        if tail <= target:
            return n_deg, float(tail)
        if n_deg >= N_CAP:
            raise TailBoundExceeded(float(tail), n_deg)
        n_deg = min(N_CAP, n_deg + max(8, n_deg // 4))


def douglas_model(t: ContractionTuple) -> DouglasModel:
    """Minimal isometric lift of T with its canonical commutative unitary tuple.

    Q is the orthogonal projection onto the unitary subspace H_u (equal to
    the strong limit of T^n T*^n at finite dimension, cross-checked against
    the power iteration inside the canonical decomposition); the canonical
    unitaries are the restrictions of the factors to H_u.
    """
    tol = t.tol
    dec = canonical_decomposition(t)
    n = t.dim
    b_u = dec.change_of_basis[:, : dec.unitary_dim]
    q = dec.P_u
    w_partial = tuple(dec.unitary_part.ops)
    w_d = product(dec.unitary_part) if dec.unitary_dim else np.zeros((0, 0), dtype=np.complex128)

    t_star = product(adjoint_tuple(t))
    ds = defect(t_star, tol)
    bs_ds = ds.basis.basis.conj().T @ ds.D
    p_c = np.eye(n, dtype=np.complex128) - q
    rho_c = dec.report["cnu_spectral_radius"]
    n_deg, tail = _adaptive_degree(bs_ds, t_star, p_c, rho_c, tol)

    pi = np.vstack([_observability_rows(bs_ds, t_star, n_deg), b_u.conj().T])
    model = DouglasModel(q, b_u, w_d, w_partial, n_deg, pi, ds, dec, tail)

    v_d = model.lift_isometry()
    intertwine = operator_norm(pi @ t_star - v_d.apply_adjoint(pi))
    isometry = operator_norm(pi.conj().T @ pi - np.eye(n))
    xi = max(
        (
            operator_norm(w_partial[j].conj().T @ b_u.conj().T - b_u.conj().T @ t.ops[j].conj().T)
            for j in range(t.d)
        ),
        default=0.0,
    )
    w_comm = max(
        (
            operator_norm(w_partial[i] @ w_partial[j] - w_partial[j] @ w_partial[i])
            for i in range(t.d)
            for j in range(i + 1, t.d)
        ),
        default=0.0,
    )
    prod_gap = operator_norm(
        w_d - (np.linalg.multi_dot(w_partial) if dec.unitary_dim and t.d > 1 else w_d)
    )
    report = {
        "intertwining": intertwine,
        "isometry_defect": isometry,
        "compression_intertwine": xi,
        "w_commutators": w_comm,
        "w_product_gap": prod_gap,
        "q_projection_gap": dec.report["q_projection_gap"],
        "tail_bound": tail,
        "truncation_degree": n_deg,
    }
    if intertwine > tol.residual_tol:
        raise ResidualExceeded("Douglas lift intertwining", intertwine, tol.residual_tol)
    return DouglasModel(q, b_u, w_d, w_partial, n_deg, pi, ds, dec, tail, report)


def _w_partial_product(model: DouglasModel, j: int) -> np.ndarray:
    out = np.eye(model.unitary_dim, dtype=np.complex128)
    for i, w in enumerate(model.W_partial):
        if i != j:
            out = out @ w
    return out


def noncommutative_lift(t: ContractionTuple, ando_star: AndoTuple = None) -> LiftBundle:
    """BCL-form isometric lift built from an Ando tuple of the adjoint tuple.

    The lift operators act on F_*-coefficient blocks; commutativity of the
    tuple is not promised (and generically fails for d >= 3): the pairwise
    symbol commutator norms are reported, never asserted.
    """
    tol = t.tol
    if ando_star is None:
        ando_star = build_ando(adjoint_tuple(t))
    model = douglas_model(t)
    n_deg = model.N
    t_star = product(adjoint_tuple(t))
    obs = _observability_rows(
        model.defect_star.basis.basis.conj().T @ model.defect_star.D, t_star, n_deg
    )
    big = ando_star.calF_dim
    eye = np.eye(big, dtype=np.complex128)

    def embed(lam: np.ndarray) -> np.ndarray:
        r = model.defect_star.rank
        head = (
            np.einsum("ij,kjm->kim", lam, obs.reshape(n_deg + 1, r, t.dim)).reshape(-1, t.dim)
            if r
            else np.zeros((big * (n_deg + 1), t.dim), dtype=np.complex128)
        )
        return np.vstack([head, model.R_D_basis.conj().T])

    lift_ops, companions, abstract_resid = [], [], []
    for j in range(t.d):
        tau = ando_star.tau[j]
        u_p = tau @ ando_star.U[j] @ tau.conj().T
        p_p = tau @ ando_star.P[j] @ tau.conj().T
        w_j = model.W_partial[j]
        w_pj = _w_partial_product(model, j)
        lift_ops.append(pencil_op(u_p @ (eye - p_p), u_p @ p_p, w_j, n_deg))
        companions.append(
            pencil_op(p_p @ u_p.conj().T, (eye - p_p) @ u_p.conj().T, w_pj, n_deg)
        )
        # per-j intertwining with the unconjugated operators through Pi_{j*}
        pi_j = embed(ando_star.Lambda[j])
        v_plain = pencil_op(
            ando_star.U[j] @ (eye - ando_star.P[j]), ando_star.U[j] @ ando_star.P[j], w_j, n_deg
        )
        v_plain_c = pencil_op(
            ando_star.P[j] @ ando_star.U[j].conj().T,
            (eye - ando_star.P[j]) @ ando_star.U[j].conj().T,
            w_pj,
            n_deg,
        )
        abstract_resid.append(
            max(
                operator_norm(v_plain.apply_adjoint(pi_j) - pi_j @ t.ops[j].conj().T),
                operator_norm(v_plain_c.apply_adjoint(pi_j) - pi_j @ partial_product(t, j).conj().T),
            )
        )

    pi_1 = embed(ando_star.Lambda[0])
    dil_resid = [
        max(
            operator_norm(lift_ops[j].apply_adjoint(pi_1) - pi_1 @ t.ops[j].conj().T),
            operator_norm(
                companions[j].apply_adjoint(pi_1) - pi_1 @ partial_product(t, j).conj().T
            ),
        )
        for j in range(t.d)
    ]
    commutators = {
        (i + 1, j + 1): symbol_commutator(lift_ops[i], lift_ops[j])
        for i in range(t.d)
        for j in range(i + 1, t.d)
    }
    # product V = V_1 ... V_d kept structured: polynomial symbol coefficients
    # plus the finite unitary product (dense materialization would be huge)
    sym = [lift_ops[0].A, lift_ops[0].B]
    w_prod = lift_ops[0].W
    for op in lift_ops[1:]:
        nxt = [np.zeros_like(sym[0]) for _ in range(len(sym) + 1)]
        for k, c in enumerate(sym):
            nxt[k] += c @ op.A
            nxt[k + 1] += c @ op.B
        sym = nxt
        w_prod = w_prod @ op.W
    v_total = {"symbol_coeffs": tuple(sym), "finite": w_prod}
    x = pi_1
    for op in lift_ops:
        x = op.apply_adjoint(x)
    product_lift = operator_norm(x - pi_1 @ product(t).conj().T)
    worst = max(dil_resid + abstract_resid)
    report = {
        "embedding_isometry": operator_norm(pi_1.conj().T @ pi_1 - np.eye(t.dim)),
        "intertwining": dil_resid,
        "abstract_intertwining": abstract_resid,
        "pairwise_symbol_commutators": commutators,
        "product_lift_residual": product_lift,
        "truncation_degree": n_deg,
    }
    if worst > 10 * tol.residual_tol:
        raise ResidualExceeded("noncommutative lift intertwining", worst, 10 * tol.residual_tol)
    return LiftBundle(pi_1, tuple(lift_ops), tuple(companions), v_total, ando_star, model, report)


def _krylov_gap(model: DouglasModel, v_d: HardyOp, tol) -> tuple:
    """Dimension gap of the Krylov span of ran Pi_D under V_D.

    When the defect rows have full significant rank the span saturates every
    degree block structurally (shifting the degree-zero rows reaches each
    block) and the unitary summand is reached at power zero; otherwise, or
    for small spaces, the rank is computed numerically.
    """
    total = model.lift_dim
    r = model.defect_star.rank
    bs_ds = model.defect_star.basis.basis.conj().T @ model.defect_star.D
    s_min = (
        float(np.linalg.svd(bs_ds, compute_uv=False)[-1]) if r else 1.0
    )
    structural_ok = s_min > math.sqrt(tol.rank_rel_tol)
    if structural_ok and total > 420:
        return 0, "structural"
    kry = [model.Pi_D]
    cur = model.Pi_D
    for _ in range(model.N + (0 if r else 1)):
        cur = v_d.apply(cur)
        kry.append(cur)
    mat = np.hstack(kry)
    svals = np.linalg.svd(mat, compute_uv=False)
    rank = int(np.count_nonzero(svals > 1e-8 * max(svals[0], 1.0)))
    return total - rank, "numeric"


def pcc_lift(t: ContractionTuple) -> PccLift:
    """Canonical pseudo-commutative contractive lift on the Douglas space.

    The lift tuple is the pencil family built from the adjoint-tuple
    fundamental operators joined with the canonical unitaries; the three
    defining conditions (minimality of the product lift, the symbol-exact
    companion identity S' = S* V with commutation, and the intertwinings)
    are certified and returned in the report.
    """
    tol = t.tol
    model = douglas_model(t)
    adj = adjoint_fundamental_ops(t)
    n_deg = model.N
    s_ops, s_primes = [], []
    for j in range(t.d):
        g1, g2 = adj.pairs[j]
        s_ops.append(pencil_op(g1.conj().T, g2, model.W_partial[j], n_deg))
        s_primes.append(pencil_op(g2.conj().T, g1, _w_partial_product(model, j), n_deg))
    v_d = model.lift_isometry()

    gap, method = _krylov_gap(model, v_d, tol)
    if gap:
        raise MinimalityFailure(gap)

    companion, commute = [], []
    for j in range(t.d):
        # S_j* V has symbol B* + z A* and finite part W_j* W_D
        companion.append(
            max(
                operator_norm(s_primes[j].A - s_ops[j].B.conj().T),
                operator_norm(s_primes[j].B - s_ops[j].A.conj().T),
                operator_norm(s_primes[j].W - s_ops[j].W.conj().T @ model.W_D),
            )
        )
        commute.append(
            max(symbol_commutator(s_ops[j], v_d), symbol_commutator(s_primes[j], v_d))
        )

    pi = model.Pi_D
    intertwine = []
    for j in range(t.d):
        intertwine.append(
            max(
                operator_norm(s_ops[j].apply_adjoint(pi) - pi @ t.ops[j].conj().T),
                operator_norm(
                    s_primes[j].apply_adjoint(pi) - pi @ partial_product(t, j).conj().T
                ),
            )
        )
    worst = max(intertwine)
    report = {
        "minimality_gap": gap,
        "minimality_method": method,
        "companion_symbol_identity": companion,
        "symbol_commutation_with_V": commute,
        "intertwining": intertwine,
        "truncation_degree": n_deg,
        "tail_bound": model.tail_bound,
    }
    if max(companion) > 1e-12 or max(commute) > 1e-12:
        raise ResidualExceeded("pcc symbol identities", max(companion + commute), 1e-12)
    if worst > tol.residual_tol:
        raise ResidualExceeded("pcc intertwining", worst, tol.residual_tol)
    return PccLift(model, tuple(s_ops), tuple(s_primes), v_d, adj, report)


def pcc_uniqueness_check(t: ContractionTuple) -> dict:
    """Build the canonical pcc lift through two independent routes.

    Route one compresses the adjoint Ando tuple (the joint Halmos dilation
    of the G's); route two solves the defect-space systems directly.  With
    the same (Pi_D, V_D) the lift tuple is forced, so the coordinates must
    agree.
    """
    ando_star = build_ando(adjoint_tuple(t))
    adj = adjoint_fundamental_ops(t)
    gaps = []
    for j in range(t.d):
        lam = ando_star.Lambda[j]
        u, p = ando_star.U[j], ando_star.P[j]
        eye = np.eye(ando_star.calF_dim, dtype=np.complex128)
        g1_halmos = lam.conj().T @ (eye - p) @ u.conj().T @ lam
        g2_halmos = lam.conj().T @ u @ p @ lam
        g1, g2 = adj.pairs[j]
        gaps.append(max(operator_norm(g1_halmos - g1), operator_norm(g2_halmos - g2)))
    return {"coordinate_gap": max(gaps, default=0.0), "per_index": gaps}


def _theta_taylor(tmat: np.ndarray, order: int, tol) -> list:
    """Taylor coefficients of the characteristic function in defect bases."""
    dd = defect(tmat, tol)
    dd_star = defect(tmat.conj().T, tol)
    bt, bs = dd.basis.basis, dd_star.basis.basis
    coeffs = [-bs.conj().T @ tmat @ bt]
    cur = bs.conj().T @ dd_star.D
    for _ in range(order):
        coeffs.append(cur @ dd.D @ bt)
        cur = cur @ tmat.conj().T
    return coeffs


def functional_model(t: ContractionTuple) -> FunctionalModel:
    """Douglas-type functional model of a tuple with c.n.u. product.

    The model space is the embedded copy ran Pi_D of the original space,
    i.e. the orthogonal complement of the graph subspace spanned by the
    characteristic-function columns; the model operators are the
    compressions of the pcc lift tuple to it.  The certificate is the
    unitary identification conjugating those compressions back to the
    original operators, verified to tail tolerance.
    """
    tol = t.tol
    lift = pcc_lift(t)
    model = lift.douglas
    if model.unitary_dim:
        raise ValueError("product operator has a unitary part; decompose first")
    pi = model.Pi_D
    n = t.dim
    # deterministic orthonormalization of the embedding (exact up to tails)
    gram = pi.conj().T @ pi
    w, v = np.linalg.eigh((gram + gram.conj().T) / 2.0)
    basis = pi @ (v * (1.0 / np.sqrt(np.clip(w, 1e-30, None)))) @ v.conj().T
    u_cert = basis.conj().T @ pi

    mats = [op.materialize() for op in lift.S]
    ops = tuple(basis.conj().T @ m @ basis for m in mats)
    v_mat = lift.V.materialize()
    product_op = basis.conj().T @ v_mat @ basis

    cert_resid = max(
        operator_norm(u_cert @ t.ops[j] - ops[j] @ u_cert) for j in range(t.d)
    )
    # columns z^k Theta e of the graph subspace are orthogonal to ran Pi_D;
    # only low shifts keep their full coefficient tail inside the truncation,
    # so the check stops at N/4 (the dropped tail there is ~ rho^(3N/4))
    r_t = lift.adjoint_fund.defect_star.rank
    theta = _theta_taylor(product(t), model.N, tol)
    kmax = model.N // 4
    ortho = 0.0
    if r_t and theta[0].size:
        width = theta[0].shape[1]
        cols = np.zeros((pi.shape[0], width * (kmax + 1)), dtype=np.complex128)
        for k in range(kmax + 1):
            for m, coef in enumerate(theta):
                if k + m <= model.N:
                    cols[(k + m) * r_t : (k + m + 1) * r_t, k * width : (k + 1) * width] = coef
        ortho = operator_norm(pi.conj().T @ cols)
    report = {
        "certificate_residual": cert_resid,
        "certificate_unitarity": operator_norm(u_cert.conj().T @ u_cert - np.eye(n)),
        "theta_graph_orthogonality": ortho,
        "model_dim": n,
        "truncation_degree": model.N,
    }
    if cert_resid > 10 * tol.residual_tol:
        raise ResidualExceeded("functional model certificate", cert_resid, 10 * tol.residual_tol)
    return FunctionalModel(ops, product_op, basis, u_cert, report)
