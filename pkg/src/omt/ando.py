"""Ando tuples: the isometries, projections, and unitaries on the direct sum
of factor defect spaces that jointly Halmos-dilate the fundamental operators.

The carrier F = D_{T_1} (+) ... (+) D_{T_d} is realized concretely as stacked
defect-basis coordinate blocks, so every object here is a small dense matrix
with explicit block offsets.  All operator-by-action constructions push the
standard basis of the ambient space through the relevant defect operator and
extract the matrix by least squares, then certify isometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotIsometric
from .numkit import (
    DEFAULT_TOL,
    SubspaceBasis,
    complete_to_unitary,
    operator_norm,
)
from .tuples import ContractionTuple, DefectData, defect, partial_product, product

__all__ = ["AndoTuple", "delta_alpha", "build_ando", "verify_halmos"]


@dataclass(frozen=True)
class AndoTuple:
    """Data (F, Lambda_j, P_j, U_j, tau_j) built from a contraction tuple.

    ``Lambda[j]``: isometry from D_T coordinates into F; ``P[j]``: orthogonal
    projection of F onto the j-th summand; ``U[j]``: unitary on F extending
    the defining partial isometry; ``tau[j]``: unitary with tau_j Lambda_j =
    Lambda_1 and tau_1 = I.
    """

    factor_defects: tuple
    product_defect: DefectData
    Lambda: tuple
    P: tuple
    U: tuple
    tau: tuple
    offsets: tuple
    report: dict

    @property
    def calF_dim(self) -> int:
        return self.offsets[-1]

    @property
    def d(self) -> int:
        return len(self.Lambda)


def _defect_rows(dd: DefectData, tail: np.ndarray) -> np.ndarray:
    """Coordinates of D (tail h) for h over the standard basis."""
    return dd.basis.basis.conj().T @ dd.D @ tail


def _action_matrix(x_img: np.ndarray, x_dom: np.ndarray, rcond: float) -> np.ndarray:
    """Least-squares extraction of the operator mapping dom-rows to img-rows."""
    if x_dom.shape[0] == 0:
        return np.zeros((x_img.shape[0], 0), dtype=np.complex128)
    return x_img @ np.linalg.pinv(x_dom, rcond=rcond)


def delta_alpha(t: ContractionTuple, alpha) -> np.ndarray:
    """Isometry D_{T_alpha} -> (+)_k D_{T_{j_k}} in defect coordinates.

    ``alpha`` is a nonempty strictly increasing tuple of 0-based indices.
    The defining action sends D_{T_alpha} h to the stack of
    D_{T_{j_k}} (T_{j_{k+1}} ... T_{j_m}) h; a telescoping norm computation
    makes it an isometry, which is asserted numerically.
    """
    alpha = tuple(alpha)
    if not alpha or list(alpha) != sorted(set(alpha)):
        raise ValueError("alpha must be nonempty and strictly increasing")
    tol = t.tol
    n = t.dim
    t_alpha = np.eye(n, dtype=np.complex128)
    for j in alpha:
        t_alpha = t_alpha @ t.ops[j]
    dd_alpha = defect(t_alpha, tol)
    blocks = []
    for pos, j in enumerate(alpha):
        tail = np.eye(n, dtype=np.complex128)
        for i in alpha[pos + 1 :]:
            tail = tail @ t.ops[i]
        blocks.append(_defect_rows(defect(t.ops[j], tol), tail))
    x_img = np.vstack(blocks) if blocks else np.zeros((0, n), dtype=np.complex128)
    x_dom = _defect_rows(dd_alpha, np.eye(n, dtype=np.complex128))
    delta = _action_matrix(x_img, x_dom, tol.rank_rel_tol)
    if x_dom.shape[0]:
        fit = operator_norm(delta @ x_dom - x_img)
        iso = operator_norm(delta.conj().T @ delta - np.eye(delta.shape[1]))
        if max(fit, iso) > tol.residual_tol:
            raise NotIsometric(max(fit, iso))
    return delta


def build_ando(t: ContractionTuple) -> AndoTuple:
    """Construct an Ando tuple for the given contraction tuple.

    The unitaries U_j extend the defining partial isometries through the
    deterministic complement pairing; at finite dimension the domain and
    image of each partial isometry have equal codimension inside F, so no
    enlargement space is ever required (asserted, and recorded in the
    report).  tau_j is built directly as the unitary extension of
    Lambda_j c -> Lambda_1 c, which is the property the joint dilation
    actually uses.
    """
    tol = t.tol
    n = t.dim
    d = t.d
    dds = [defect(a, tol) for a in t.ops]
    d_t = defect(product(t), tol)
    offsets = [0]
    for dd in dds:
        offsets.append(offsets[-1] + dd.rank)
    big = offsets[-1]
    x_dom = _defect_rows(d_t, np.eye(n, dtype=np.complex128))

    def stacked(j: int, with_tail_j: bool) -> np.ndarray:
        """Image rows of Lambda_j (with_tail_j) or of the U_j*-image map."""
        part = partial_product(t, j)
        dd_part = defect(part, tol)
        delta_j = delta_alpha(t, tuple(i for i in range(d) if i != j))
        out = np.zeros((big, n), dtype=np.complex128)
        if with_tail_j:
            out[offsets[j] : offsets[j + 1]] = _defect_rows(dds[j], part)
            rest = delta_j @ _defect_rows(dd_part, np.eye(n, dtype=np.complex128))
        else:
            out[offsets[j] : offsets[j + 1]] = _defect_rows(dds[j], np.eye(n, dtype=np.complex128))
            rest = delta_j @ _defect_rows(dd_part, t.ops[j])
        row = 0
        for k in range(d):
            if k == j:
                continue
            rk = dds[k].rank
            out[offsets[k] : offsets[k] + rk] = rest[row : row + rk]
            row += rk
        return out

    lambdas, images = [], []
    lam_resid, img_resid = [], []
    for j in range(d):
        x_img = stacked(j, with_tail_j=True)
        lam = _action_matrix(x_img, x_dom, tol.rank_rel_tol)
        lam_resid.append(
            max(
                operator_norm(lam @ x_dom - x_img),
                operator_norm(lam.conj().T @ lam - np.eye(lam.shape[1])),
            )
        )
        x_img2 = stacked(j, with_tail_j=False)
        kap = _action_matrix(x_img2, x_dom, tol.rank_rel_tol)
        img_resid.append(
            max(
                operator_norm(kap @ x_dom - x_img2),
                operator_norm(kap.conj().T @ kap - np.eye(kap.shape[1])),
            )
        )
        lambdas.append(lam)
        images.append(kap)
    worst = max(lam_resid + img_resid, default=0.0)
    if worst > tol.residual_tol:
        raise NotIsometric(worst)

    eye_dom = np.eye(d_t.rank, dtype=np.complex128)
    projections, unitaries, taus = [], [], []
    for j in range(d):
        p = np.zeros((big, big), dtype=np.complex128)
        p[offsets[j] : offsets[j + 1], offsets[j] : offsets[j + 1]] = np.eye(dds[j].rank)
        projections.append(p)
        u_star = complete_to_unitary(
            SubspaceBasis(big, lambdas[j]), SubspaceBasis(big, images[j]), eye_dom, tol
        )
        unitaries.append(u_star.conj().T)
        if j == 0:
            taus.append(np.eye(big, dtype=np.complex128))
        else:
            taus.append(
                complete_to_unitary(
                    SubspaceBasis(big, lambdas[j]), SubspaceBasis(big, lambdas[0]), eye_dom, tol
                )
            )

    tmat_coords = x_dom  # coordinates of D_T h over the standard basis
    tmat = product(t)
    inflate = []
    for j in range(d):
        u_star = unitaries[j].conj().T
        p = projections[j]
        p_perp = np.eye(big) - p
        lhs1 = p_perp @ u_star @ lambdas[j] @ tmat_coords + p @ u_star @ lambdas[j] @ tmat_coords @ tmat
        rhs1 = lambdas[j] @ tmat_coords @ t.ops[j]
        lhs2 = unitaries[j] @ p @ lambdas[j] @ tmat_coords + unitaries[j] @ p_perp @ lambdas[j] @ tmat_coords @ tmat
        rhs2 = lambdas[j] @ tmat_coords @ partial_product(t, j)
        inflate.append(max(operator_norm(lhs1 - rhs1), operator_norm(lhs2 - rhs2)))

    report = {
        "lambda_isometry": lam_resid,
        "image_isometry": img_resid,
        "u_unitarity": [operator_norm(u.conj().T @ u - np.eye(big)) for u in unitaries],
        "tau_intertwine": [operator_norm(taus[j] @ lambdas[j] - lambdas[0]) for j in range(d)],
        "inflate_identities": inflate,
        "enlargement_needed": False,
    }
    return AndoTuple(
        tuple(dds), d_t, tuple(lambdas), tuple(projections), tuple(unitaries), tuple(taus),
        tuple(offsets), report,
    )


def verify_halmos(t: ContractionTuple, ando: AndoTuple, fund) -> dict:
    """Residuals of the joint Halmos dilation identities.

    Checks (F_j1, F_j2) = Lambda_j* (P_j^perp U_j*, U_j P_j) Lambda_j, the
    tau-conjugated variant through the single isometry Lambda_1, and the
    exact partial-isometry structure of the dilating pair.
    """
    big = ando.calF_dim
    eye = np.eye(big, dtype=np.complex128)
    halmos, joint, structure = [], [], []
    for j in range(t.d):
        lam, lam1 = ando.Lambda[j], ando.Lambda[0]
        u, p, tau = ando.U[j], ando.P[j], ando.tau[j]
        a = (eye - p) @ u.conj().T
        b = u @ p
        f1, f2 = fund.pairs[j]
        halmos.append(
            max(
                operator_norm(lam.conj().T @ a @ lam - f1),
                operator_norm(lam.conj().T @ b @ lam - f2),
            )
        )
        joint.append(
            max(
                operator_norm(lam1.conj().T @ tau @ a @ tau.conj().T @ lam1 - f1),
                operator_norm(lam1.conj().T @ tau @ b @ tau.conj().T @ lam1 - f2),
            )
        )
        structure.append(max(operator_norm(a @ b), operator_norm(b @ a)))
    return {
        "halmos": halmos,
        "joint_halmos": joint,
        "partial_isometry_products": structure,
    }
