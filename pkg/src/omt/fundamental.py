"""Fundamental operators of a commuting contraction tuple.

For each index ``i`` the pair ``(F_i1, F_i2)`` is the unique solution on the
defect space of the product of the two coupled systems

    T_i - T_(i)* T = D F_i1 D,          T_(i) - T_i* T = D F_i2 D,
    D T_i = F_i1 D + F_i2* D T,         D T_(i) = F_i2 D + F_i1* D T,

with ``D`` the defect operator of the product and ``T_(i)`` the product with
the i-th factor removed.  Operators are stored in defect-basis coordinates
(rank x rank); a rank-0 defect yields empty matrices and vacuous checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalRadiusExceeded, ResidualExceeded
from .numkit import (
    DEFAULT_TOL,
    TolerancePolicy,
    as_matrix,
    numerical_radius,
    numerical_radius_batch,
    operator_norm,
    pinv_solve_on_subspace,
)
from .tuples import ContractionTuple, DefectData, adjoint_tuple, defect, partial_product, product

__all__ = [
    "FundamentalOps",
    "AdjointFundamentalOps",
    "fundamental_ops",
    "adjoint_fundamental_ops",
    "gamma_fundamental",
    "pencil_radius_bound",
    "perturbed_system_residual",
    "check_further_properties",
]


@dataclass(frozen=True)
class FundamentalOps:
    defect: DefectData
    pairs: tuple
    residuals: dict


@dataclass(frozen=True)
class AdjointFundamentalOps:
    defect_star: DefectData
    pairs: tuple
    residuals: dict


def pencil_radius_bound(f1: np.ndarray, f2: np.ndarray, tol: TolerancePolicy = DEFAULT_TOL):
    """Max of the numerical radius of F1 + w F2 over the unit-circle w-grid.

    Subadditivity of the numerical radius gives a cheap certificate
    ``nu(F1) + nu(F2)``; when that exceeds one, the two-angle function
    ``lambda_max(Re(e^{i a} F1) + Re(e^{i b} F2))`` is sampled on the
    w-grid (coarse in the inner angle) and every w whose coarse value comes
    within 3e-2 of 1 is re-evaluated with the full numerical-radius routine,
    so no grid point with radius above ``1 + residual_tol`` can hide.
    Returns ``(value, method)``.
    """
    if f1.size == 0:
        return 0.0, "empty"
    quick = numerical_radius(f1, tol) + numerical_radius(f2, tol)
    if quick <= 1.0 + tol.residual_tol:
        return quick, "subadditive-bound"

    k_w = max(int(tol.grid_points), 8)
    step = max(1, k_w // 72)
    sub = np.arange(0, k_w, step)  # inner-angle subgrid (~5 degrees)
    gammas = np.linspace(0.0, 2.0 * np.pi, k_w, endpoint=False)
    phases = np.exp(1j * gammas)
    re1 = (phases[:, None, None] * f1[None] + np.conj(phases)[:, None, None] * f1.conj().T[None]) / 2.0
    re2 = (phases[:, None, None] * f2[None] + np.conj(phases)[:, None, None] * f2.conj().T[None]) / 2.0
    # h[b, a] = Re(e^{i g_a} F1) + Re(e^{i (g_a + g_b)} F2) so that the max
    # over a is a coarse numerical radius of F1 + w F2 at w = e^{i g_b}
    idx = (sub[None, :] + np.arange(k_w)[:, None]) % k_w
    h = re1[sub][None, :, :, :] + re2[idx]
    lam = np.linalg.eigvalsh(h.reshape(-1, f1.shape[0], f1.shape[0]))[:, -1]
    vals = lam.reshape(k_w, sub.size).max(axis=1)
    # the coarse per-w value underestimates nu(F1 + w F2) by at most half an
    # inner-grid step times the angular Lipschitz constant; every w that
    # could reach 1 + residual_tol is re-evaluated with full refinement
    margin = (np.pi * step / k_w) * (operator_norm(f1) + operator_norm(f2))
    suspicious = np.nonzero(vals >= 1.0 + tol.residual_tol - margin)[0]
    if suspicious.size:
        refined = numerical_radius_batch(f1[None] + phases[suspicious, None, None] * f2[None])
        vals = vals.copy()
        vals[suspicious] = np.maximum(vals[suspicious], refined)
    return float(vals.max()), "grid"


def _system_residuals(ops, part_prods, tmat, dd: DefectData, pairs, tol):
    """Residuals of both defining systems, compressed to defect coordinates."""
    b = dd.basis.basis
    bd = b.conj().T @ dd.D
    bdt = bd @ tmat
    scale = 1.0 + max(operator_norm(a) for a in ops)
    eqn, defining = [], []
    for i, (f1, f2) in enumerate(pairs):
        f1a = b @ f1 @ b.conj().T
        f2a = b @ f2 @ b.conj().T
        l1 = ops[i] - part_prods[i].conj().T @ tmat
        l2 = part_prods[i] - ops[i].conj().T @ tmat
        eqn.append(operator_norm(dd.D @ f1a @ dd.D - l1) / scale)
        eqn.append(operator_norm(dd.D @ f2a @ dd.D - l2) / scale)
        c1 = bd @ ops[i] - f1 @ bd - f2.conj().T @ bdt
        c2 = bd @ part_prods[i] - f2 @ bd - f1.conj().T @ bdt
        defining.append(operator_norm(c1) / scale)
        defining.append(operator_norm(c2) / scale)
    return eqn, defining, scale


def _solve_pairs(t: ContractionTuple, label: str):
    tol = t.tol
    tmat = product(t)
    dd = defect(tmat, tol)
    part_prods = [partial_product(t, i) for i in range(t.d)]
    pairs = []
    for i in range(t.d):
        l1 = t.ops[i] - part_prods[i].conj().T @ tmat
        l2 = part_prods[i] - t.ops[i].conj().T @ tmat
        f1 = pinv_solve_on_subspace(l1, dd.D, dd.basis, tol)
        f2 = pinv_solve_on_subspace(l2, dd.D, dd.basis, tol)
        pairs.append((f1, f2))
    eqn, defining, scale = _system_residuals(t.ops, part_prods, tmat, dd, pairs, tol)
    worst_eqn = max(eqn) if eqn else 0.0
    worst_def = max(defining) if defining else 0.0
    if worst_eqn > tol.residual_tol:
        raise ResidualExceeded(f"{label} defining equations", worst_eqn * scale, tol.residual_tol)
    if worst_def > tol.residual_tol:
        raise ResidualExceeded(f"{label} operator system", worst_def * scale, tol.residual_tol)
    pencil_vals = []
    pencil_methods = []
    for f1, f2 in pairs:
        val, method = pencil_radius_bound(f1, f2, tol)
        pencil_vals.append(val)
        pencil_methods.append(method)
        if method == "grid" and val > 1.0 + tol.residual_tol:
            raise ResidualExceeded("pencil numerical-radius bound", val - 1.0, tol.residual_tol)
    residuals = {
        "defining_equations": eqn,
        "operator_system": defining,
        "pencil_radius": pencil_vals,
        "pencil_method": pencil_methods,
        "scale": scale,
    }
    return dd, tuple(pairs), residuals


def fundamental_ops(t: ContractionTuple) -> FundamentalOps:
    """Fundamental operators of the tuple, with verified residuals."""
    dd, pairs, residuals = _solve_pairs(t, "fundamental")
    return FundamentalOps(dd, pairs, residuals)


def adjoint_fundamental_ops(t: ContractionTuple) -> AdjointFundamentalOps:
    """Fundamental operators of the adjoint tuple (the G's)."""
    dd, pairs, residuals = _solve_pairs(adjoint_tuple(t), "adjoint fundamental")
    return AdjointFundamentalOps(dd, pairs, residuals)


def gamma_fundamental(s: np.ndarray, tmat: np.ndarray, tol: TolerancePolicy = DEFAULT_TOL) -> np.ndarray:
    """Fundamental operator of a symmetrized pair (S, T).

    The caller attests that (S, T) = (T_j + w T_(j), w T) for a validated
    tuple and unimodular w; the routine itself only certifies the two
    defining equations and the numerical-radius bound.
    """
    s = as_matrix(s)
    tmat = as_matrix(tmat)
    dd = defect(tmat, tol)
    f = pinv_solve_on_subspace(s - s.conj().T @ tmat, dd.D, dd.basis, tol)
    b = dd.basis.basis
    bd = b.conj().T @ dd.D
    resid = operator_norm(bd @ s - f @ bd - f.conj().T @ bd @ tmat)
    scale = 1.0 + operator_norm(s)
    if resid > tol.residual_tol * scale:
        raise ResidualExceeded("gamma operator equation", resid, tol.residual_tol * scale)
    nu = numerical_radius(f, tol)
    if nu > 1.0 + tol.residual_tol:
        raise NumericalRadiusExceeded(nu)
    return f


def perturbed_system_residual(
    t: ContractionTuple,
    fund: FundamentalOps,
    eps: float,
    seed: int,
    index: int = 0,
) -> float:
    """Residual of the operator system after perturbing F_{index,1} by a
    seeded defect-space operator of norm ``eps`` (uniqueness probe)."""
    rng = np.random.default_rng(seed)
    r = fund.defect.rank
    if r == 0:
        return 0.0
    e = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
    e *= eps / operator_norm(e)
    pairs = list(fund.pairs)
    f1, f2 = pairs[index]
    pairs[index] = (f1 + e, f2)
    tmat = product(t)
    part_prods = [partial_product(t, i) for i in range(t.d)]
    _, defining, scale = _system_residuals(t.ops, part_prods, tmat, fund.defect, pairs, t.tol)
    return max(defining[2 * index], defining[2 * index + 1]) * scale


def check_further_properties(
    t: ContractionTuple,
    fund: FundamentalOps,
    adj: AdjointFundamentalOps,
) -> dict:
    """Residuals of the mixed identities coupling the F's and G's.

    Reporting only: each entry compares the two sides of one identity,
    restricted to the appropriate defect space.
    """
    tmat = product(t)
    part_prods = [partial_product(t, i) for i in range(t.d)]
    d, b = fund.defect.D, fund.defect.basis.basis
    ds, bs = adj.defect_star.D, adj.defect_star.basis.basis
    mixed_left, mixed_right = [], []
    for j in range(t.d):
        f1 = b @ fund.pairs[j][0] @ b.conj().T
        f2 = b @ fund.pairs[j][1] @ b.conj().T
        g1 = bs @ adj.pairs[j][0] @ bs.conj().T
        g2 = bs @ adj.pairs[j][1] @ bs.conj().T
        # D_T F_j1 = (T_j D_T - D_T* G_j2 T)|D_T   and the j-partial variant
        lhs_a = d @ f1 @ b
        rhs_a = (t.ops[j] @ d - ds @ g2 @ tmat) @ b
        lhs_b = d @ f2 @ b
        rhs_b = (part_prods[j] @ d - ds @ g1 @ tmat) @ b
        mixed_left.append(max(operator_norm(lhs_a - rhs_a), operator_norm(lhs_b - rhs_b)))
        # (F_j1* D_T D_T* - F_j2 T*)|D_T* = D_T D_T* G_j1 - T* G_j2*, swapped
        lhs_c = (f1.conj().T @ d @ ds - f2 @ tmat.conj().T) @ bs
        rhs_c = (d @ ds @ g1 - tmat.conj().T @ g2.conj().T) @ bs
        lhs_d = (f2.conj().T @ d @ ds - f1 @ tmat.conj().T) @ bs
        rhs_d = (d @ ds @ g2 - tmat.conj().T @ g1.conj().T) @ bs
        mixed_right.append(max(operator_norm(lhs_c - rhs_c), operator_norm(lhs_d - rhs_d)))
    return {"defect_intertwine": mixed_left, "cross_adjoint": mixed_right}
