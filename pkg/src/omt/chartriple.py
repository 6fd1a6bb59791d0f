"""Characteristic triples: the complete unitary invariant.

A tuple with completely-nonunitary product is classified by the adjoint
fundamental operators, the canonical unitary tuple on the unitary subspace
(trivial in the purely c.n.u. case), and the Sz.-Nagy-Foias characteristic
function of the product.  At finite dimension the characteristic function
of the c.n.u. part is two-sided inner, so its boundary defect vanishes and
the entire spectral-multiplicity content lives in the unitary part; the
triple comparison therefore splits into a joint-spectrum match of the
unitary parts and a defect-space intertwining search for the analytic part.

Boundary evaluations of an inner function sit on the double-precision
roundoff floor once the square root in the defect is taken, so the grid of
boundary defect norms is computed in 80-bit arithmetic where the platform
provides it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NearSingularResolvent, ResidualExceeded
from .fundamental import AdjointFundamentalOps, adjoint_fundamental_ops
from .hardy import pencil_op
from .numkit import (
    DEFAULT_TOL,
    TolerancePolicy,
    as_matrix,
    eigh_ld,
    fix_column_phases,
    long_double_is_extended,
    operator_norm,
    range_basis,
    solve_ld,
    spectral_radius,
)
from .tuples import (
    ContractionTuple,
    canonical_decomposition,
    defect,
    product,
)

__all__ = [
    "ThetaSampler",
    "CharTriple",
    "CoincidenceResult",
    "theta_eval",
    "delta_grid",
    "characteristic_triple",
    "coincide",
    "check_admissible",
    "von_neumann_sample",
]


def theta_eval(tmat: np.ndarray, z: complex, tol: TolerancePolicy = DEFAULT_TOL) -> np.ndarray:
    """Characteristic function of a contraction at a point of the open disk.

    Matrix of -T + z D_{T*} (I - z T*)^{-1} D_T from D_T-coordinates to
    D_{T*}-coordinates, via a single linear solve.
    """
    tmat = as_matrix(tmat)
    if abs(z) >= 1.0:
        raise ValueError("theta_eval needs |z| < 1; boundary values go through delta_grid")
    dd = defect(tmat, tol)
    dd_star = defect(tmat.conj().T, tol)
    n = tmat.shape[0]
    res = np.eye(n) - z * tmat.conj().T
    cond = np.linalg.cond(res) if n else 1.0
    if cond > 1.0 / tol.rank_rel_tol:
        raise NearSingularResolvent(float(cond))
    middle = -tmat + z * dd_star.D @ np.linalg.solve(res, dd.D)
    return dd_star.basis.basis.conj().T @ middle @ dd.basis.basis


class ThetaSampler:
    """Characteristic-function sampler with Taylor data.

    Taylor coefficients (defect coordinates): Theta_0 = -T|D_T and
    Theta_n = D_{T*} T*^(n-1) D_T for n >= 1.  ``eval_series`` extends the
    stored list adaptively, so near-boundary consistency checks do not
    depend on the fixed invariant order.
    """

    def __init__(self, tmat: np.ndarray, tol: TolerancePolicy = DEFAULT_TOL, order: int = None):
        self.tmat = as_matrix(tmat)
        self.tol = tol
        self.dim = self.tmat.shape[0]
        self.defect = defect(self.tmat, tol)
        self.defect_star = defect(self.tmat.conj().T, tol)
        self.dom_basis = self.defect.basis
        self.cod_basis = self.defect_star.basis
        self._row = self.cod_basis.basis.conj().T @ self.defect_star.D
        self._taylor = [-self.cod_basis.basis.conj().T @ self.tmat @ self.dom_basis.basis]
        self._cur = self._row
        self.taylor_to(2 * self.dim if order is None else order)

    @property
    def taylor(self) -> list:
        return list(self._taylor)

    @property
    def dims(self) -> tuple:
        return self.dom_basis.rank, self.cod_basis.rank

    def taylor_to(self, order: int) -> list:
        while len(self._taylor) <= order:
            self._taylor.append(self._cur @ self.defect.D @ self.dom_basis.basis)
            self._cur = self._cur @ self.tmat.conj().T
        return self._taylor[: order + 1]

    def eval(self, z: complex) -> np.ndarray:
        return theta_eval(self.tmat, z, self.tol)

    def eval_series(self, z: complex, target: float = 1e-10) -> np.ndarray:
        """Taylor partial sum extended until the geometric tail is in budget."""
        rho = min(spectral_radius(self.tmat), 1.0 - 1e-12)
        decay = max(abs(z) * max(rho, 1e-6), 1e-6)
        order = max(len(self._taylor) - 1, int(math.ceil(math.log(target * (1 - abs(z))) / math.log(decay))))
        coeffs = self.taylor_to(order)
        out = np.zeros_like(coeffs[0])
        for c in reversed(coeffs):
            out = z * out + c
        return out


def _delta_values_ld(tmat: np.ndarray, angles: np.ndarray, rank_tol: float) -> list:
    """Boundary defect norms in long double (falls back to double).

    The circle points are formed in the working precision: a double-precision
    point sits off the circle by ~1e-16, which alone pushes the defect to the
    1e-8 level after the square root.
    """
    use_ld = long_double_is_extended()
    ld = np.clongdouble if use_ld else np.complex128
    real = np.longdouble if use_ld else np.float64
    ang = np.asarray(angles, dtype=real)
    points = np.cos(ang) + 1j * np.sin(ang)
    t = np.array(tmat, dtype=ld)
    n = t.shape[0]
    eye = np.eye(n, dtype=ld)

    def basis_and_sqrt(gram):
        w, v = eigh_ld(gram) if use_ld else np.linalg.eigh(gram)
        w = np.asarray(w)
        v = np.asarray(v)
        order = np.argsort(-w.astype(np.float64), kind="stable")
        w, v = np.clip(w[order], 0.0, None), v[:, order]
        rank = int(np.count_nonzero(w.astype(np.float64) > rank_tol * max(float(w[0]) if w.size else 0.0, 1.0)))
        d = (v * np.sqrt(w)) @ v.conj().T
        return d, v[:, :rank]

    d_t, b_t = basis_and_sqrt(eye - t.conj().T @ t)
    d_s, b_s = basis_and_sqrt(eye - t @ t.conj().T)
    out = []
    for zeta in points:
        zl = ld(zeta)
        res = eye - zl * t.conj().T
        x = solve_ld(res, d_t) if use_ld else np.linalg.solve(res, d_t)
        theta = b_s.conj().T @ (-t + zl * d_s @ x) @ b_t
        gram = np.eye(theta.shape[1], dtype=ld) - theta.conj().T @ theta
        if gram.shape[0] == 0:
            out.append(0.0)
            continue
        w, _ = eigh_ld(gram) if use_ld else np.linalg.eigh(gram)
        out.append(float(math.sqrt(max(float(w[-1]), 0.0))))
    return out


def delta_grid(tmat: np.ndarray, grid_points: int = None, tol: TolerancePolicy = DEFAULT_TOL) -> list:
    """Norms of the boundary defect (I - Theta* Theta)^(1/2) at roots of unity.

    Requires spectral radius < 1 (the boundary values are then direct
    evaluations); for such matrices the characteristic function is
    two-sided inner at finite dimension, so the values are zero up to the
    working precision of the evaluation chain.
    """
    tmat = as_matrix(tmat)
    if tmat.size and spectral_radius(tmat) >= 1.0 - tol.rank_rel_tol:
        raise NearSingularResolvent(1.0 / tol.rank_rel_tol)
    k = tol.grid_points if grid_points is None else int(grid_points)
    angles = 2.0 * np.pi * np.arange(k) / k
    return _delta_values_ld(tmat, angles, tol.rank_rel_tol)


@dataclass(frozen=True)
class CharTriple:
    """(adjoint fundamental operators, unitary-part tuple, theta sampler).

    ``G_theta_coords`` carries the same operators rewritten in the
    codomain basis of the sampler: the full-space defect of the product and
    the defect of the c.n.u. part are the same subspace under the canonical
    splitting, but their computed bases differ by a unitary transition that
    the comparison logic must not ignore.
    """

    G: AdjointFundamentalOps
    G_theta_coords: tuple
    unitary_tuple: tuple
    theta: ThetaSampler
    tol: TolerancePolicy
    report: dict = field(default_factory=dict)

    @property
    def unitary_dim(self) -> int:
        return self.unitary_tuple[0].shape[0] if self.unitary_tuple else 0

    @property
    def d(self) -> int:
        return len(self.unitary_tuple)


def characteristic_triple(t: ContractionTuple) -> CharTriple:
    """Characteristic triple of a tuple: canonical decomposition first, the
    adjoint fundamental operators of the full tuple, the unitary-part
    restriction, and the characteristic function of the c.n.u. product."""
    tol = t.tol
    dec = canonical_decomposition(t)
    adj = adjoint_fundamental_ops(t)
    theta = ThetaSampler(product(dec.cnu_part), tol)
    deltas = delta_grid(product(dec.cnu_part), 64, tol) if dec.cnu_dim else []

    # transition from the full-tuple defect basis to the sampler's basis
    b_c = dec.change_of_basis[:, dec.unitary_dim :]
    sampler_cod_full = b_c @ theta.cod_basis.basis
    trans = _polar(sampler_cod_full.conj().T @ adj.defect_star.basis.basis)
    g_theta = tuple(
        (trans @ g1 @ trans.conj().T, trans @ g2 @ trans.conj().T) for g1, g2 in adj.pairs
    )
    report = {
        "delta_grid_max": max(deltas, default=0.0),
        "unitary_dim": dec.unitary_dim,
        "cnu_dim": dec.cnu_dim,
        "basis_transition_defect": operator_norm(
            sampler_cod_full @ trans - adj.defect_star.basis.basis
        ),
    }
    return CharTriple(adj, g_theta, tuple(dec.unitary_part.ops), theta, tol, report)


# ---------------------------------------------------------------------------
# Coincidence
# ---------------------------------------------------------------------------


def _joint_eigenblocks(ws, tol_cluster: float = 1e-8):
    """Simultaneous block diagonalization of commuting unitaries.

    Returns a list of (joint eigenvalue tuple, orthonormal block basis),
    refining eigenspaces one operator at a time.
    """
    if not ws or ws[0].shape[0] == 0:
        return []
    n = ws[0].shape[0]
    blocks = [(tuple(), np.eye(n, dtype=np.complex128))]
    for w in ws:
        refined = []
        for label, basis in blocks:
            m = basis.conj().T @ w @ basis
            vals, vecs = np.linalg.eig(m)
            order = np.lexsort((vals.imag.round(8), vals.real.round(8)))
            vals, vecs = vals[order], vecs[:, order]
            start = 0
            for k in range(1, len(vals) + 1):
                if k == len(vals) or abs(vals[k] - vals[start]) > tol_cluster:
                    cluster = range_basis(basis @ vecs[:, start:k])
                    refined.append((label + (complex(np.mean(vals[start:k])),), cluster.basis))
                    start = k
        blocks = refined
    return blocks


def _match_unitary_parts(a: CharTriple, b: CharTriple):
    """Joint-spectrum match of the unitary parts; sound refutation only."""
    if a.unitary_dim != b.unitary_dim:
        return None, "refuted", float("inf")
    if a.unitary_dim == 0:
        return np.zeros((0, 0), dtype=np.complex128), "matched", 0.0
    blocks_a = _joint_eigenblocks(list(a.unitary_tuple))
    blocks_b = _joint_eigenblocks(list(b.unitary_tuple))
    used = [False] * len(blocks_b)
    pairs = []
    worst_gap = 0.0
    for label, basis in blocks_a:
        best, best_gap = None, float("inf")
        for i, (label_b, basis_b) in enumerate(blocks_b):
            if used[i] or basis_b.shape[1] != basis.shape[1]:
                continue
            gap = max(abs(x - y) for x, y in zip(label, label_b))
            if gap < best_gap:
                best, best_gap = i, gap
        if best is None or best_gap > 1e-6:
            clear = best is None or best_gap > 1e-4
            return None, "refuted" if clear else "inconclusive", best_gap
        used[best] = True
        worst_gap = max(worst_gap, best_gap)
        pairs.append((basis, blocks_b[best][1]))
    u_w = sum(bb @ ba.conj().T for ba, bb in pairs)
    resid = max(
        operator_norm(u_w @ a.unitary_tuple[j] - b.unitary_tuple[j] @ u_w)
        for j in range(a.d)
    )
    if resid > 1e-6:
        return None, "inconclusive", resid
    return u_w, "matched", resid


def _polar(m: np.ndarray) -> np.ndarray:
    if m.size == 0:
        return m
    u, _, vh = np.linalg.svd(m)
    return u @ vh


def _theta_g_residual(u, u_star, taylor_a, taylor_b, pairs_a, pairs_b):
    vals = [operator_norm(u_star @ ta - tb @ u) for ta, tb in zip(taylor_a, taylor_b)]
    for (ga1, ga2), (gb1, gb2) in zip(pairs_a, pairs_b):
        vals.append(operator_norm(u_star @ ga1 - gb1 @ u_star))
        vals.append(operator_norm(u_star @ ga2 - gb2 @ u_star))
    return max(vals, default=0.0)


def _fit_intertwiners(taylor_a, taylor_b, pairs_a, pairs_b, r: int, s: int, tol: float):
    """Search for unitaries (u, u*) intertwining Taylor data and the G's.

    The constraints are linear in (u, u*), so the candidate space is the
    numerical null space of the stacked Kronecker system; candidates are
    polar-projected onto the unitary group and polished by alternating
    projection between the null space and the unitary manifold.  Every
    candidate is verified; the smallest verified residual is returned.
    """
    eye_r = np.eye(r, dtype=np.complex128)
    eye_s = np.eye(s, dtype=np.complex128)
    rows = []
    for ta, tb in zip(taylor_a, taylor_b):
        rows.append(np.hstack([-np.kron(eye_r, tb), np.kron(ta.T, eye_s)]))
    for (ga1, ga2), (gb1, gb2) in zip(pairs_a, pairs_b):
        z = np.zeros((s * s, r * r), dtype=np.complex128)
        rows.append(np.hstack([z, np.kron(ga1.T, eye_s) - np.kron(eye_s, gb1)]))
        rows.append(np.hstack([z, np.kron(ga2.T, eye_s) - np.kron(eye_s, gb2)]))
    system = np.vstack(rows)
    _, svals, vh = np.linalg.svd(system)
    scale = max(float(svals[0]), 1.0) if svals.size else 1.0
    n_null = max(1, int(np.count_nonzero(svals < 1e-8 * scale)))
    null_basis = vh.conj().T[:, system.shape[1] - n_null :]

    def split(vec):
        return (
            vec[: r * r].reshape(r, r, order="F"),
            vec[r * r :].reshape(s, s, order="F"),
        )

    def joined(u_mat, us_mat):
        return np.concatenate([u_mat.reshape(-1, order="F"), us_mat.reshape(-1, order="F")])

    best = (float("inf"), eye_r, eye_s)
    candidates = [null_basis[:, -k] for k in range(1, n_null + 1)]
    rng = np.random.default_rng(1729)
    for _ in range(3):
        mix = rng.standard_normal(n_null) + 1j * rng.standard_normal(n_null)
        candidates.append(null_basis @ mix)
    for vec in candidates:
        u_mat, us_mat = split(vec)
        for _ in range(40):
            u_mat, us_mat = _polar(u_mat), _polar(us_mat)
            resid = _theta_g_residual(u_mat, us_mat, taylor_a, taylor_b, pairs_a, pairs_b)
            if resid <= tol / 100:
                break
            back = null_basis @ (null_basis.conj().T @ joined(u_mat, us_mat))
            u_mat, us_mat = split(back)
        u_mat, us_mat = _polar(u_mat), _polar(us_mat)
        resid = _theta_g_residual(u_mat, us_mat, taylor_a, taylor_b, pairs_a, pairs_b)
        if resid < best[0]:
            best = (resid, u_mat, us_mat)
        if best[0] <= tol / 100:
            break
    return best


@dataclass(frozen=True)
class CoincidenceResult:
    verdict: str  # "coincide" | "refuted" | "inconclusive"
    residual: float
    u: np.ndarray
    u_star: np.ndarray
    unitary_certificate: np.ndarray
    detail: dict = field(default_factory=dict)


def coincide(a: CharTriple, b: CharTriple, tol: float = 1e-6) -> CoincidenceResult:
    """Decide coincidence of two characteristic triples.

    The unitary parts are compared by joint-spectrum matching (an
    explicit intertwiner is produced and verified; a clear spectral
    mismatch refutes soundly).  For the analytic part an alternating
    orthogonal-Procrustes search fits the defect-space unitaries (u, u*)
    against the Taylor coefficients and the adjoint fundamental operators;
    a failed search is reported as inconclusive, never as refutation.
    """
    empty = np.zeros((0, 0), dtype=np.complex128)
    r_a, s_a = a.theta.dims
    r_b, s_b = b.theta.dims
    if (r_a, s_a) != (r_b, s_b):
        return CoincidenceResult("refuted", float("inf"), empty, empty, empty,
                                 {"reason": "defect dimensions differ"})
    u_w, status, w_resid = _match_unitary_parts(a, b)
    if status != "matched":
        return CoincidenceResult(status, w_resid, empty, empty, empty,
                                 {"reason": "unitary-part joint spectra", "gap": w_resid})

    order = 2 * max(a.theta.dim, b.theta.dim)
    taylor_a = a.theta.taylor_to(order)
    taylor_b = b.theta.taylor_to(order)
    pairs_a, pairs_b = a.G_theta_coords, b.G_theta_coords
    if r_a == 0:
        resid = _theta_g_residual(empty, empty, [], [], pairs_a, pairs_b)
        verdict = "coincide" if resid <= tol else "inconclusive"
        return CoincidenceResult(verdict, resid, empty, empty, u_w, {"unitary_gap": w_resid})

    resid, u, u_star = _fit_intertwiners(taylor_a, taylor_b, pairs_a, pairs_b, r_a, s_a, tol)
    verdict = "coincide" if resid <= tol and w_resid <= tol else "inconclusive"
    return CoincidenceResult(verdict, max(resid, w_resid), u, u_star, u_w,
                             {"unitary_gap": w_resid, "theta_g_residual": resid})


# ---------------------------------------------------------------------------
# Admissible triples
# ---------------------------------------------------------------------------


def check_admissible(g_pairs, theta: ThetaSampler, n_deg: int = None,
                     tol: TolerancePolicy = DEFAULT_TOL) -> dict:
    """Check the admissibility conditions of a (G, Theta) pair (inner case).

    Conditions: the pencils are contractive multipliers; the column space
    of the characteristic function is jointly invariant for them; the
    compressions to its orthocomplement commute and multiply to the
    compressed shift.  Returns the per-condition residuals together with
    the assembled functional-model tuple on the model space.
    """
    deltas = delta_grid(theta.tmat, 64, tol)
    if max(deltas, default=0.0) > tol.residual_tol:
        raise ResidualExceeded("inner-function precondition", max(deltas), tol.residual_tol)
    r_t, r_s = theta.dims
    if n_deg is None:
        rho = max(spectral_radius(theta.tmat), 1e-6)
        n_deg = max(8, min(200, int(math.ceil(math.log(tol.residual_tol / 4.0) / math.log(rho)))))
    coeffs = theta.taylor_to(n_deg)

    # contractivity of the pencil multipliers on a circle grid
    contractive = []
    zs = np.exp(2j * np.pi * np.arange(tol.grid_points) / tol.grid_points)
    for g1, g2 in g_pairs:
        vals = [operator_norm(g1.conj().T + z * g2) for z in zs]
        contractive.append(max(vals, default=0.0))

    # truncated multiplication-by-Theta columns and the model space
    total = r_s * (n_deg + 1)
    m_theta = np.zeros((total, r_t * (n_deg + 1)), dtype=np.complex128)
    for k in range(n_deg + 1):
        for m, c in enumerate(coeffs):
            if k + m <= n_deg:
                m_theta[(k + m) * r_s : (k + m + 1) * r_s, k * r_t : (k + 1) * r_t] = c
    u_svd, s_svd, _ = np.linalg.svd(m_theta)
    model_basis = fix_column_phases(u_svd[:, s_svd < 0.5]) if s_svd.size else u_svd
    model_dim = model_basis.shape[1]

    ops = [pencil_op(g1.conj().T, g2, None, n_deg) for g1, g2 in g_pairs]
    kmax = n_deg // 4
    invariance = []
    for op in ops:
        shifted = op.apply(m_theta[:, : r_t * (kmax + 1)])
        invariance.append(operator_norm(model_basis.conj().T @ shifted))

    model_ops = [model_basis.conj().T @ op.materialize() @ model_basis for op in ops]
    commutators = [
        operator_norm(model_ops[i] @ model_ops[j] - model_ops[j] @ model_ops[i])
        for i in range(len(model_ops))
        for j in range(i + 1, len(model_ops))
    ]
    shift = pencil_op(np.zeros((r_s, r_s)), np.eye(r_s), None, n_deg)
    compressed_shift = model_basis.conj().T @ shift.materialize() @ model_basis
    prod = np.eye(model_dim, dtype=np.complex128)
    for m_op in model_ops:
        prod = prod @ m_op
    product_gap = operator_norm(prod - compressed_shift)
    norms = [operator_norm(m_op) for m_op in model_ops]
    return {
        "delta_grid_max": max(deltas, default=0.0),
        "pencil_multiplier_norms": contractive,
        "invariance": invariance,
        "model_dim": model_dim,
        "model_ops": model_ops,
        "model_op_norms": norms,
        "commutators": commutators,
        "product_vs_shift": product_gap,
        "truncation_degree": n_deg,
        "passes": (
            max(contractive, default=0.0) <= 1.0 + tol.residual_tol
            and max(invariance, default=0.0) <= 1e-6
            and max(commutators, default=0.0) <= 1e-6
            and product_gap <= 1e-6
        ),
    }


# ---------------------------------------------------------------------------
# von Neumann sampling
# ---------------------------------------------------------------------------


def _poly_apply(coeffs: np.ndarray, ops) -> np.ndarray:
    """Evaluate a multivariate polynomial at a matrix tuple (recursive Horner)."""
    n = ops[0].shape[0]
    eye = np.eye(n, dtype=np.complex128)
    if coeffs.ndim == 1:
        out = np.zeros((n, n), dtype=np.complex128)
        for c in coeffs[::-1]:
            out = out @ ops[0] + c * eye
        return out
    out = np.zeros((n, n), dtype=np.complex128)
    for block in coeffs[::-1]:
        out = out @ ops[0] + _poly_apply(block, ops[1:])
    return out


def von_neumann_sample(t: ContractionTuple, trials: int = 100, max_degree: int = 3,
                       seed: int = 0) -> dict:
    """Sample the polynomial von Neumann inequality on the torus grid.

    For each random polynomial the operator norm at the tuple is compared
    against the grid maximum of the symbol plus a gradient slack; for pairs
    the inequality is a theorem, so violations flip the pass flag (and an
    exit-code failure downstream), while d >= 3 is report-only.
    """
    rng = np.random.default_rng(seed)
    grid = 64 if t.d <= 3 else 16
    shape = (max_degree + 1,) * t.d
    violations = []
    max_ratio = 0.0
    max_slack = 0.0
    for trial in range(trials):
        coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        lhs = operator_norm(_poly_apply(coeffs, list(t.ops)))
        pad = np.zeros((grid,) * t.d, dtype=np.complex128)
        pad[tuple(slice(0, max_degree + 1) for _ in range(t.d))] = coeffs
        sup = float(np.max(np.abs(np.fft.fftn(pad))))
        mags = np.abs(coeffs)
        slack = (np.pi / grid) * sum(
            float(np.sum(mags * np.arange(max_degree + 1).reshape(
                tuple(max_degree + 1 if ax == j else 1 for ax in range(t.d)))))
            for j in range(t.d)
        )
        max_slack = max(max_slack, slack)
        if sup > 0:
            max_ratio = max(max_ratio, lhs / (sup + slack))
        if lhs > sup + slack + 1e-10:
            violations.append({"trial": trial, "norm": lhs, "grid_max": sup, "slack": slack})
    return {
        "trials": trials,
        "grid_per_axis": grid,
        "max_degree": max_degree,
        "violations": violations,
        "max_ratio": max_ratio,
        "max_slack": max_slack,
        "asserted": t.d <= 2,
        "passes": t.d > 2 or not violations,
    }
