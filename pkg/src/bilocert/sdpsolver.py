"""Primal-dual interior-point solver for block-diagonal linear matrix inequalities.

The problem solved is

    maximize    c.y + c0
    subject to  F0_b + sum_i y_i F_{b,i}  is PSD for every block b,
                E y = f.

Internally this is the dual of the standard-form SDP

    minimize    sum_b F0_b . X_b + f.lam + c0
    subject to  c + sum_b F_{b,.}^T X_b - E^T lam = 0,   X_b PSD,

and both are driven to optimality by an infeasible-start path-following
method with HKM scaling and Mehrotra predictor-corrector steps. Each moment
variable in our relaxations touches a single block, so the Schur complement is
block diagonal and the equality rows are handled by a reduced KKT system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

STATUSES = ("optimal", "max_iter", "infeasible", "numerical_failure")


@dataclass(frozen=True)
class SdpInstance:
    """Block LMI problem in the form accepted by :func:`solve`.

    ``entries[b]`` is an integer/float array of rows ``(i, j, var, coef)`` with
    ``i <= j``: variable ``var`` contributes ``coef`` to cells ``(i, j)`` and
    ``(j, i)`` of block ``b``. Several rows may share a cell.
    """

    block_sizes: tuple[int, ...]
    F0: tuple[np.ndarray, ...]
    entries: tuple[np.ndarray, ...]
    c: np.ndarray
    c0: float = 0.0
    E: sp.csr_matrix | None = None
    f: np.ndarray | None = None
    maximize: bool = True
    names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not self.block_sizes or any(int(n) < 1 for n in self.block_sizes):
            raise ValueError("every block needs size >= 1")
        if len(self.F0) != len(self.block_sizes) or len(self.entries) != len(self.block_sizes):
            raise ValueError("F0 and entries must have one item per block")
        m = len(self.c)
        for b, (n, f0, ent) in enumerate(zip(self.block_sizes, self.F0, self.entries)):
            f0 = np.asarray(f0, dtype=float)
            if f0.shape != (n, n):
                raise ValueError(f"F0 of block {b} has shape {f0.shape}, expected {(n, n)}")
            if not np.allclose(f0, f0.T, atol=1e-12):
                raise ValueError(f"F0 of block {b} is not symmetric")
            ent = np.asarray(ent, dtype=float).reshape(-1, 4)
            if len(ent):
                i, j, v = ent[:, 0], ent[:, 1], ent[:, 2]
                if np.any(i > j) or np.any(i < 0) or np.any(j >= n):
                    raise ValueError(f"entries of block {b} must satisfy 0 <= i <= j < {n}")
                if np.any(v < 0) or np.any(v >= m):
                    raise ValueError(f"entries of block {b} reference variables outside 0..{m - 1}")
        if self.E is not None:
            if self.E.shape[1] != m or self.f is None or len(self.f) != self.E.shape[0]:
                raise ValueError("equality rows E and right-hand side f are inconsistent")

    @property
    def num_vars(self) -> int:
        return len(self.c)

    @property
    def num_eq(self) -> int:
        return 0 if self.E is None else self.E.shape[0]

    def lmi(self, y: np.ndarray) -> list[np.ndarray]:
        """Evaluate every block F0_b + sum_i y_i F_{b,i}."""
        out = []
        for n, f0, ent in zip(self.block_sizes, self.F0, self.entries):
            m = np.array(f0, dtype=float)
            ent = np.asarray(ent, dtype=float).reshape(-1, 4)
            if len(ent):
                i, j = ent[:, 0].astype(int), ent[:, 1].astype(int)
                val = ent[:, 3] * y[ent[:, 2].astype(int)]
                np.add.at(m, (i, j), val)
                off = i != j
                np.add.at(m, (j[off], i[off]), val[off])
            out.append(m)
        return out

    def objective(self, y: np.ndarray) -> float:
        return float(self.c @ y + self.c0)


@dataclass
class SdpSolution:
    y: np.ndarray
    objective: float
    dual_objective: float
    gap: float
    iterations: int
    status: str
    primal_infeasibility: float = 0.0
    dual_infeasibility: float = 0.0
    X: list[np.ndarray] = field(default_factory=list, repr=False)
    history: list[tuple[float, float]] = field(default_factory=list, repr=False)

    @property
    def bound(self) -> float:
        """Objective bound certified by the dual point (upper bound when maximizing)."""
        return self.dual_objective


# ---------------------------------------------------------------- presolve


def _row_dicts(E: sp.csr_matrix | None, f: np.ndarray | None) -> list[tuple[dict[int, float], float]]:
    if E is None or E.shape[0] == 0:
        return []
    E = sp.csr_matrix(E)
    rows = []
    for r in range(E.shape[0]):
        s, e = E.indptr[r], E.indptr[r + 1]
        rows.append(({int(j): float(v) for j, v in zip(E.indices[s:e], E.data[s:e]) if v != 0.0}, float(f[r])))
    return rows


def _echelon(rows, prefer, tol=1e-12):
    """Reduced row echelon form of sparse rows; pivots taken from ``prefer`` first.

    Returns (pivot rows {var: (row, rhs)}, max residual of dropped rows).
    """
    piv: dict[int, tuple[dict[int, float], float]] = {}
    where: dict[int, set[int]] = {}  # var -> pivot vars whose rows contain it
    worst = 0.0
    for row, rhs in rows:
        row = dict(row)
        for v in [v for v in row if v in piv]:
            a = row.get(v)
            if a is None:
                continue
            prow, prhs = piv[v]
            for k, b in prow.items():
                row[k] = row.get(k, 0.0) - a * b
            rhs -= a * prhs
            row = {k: b for k, b in row.items() if abs(b) > tol}
        # fill-in may reintroduce pivot variables only if the store were not reduced; it is
        if not row:
            worst = max(worst, abs(rhs))
            continue
        cands = [v for v in row if v in prefer] or list(row)
        p = max(cands, key=lambda v: (abs(row[v]), -v))
        a = row[p]
        row = {k: b / a for k, b in row.items()}
        rhs /= a
        # eliminate p from stored rows
        for q in list(where.get(p, ())):
            qrow, qrhs = piv[q]
            b = qrow.get(p)
            if b is None:
                continue
            for k, c in row.items():
                nv = qrow.get(k, 0.0) - b * c
                if abs(nv) > tol:
                    qrow[k] = nv
                    where.setdefault(k, set()).add(q)
                else:
                    qrow.pop(k, None)
            qrhs -= b * rhs
            piv[q] = (qrow, qrhs)
        where.pop(p, None)
        piv[p] = (row, rhs)
        for k in row:
            where.setdefault(k, set()).add(p)
    return piv, worst


@dataclass
class _Reduced:
    keep: np.ndarray  # original ids of the kept variables
    pos: dict[int, int]
    subst: dict[int, tuple[dict[int, float], float]]  # eliminated var -> (coefs over originals, const)
    E: np.ndarray | sp.csr_matrix
    f: np.ndarray
    c: np.ndarray
    c0: float
    blocks: list[tuple[int, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]]


def _merge_entries(ent: np.ndarray) -> np.ndarray:
    """Sum rows sharing (i, j, var) and drop the ones that cancel."""
    ent = np.asarray(ent, dtype=float).reshape(-1, 4)
    if not len(ent):
        return ent
    keys, inv = np.unique(ent[:, :3], axis=0, return_inverse=True)
    coef = np.bincount(inv.reshape(-1), weights=ent[:, 3], minlength=len(keys))
    nz = coef != 0.0
    return np.column_stack([keys[nz], coef[nz]])


def _presolve(inst: SdpInstance) -> _Reduced:
    m = inst.num_vars
    entries = [_merge_entries(ent) for ent in inst.entries]
    in_block = np.zeros(m, dtype=bool)
    for ent in entries:
        in_block[ent[:, 2].astype(int)] = True
    free = {int(v) for v in np.flatnonzero(~in_block)}
    piv, worst = _echelon(_row_dicts(inst.E, inst.f), free)
    if worst > 1e-7:
        raise ValueError(f"equality constraints are inconsistent (residual {worst:.2e})")
    subst: dict[int, tuple[dict[int, float], float]] = {}
    eq_rows = []
    for p, (row, rhs) in piv.items():
        if p in free:
            # p = rhs - sum_{k != p} row[k] x_k
            subst[p] = ({k: -b for k, b in row.items() if k != p}, rhs)
        else:
            eq_rows.append((row, rhs))
    # free variables that are not pivots only move other free variables; they are
    # fixed to zero unless the objective can exploit them
    params = free - set(subst)
    for row, _ in eq_rows:
        if params.intersection(row):
            raise ValueError("equality structure not supported: free variable left in a block row")
    for v in params:
        slope = inst.c[v] + sum(inst.c[p] * row.get(v, 0.0) for p, (row, _) in subst.items())
        if abs(slope) > 1e-12:
            raise ValueError(f"objective is unbounded along variable {v}")
    keep_mask = np.ones(m, dtype=bool)
    keep_mask[list(free)] = False
    keep = np.flatnonzero(keep_mask)
    pos = {int(v): i for i, v in enumerate(keep)}
    c = inst.c[keep].astype(float).copy()
    c0 = float(inst.c0)
    for p, (row, rhs) in subst.items():
        cp_ = float(inst.c[p])
        if cp_ == 0.0:
            continue
        c0 += cp_ * rhs
        for k, b in row.items():
            if k in pos:
                c[pos[k]] += cp_ * b
    ri, ci, vi, f = [], [], [], []
    for r, (row, rhs) in enumerate(eq_rows):
        for k, b in row.items():
            ri.append(r)
            ci.append(pos[k])
            vi.append(b)
        f.append(rhs)
    # A variable used by several blocks gets a private copy in every block after
    # the first, tied to the original by an equality row. This keeps the Schur
    # complement block diagonal.
    ncols = len(keep)
    owner: dict[int, int] = {}
    blocks = []
    for b, (n, f0, ent) in enumerate(zip(inst.block_sizes, inst.F0, entries)):
        i = ent[:, 0].astype(int)
        j = ent[:, 1].astype(int)
        v = np.array([pos[int(x)] for x in ent[:, 2]], dtype=int)
        copies: dict[int, int] = {}
        for x in np.unique(v):
            x = int(x)
            if owner.setdefault(x, b) != b:
                copies[x] = ncols
                r = len(f)
                ri += [r, r]
                ci += [x, ncols]
                vi += [1.0, -1.0]
                f.append(0.0)
                ncols += 1
        if copies:
            v = np.array([copies.get(int(x), int(x)) for x in v], dtype=int)
        blocks.append((int(n), np.asarray(f0, dtype=float), i, j, v, ent[:, 3].copy()))
    c = np.concatenate([c, np.zeros(ncols - len(keep))])
    E = sp.csr_matrix((vi, (ri, ci)), shape=(len(f), ncols))
    return _Reduced(keep, pos, subst, E, np.asarray(f, dtype=float), c, c0, blocks)


# ---------------------------------------------------------------- block operators


class _Block:
    """Sparse affine map y -> F0 + sum y_i F_i restricted to one block."""

    def __init__(self, n, f0, i, j, v, a):
        self.n = n
        self.f0 = f0
        self.vars, local = np.unique(v, return_inverse=True)
        self.mb = len(self.vars)
        # both orientations of every entry
        off = i != j
        self.P = np.concatenate([i, j[off]])
        self.Q = np.concatenate([j, i[off]])
        self.A = np.concatenate([a, a[off]])
        self.L = np.concatenate([local, local[off]])
        order = np.argsort(self.L, kind="stable")
        self.P, self.Q, self.A, self.L = self.P[order], self.Q[order], self.A[order], self.L[order]
        self.starts = np.searchsorted(self.L, np.arange(self.mb + 1))
        # Gram matrix of the F_i, used to project residuals back onto the X side
        amat = sp.csr_matrix((self.A, (self.P * n + self.Q, self.L)), shape=(n * n, self.mb))
        self.amat = amat
        gram = (amat.T @ amat).toarray()
        self.gram = sla.cho_factor(gram + 1e-15 * np.max(np.diag(gram)) * np.eye(self.mb))

    def lift(self, r: np.ndarray) -> np.ndarray:
        """Least-norm symmetric D with adjoint(D) = r."""
        return (self.amat @ sla.cho_solve(self.gram, r)).reshape(self.n, self.n)

    def apply(self, y_local: np.ndarray) -> np.ndarray:
        m = np.zeros((self.n, self.n))
        np.add.at(m, (self.P, self.Q), self.A * y_local[self.L])
        return m

    def adjoint(self, X: np.ndarray) -> np.ndarray:
        """Tr(F_i X) for each local variable."""
        return np.bincount(self.L, weights=self.A * X[self.P, self.Q], minlength=self.mb)

    def schur(self, X: np.ndarray, Zi: np.ndarray) -> np.ndarray:
        """M_ik = Tr(F_i X F_k Zi) over the local variables."""
        M = np.empty((self.mb, self.mb))
        for k in range(self.mb):
            s, e = self.starts[k], self.starts[k + 1]
            # Zi F_k X, then contract with every F_i
            W = Zi[:, self.P[s:e]] @ (self.A[s:e, None] * X[self.Q[s:e], :])
            M[:, k] = np.bincount(self.L, weights=self.A * W[self.P, self.Q], minlength=self.mb)
        return (M + M.T) / 2


def _max_step(S: np.ndarray, dS: np.ndarray) -> float:
    """Largest alpha with S + alpha dS PSD (S positive definite)."""
    L = np.linalg.cholesky(S)
    T = sla.solve_triangular(L, dS, lower=True)
    T = sla.solve_triangular(L, T.T, lower=True).T
    lam = np.linalg.eigvalsh((T + T.T) / 2)[0]
    return math.inf if lam >= 0 else -1.0 / lam


def _sym(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2


# ---------------------------------------------------------------- main loop


def solve(
    instance: SdpInstance, tol: float = 1e-7, max_iter: int = 200, verbose: bool = False
) -> SdpSolution:
    """Solve ``instance``; see the module docstring for the problem form.

    The returned point is the best iterate seen, ranked by the largest of the
    relative gap and the two relative infeasibilities. Status ``optimal`` means
    all three are below ``tol``. Degenerate problems (no strictly feasible
    moment matrix) can stall above ``tol``; they end with ``numerical_failure``
    but still carry the best iterate and its bound.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    red = _presolve(instance)
    sign = 1.0 if instance.maximize else -1.0
    c = sign * red.c
    blocks = [_Block(*b) for b in red.blocks]
    m = len(red.c)
    E = sp.csr_matrix(red.E)
    f = red.f
    neq = E.shape[0]
    Eb = [E[:, b.vars].toarray() if neq else np.zeros((0, b.mb)) for b in blocks]

    nrm_c = 1.0 + np.linalg.norm(c)
    nrm_F = 1.0 + math.sqrt(sum(np.sum(b.f0**2) for b in blocks)) + np.linalg.norm(f)
    ntot = sum(b.n for b in blocks)

    # starting point
    scale_x = max(10.0, math.sqrt(max(b.n for b in blocks)), nrm_c)
    scale_z = max(10.0, math.sqrt(max(b.n for b in blocks)), nrm_F)
    X = [scale_x * np.eye(b.n) for b in blocks]
    Z = [scale_z * np.eye(b.n) for b in blocks]
    y = np.zeros(m)
    lam = np.zeros(neq)

    def gather(vec_blocks):
        out = np.zeros(m)
        for b, v in zip(blocks, vec_blocks):
            out[b.vars] += v
        return out

    history: list[tuple[float, float]] = []
    status = "max_iter"
    best = None  # (merit, y, X, pobj, dobj, pinf, dinf)
    stall = 0
    it = 0
    for it in range(1, max_iter + 1):
        Fy = [b.f0 + b.apply(y[b.vars]) for b in blocks]
        Rd = [fy - z for fy, z in zip(Fy, Z)]
        Ry = f - E @ y if neq else np.zeros(0)
        rp = c + gather([b.adjoint(x) for b, x in zip(blocks, X)]) - (E.T @ lam if neq else 0.0)
        mu = sum(np.sum(x * z) for x, z in zip(X, Z)) / ntot
        pobj = sum(np.sum(b.f0 * x) for b, x in zip(blocks, X)) + (f @ lam if neq else 0.0)
        dobj = float(c @ y)
        pinf = np.linalg.norm(rp) / nrm_c
        dinf = (math.sqrt(sum(np.sum(r**2) for r in Rd)) + np.linalg.norm(Ry)) / nrm_F
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        merit = max(relgap, pinf, dinf)
        history.append((sign * pobj + red.c0, sign * dobj + red.c0))
        if verbose:
            print(f"{it:3d} p={pobj:+.8e} d={dobj:+.8e} gap={relgap:.2e} pinf={pinf:.2e} dinf={dinf:.2e} mu={mu:.2e}")
        if best is None or merit < 0.9 * best[0]:
            stall = 0
        else:
            stall += 1
        if best is None or merit < best[0]:
            best = (merit, y.copy(), [x.copy() for x in X], pobj, dobj, pinf, dinf)
        if merit < tol:
            status = "optimal"
            break
        trX = sum(np.trace(x) for x in X)
        if trX > 1e12 * (1 + abs(dobj)) and pinf < 1e-3:
            status = "infeasible"
            break
        if stall >= 15:
            status = "numerical_failure"
            break
        try:
            Zi = [sla.cho_solve(sla.cho_factor(z), np.eye(len(z))) for z in Z]
            Ms, Mf = [], []
            for b, x, zi in zip(blocks, X, Zi):
                Mb = b.schur(x, zi)
                Ms.append(Mb)
                Mb = Mb.copy()
                Mb[np.diag_indices_from(Mb)] += 1e-14 * (1 + np.max(np.diag(Mb)))
                Mf.append(sla.cho_factor(Mb))
            if neq:
                S = np.zeros((neq, neq))
                for mf, eb in zip(Mf, Eb):
                    S += eb @ sla.cho_solve(mf, eb.T)
                S[np.diag_indices_from(S)] += 1e-13 * (1 + np.max(np.diag(S)))
                Sf = sla.cho_factor(S)
        except (np.linalg.LinAlgError, ValueError):
            status = "numerical_failure"
            break

        def kkt_once(hb, ry):
            if neq:
                rhs = sum(eb @ sla.cho_solve(mf, hh) for eb, mf, hh in zip(Eb, Mf, hb)) - ry
                dl = sla.cho_solve(Sf, rhs)
                dyb = [sla.cho_solve(mf, hh - eb.T @ dl) for mf, hh, eb in zip(Mf, hb, Eb)]
            else:
                dl = np.zeros(0)
                dyb = [sla.cho_solve(mf, hh) for mf, hh in zip(Mf, hb)]
            return dyb, dl

        def kkt(hb, ry):
            # M dy + E^T dl = h, E dy = ry, with two rounds of iterative refinement
            dyb, dl = kkt_once(hb, ry)
            for _ in range(2):
                r1 = [hh - mb @ d - (eb.T @ dl if neq else 0.0) for hh, mb, d, eb in zip(hb, Ms, dyb, Eb)]
                r2 = ry - sum(eb @ d for eb, d in zip(Eb, dyb)) if neq else np.zeros(0)
                ey, el = kkt_once(r1, r2)
                dyb = [d + e for d, e in zip(dyb, ey)]
                dl = dl + el
            return dyb, dl

        def direction(Rc):
            # Rc: list of the matrices R in dX = R - X dZ Zi
            h = rp + gather([b.adjoint(r) - b.adjoint(x @ rd @ zi) for b, r, x, rd, zi in zip(blocks, Rc, X, Rd, Zi)])
            dyb, dlam = kkt([h[b.vars] for b in blocks], Ry)
            dy = np.zeros(m)
            for b, d in zip(blocks, dyb):
                dy[b.vars] = d
            dZ = [rd + b.apply(dy[b.vars]) for b, rd in zip(blocks, Rd)]
            dX = [_sym(r - x @ dz @ zi) for r, x, dz, zi in zip(Rc, X, dZ, Zi)]
            # An ill-conditioned Schur complement leaves part of the X-side residual
            # uncorrected; remove it with a least-norm adjustment of dX.
            res = rp + gather([b.adjoint(d) for b, d in zip(blocks, dX)]) - (E.T @ dlam if neq else 0.0)
            dX = [d - _sym(b.lift(res[b.vars])) for b, d in zip(blocks, dX)]
            return dX, dy, dZ, dlam

        def steps(dX, dZ):
            ap = min([1.0] + [_max_step(x, d) for x, d in zip(X, dX)])
            ad = min([1.0] + [_max_step(z, d) for z, d in zip(Z, dZ)])
            return ap, ad

        try:
            dXa, dya, dZa, dla = direction([-x for x in X])
            ap, ad = steps(dXa, dZa)
            mu_aff = sum(np.sum((x + ap * dx) * (z + ad * dz)) for x, dx, z, dz in zip(X, dXa, Z, dZa)) / ntot
            sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3))
            Rc = [sigma * mu * zi - x - dx @ dz @ zi for zi, x, dx, dz in zip(Zi, X, dXa, dZa)]
            dX, dy, dZ, dl = direction(Rc)
            ap, ad = steps(dX, dZ)
        except (np.linalg.LinAlgError, ValueError):
            status = "numerical_failure"
            break
        gamma = 0.9 + 0.09 * min(ap, ad)
        ap, ad = min(1.0, gamma * ap), min(1.0, gamma * ad)
        X = [x + ap * d for x, d in zip(X, dX)]
        lam = lam + ap * dl
        y = y + ad * dy
        Z = [z + ad * d for z, d in zip(Z, dZ)]
        if max(ap, ad) < 1e-10:
            status = "numerical_failure"
            break

    _, y, X, pobj, dobj, pinf, dinf = best
    y_full = np.zeros(instance.num_vars)
    y_full[red.keep] = y[: len(red.keep)]
    for p, (row, rhs) in red.subst.items():
        y_full[p] = rhs + sum(b * y_full[k] for k, b in row.items() if k not in red.subst)
    d_obj = sign * pobj + red.c0  # bound from the X side
    p_obj = sign * dobj + red.c0  # value attained by y
    return SdpSolution(
        y=y_full,
        objective=p_obj,
        dual_objective=d_obj,
        gap=abs(d_obj - p_obj),
        iterations=it,
        status=status,
        primal_infeasibility=dinf,
        dual_infeasibility=pinf,
        X=X,
        history=history,
    )


# ---------------------------------------------------------------- verification


@dataclass(frozen=True)
class VerifyReport:
    min_eigenvalue: float
    equality_residual: float
    objective: float
    objective_error: float
    ok: bool
    messages: tuple[str, ...] = ()


def verify(instance: SdpInstance, solution: SdpSolution, tol: float = 1e-7) -> VerifyReport:
    """Recompute feasibility and objective of ``solution.y`` from scratch."""
    y = np.asarray(solution.y, dtype=float)
    lam = min(float(np.linalg.eigvalsh(_sym(m))[0]) for m in instance.lmi(y))
    res = 0.0
    if instance.num_eq:
        res = float(np.max(np.abs(instance.E @ y - instance.f)))
    obj = instance.objective(y)
    err = abs(obj - solution.objective)
    msgs = []
    if lam < -10 * tol:
        msgs.append(f"LMI violated: smallest eigenvalue {lam:.3e}")
    if res > 10 * tol:
        msgs.append(f"equality residual {res:.3e}")
    if err > 10 * tol * (1 + abs(obj)):
        msgs.append(f"objective mismatch {err:.3e}")
    if solution.status == "optimal" and solution.gap > 10 * tol * (1 + abs(obj)):
        msgs.append(f"duality gap {solution.gap:.3e}")
    return VerifyReport(lam, res, obj, err, not msgs, tuple(msgs))


# ---------------------------------------------------------------- SDPA sparse format


def to_sdpa(instance: SdpInstance) -> str:
    """SDPA sparse text (".dat-s") of ``instance``.

    SDPA minimizes c.x subject to sum_i F_i x_i - F_0 PSD. Equality rows are
    written as pairs of 1x1 diagonal blocks (a.x - f >= 0 and f - a.x >= 0).
    Maximization is encoded by negating the objective.
    """
    m = instance.num_vars
    sgn = -1.0 if instance.maximize else 1.0
    sizes = list(instance.block_sizes)
    lines_f: list[str] = []
    for b, (f0, ent) in enumerate(zip(instance.F0, instance.entries), start=1):
        f0 = np.asarray(f0, dtype=float)
        ii, jj = np.nonzero(np.triu(f0))
        for i, j in zip(ii, jj):
            lines_f.append(f"0 {b} {i + 1} {j + 1} {_fmt(-f0[i, j])}")
        ent = np.asarray(ent, dtype=float).reshape(-1, 4)
        acc: dict[tuple[int, int, int], float] = {}
        for i, j, v, a in ent:
            key = (int(v), int(i), int(j))
            acc[key] = acc.get(key, 0.0) + a
        for (v, i, j), a in sorted(acc.items()):
            if a != 0.0:
                lines_f.append(f"{v + 1} {b} {i + 1} {j + 1} {_fmt(a)}")
    if instance.num_eq:
        E = sp.coo_matrix(instance.E)
        k0 = len(sizes)
        sizes.append(-2 * instance.num_eq)
        blk = k0 + 1
        for r in range(instance.num_eq):
            fr = float(instance.f[r])
            if fr != 0.0:
                lines_f.append(f"0 {blk} {2 * r + 1} {2 * r + 1} {_fmt(fr)}")
                lines_f.append(f"0 {blk} {2 * r + 2} {2 * r + 2} {_fmt(-fr)}")
        for r, v, a in sorted(zip(E.row, E.col, E.data)):
            lines_f.append(f"{v + 1} {blk} {2 * r + 1} {2 * r + 1} {_fmt(a)}")
            lines_f.append(f"{v + 1} {blk} {2 * r + 2} {2 * r + 2} {_fmt(-a)}")
    head = [
        f'"bilocert LMI: {m} variables, {len(instance.block_sizes)} PSD blocks, {instance.num_eq} equalities"',
        f"{m} = mDIM",
        f"{len(sizes)} = nBLOCK",
        " ".join(str(s) for s in sizes) + " = bLOCKsTRUCT",
        " ".join(_fmt(sgn * x) for x in instance.c),
    ]
    return "\n".join(head + lines_f) + "\n"


def _fmt(x: float) -> str:
    return repr(float(x))


def from_sdpa(text: str) -> SdpInstance:
    """Parse SDPA sparse text into a minimization :class:`SdpInstance`.

    Negative block sizes (diagonal blocks) are expanded into 1x1 PSD blocks.
    """
    lines = []
    for raw in text.splitlines():
        s = raw.strip()
        if not s or s[0] in '"*':
            continue
        lines.append(s)
    tok = lambda s: s.replace(",", " ").replace("{", " ").replace("}", " ").replace("(", " ").replace(")", " ").split()  # noqa: E731
    m = int(tok(lines[0])[0])
    nblock = int(tok(lines[1])[0])
    sizes = [int(t) for t in tok(lines[2])[:nblock]]
    c = np.array([float(t) for t in tok(lines[3])[:m]])
    # map (block, i) -> (new block, row)
    new_sizes: list[int] = []
    where: dict[int, object] = {}
    for b, s in enumerate(sizes, start=1):
        if s > 0:
            where[b] = len(new_sizes)
            new_sizes.append(s)
        else:
            where[b] = [len(new_sizes) + k for k in range(-s)]
            new_sizes.extend([1] * (-s))
    F0 = [np.zeros((n, n)) for n in new_sizes]
    ents: list[list[tuple[float, float, float, float]]] = [[] for _ in new_sizes]
    for s in lines[4:]:
        t = tok(s)
        if len(t) < 5:
            continue
        k, b, i, j, v = int(t[0]), int(t[1]), int(t[2]) - 1, int(t[3]) - 1, float(t[4])
        w = where[b]
        if isinstance(w, list):
            if i != j:
                raise ValueError("off-diagonal entry in a diagonal block")
            nb, i, j = w[i], 0, 0
        else:
            nb = w
        i, j = min(i, j), max(i, j)
        if k == 0:
            # SDPA constraint is sum F_i x_i - F_0 PSD
            F0[nb][i, j] -= v
            if i != j:
                F0[nb][j, i] -= v
        else:
            ents[nb].append((i, j, k - 1, v))
    entries = tuple(np.array(e, dtype=float).reshape(-1, 4) for e in ents)
    return SdpInstance(tuple(new_sizes), tuple(F0), entries, c, maximize=False)
