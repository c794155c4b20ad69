"""Discrete eigenproblem ``-Delta_g f = mu f`` on D.

With mass lumping the generalized problem is ``A f = mu M f``: ``A`` is the
flat five-point stiffness (metric independent in 2-D) and ``M`` the diagonal
of volume weights ``exp(2 phi) hx hy``.  The smallest pairs come from block
shift-and-invert subspace iteration with Rayleigh-Ritz and locking of
converged leading modes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import AmbiguousTracking, EmptyInterior, NoConvergence
from .geometry import full_mask, volume_weights

__all__ = [
    "OperatorPair",
    "EigenPair",
    "assemble",
    "smallest_eigenpairs",
    "solve_grid",
    "track_mode",
    "branch_overlap",
    "clusters",
    "rayleigh_quotient",
    "CLUSTER_GAP",
]

CLUSTER_GAP = 1e-6


@dataclass(frozen=True, eq=False)
class OperatorPair:
    stiffness: sp.csr_matrix
    mass: np.ndarray  # diagonal of M
    index: np.ndarray  # flat node index of each unknown
    shape: tuple
    weights: np.ndarray  # nodal volume weights on the full grid
    singular: bool  # stiffness has the constants in its kernel

    @property
    def size(self):
        return self.mass.size

    def to_field(self, vec):
        out = np.zeros(self.shape)
        out.flat[self.index] = vec
        return out

    def from_field(self, f):
        return np.asarray(f, dtype=float).ravel()[self.index]


@dataclass(frozen=True, eq=False)
class EigenPair:
    """Eigenvalue ``mu`` and nodal eigenfunction ``f`` with ``sum f^2 weights = 1``."""

    mu: float
    f: np.ndarray
    residual: float
    mode_index: int
    weights: np.ndarray

    def inner(self, g):
        return float(np.sum(self.f * g * self.weights))


def _second_difference(n, periodic):
    D = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="lil")
    if periodic:
        D[0, n - 1] = D[n - 1, 0] = -1.0
    return D.tocsr()


def assemble(grid, mask=None):
    """Stiffness/mass pair of ``-Delta_g`` on the nodes of D."""
    mask = full_mask(grid) if mask is None else mask
    if mask.count == 0:
        raise EmptyInterior("domain mask has no interior node")
    mask.validate(grid)
    nx, ny = grid.shape
    hx, hy = grid.hx, grid.hy
    Dx = _second_difference(nx, grid.periodic)
    Dy = _second_difference(ny, grid.periodic)
    K = sp.kron(Dx, sp.identity(ny), format="csr") * (hy / hx) + sp.kron(
        sp.identity(nx), Dy, format="csr"
    ) * (hx / hy)
    index = np.flatnonzero(mask.interior.ravel())
    A = K[index][:, index].tocsr()
    w = volume_weights(grid)
    return OperatorPair(A, w.ravel()[index], index, grid.shape, w, grid.periodic and mask.interior.all())


def rayleigh_quotient(ops, v):
    v = np.asarray(v, dtype=float)
    return float(v @ (ops.stiffness @ v)) / float(v @ (ops.mass * v))


def _m_orthonormalize(Y, m, basis=None):
    # CholQR2 in the M inner product, after removing components along basis
    for _ in range(2):
        if basis is not None and basis.shape[1]:
            Y = Y - basis @ (basis.T @ (m[:, None] * Y))
        G = Y.T @ (m[:, None] * Y)
        G = 0.5 * (G + G.T)
        try:
            L = np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            evals, evecs = np.linalg.eigh(G)
            keep = evals > evals.max() * 1e-14
            Y = Y @ (evecs[:, keep] / np.sqrt(evals[keep]))
            continue
        Y = sla.solve_triangular(L, Y.T, lower=True).T
    return Y


def smallest_eigenpairs(ops, count=1, tol=1e-9, constraint="none", max_iter=1000, seed=0):
    """The ``count`` smallest eigenpairs of ``A f = mu M f`` in ascending order.

    ``constraint="mean_zero"`` keeps every iterate M-orthogonal to the
    constants (closed-manifold normalization).  Raises ``NoConvergence``
    once ``max_iter`` sweeps pass without every residual
    ``||A f - mu M f|| / ||M f||`` dropping below ``tol``.
    """
    if int(count) != count or not 1 <= count <= 20:
        raise ValueError("count must be an integer in [1, 20]")
    if not 1e-12 <= tol <= 1e-4:
        raise ValueError("tol must lie in [1e-12, 1e-4]")
    if constraint not in ("none", "mean_zero"):
        raise ValueError(f"unknown constraint {constraint!r}")
    A, m = ops.stiffness, ops.mass
    n = ops.size
    extra = 1 if constraint == "mean_zero" else 0
    block = min(count + max(4, count), n - extra)
    if block < count:
        raise ValueError(f"count={count} exceeds the {n - extra} available modes")

    if constraint == "mean_zero":
        ones = np.ones(n) / np.sqrt(m.sum())
        constants = ones[:, None]
    else:
        constants = np.zeros((n, 0))

    sigma = 0.0
    if ops.singular:
        # constants are in the kernel: shift slightly left so A - sigma M is SPD
        sigma = -1e-6 * float(A.diagonal().mean() / m.mean())
    lu = splu((A - sigma * sp.diags(m)).tocsc())

    rng = np.random.default_rng(seed)
    X = _m_orthonormalize(rng.standard_normal((n, block)), m, constants)
    locked_vecs = np.zeros((n, 0))
    locked = []
    best = np.inf
    stall = 0
    for _ in range(max_iter):
        Y = lu.solve(m[:, None] * X)
        basis = np.hstack([constants, locked_vecs])
        Y = _m_orthonormalize(Y, m, basis)
        H = Y.T @ (A @ Y)
        theta, V = np.linalg.eigh(0.5 * (H + H.T))
        X = Y @ V
        MX = m[:, None] * X
        R = A @ X - MX * theta
        res = np.linalg.norm(R, axis=0) / np.linalg.norm(MX, axis=0)
        k = 0
        while len(locked) < count and k < X.shape[1] and res[k] <= tol:
            locked.append((theta[k], X[:, k].copy(), res[k]))
            k += 1
        if len(locked) == count:
            break
        if k:
            locked_vecs = np.column_stack([v for _, v, _ in locked])
            X = X[:, k:]
        if res[k] < best * 0.999:
            best, stall = res[k], 0
        else:
            stall += 1
            if stall > 50:
                raise NoConvergence(len(locked), float(res[k]))
    else:
        raise NoConvergence(len(locked), float(res[k]))

    pairs = []
    for i, (mu, v, r) in enumerate(sorted(locked, key=lambda e: e[0])):
        v = v / np.sqrt(np.sum(m * v * v))
        j = int(np.argmax(np.abs(v)))
        if v[j] < 0:
            v = -v
        pairs.append(EigenPair(float(mu), ops.to_field(v), float(r), i, ops.weights))
    return pairs


def solve_grid(grid, mask=None, count=1, tol=1e-9, constraint=None, **kwargs):
    """Assemble and solve; closed tori default to the mean-zero constraint."""
    ops = assemble(grid, mask)
    if constraint is None:
        constraint = "mean_zero" if ops.singular else "none"
    return smallest_eigenpairs(ops, count, tol, constraint, **kwargs)


def branch_overlap(prev, cand):
    """Mass-weighted overlap ``<f_prev, M f_cand>`` using the candidate's weights."""
    return float(np.sum(prev.f * cand.f * cand.weights))


def track_mode(prev, candidates, ambiguity=0.1, strict=False):
    """Continue the branch of ``prev`` among ``candidates``.

    Picks the largest ``|overlap|`` and flips the sign so the overlap is
    positive.  Near ties (top two within ``ambiguity``) are reported via
    ``AmbiguousTracking``: raised when ``strict``, else warned.
    """
    if not candidates:
        raise ValueError("no candidates to track against")
    ov = np.array([abs(branch_overlap(prev, c)) for c in candidates])
    order = np.argsort(-ov, kind="stable")
    best = candidates[order[0]]
    if branch_overlap(prev, best) < 0:
        best = EigenPair(best.mu, -best.f, best.residual, best.mode_index, best.weights)
    if len(candidates) > 1 and ov[order[0]] - ov[order[1]] < ambiguity:
        err = AmbiguousTracking(best, sorted(ov.tolist(), reverse=True))
        if strict:
            raise err
        warnings.warn(str(err), RuntimeWarning, stacklevel=2)
    return best


def clusters(pairs, rel_gap=CLUSTER_GAP):
    """Group indices of ascending pairs whose consecutive gaps are below ``rel_gap * mu``."""
    groups = []
    for i, p in enumerate(pairs):
        if groups and p.mu - pairs[i - 1].mu < rel_gap * max(abs(p.mu), 1e-300):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups
