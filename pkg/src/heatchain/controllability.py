"""Kalman rank of linear chains and Hoermander bracket rank of polynomial ones."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import CoefficientBlowUp, ContractViolation, NotLinearError
from .models import ChainDynamics, LinearDynamics, ModelDescriptor, _coords, ls_block, ls_interior_modes
from .polynomial import Poly
from .potentials import _frac

SVD_RTOL = 1e-8
MAX_FIELDS = 20000
MAX_BITS = 4096


# --------------------------------------------------------------------------
# exact linear algebra
# --------------------------------------------------------------------------

class _Echelon:
    """Incremental row-echelon basis over the rationals."""

    def __init__(self, n: int):
        self.n = n
        self.rows: list[tuple[int, list[Fraction]]] = []

    @property
    def rank(self) -> int:
        return len(self.rows)

    def add(self, v: Sequence) -> bool:
        """Insert ``v``; return True when it enlarges the span."""
        v = [_frac(c) for c in v]
        for piv, row in self.rows:
            if v[piv] != 0:
                f = v[piv] / row[piv]
                v = [a - f * b for a, b in zip(v, row)]
        for i, c in enumerate(v):
            if c != 0:
                self.rows.append((i, v))
                return True
        return False


def exact_rank(M) -> int:
    M = np.asarray(M, dtype=object)
    if M.size == 0:
        return 0
    ech = _Echelon(M.shape[1])
    for row in M:
        ech.add(row)
    return ech.rank


def svd_rank(M, rtol: float = SVD_RTOL) -> int:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int((s > rtol * s[0]).sum())


# --------------------------------------------------------------------------
# linear systems
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearControlSystem:
    """dx/dt = A x + B u."""

    A: np.ndarray
    B: np.ndarray
    label: str = ""

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ContractViolation("A must be square")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise ContractViolation("B must have as many rows as A")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def controllability_matrix(self, exact: bool = False) -> np.ndarray:
        """[B, AB, ..., A^{n-1} B]."""
        if exact:
            A = np.array([[_frac(c) for c in row] for row in self.A], dtype=object)
            blk = np.array([[_frac(c) for c in row] for row in self.B], dtype=object)
        else:
            A, blk = self.A, self.B
        cols = [blk]
        for _ in range(self.n - 1):
            blk = A.dot(blk)
            cols.append(blk)
        return np.concatenate(cols, axis=1)

    def permuted(self, perm: Sequence[int]) -> "LinearControlSystem":
        P = np.eye(self.n)[list(perm)]
        return LinearControlSystem(P @ self.A @ P.T, P @ self.B, self.label)


def _harmonic_check(model):
    pot = model.potentials
    ok_u = pot.u_kind == "harmonic" or (pot.u_kind == "polynomial" and len(pot.u_poly) == 3
                                         and pot.u_poly[:2] == (0, 0))
    ok_v = pot.v_kind in ("none", "harmonic-pinning")
    if not (ok_u and ok_v):
        raise NotLinearError("Kalman requires linear dynamics")
    return float(pot.u_poly[2]) * 2, (float(pot.alpha) if pot.v_kind == "harmonic-pinning" else 0.0)


def pinned_stiffness(N: int, kappa: float = 1.0, alpha: float = 0.0, pinning_sign: str = "physical") -> np.ndarray:
    """Tridiagonal matrix A~ of dp/dt = A~ q for the harmonic pinned chain.

    ``physical`` gives ``-(kappa L + alpha I)`` with L the path Laplacian;
    ``positive`` flips the sign of the pinning entry to ``+alpha``.
    """
    if pinning_sign not in ("physical", "positive"):
        raise ContractViolation("pinning_sign must be 'physical' or 'positive'")
    L = np.zeros((N, N))
    for i in range(N - 1):
        L[i, i] += 1
        L[i + 1, i + 1] += 1
        L[i, i + 1] -= 1
        L[i + 1, i] -= 1
    sgn = -1.0 if pinning_sign == "physical" else 1.0
    return -kappa * L + sgn * alpha * np.eye(N)


def build_linear_system(model: ModelDescriptor, damping: bool = True,
                        pinning_sign: str = "physical") -> LinearControlSystem:
    """(A, B) for a linear chain in the model's coordinate layout.

    Pinned harmonic chains use (q, p) with ``A = [[0, I], [A~, -D]]`` where D
    holds the boundary friction 1/2 when ``damping`` is set; unpinned chains
    use (r, p).  Bath noise amplitudes sqrt(T_i) are folded into B.  The
    Lefevere-Schenkel chain returns its block-diagonal mode system.
    """
    if model.kind == "lefevere_schenkel":
        d = model.dynamics
        return LinearControlSystem(d.A, d.B, "lefevere_schenkel")
    if model.kind not in ("pinned", "unpinned"):
        raise NotLinearError("Kalman requires linear dynamics")
    N = model.N
    if N < 2:
        raise ContractViolation("a chain needs N >= 2")
    kappa, alpha = _harmonic_check(model)
    T1, TN = model.temperatures
    if model.kind == "pinned":
        n = 2 * N
        A = np.zeros((n, n))
        A[:N, N:] = np.eye(N)
        A[N:, :N] = pinned_stiffness(N, kappa, alpha, pinning_sign)
        p1, pN = N, 2 * N - 1
    else:
        n = 2 * N - 1
        m = N - 1
        A = np.zeros((n, n))
        for i in range(m):
            A[i, m + i] = -1.0
            A[i, m + i + 1] = 1.0
            A[m + i, i] += kappa
            A[m + i + 1, i] -= kappa
        p1, pN = m, n - 1
    if damping:
        A[p1, p1] -= 0.5
        A[pN, pN] -= 0.5
    B = np.zeros((n, 2))
    B[p1, 0] = math.sqrt(T1)
    B[pN, 1] = math.sqrt(TN)
    return LinearControlSystem(A, B, model.kind)


def ls_mode_systems(model: ModelDescriptor) -> list[tuple[int, LinearControlSystem]]:
    """Per-mode (k, system): 4x4 blocks for interior k, 2x2 for k in {0, N/2}."""
    if model.kind != "lefevere_schenkel":
        raise ContractViolation("mode blocks exist for lefevere_schenkel models only")
    N = model.N
    w2 = model.omega_sq
    out = []
    for k in ls_interior_modes(N):
        out.append((k, LinearControlSystem(*ls_block(float(w2[k]), model.T, model.D[k], True), f"k={k}")))
    for k in (0, N // 2):
        out.append((k, LinearControlSystem(*ls_block(float(w2[k]), model.T, model.D[k], False), f"k={k}")))
    return out


def kalman_rank(sys: LinearControlSystem, method: str = "exact") -> int:
    """Rank of the controllability matrix.

    ``exact`` row-reduces the matrix over the rationals (the float entries are
    taken at face value); ``svd`` counts singular values above
    ``1e-8 * largest``.
    """
    if method == "exact":
        return exact_rank(sys.controllability_matrix(exact=True))
    if method == "svd":
        return svd_rank(sys.controllability_matrix())
    raise ContractViolation("method must be 'exact' or 'svd'")


# --------------------------------------------------------------------------
# polynomial vector fields
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PolyVectorField:
    """Vector field whose components are exact polynomials."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ContractViolation("a vector field needs at least one component")
        n = comps[0].nvars
        if any(c.nvars != n for c in comps) or len(comps) != n:
            raise ContractViolation("component count must equal the number of variables")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return len(self.components)

    @classmethod
    def zero(cls, n: int) -> "PolyVectorField":
        return cls(tuple(Poly(n) for _ in range(n)))

    @classmethod
    def coordinate(cls, n: int, i: int, c=1) -> "PolyVectorField":
        """The constant field c * d/dx_i."""
        return cls(tuple(Poly.const(n, c) if j == i else Poly(n) for j in range(n)))

    def __add__(self, other):
        return PolyVectorField(tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other):
        return PolyVectorField(tuple(a - b for a, b in zip(self.components, other.components)))

    def __mul__(self, c):
        return PolyVectorField(tuple(a * c for a in self.components))

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, PolyVectorField) and self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.components)

    def directional(self, Y: "PolyVectorField") -> "PolyVectorField":
        """(DY) X, the derivative of Y along self."""
        n = self.dim
        out = []
        for yc in Y.components:
            acc = Poly(n)
            for i, xc in enumerate(self.components):
                if not xc.is_zero():
                    d = yc.diff(i)
                    if not d.is_zero():
                        acc = acc + d * xc
            out.append(acc)
        return PolyVectorField(tuple(out))

    def __call__(self, point) -> list[Fraction]:
        pt = [_frac(v) for v in point]
        return [c(pt) for c in self.components]

    def normalized(self) -> "PolyVectorField":
        """Scaled so that the leading coefficient of the first nonzero component is 1."""
        for c in self.components:
            if not c.is_zero():
                lead = c.terms[max(c.terms)]
                return self * (1 / lead)
        return self

    def key(self):
        return tuple(frozenset(c.terms.items()) for c in self.components)

    def max_bits(self) -> int:
        return max(c.max_bits() for c in self.components)


def lie_bracket(X: PolyVectorField, Y: PolyVectorField) -> PolyVectorField:
    """[X, Y] = (DY) X - (DX) Y."""
    if X.dim != Y.dim:
        raise ContractViolation("vector fields must have matching dimensions")
    return X.directional(Y) - Y.directional(X)


# --------------------------------------------------------------------------
# model vector fields
# --------------------------------------------------------------------------

def _chain_fields(dyn: ChainDynamics):
    if not dyn.U.is_polynomial or (dyn.V is not None and not dyn.V.is_polynomial):
        raise ContractViolation("Hoermander closure needs polynomial potentials")
    n = dyn.dim
    m = dyn.n_pos
    N = dyn.N
    var = [Poly.var(n, i) for i in range(n)]
    pos, p = var[:m], var[m:]
    if dyn.coords == "q":
        r = [pos[i + 1] - pos[i] for i in range(N - 1)]
        dpos = list(p)
    else:
        r = list(pos)
        dpos = [p[i + 1] - p[i] for i in range(N - 1)]
    du_c = [j * _frac(c) for j, c in enumerate(dyn.U.coeffs)][1:]
    du = [Poly.univariate(du_c, ri) for ri in r]
    F = [Poly(n) for _ in range(N)]
    for i in range(N - 1):
        F[i] = F[i] + du[i]
        F[i + 1] = F[i + 1] - du[i]
    if dyn.V is not None and dyn.coords == "q":
        dv_c = [j * _frac(c) for j, c in enumerate(dyn.V.coeffs)][1:]
        for i in range(N):
            F[i] = F[i] - Poly.univariate(dv_c, pos[i])
    c = _frac(dyn.friction)
    F[0] = F[0] - p[0] * c
    F[-1] = F[-1] - p[-1] * c
    # Stratonovich drift: the Ito correction of the exchange noise cancels here
    X0 = PolyVectorField(tuple(dpos + F))
    noise = []
    if dyn.sigma_left:
        noise.append(("B_left", PolyVectorField.coordinate(n, m)))
    if dyn.gamma > 0:
        for j in range(1, N):
            comps = [Poly(n) for _ in range(n)]
            comps[m + j - 1] = -p[j]
            comps[m + j] = p[j - 1]
            noise.append((f"X_{j},{j + 1}", PolyVectorField(tuple(comps))))
    if dyn.sigma_right:
        noise.append(("B_right", PolyVectorField.coordinate(n, m + N - 1)))
    return X0, noise


def _linear_fields(dyn: LinearDynamics, labels):
    n = dyn.dim
    var = [Poly.var(n, i) for i in range(n)]
    comps = []
    for row in dyn.A:
        acc = Poly(n)
        for j, a in enumerate(row):
            if a:
                acc = acc + var[j] * a
        comps.append(acc)
    X0 = PolyVectorField(tuple(comps))
    noise = []
    for k in range(dyn.noise_dim):
        col = dyn.B[:, k]
        if np.any(col):
            noise.append((f"B{k}", PolyVectorField(tuple(Poly.const(n, c) for c in col))))
    return X0, noise


def model_vector_fields(model: ModelDescriptor):
    """(X0, [(name, X_k)]) with X0 the Stratonovich drift and X_k the noise directions.

    Bath directions are taken with unit amplitude and exchange directions
    without their sqrt(gamma) factor; nonzero constant factors do not change
    the rank of the generated Lie algebra.
    """
    dyn = model.dynamics
    if isinstance(dyn, ChainDynamics):
        return _chain_fields(dyn)
    return _linear_fields(dyn, model.layout)


@dataclass
class HoermanderReport:
    model: dict
    N: int
    dim: int
    depth_reached: int
    rank: int
    spanning_set_size: int
    witnesses: list = field(default_factory=list)

    @property
    def full_rank(self) -> bool:
        return self.rank == self.dim

    def to_dict(self) -> dict:
        return {"model": self.model, "N": self.N, "depth_reached": self.depth_reached,
                "rank": self.rank, "full_rank_required": self.dim, "full_rank": self.full_rank,
                "spanning_set_size": self.spanning_set_size, "witnesses": self.witnesses}


def hoermander_rank(model: ModelDescriptor, state, max_depth: int,
                    channels: Sequence[str] | None = None, max_fields: int = MAX_FIELDS) -> HoermanderReport:
    """Rank at ``state`` of the Lie algebra generated by the noise fields and their brackets with X0.

    Level 0 holds the noise fields (optionally restricted to ``channels``);
    level d brackets every level d-1 field with X0 and with each noise field.
    Fields are deduplicated by normalized form and the search stops once the
    evaluated span is full.  ``witnesses`` lists the bracket words that
    raised the rank.
    """
    if max_depth < 1:
        raise ContractViolation("max_depth must be >= 1")
    x = np.asarray(_coords(model, state), dtype=float)
    X0, noise = model_vector_fields(model)
    if channels is not None:
        unknown = set(channels) - {nm for nm, _ in noise}
        if unknown:
            raise ContractViolation(f"unknown channels {sorted(unknown)}")
        noise = [(nm, f) for nm, f in noise if nm in channels]
    n = X0.dim
    ech = _Echelon(n)
    witnesses: list[str] = []
    seen = set()
    level = []
    size = 0

    def consider(word, F):
        nonlocal size
        if F.is_zero():
            return
        key = F.normalized().key()
        if key in seen:
            return
        seen.add(key)
        size += 1
        if size > max_fields or F.max_bits() > MAX_BITS:
            raise CoefficientBlowUp("coefficient blow-up, reduce depth")
        level.append((word, F))
        if ech.rank < n and ech.add(F(x)):
            witnesses.append(word)

    for nm, F in noise:
        consider(nm, F)
    depth = 0
    gens = [("X0", X0)] + noise
    while ech.rank < n and depth < max_depth and level:
        depth += 1
        prev, level = level, []
        for word, F in prev:
            for gname, G in gens:
                consider(f"[{gname},{word}]", lie_bracket(G, F))
                if ech.rank == n:
                    break
            if ech.rank == n:
                break
    return HoermanderReport(model.to_config(), model.chain_N, n, depth, ech.rank, size, witnesses)
