"""Model descriptors for the chain systems.

Four base systems are supported:

``pinned``
    positions ``q_i`` and momenta ``p_i``; Langevin baths at both ends.
``unpinned``
    no pinning; state in interdistances ``r_i = q_{i+1} - q_i``.
``exchange``
    harmonic, unpinned chain whose neighbouring momenta are additionally
    rotated by independent noises of strength ``gamma``.
``lefevere_schenkel``
    periodic harmonic lattice in real Fourier coordinates, with position
    noise ``D_k`` on the modes.

plus the energy-rescaled system (``scaled``), the infinite-energy limit
(``limit``) of any of them, and ``ou``, a single momentum in contact with one
bath, which is the building block of the boundary dynamics.

All systems are read as Ito SDEs.  Every operation accepts arrays of shape
``(..., dim)``; with ``object`` arrays of :class:`~fractions.Fraction` the
polynomial models evaluate exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import ContractViolation, LimitConvexityError
from .potentials import PotentialSpec, Term, _frac

KINDS = ("pinned", "unpinned", "exchange", "lefevere_schenkel", "scaled", "limit", "ou")
BASE_KINDS = ("pinned", "unpinned", "exchange", "lefevere_schenkel")

HALF = Fraction(1, 2)


def _num(c, exact: bool):
    return _frac(c) if exact else float(c)


def as_exact(x) -> np.ndarray:
    """Object array of Fractions holding the exact values of ``x``."""
    arr = np.asarray(x, dtype=float)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = Fraction(float(v))
    return out


def _is_exact_array(x) -> bool:
    return isinstance(x, np.ndarray) and x.dtype == object


# --------------------------------------------------------------------------
# states
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ChainState:
    """A phase-space point with named coordinates."""

    coords: np.ndarray
    layout: tuple

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float).reshape(-1)
        layout = tuple(self.layout)
        if coords.shape[0] != len(layout):
            raise ContractViolation(f"{coords.shape[0]} coordinates for {len(layout)} labels")
        if not np.all(np.isfinite(coords)):
            raise ContractViolation("state coordinates must be finite")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "layout", layout)

    def __eq__(self, other):
        return (isinstance(other, ChainState) and self.layout == other.layout
                and np.array_equal(self.coords, other.coords))

    def __getitem__(self, label: str) -> float:
        return float(self.coords[self.layout.index(label)])

    def __len__(self):
        return len(self.layout)

    def csv_header(self) -> str:
        return ",".join(self.layout)

    def csv_row(self) -> str:
        return ",".join(repr(float(c)) for c in self.coords)

    @classmethod
    def from_csv(cls, header: str, row: str) -> "ChainState":
        return cls(np.array([float(v) for v in row.split(",")]), tuple(header.strip().split(",")))


# --------------------------------------------------------------------------
# dynamics representations
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainDynamics:
    """Nearest-neighbour chain: potentials, boundary friction and noise.

    ``coords`` is ``"q"`` (site positions) or ``"r"`` (interdistances).
    """

    coords: str
    N: int
    U: Term
    V: Term | None
    friction: object
    sigma_left: float
    sigma_right: float
    gamma: float = 0.0

    @property
    def n_pos(self) -> int:
        return self.N if self.coords == "q" else self.N - 1

    @property
    def dim(self) -> int:
        return self.n_pos + self.N

    @property
    def noise_dim(self) -> int:
        return self.N + 1 if self.gamma > 0 else 2

    def _split(self, x):
        m = self.n_pos
        pos, p = x[..., :m], x[..., m:]
        r = pos[..., 1:] - pos[..., :-1] if self.coords == "q" else pos
        return pos, p, r

    def hamiltonian(self, x):
        exact = _is_exact_array(x)
        pos, p, r = self._split(x)
        h = _num(HALF, exact) * (p * p).sum(axis=-1) + self.U(r, 0).sum(axis=-1)
        if self.V is not None and self.coords == "q":
            h = h + self.V(pos, 0).sum(axis=-1)
        return h

    def forces(self, x):
        """Conservative part of dp/dt, i.e. minus the position gradient pushed to momenta."""
        pos, p, r = self._split(x)
        du = self.U(r, 1)
        F = np.zeros_like(p)
        F[..., :-1] += du
        F[..., 1:] -= du
        if self.V is not None and self.coords == "q":
            F -= self.V(pos, 1)
        return F

    def drift(self, x):
        exact = _is_exact_array(x)
        pos, p, r = self._split(x)
        dpos = p if self.coords == "q" else p[..., 1:] - p[..., :-1]
        F = self.forces(x)
        c = _num(self.friction, exact)
        F[..., 0] -= c * p[..., 0]
        F[..., -1] -= c * p[..., -1]
        if self.gamma > 0:
            g = _num(self.gamma, exact)
            F -= g * p
            F[..., 0] += g / 2 * p[..., 0]
            F[..., -1] += g / 2 * p[..., -1]
        return np.concatenate([dpos, F], axis=-1)

    def diffusion(self, x):
        exact = _is_exact_array(x)
        m, N = self.n_pos, self.N
        S = np.zeros(x.shape[:-1] + (self.dim, self.noise_dim), dtype=x.dtype)
        s1 = _num(self.sigma_left, exact)
        sN = _num(self.sigma_right, exact)
        S[..., m, 0] = s1
        S[..., m + N - 1, self.noise_dim - 1] = sN
        if self.gamma > 0:
            sg = _num(math.sqrt(self.gamma), exact)
            p = x[..., m:]
            for j in range(1, N):
                # channel j rotates the pair (p_j, p_{j+1}) (1-based)
                S[..., m + j - 1, j] = -sg * p[..., j]
                S[..., m + j, j] = sg * p[..., j - 1]
        return S

    def grad_h(self, x):
        pos, p, r = self._split(x)
        if self.coords == "q":
            gpos = -self.forces(x)
        else:
            gpos = self.U(r, 1)
        return np.concatenate([gpos, p], axis=-1)

    def hess_h(self, x):
        exact = _is_exact_array(x)
        pos, p, r = self._split(x)
        m, N = self.n_pos, self.N
        Hs = np.zeros(x.shape[:-1] + (self.dim, self.dim), dtype=x.dtype)
        d2u = self.U(r, 2)
        one = _num(1, exact)
        if self.coords == "q":
            diag = np.zeros_like(pos)
            diag[..., :-1] += d2u
            diag[..., 1:] += d2u
            if self.V is not None:
                diag = diag + self.V(pos, 2)
            for i in range(N):
                Hs[..., i, i] = diag[..., i]
            for i in range(N - 1):
                Hs[..., i, i + 1] = -d2u[..., i]
                Hs[..., i + 1, i] = -d2u[..., i]
        else:
            for i in range(m):
                Hs[..., i, i] = d2u[..., i]
        for i in range(N):
            Hs[..., m + i, m + i] = one
        return Hs


@dataclass(frozen=True)
class LinearDynamics:
    """dx = A x dt + B dW with quadratic energy H = x^T M x / 2 (M diagonal)."""

    A: np.ndarray
    B: np.ndarray
    M: np.ndarray

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def noise_dim(self) -> int:
        return self.B.shape[1]

    @cached_property
    def _exact(self):
        return as_exact(self.A), as_exact(self.B), as_exact(self.M)

    def _mats(self, x):
        return self._exact if _is_exact_array(x) else (self.A, self.B, self.M)

    def hamiltonian(self, x):
        _, _, M = self._mats(x)
        half = _num(HALF, _is_exact_array(x))
        return half * (x * x * np.diagonal(M)).sum(axis=-1)

    def drift(self, x):
        A, _, _ = self._mats(x)
        return x @ A.T

    def diffusion(self, x):
        _, B, _ = self._mats(x)
        return np.broadcast_to(B, x.shape[:-1] + B.shape).copy()

    def grad_h(self, x):
        _, _, M = self._mats(x)
        return x * np.diagonal(M)

    def hess_h(self, x):
        _, _, M = self._mats(x)
        return np.broadcast_to(M, x.shape[:-1] + M.shape).copy()


# --------------------------------------------------------------------------
# Lefevere-Schenkel modes
# --------------------------------------------------------------------------

def omega_k_sq(omega: float, mu: float, N: int, k) -> np.ndarray | float:
    """Mode frequencies omega^2 (mu^2 + 4 sin^2(k pi / N)).

    ``k`` is reduced to |k mod N| <= N/2 first, so the result is exactly
    even and N-periodic in k.
    """
    k = np.mod(np.asarray(k), N)
    k = np.minimum(k, N - k)
    s = np.sin(k.astype(float) * np.pi / N)
    return omega**2 * (mu**2 + 4.0 * s * s)


def ls_interior_modes(N: int) -> list[int]:
    return list(range(1, N // 2))


def ls_layout(N: int) -> tuple[str, ...]:
    labels = []
    for k in ls_interior_modes(N):
        labels += [f"R_{k}", f"S_{k}", f"V_{k}", f"W_{k}"]
    for k in (0, N // 2):
        labels += [f"R_{k}", f"V_{k}"]
    return tuple(labels)


def ls_block(w2: float, T: float, Dk: float, full: bool = True):
    """(A, B) of one Fourier mode block, ordered (R, S, V, W) or (R, V)."""
    if full:
        A = np.array([[-0.5, 0.0, -w2, 0.0],
                      [0.0, -0.5, 0.0, -w2],
                      [1.0, 0.0, 0.0, 0.0],
                      [0.0, 1.0, 0.0, 0.0]])
        sT = math.sqrt(T)
        B = np.array([[sT, 0.0], [0.0, sT], [0.0, Dk], [-Dk, 0.0]])
    else:
        A = np.array([[-0.5, -w2], [1.0, 0.0]])
        B = np.array([[math.sqrt(T)], [0.0]])
    return A, B


def _ls_dynamics(N, omega, mu, T, D, noisy=True) -> LinearDynamics:
    dim = 2 * N
    A = np.zeros((dim, dim))
    B = np.zeros((dim, N))
    M = np.zeros((dim, dim))
    row, col = 0, 0
    blocks = [(k, True) for k in ls_interior_modes(N)] + [(0, False), (N // 2, False)]
    for k, full in blocks:
        w2 = float(omega_k_sq(omega, mu, N, k))
        Ak, Bk = ls_block(w2, T, D[k], full)
        n, m = Bk.shape
        A[row:row + n, row:row + n] = Ak
        B[row:row + n, col:col + m] = Bk
        h = n // 2
        for i in range(h):
            M[row + i, row + i] = 1.0
            M[row + h + i, row + h + i] = w2
        row += n
        col += m
    if not noisy:
        B = np.zeros_like(B)
    return LinearDynamics(A, B, M)


# --------------------------------------------------------------------------
# descriptors
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelDescriptor:
    """One of the chain systems with its parameters.

    Use the factory functions (:func:`pinned`, :func:`unpinned`,
    :func:`exchange`, :func:`lefevere_schenkel`, :func:`scaled`,
    :func:`limit_model`, :func:`ou`) rather than the constructor.
    """

    kind: str
    N: int
    potentials: PotentialSpec | None = None
    T_left: float = 1.0
    T_right: float = 1.0
    gamma: float = 0.0
    omega: float = 1.0
    mu: float = 1.0
    T: float = 1.0
    D: tuple = ()
    E: float = 1.0
    base: "ModelDescriptor | None" = None
    _dyn: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractViolation(f"unknown model kind {self.kind!r}")
        if self.kind in ("scaled", "limit"):
            if self.base is None:
                raise ContractViolation(f"{self.kind} model needs a base model")
        elif self.kind == "ou":
            if self.T_left < 0:
                raise ContractViolation("temperature must be >= 0")
        else:
            if self.N < 2:
                raise ContractViolation("a chain needs N >= 2")
            if self.T_left < 0 or self.T_right < 0:
                raise ContractViolation("bath temperatures must be >= 0")
        if self.kind == "lefevere_schenkel":
            self._check_ls()
        if self.kind == "exchange" and self.gamma < 0:
            raise ContractViolation("gamma must be >= 0")
        object.__setattr__(self, "_dyn", self._build())

    def _check_ls(self):
        N = self.N
        if N % 4 != 0:
            raise ContractViolation("lefevere_schenkel needs N a multiple of 4")
        if self.omega <= 0 or self.mu <= 0 or self.T <= 0:
            raise ContractViolation("omega, mu and T must be > 0")
        if len(self.D) != N:
            raise ContractViolation(f"D must have length N={N}")
        if self.D[0] != 0 or self.D[N // 2] != 0:
            raise ContractViolation("D_0 and D_{N/2} must vanish")
        for k in range(1, N):
            if self.D[k] != self.D[N - k]:
                raise ContractViolation(f"D must satisfy D_k = D_(-k); fails at k={k}")

    # -- dynamics --------------------------------------------------------
    def _build(self):
        kind = self.kind
        if kind == "ou":
            return LinearDynamics(np.array([[-0.5]]), np.array([[math.sqrt(self.T_left)]]), np.eye(1))
        if kind == "lefevere_schenkel":
            return _ls_dynamics(self.N, self.omega, self.mu, self.T, self.D)
        s1, sN = math.sqrt(self.T_left), math.sqrt(self.T_right)
        if kind == "pinned":
            pot = self.potentials
            return ChainDynamics("q", self.N, pot.term("U"), pot.term("V"), HALF, s1, sN)
        if kind == "unpinned":
            pot = self.potentials
            if pot.has_pinning:
                raise ContractViolation("unpinned model cannot carry a pinning potential")
            return ChainDynamics("r", self.N, pot.term("U"), None, HALF, s1, sN)
        if kind == "exchange":
            return ChainDynamics("r", self.N, Term((0, 0, HALF)), None, HALF, s1, sN, self.gamma)
        if kind == "scaled":
            base = self.base
            if base.kind not in ("pinned", "unpinned"):
                raise ContractViolation("scaling applies to pinned or unpinned chains")
            if self.E <= 0:
                raise ContractViolation("E must be > 0")
            b = base._dyn
            k = base.potentials.k
            E = self.E
            fric = HALF if E == 1 else E ** (1.0 / k - 0.5) / 2
            noise = 1.0 if E == 1 else E ** (1.0 / (2 * k) - 0.75)
            V = b.V.scaled(E, k) if b.V is not None else None
            return ChainDynamics(b.coords, b.N, b.U.scaled(E, k), V, fric,
                                 b.sigma_left * noise, b.sigma_right * noise)
        # limit
        base = self.base
        if base.kind == "lefevere_schenkel":
            return _ls_dynamics(base.N, base.omega, base.mu, base.T, base.D, noisy=False)
        b = base._dyn
        if base.kind == "exchange":
            return ChainDynamics("r", b.N, b.U, None, b.friction, 0.0, 0.0, b.gamma)
        pot = base.potentials
        k = pot.k
        if k % 2 != 0:
            raise LimitConvexityError("limit convexity requires even k")
        U = Term((0,) * k + (pot.exact_a_k,))
        V = None
        if b.V is not None and pot.l == k and pot.exact_b_l > 0:
            V = Term((0,) * k + (pot.exact_b_l,))
        fric = HALF if k == 2 else Fraction(0)
        return ChainDynamics(b.coords, b.N, U, V, fric, 0.0, 0.0)

    @property
    def dynamics(self):
        return self._dyn

    @property
    def root_kind(self) -> str:
        """Kind of the underlying base system (follows scaled/limit)."""
        return self.base.root_kind if self.kind in ("scaled", "limit") else self.kind

    @property
    def is_chain(self) -> bool:
        return isinstance(self._dyn, ChainDynamics)

    @property
    def is_linear(self) -> bool:
        if isinstance(self._dyn, LinearDynamics):
            return True
        d = self._dyn
        lin = lambda t: t is None or (t.is_polynomial and len(t.coeffs) <= 3)
        return d.gamma == 0 and lin(d.U) and lin(d.V)

    @property
    def dim(self) -> int:
        return self._dyn.dim

    @property
    def noise_dim(self) -> int:
        if self.kind in ("scaled", "limit"):
            return self.base.noise_dim
        return self._dyn.noise_dim

    @property
    def chain_N(self) -> int:
        return self.base.chain_N if self.kind in ("scaled", "limit") else self.N

    @cached_property
    def layout(self) -> tuple[str, ...]:
        if self.kind == "ou":
            return ("p_1",)
        if self.root_kind == "lefevere_schenkel":
            return ls_layout(self.chain_N)
        d = self._dyn
        pos = "q" if d.coords == "q" else "r"
        return tuple(f"{pos}_{i + 1}" for i in range(d.n_pos)) + tuple(f"p_{i + 1}" for i in range(d.N))

    @property
    def momentum_indices(self) -> np.ndarray:
        """Indices of p_1..p_N (chains) or the real mode momenta (LS)."""
        lab = self.layout
        if self.root_kind == "lefevere_schenkel":
            return np.array([i for i, s in enumerate(lab) if s[0] in "RS"])
        return np.array([i for i, s in enumerate(lab) if s.startswith("p_")])

    @property
    def boundary_indices(self) -> tuple[int, int]:
        idx = self.momentum_indices
        return int(idx[0]), int(idx[-1])

    @property
    def temperatures(self) -> tuple[float, float]:
        if self.kind in ("scaled", "limit"):
            return self.base.temperatures
        if self.kind == "lefevere_schenkel":
            return self.T, self.T
        return self.T_left, self.T_right

    @property
    def omega_sq(self) -> np.ndarray:
        """omega_k^2 for k = 0..N-1 (Lefevere-Schenkel only)."""
        m = self.base if self.kind == "limit" else self
        return np.asarray(omega_k_sq(m.omega, m.mu, m.N, np.arange(m.N)))

    def state(self, coords) -> ChainState:
        return ChainState(np.asarray(coords, dtype=float), self.layout)

    def zero_state(self) -> ChainState:
        return self.state(np.zeros(self.dim))

    # -- config ------------------------------------------------------------
    def to_config(self) -> dict:
        if self.kind in ("scaled", "limit"):
            out = {"kind": self.kind, "base": self.base.to_config()}
            if self.kind == "scaled":
                out["E"] = self.E
            return out
        out = {"kind": self.kind, "N": self.N}
        if self.kind in ("pinned", "unpinned"):
            out["potentials"] = self.potentials.to_config()
        if self.kind == "lefevere_schenkel":
            out.update(omega=self.omega, mu=self.mu, T=self.T, D=list(self.D))
        else:
            out.update(T_left=self.T_left, T_right=self.T_right)
        if self.kind == "exchange":
            out["gamma"] = self.gamma
        return out

    @classmethod
    def from_config(cls, cfg: dict) -> "ModelDescriptor":
        kind = cfg["kind"]
        if kind == "scaled":
            return scaled(cls.from_config(cfg["base"]), cfg["E"])
        if kind == "limit":
            return limit_model(cls.from_config(cfg["base"]))
        if kind == "lefevere_schenkel":
            return lefevere_schenkel(cfg["N"], cfg.get("omega", 1.0), cfg.get("mu", 1.0),
                                     cfg.get("T", 1.0), cfg.get("D"))
        if kind == "ou":
            return ou(cfg.get("T_left", 1.0))
        temps = dict(T_left=cfg.get("T_left", 1.0), T_right=cfg.get("T_right", 1.0))
        if kind == "exchange":
            return exchange(cfg["N"], cfg.get("gamma", 1.0), **temps)
        pot = PotentialSpec.from_config(cfg.get("potentials", {}))
        factory = pinned if kind == "pinned" else unpinned
        return factory(cfg["N"], pot, **temps)


# factories -----------------------------------------------------------------

def pinned(N: int, potentials: PotentialSpec | None = None, T_left: float = 1.0,
           T_right: float = 1.0) -> ModelDescriptor:
    return ModelDescriptor("pinned", N, potentials or PotentialSpec(), T_left, T_right)


def unpinned(N: int, potentials: PotentialSpec | None = None, T_left: float = 1.0,
             T_right: float = 1.0) -> ModelDescriptor:
    return ModelDescriptor("unpinned", N, potentials or PotentialSpec(), T_left, T_right)


def exchange(N: int, gamma: float = 1.0, T_left: float = 1.0, T_right: float = 1.0) -> ModelDescriptor:
    return ModelDescriptor("exchange", N, PotentialSpec(), T_left, T_right, gamma=gamma)


def lefevere_schenkel(N: int, omega: float = 1.0, mu: float = 1.0, T: float = 1.0,
                      D=None) -> ModelDescriptor:
    D = tuple(float(d) for d in D) if D is not None else (0.0,) * N
    return ModelDescriptor("lefevere_schenkel", N, None, T, T, omega=omega, mu=mu, T=T, D=D)


def ou(T: float = 1.0) -> ModelDescriptor:
    """Single momentum with friction 1/2 and noise sqrt(T)."""
    return ModelDescriptor("ou", 1, None, T, T)


def scaled(model: ModelDescriptor, E: float) -> ModelDescriptor:
    """The energy-rescaled system at energy E."""
    return ModelDescriptor("scaled", model.N, model.potentials, model.T_left, model.T_right,
                           E=float(E), base=model)


def limit_model(model: ModelDescriptor) -> ModelDescriptor:
    """Infinite-energy limit system.

    Potentials reduce to their leading monomials (pinning kept only when
    l = k), friction survives only for k = 2, bath noise disappears; the
    exchange limit keeps its exchange noise, the Lefevere-Schenkel limit is
    the deterministic damped oscillator per mode.
    """
    if model.kind not in BASE_KINDS:
        raise ContractViolation(f"no limit system for kind {model.kind!r}")
    return ModelDescriptor("limit", model.N, model.potentials, model.T_left, model.T_right,
                           gamma=model.gamma, base=model)


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------

def _coords(model: ModelDescriptor, state):
    if isinstance(state, ChainState):
        if state.layout != model.layout:
            raise ContractViolation(f"state layout {state.layout} does not match model layout {model.layout}")
        return state.coords
    x = state if isinstance(state, np.ndarray) and state.dtype == object else np.asarray(state, dtype=float)
    if x.shape[-1:] != (model.dim,):
        raise ContractViolation(f"state has trailing dimension {x.shape[-1:]}, model needs {model.dim}")
    return x


def hamiltonian(model: ModelDescriptor, state):
    """Total energy (H_E for scaled models, H_infinity for limits)."""
    return model.dynamics.hamiltonian(_coords(model, state))


def drift(model: ModelDescriptor, state) -> np.ndarray:
    """Ito drift vector in layout order."""
    return model.dynamics.drift(_coords(model, state))


def diffusion(model: ModelDescriptor, state) -> np.ndarray:
    """Diffusion matrix of shape (..., dim, noise_dim)."""
    return model.dynamics.diffusion(_coords(model, state))


def grad_hamiltonian(model: ModelDescriptor, state) -> np.ndarray:
    return model.dynamics.grad_h(_coords(model, state))


def hessian_hamiltonian(model: ModelDescriptor, state) -> np.ndarray:
    return model.dynamics.hess_h(_coords(model, state))


@dataclass(frozen=True)
class ScalingMap:
    """x -> x^E: momenta times E^{-1/2}, positions times E^{-1/k}."""

    E: float
    k: int

    def __post_init__(self):
        if self.E <= 0:
            raise ContractViolation("E must be > 0")

    def factors(self, layout) -> np.ndarray:
        pf = 1.0 if self.E == 1 else self.E ** -0.5
        qf = 1.0 if self.E == 1 else self.E ** (-1.0 / self.k)
        return np.array([pf if s.startswith("p_") else qf for s in layout])

    @property
    def time_factor(self) -> float:
        """Original-time units per scaled-time unit, E^{1/k - 1/2}."""
        return 1.0 if self.E == 1 else self.E ** (1.0 / self.k - 0.5)


def scale_state(smap: ScalingMap, state: ChainState) -> ChainState:
    if not all(s[0] in "pqr" for s in state.layout):
        raise ContractViolation("scaling applies to pinned or unpinned layouts")
    return ChainState(state.coords * smap.factors(state.layout), state.layout)


def unscale_state(smap: ScalingMap, state: ChainState) -> ChainState:
    return ChainState(state.coords / smap.factors(state.layout), state.layout)
