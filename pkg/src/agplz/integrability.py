"""
Flatness (zero-curvature) checks for commuting families of real symmetric operators.

A family ``H_mu(x)`` is flat when ``d_mu H_nu - d_nu H_mu = 0`` and
``[H_mu, H_nu] = 0``. The gauge potentials ``A_mu = -i U d_mu U^dagger``
(``U`` the common eigenbasis, as columns) are built numerically, and the
corrected family ``H_mu + A_mu`` is checked against

    d_mu (H_nu + A_nu) - d_nu (H_mu + A_mu) + i [H_mu + A_mu, H_nu + A_nu] = 0.

Gaudin magnets serve as the concrete fixture.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import DegeneracyError, ParameterCollisionError

DEFAULT_FD_STEP = 1e-5
NESTED_FD_STEP = 1e-4
MIN_GAP = 1e-6
COLLISION_TOL = 1e-8
SEED = 20240917

_PAULI = {
    "x": np.array([[0.0, 1.0], [1.0, 0.0]]),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]]),
}
# sigma_y (x) sigma_y is real: -[[0,1],[-1,0]] (x) [[0,1],[-1,0]]
_ISY = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass
class OperatorFamily:
    """Parameter-indexed list of real symmetric matrices.

    ``evaluator(x)`` returns ``[H_0(x), ..., H_{n-1}(x)]``. ``partials(x)``,
    when given, returns an array ``D`` with ``D[mu, nu] = d_nu H_mu``.
    """

    n_params: int
    dim: int
    evaluator: Callable[[np.ndarray], List[np.ndarray]]
    partials: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "family"

    def __call__(self, x) -> np.ndarray:
        return np.array(self.evaluator(np.asarray(x, dtype=float)))


@dataclass
class FlatnessReport:
    sym_residual: float
    comm_residual: float
    fd_step: float
    min_gap: float
    params: list
    corrected_residual: Optional[float] = None
    agp_flatness: Optional[float] = None
    cross_commutator: Optional[float] = None
    eigenvalue_curl: Optional[float] = None
    hermiticity_defect: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {
            "sym_residual": self.sym_residual,
            "comm_residual": self.comm_residual,
            "corrected_residual": self.corrected_residual,
            "fd_step": self.fd_step,
            "min_gap": self.min_gap,
            "params": self.params,
            "agp_flatness": self.agp_flatness,
            "cross_commutator": self.cross_commutator,
            "eigenvalue_curl": self.eigenvalue_curl,
            "hermiticity_defect": self.hermiticity_defect,
        }
        out.update(self.extra)
        return out


def site_operator(op: np.ndarray, site: int, n: int) -> np.ndarray:
    mats = [np.eye(2)] * n
    mats[site] = op
    return reduce(np.kron, mats)


def exchange(i: int, j: int, n: int) -> np.ndarray:
    """Real matrix of ``sigma_i . sigma_j``."""
    xx = site_operator(_PAULI["x"], i, n) @ site_operator(_PAULI["x"], j, n)
    zz = site_operator(_PAULI["z"], i, n) @ site_operator(_PAULI["z"], j, n)
    yy = -(site_operator(_ISY, i, n) @ site_operator(_ISY, j, n))
    return xx + yy + zz


def gaudin_family(n_spins: int, B: float) -> OperatorFamily:
    """``H_i = B sigma^z_i + sum_{j != i} sigma_i . sigma_j / (eps_i - eps_j)`` over ``eps``."""
    if n_spins not in (2, 3):
        raise ValueError("n_spins must be 2 or 3")
    if B == 0:
        raise ValueError("B must be nonzero to lift degeneracies")
    n = n_spins
    S = {(i, j): exchange(i, j, n) for i in range(n) for j in range(n) if i != j}
    Z = [site_operator(_PAULI["z"], i, n) for i in range(n)]

    def check(eps):
        if len(eps) != n:
            raise ValueError(f"need {n} site parameters, got {len(eps)}")
        for i, j in itertools.combinations(range(n), 2):
            if abs(eps[i] - eps[j]) < COLLISION_TOL:
                raise ParameterCollisionError(f"eps_{i} = eps_{j} = {eps[i]}")

    def evaluator(eps):
        check(eps)
        return [B * Z[i] + sum(S[i, j] / (eps[i] - eps[j]) for j in range(n) if j != i)
                for i in range(n)]

    def partials(eps):
        check(eps)
        D = np.zeros((n, n, 2**n, 2**n))
        for i in range(n):
            for j in range(n):
                if j != i:
                    term = S[i, j] / (eps[i] - eps[j]) ** 2
                    D[i, j] = term
                    D[i, i] -= term
        return D

    return OperatorFamily(n, 2**n, evaluator, partials, f"gaudin{n}")


def perturbed(f: OperatorFamily, strength: float, target: int = 1, site: int = 0) -> OperatorFamily:
    """Add ``strength * sigma^x`` on ``site`` to ``H_target``; breaks commutativity."""
    n_sites = int(round(np.log2(f.dim)))
    extra = strength * site_operator(_PAULI["x"], site, n_sites)

    def evaluator(x):
        hs = list(f.evaluator(x))
        hs[target] = hs[target] + extra
        return hs

    return OperatorFamily(f.n_params, f.dim, evaluator, f.partials, f.name + "+pert")


def _central(fun, x, mu, h):
    e = np.zeros_like(x)
    e[mu] = h
    d1 = (fun(x + e) - fun(x - e)) / (2 * h)
    e[mu] = h / 2
    d2 = (fun(x + e) - fun(x - e)) / h
    return (4 * d2 - d1) / 3


def _plain_central(fun, x, mu, h):
    e = np.zeros_like(x)
    e[mu] = h
    return (fun(x + e) - fun(x - e)) / (2 * h)


def family_partials(f: OperatorFamily, x, fd_step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """``D[mu, nu] = d_nu H_mu``: analytic when available, else Richardson central differences."""
    x = np.asarray(x, dtype=float)
    if f.partials is not None:
        return np.asarray(f.partials(x))
    cols = [_central(f, x, nu, fd_step) for nu in range(f.n_params)]
    return np.stack(cols, axis=1)


def flatness_residual(f: OperatorFamily, x, fd_step: float = DEFAULT_FD_STEP) -> FlatnessReport:
    """Symmetric-derivative and commutator residuals over all pairs ``mu < nu``."""
    x = np.asarray(x, dtype=float)
    H = f(x)
    D = family_partials(f, x, fd_step)
    sym = comm = 0.0
    for mu, nu in itertools.combinations(range(f.n_params), 2):
        sym = max(sym, np.abs(D[nu, mu] - D[mu, nu]).max())
        comm = max(comm, np.abs(H[mu] @ H[nu] - H[nu] @ H[mu]).max())
    return FlatnessReport(float(sym), float(comm), fd_step, float("nan"), x.tolist())


# ---------------------------------------------------------------------------
# common eigenbasis and gauge potentials


def combination_coefficients(n_params: int, seed: int = SEED) -> np.ndarray:
    return np.random.default_rng(seed).uniform(0.5, 1.5, n_params)


def common_eigenbasis(f: OperatorFamily, x, coeffs: np.ndarray):
    """Orthogonal ``U`` whose columns diagonalise every ``H_mu(x)``; also returns the gap.

    Columns follow ascending eigenvalues of ``sum_mu c_mu H_mu`` and carry a
    positive largest-modulus component.
    """
    H = f(x)
    C = np.tensordot(coeffs, H, axes=1)
    w, U = np.linalg.eigh(C)
    gap = float(np.min(np.diff(w))) if len(w) > 1 else np.inf
    if gap < MIN_GAP:
        raise DegeneracyError(f"generic combination gap {gap:.3e} < {MIN_GAP}")
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    return U * signs, gap


def _align(U, ref):
    """Permute and flip the columns of ``U`` to match ``ref`` by maximal overlap."""
    ov = ref.T @ U
    perm = np.argmax(np.abs(ov), axis=1)
    if len(set(perm.tolist())) != len(perm):
        raise DegeneracyError("column alignment is ambiguous across the stencil")
    out = U[:, perm]
    signs = np.sign(np.sum(ref * out, axis=0))
    signs[signs == 0] = 1.0
    return out * signs


def basis_derivative(f: OperatorFamily, x, mu: int, fd_step: float, coeffs: np.ndarray):
    """``(U, d_mu U, gap)`` with the stencil aligned to ``U(x)``."""
    x = np.asarray(x, dtype=float)
    U, gap = common_eigenbasis(f, x, coeffs)

    def aligned(y):
        V, g = common_eigenbasis(f, y, coeffs)
        return _align(V, U)

    dU = _central(aligned, x, mu, fd_step)
    return U, dU, gap


def numerical_agp(f: OperatorFamily, x, mu: int, fd_step: float = DEFAULT_FD_STEP,
                  coeffs: Optional[np.ndarray] = None) -> np.ndarray:
    """``A_mu = -i U d_mu U^dagger`` (Hermitian; ``i A_mu`` is real antisymmetric)."""
    coeffs = combination_coefficients(f.n_params) if coeffs is None else coeffs
    U, dU, _ = basis_derivative(f, x, mu, fd_step, coeffs)
    return -1j * U @ dU.T


def perturbative_agp(f: OperatorFamily, x, mu: int, coeffs: Optional[np.ndarray] = None) -> np.ndarray:
    """``A_mu`` from first-order perturbation theory on the generic combination.

    ``d_mu U = U K`` with ``K_mn = (U^T d_mu C U)_mn / (lambda_n - lambda_m)``.
    Needs analytic partials; free of stencil roundoff, so it is the inner
    derivative of choice when ``A`` itself has to be differenced.
    """
    if f.partials is None:
        raise ValueError("perturbative AGP needs analytic partials")
    x = np.asarray(x, dtype=float)
    coeffs = combination_coefficients(f.n_params) if coeffs is None else coeffs
    U, _ = common_eigenbasis(f, x, coeffs)
    lam = np.diag(U.T @ np.tensordot(coeffs, f(x), axes=1) @ U)
    dC = np.tensordot(coeffs, np.asarray(f.partials(x))[:, mu], axes=1)
    R = U.T @ dC @ U
    diff = lam[None, :] - lam[:, None]
    np.fill_diagonal(diff, 1.0)
    K = R / diff
    np.fill_diagonal(K, 0.0)
    return -1j * U @ K.T @ U.T


def _all_agps(f, x, fd_step, coeffs, inner="fd"):
    if inner == "perturbative":
        return np.array([perturbative_agp(f, x, mu, coeffs) for mu in range(f.n_params)])
    return np.array([numerical_agp(f, x, mu, fd_step, coeffs) for mu in range(f.n_params)])


def corrected_flatness_residual(f: OperatorFamily, x, fd_step: float = DEFAULT_FD_STEP,
                                nested_step: float = NESTED_FD_STEP,
                                coeffs: Optional[np.ndarray] = None,
                                agp_scale: float = 1.0, inner: str = "auto") -> FlatnessReport:
    """Flatness of ``H + agp_scale * A`` plus the intermediate identities.

    ``d_mu A_nu`` is a plain central difference of step ``nested_step``.
    The ``A`` being differenced comes from perturbation theory when the
    family has analytic partials (``inner="auto"``); stencil-built ``A``
    (``inner="fd"``, step ``fd_step``) carries eigenvector roundoff of order
    ``eps |H| / gap`` that the nested quotient amplifies to ~1e-6.
    """
    x = np.asarray(x, dtype=float)
    coeffs = combination_coefficients(f.n_params) if coeffs is None else coeffs
    if inner == "auto":
        inner = "perturbative" if f.partials is not None else "fd"
    base = flatness_residual(f, x, fd_step)
    H = f(x).astype(complex)
    D = family_partials(f, x, fd_step)
    A = agp_scale * _all_agps(f, x, fd_step, coeffs, inner)
    _, gap = common_eigenbasis(f, x, coeffs)

    def agps(y):
        return agp_scale * _all_agps(f, y, fd_step, coeffs, inner)

    # dA[mu] = d_mu (A_0, ..., A_{n-1})
    dA = np.array([_plain_central(agps, x, mu, nested_step) for mu in range(f.n_params)])

    dE = np.array([_central(lambda y: _aligned_energies(f, y, x, coeffs), x, mu, fd_step)
                   for mu in range(f.n_params)])

    corrected = agp_flat = cross = curl = 0.0
    for mu, nu in itertools.combinations(range(f.n_params), 2):
        K_mu, K_nu = H[mu] + A[mu], H[nu] + A[nu]
        total = (D[nu, mu] + dA[mu, nu]) - (D[mu, nu] + dA[nu, mu]) + 1j * (K_mu @ K_nu - K_nu @ K_mu)
        corrected = max(corrected, np.abs(total).max())
        flatA = dA[mu, nu] - dA[nu, mu] + 1j * (A[mu] @ A[nu] - A[nu] @ A[mu])
        agp_flat = max(agp_flat, np.abs(flatA).max())
        cc = (H[mu] @ A[nu] - A[nu] @ H[mu]) - (H[nu] @ A[mu] - A[mu] @ H[nu])
        cross = max(cross, np.abs(cc).max())
        curl = max(curl, np.abs(dE[mu, nu] - dE[nu, mu]).max())
    herm = float(max(np.abs(a - a.conj().T).max() for a in A)) if len(A) else 0.0
    base.corrected_residual = float(corrected)
    base.agp_flatness = float(agp_flat)
    base.cross_commutator = float(cross)
    base.eigenvalue_curl = float(curl)
    base.hermiticity_defect = herm
    base.min_gap = gap
    base.extra["inner_derivative"] = inner
    base.extra["nested_step"] = nested_step
    return base


def _aligned_energies(f, y, x0, coeffs):
    """Eigenvalues of each ``H_mu(y)`` in the eigenbasis aligned with the one at ``x0``."""
    U0, _ = common_eigenbasis(f, x0, coeffs)
    U, _ = common_eigenbasis(f, y, coeffs)
    U = _align(U, U0)
    return np.array([np.diag(U.T @ h @ U) for h in f(y)])


def constant_family(mats: Sequence[np.ndarray]) -> OperatorFamily:
    """Parameter-independent family (one parameter per matrix); used as a trivial check."""
    mats = [np.asarray(m, dtype=float) for m in mats]
    n = len(mats)
    return OperatorFamily(n, mats[0].shape[0], lambda x: [m.copy() for m in mats],
                          lambda x: np.zeros((n, n) + mats[0].shape), "constant")


def rotation_family(theta: Callable[[float], float], dtheta: Callable[[float], float]) -> OperatorFamily:
    """``H(x) = cos(theta) sigma_z + sin(theta) sigma_x``: ``sigma_z`` rotated by ``theta`` about y."""

    def evaluator(x):
        t = theta(x[0])
        return [np.cos(t) * _PAULI["z"] + np.sin(t) * _PAULI["x"]]

    def partials(x):
        t, dt = theta(x[0]), dtheta(x[0])
        return np.array([[dt * (-np.sin(t) * _PAULI["z"] + np.cos(t) * _PAULI["x"])]])

    return OperatorFamily(1, 2, evaluator, partials, "rotation")
