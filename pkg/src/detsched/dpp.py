"""Symmetric-kernel algebra for determinantal schedulers.

Three kernel roles appear: marginal kernels ``K`` (eigenvalues in [0, 1]),
L-ensemble kernels ``L`` and similarity matrices ``S`` (both PSD). All
determinants and K<->L maps go through symmetric eigendecompositions.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import InvalidArgument, InvalidKernel, NumericFailure, PalmUndefined
from .geometry import Network

SYM_TOL = 1e-10
EIG_TOL = 1e-9
PROB_CLAMP = 1e-12


class Role(enum.Enum):
    MARGINAL = "K"
    ENSEMBLE = "L"
    SIMILARITY = "S"


@dataclass(frozen=True, eq=False)
class SymmetricKernel:
    """Read-only symmetric matrix tagged with its role.

    Construct through :meth:`create`, which symmetrizes, validates the
    spectrum and clamps eigenvalues that are out of range by less than
    ``EIG_TOL``.
    """

    matrix: np.ndarray
    role: Role

    @classmethod
    def create(cls, entries, role: Role) -> "SymmetricKernel":
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidArgument("kernel must be a square matrix")
        if not np.all(np.isfinite(a)):
            raise InvalidKernel("kernel entries must be finite")
        if a.size and np.max(np.abs(a - a.T)) > SYM_TOL * max(1.0, np.max(np.abs(a))):
            raise InvalidKernel("kernel is not symmetric")
        a = 0.5 * (a + a.T)
        if a.size:
            lam, V = np.linalg.eigh(a)
            upper = 1.0 if role is Role.MARGINAL else np.inf
            if lam[0] < -EIG_TOL:
                raise InvalidKernel(f"{role.value}-kernel has eigenvalue {lam[0]:.3g} < 0")
            if lam[-1] > upper + EIG_TOL:
                raise InvalidKernel(f"K-kernel has eigenvalue {lam[-1]:.3g} > 1")
            if lam[0] < 0 or lam[-1] > upper:
                a = (V * np.clip(lam, 0.0, upper)) @ V.T
                a = 0.5 * (a + a.T)
        a.setflags(write=False)
        return cls(a, role)

    @classmethod
    def marginal(cls, entries) -> "SymmetricKernel":
        return cls.create(entries, Role.MARGINAL)

    @classmethod
    def ensemble(cls, entries) -> "SymmetricKernel":
        return cls.create(entries, Role.ENSEMBLE)

    @classmethod
    def similarity(cls, entries) -> "SymmetricKernel":
        return cls.create(entries, Role.SIMILARITY)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def eigh(self):
        lam, V = np.linalg.eigh(self.matrix)
        upper = 1.0 if self.role is Role.MARGINAL else np.inf
        return np.clip(lam, 0.0, upper), V

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def _require(self, role: Role, what: str):
        if self.role is not role:
            raise InvalidArgument(f"{what} needs a {role.value}-kernel, got {self.role.value}")


@dataclass(frozen=True, eq=False)
class QualityVector:
    q: np.ndarray
    w: Optional[np.ndarray] = None

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        if not np.all(np.isfinite(q)):
            raise InvalidArgument("quality entries must be finite")
        if np.any(q < 0):
            raise InvalidArgument("quality entries must be nonnegative")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        if self.w is not None:
            w = np.array(self.w, dtype=float).reshape(-1)
            w.setflags(write=False)
            object.__setattr__(self, "w", w)

    @classmethod
    def from_log(cls, w) -> "QualityVector":
        w = np.asarray(w, dtype=float)
        return cls(np.exp(w), w)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def log(self) -> np.ndarray:
        if self.w is not None:
            return self.w
        with np.errstate(divide="ignore"):
            return np.log(self.q)


def as_subset(psi: Iterable[int], n: int) -> np.ndarray:
    """Validate a subset of ``range(n)`` and return it as a sorted index array."""
    idx = sorted(int(i) for i in psi)
    if len(set(idx)) != len(idx):
        raise InvalidArgument("subset has repeated indices")
    if idx and (idx[0] < 0 or idx[-1] >= n):
        raise InvalidArgument(f"subset index out of range for n={n}")
    return np.asarray(idx, dtype=int)


def psd_det(a: np.ndarray) -> float:
    """Determinant of a (numerically) PSD matrix via its eigenvalues.

    Eigenvalues below the usual rank tolerance ``n * eps * max(lambda)`` are
    taken as exactly zero, so singular restrictions give determinant 0.
    """
    n = a.shape[0]
    if n == 0:
        return 1.0
    lam = np.linalg.eigvalsh(a)
    tol = n * np.finfo(float).eps * max(lam[-1], 0.0)
    lam = np.where(lam <= tol, 0.0, lam)
    return float(np.prod(lam))


def _clamp_prob(p: float) -> float:
    if -PROB_CLAMP <= p < 0.0:
        return 0.0
    if 1.0 < p <= 1.0 + PROB_CLAMP:
        return 1.0
    return float(p)


# ---------------------------------------------------------------- operations


def gaussian_similarity(net: Network, sigma: float) -> SymmetricKernel:
    """``S_ij = exp(-|x_i - x_j|^2 / sigma^2)`` over the transmitters."""
    if not (sigma > 0):
        raise InvalidArgument("sigma must be positive")
    x = net.transmitters
    d2 = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=-1)
    S = np.exp(-d2 / sigma**2)
    np.fill_diagonal(S, 1.0)
    return SymmetricKernel.create(S, Role.SIMILARITY)


def build_L(S: SymmetricKernel, q) -> SymmetricKernel:
    """``L_ij = q_i S_ij q_j``."""
    S._require(Role.SIMILARITY, "build_L")
    qv = q.q if isinstance(q, QualityVector) else QualityVector(q).q
    if qv.shape[0] != S.n:
        raise InvalidArgument(f"quality has length {qv.shape[0]}, similarity is {S.n}x{S.n}")
    L = qv[:, None] * S.matrix * qv[None, :]
    return SymmetricKernel.create(L, Role.ENSEMBLE)


def marginal_from_L(L: SymmetricKernel) -> SymmetricKernel:
    """``K = L (L + I)^-1`` through the eigendecomposition of L."""
    if L.role is Role.MARGINAL:
        raise InvalidArgument("marginal_from_L needs an L- or S-kernel")
    lam, V = np.linalg.eigh(L.matrix)
    if lam.size and lam[0] < -EIG_TOL:
        raise InvalidKernel(f"L-kernel has eigenvalue {lam[0]:.3g} < 0")
    lam = np.clip(lam, 0.0, None)
    K = (V * (lam / (1.0 + lam))) @ V.T
    return SymmetricKernel.create(0.5 * (K + K.T), Role.MARGINAL)


def L_from_marginal(K: SymmetricKernel) -> SymmetricKernel:
    """Inverse map ``L = (I - K)^-1 - I``; needs every eigenvalue of K below 1."""
    K._require(Role.MARGINAL, "L_from_marginal")
    lam, V = K.eigh()
    if lam.size and lam[-1] >= 1.0 - 1e-12:
        raise InvalidKernel("K has an eigenvalue equal to 1; it is not an L-ensemble")
    L = (V * (lam / (1.0 - lam))) @ V.T
    return SymmetricKernel.create(0.5 * (L + L.T), Role.ENSEMBLE)


def subset_prob_inclusion(K: SymmetricKernel, psi) -> float:
    """``P(Psi contains psi) = det(K_psi)``."""
    idx = as_subset(psi, K.n)
    return _clamp_prob(psd_det(K.matrix[np.ix_(idx, idx)]))


def subset_prob_exact(L: SymmetricKernel, psi) -> float:
    """``P(Psi == psi) = det(L_psi) / det(L + I)``."""
    idx = as_subset(psi, L.n)
    lam = np.clip(np.linalg.eigvalsh(L.matrix), 0.0, None)
    norm = float(np.prod(1.0 + lam))
    return _clamp_prob(psd_det(L.matrix[np.ix_(idx, idx)]) / norm)


def factorized_prob(S: SymmetricKernel, q, psi) -> float:
    """Quality/diversity form ``prod(q_psi^2) det(S_psi) / det(L + I)``."""
    L = build_L(S, q)
    qv = q.q if isinstance(q, QualityVector) else np.asarray(q, dtype=float)
    idx = as_subset(psi, S.n)
    lam = np.clip(np.linalg.eigvalsh(L.matrix), 0.0, None)
    quality = float(np.prod(qv[idx] ** 2))
    return _clamp_prob(quality * psd_det(S.matrix[np.ix_(idx, idx)]) / float(np.prod(1.0 + lam)))


def palm_reduce(K: SymmetricKernel, z: int) -> SymmetricKernel:
    """Reduced Palm kernel given ``z`` is selected, over the other n-1 indices."""
    K._require(Role.MARGINAL, "palm_reduce")
    z = int(as_subset([z], K.n)[0])
    kzz = K.matrix[z, z]
    if kzz <= kernels.PALM_EPS:
        raise PalmUndefined(f"[K]_zz = {kzz:.3g}: point {z} is never selected")
    rest = np.array([j for j in range(K.n) if j != z], dtype=int)
    col = K.matrix[rest, z]
    reduced = K.matrix[np.ix_(rest, rest)] - np.outer(col, col) / kzz
    return SymmetricKernel.create(reduced, Role.MARGINAL)


def scale_kernel(K: SymmetricKernel, f) -> SymmetricKernel:
    """``K{f}_ij = sqrt(1 - f_i) K_ij sqrt(1 - f_j)``."""
    f = np.asarray(f, dtype=float).reshape(-1)
    if f.shape[0] != K.n:
        raise InvalidArgument("scaling vector length does not match the kernel")
    if np.any(f < -PROB_CLAMP) or np.any(f > 1 + PROB_CLAMP) or not np.all(np.isfinite(f)):
        raise InvalidArgument("scaling entries must lie in [0, 1]")
    s = np.sqrt(1.0 - np.clip(f, 0.0, 1.0))
    return SymmetricKernel.create(s[:, None] * K.matrix * s[None, :], K.role)


def sample_many(K: SymmetricKernel, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` exact samples as a boolean (count, n) inclusion mask."""
    K._require(Role.MARGINAL, "sample")
    n = K.n
    if n == 0:
        return np.zeros((count, 0), dtype=bool)
    try:
        lam, V = K.eigh()
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericFailure(f"eigendecomposition failed: {exc}") from exc
    uniforms = rng.random((count, 2 * n))
    masks, status = kernels.sample_masks(lam, np.ascontiguousarray(V), uniforms)
    bad = np.flatnonzero(status)
    if bad.size:
        raise NumericFailure(
            f"projection sampling exhausted in {bad.size} of {count} draws "
            f"(first at draw {bad[0]}); kernel eigenvalues {np.array2string(lam, precision=3)}"
        )
    return masks


def sample(K: SymmetricKernel, rng: np.random.Generator) -> list:
    """One exact sample, as a sorted list of indices."""
    return np.flatnonzero(sample_many(K, 1, rng)[0]).tolist()


def stream(seed: int, k: int) -> np.random.Generator:
    """Generator for worker stream ``k`` derived from a master seed."""
    return np.random.default_rng(seed + k)


def all_subsets(n: int):
    """Every subset of ``range(n)`` in binary-counter order, as index lists."""
    for code in range(1 << n):
        yield [j for j in range(n) if code >> j & 1]


def subsets_containing(n: int, i: int) -> Sequence[list]:
    return [s for s in all_subsets(n) if i in s]
