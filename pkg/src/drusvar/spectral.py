"""SVD factorisations of degradation operators and the spectral transforms.

A factorisation exposes ``U^T``, ``U``, ``V^T`` and ``V`` as callables plus one
singular value per image-side spectral component. Components whose singular
value falls below ``ZERO_SV_RTOL * s_max`` are *unobserved*: the measurement
carries no information about them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acoustic import DenseOperator, SeparableOperator

ZERO_SV_RTOL = 1e-10


class SpectralError(ArithmeticError):
    pass


def _fix_signs(u: np.ndarray | None, v: np.ndarray) -> None:
    """Flip singular pairs in place so the first nonzero entry of each column of ``v`` is >= 0."""
    for i in range(v.shape[1]):
        col = v[:, i]
        nz = np.flatnonzero(np.abs(col) > 1e-12 * max(np.abs(col).max(), 1e-300))
        if nz.size and col[nz[0]] < 0:
            v[:, i] = -col
            if u is not None and i < u.shape[1]:
                u[:, i] = -u[:, i]


@dataclass(frozen=True)
class SpectralVector:
    coefficients: np.ndarray
    observed: np.ndarray
    source_dims: tuple[int, ...]

    def __post_init__(self):
        if self.coefficients.shape != self.observed.shape:
            raise ValueError("coefficients and observed flags must have the same length")

    def __len__(self) -> int:
        return self.coefficients.size


class SVDFactorization:
    """Common interface; subclasses implement the four orthogonal transforms."""

    kind: str
    singular_values: np.ndarray
    num_rows: int
    num_cols: int

    @property
    def num_components(self) -> int:
        return self.singular_values.size

    @property
    def observed(self) -> np.ndarray:
        s = self.singular_values
        smax = s.max() if s.size else 0.0
        return (s > 0) & (s >= ZERO_SV_RTOL * smax)

    def sorted_order(self) -> np.ndarray:
        """Component indices by nonincreasing singular value (stable)."""
        return np.argsort(-self.singular_values, kind="stable")

    def Ut(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def U(self, c: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def Vt(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def V(self, c: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Re-synthesise ``U S V^T x``."""
        return self.U(self.singular_values * self.Vt(x))


class DenseSVD(SVDFactorization):
    kind = "dense"

    def __init__(self, u: np.ndarray, s: np.ndarray, v: np.ndarray):
        self._u = u
        self._v = v
        self.num_rows = u.shape[0]
        self.num_cols = v.shape[0]
        s_full = np.zeros(self.num_cols)
        s_full[: s.size] = s
        self.singular_values = s_full
        self._rank_dims = s.size

    def Ut(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape[0] != self.num_rows:
            raise ValueError(f"expected measurement length {self.num_rows}, got {y.shape[0]}")
        out = np.zeros(self.num_cols)
        out[: self._rank_dims] = self._u.T @ y
        return out

    def U(self, c):
        return self._u @ np.asarray(c, dtype=float)[: self._rank_dims]

    def Vt(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.num_cols:
            raise ValueError(f"expected image length {self.num_cols}, got {x.shape[0]}")
        return self._v.T @ x

    def V(self, c):
        c = np.asarray(c, dtype=float)
        if c.shape[0] != self.num_cols:
            raise ValueError(f"expected {self.num_cols} spectral coefficients, got {c.shape[0]}")
        return self._v @ c

    @property
    def right_vectors(self) -> np.ndarray:
        return self._v


def svd_dense(op: DenseOperator | np.ndarray) -> DenseSVD:
    """Full SVD of a dense operator, components by decreasing singular value."""
    a = op.entries if isinstance(op, DenseOperator) else np.asarray(op, dtype=float)
    m, n = a.shape
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=m < n)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"SVD did not converge for a {m}x{n} operator (finite={np.isfinite(a).all()})") from exc
    if m < n:
        u = u[:, :m]
    v = vt.T.copy()
    u = u.copy()
    _fix_signs(u, v)
    return DenseSVD(u, s, v)


def _svd_1d(t: np.ndarray):
    u, s, vt = np.linalg.svd(t)
    v = vt.T.copy()
    u = u.copy()
    _fix_signs(u, v)
    return u, s, v


class KroneckerSVD(SVDFactorization):
    """SVD of ``A_ax (x) A_lat`` assembled from the two 1-D factorisations.

    Component ``a * width + b`` pairs axial component ``a`` with lateral
    component ``b`` and has singular value ``s_a * s_b``.
    """

    kind = "separable-kronecker"

    def __init__(self, op: SeparableOperator):
        self.grid = op.grid
        self._ua, self.axial_singular_values, self._va = _svd_1d(op.axial_matrix)
        self._ul, self.lateral_singular_values, self._vl = _svd_1d(op.lateral_matrix)
        self.singular_values = np.outer(self.axial_singular_values, self.lateral_singular_values).reshape(-1)
        self.num_rows = self.num_cols = op.grid.num_pixels

    def component_index(self, a: int, b: int) -> int:
        return a * self.grid.width_px + b

    def component_pair(self, i: int) -> tuple[int, int]:
        return divmod(int(i), self.grid.width_px)

    def _img(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.num_cols:
            raise ValueError(f"expected length {self.num_cols}, got {v.shape[0]}")
        return v.reshape(self.grid.shape)

    def Ut(self, y):
        return (self._ua.T @ self._img(y) @ self._ul).reshape(-1)

    def U(self, c):
        return (self._ua @ self._img(c) @ self._ul.T).reshape(-1)

    def Vt(self, x):
        return (self._va.T @ self._img(x) @ self._vl).reshape(-1)

    def V(self, c):
        return (self._va @ self._img(c) @ self._vl.T).reshape(-1)

    def right_vector(self, i: int) -> np.ndarray:
        a, b = self.component_pair(i)
        return np.kron(self._va[:, a], self._vl[:, b])


def svd_separable(op: SeparableOperator) -> KroneckerSVD:
    return KroneckerSVD(op)


def factorize(op) -> SVDFactorization:
    if isinstance(op, SeparableOperator):
        return svd_separable(op)
    return svd_dense(op)


def to_spectral(f: SVDFactorization, y: np.ndarray) -> SpectralVector:
    """Measurement in spectral coordinates, ``S^+ U^T y``; unobserved components hold 0."""
    y = np.asarray(y, dtype=float)
    if y.shape[0] != f.num_rows:
        raise ValueError(f"expected measurement length {f.num_rows}, got {y.shape[0]}")
    obs = f.observed
    uty = f.Ut(y)
    ybar = np.zeros(f.num_components)
    ybar[obs] = uty[obs] / f.singular_values[obs]
    return SpectralVector(ybar, obs, (f.num_rows,))


def to_spectral_image(f: SVDFactorization, x: np.ndarray) -> SpectralVector:
    """Image in spectral coordinates, ``V^T x``."""
    return SpectralVector(f.Vt(x), f.observed, (f.num_cols,))


def from_spectral(f: SVDFactorization, xbar: SpectralVector | np.ndarray) -> np.ndarray:
    c = xbar.coefficients if isinstance(xbar, SpectralVector) else np.asarray(xbar, dtype=float)
    if c.shape[0] != f.num_components:
        raise ValueError(f"expected {f.num_components} spectral coefficients, got {c.shape[0]}")
    return f.V(c)
