import logging
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Dict, Iterable, Iterator, List, Tuple, Union

import numpy as np

from src.errors import AccuracyWarning, DomainError, SingularParameterError, warn
from src.kelvin import LameParams

if TYPE_CHECKING:
    from src.oracle import QuadratureRule

logger = logging.getLogger(__name__)


class ModeFamily(str, Enum):
    T = "T"
    M = "M"
    N = "N"

    @classmethod
    def from_str(cls, value: str) -> 'ModeFamily':
        try:
            return cls(value.strip().upper())
        except ValueError:
            raise DomainError(f"Unknown mode family: {value!r}")


@dataclass(frozen=True, order=True)
class ModeIndex:
    family: ModeFamily
    n: int
    m: int = 0

    def __post_init__(self):
        if not isinstance(self.family, ModeFamily):
            object.__setattr__(self, 'family', ModeFamily.from_str(self.family))
        if self.n < 1:
            raise DomainError(f"Mode degree must be >= 1, got {self.n}")
        if abs(self.m) > self.max_order:
            raise DomainError(f"Order {self.m} out of range for {self.family.value}_{self.n}")

    @property
    def max_order(self) -> int:
        return self.n - 1 if self.family is ModeFamily.N else self.n

    @property
    def harmonic_degree(self) -> int:
        """Degree of the scalar harmonic the trace is built from"""
        return self.n - 1 if self.family is ModeFamily.N else self.n

    def __str__(self):
        return f"{self.family.value}({self.n},{self.m})"


@dataclass(frozen=True)
class SurfacePoint:
    theta: float
    phi: float
    radius: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= np.pi:
            raise DomainError(f"Colatitude {self.theta} outside [0, pi]")
        if self.radius <= 0:
            raise DomainError(f"Sphere radius must be positive, got {self.radius}")

    @property
    def normal(self) -> np.ndarray:
        st = np.sin(self.theta)
        return np.array([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)])

    @property
    def position(self) -> np.ndarray:
        return self.radius * self.normal


@dataclass(frozen=True)
class SolidPoint:
    x: Tuple[float, float, float]

    def __post_init__(self):
        coords = tuple(float(c) for c in self.x)
        if len(coords) != 3 or not np.all(np.isfinite(coords)):
            raise DomainError(f"Solid point needs three finite coordinates, got {self.x}")
        object.__setattr__(self, 'x', coords)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.x)

    @property
    def r(self) -> float:
        return float(np.linalg.norm(self.x))


PointLike = Union[SurfacePoint, SolidPoint, np.ndarray, Iterable[float]]


def unit_vectors(p) -> np.ndarray:
    if isinstance(p, SurfacePoint):
        return p.normal
    xyz = p.array if isinstance(p, SolidPoint) else np.asarray(p, dtype=float)
    r = np.linalg.norm(xyz, axis=-1, keepdims=True)
    return xyz / np.where(r == 0, 1.0, r)


def positions(x) -> np.ndarray:
    if isinstance(x, SurfacePoint):
        return x.position
    return x.array if isinstance(x, SolidPoint) else np.asarray(x, dtype=float)


def _check_degree(n: int, m: int):
    if n < 0:
        raise DomainError(f"Harmonic degree must be >= 0, got {n}")
    if abs(m) > n:
        raise DomainError(f"|m| = {abs(m)} exceeds degree {n}")


def legendre_q(n: int, m: int, z: np.ndarray) -> np.ndarray:
    """Normalized associated Legendre function divided by sin(theta)^m.

    Upward recurrence in degree at fixed order m >= 0, with the Condon-Shortley
    phase and the 1/sqrt(4*pi) factor of orthonormal harmonics folded in.
    """
    z = np.asarray(z, dtype=float)
    q_mm = 1.0 / np.sqrt(4.0 * np.pi)
    for k in range(1, m + 1):
        q_mm *= -np.sqrt((2 * k + 1) / (2 * k))
    prev = np.full_like(z, q_mm)
    if n == m:
        return prev
    curr = np.sqrt(2 * m + 3) * z * q_mm
    for k in range(m + 2, n + 1):
        a = np.sqrt((4 * k * k - 1) / (k * k - m * m))
        b = np.sqrt(((k - 1) ** 2 - m * m) / (4 * (k - 1) ** 2 - 1))
        prev, curr = curr, a * (z * curr - b * prev)
    return curr


def ynm(n: int, m: int, xhat: np.ndarray) -> np.ndarray:
    """Y_n^m at unit vectors xhat of shape (..., 3)"""
    _check_degree(n, m)
    xhat = np.asarray(xhat, dtype=float)
    q = legendre_q(n, abs(m), xhat[..., 2])
    w = xhat[..., 0] + 1j * xhat[..., 1]
    if m >= 0:
        return q * w ** m
    return (-1) ** m * q * np.conj(w) ** (-m)


def _ladder(n: int) -> float:
    return (2 * n + 1) / (2 * n - 1)


def grad_solid_harmonic(n: int, m: int, xhat: np.ndarray) -> np.ndarray:
    """Gradient of r^n Y_n^m evaluated at unit vectors, shape (..., 3).

    The gradient is homogeneous of degree n - 1, so the value at x is
    |x|^(n-1) times this.
    """
    _check_degree(n, m)
    xhat = np.asarray(xhat, dtype=float)
    out = np.zeros(xhat.shape, dtype=complex)
    if n == 0:
        return out
    s = _ladder(n)
    lower = n - 1

    def y_lower(order):
        if abs(order) > lower:
            return np.zeros(xhat.shape[:-1], dtype=complex)
        return ynm(lower, order, xhat)

    d_plus = np.sqrt(s * (n - m) * (n - m - 1)) * y_lower(m + 1)
    d_minus = -np.sqrt(s * (n + m) * (n + m - 1)) * y_lower(m - 1)
    out[..., 0] = (d_plus + d_minus) / 2
    out[..., 1] = (d_plus - d_minus) / 2j
    out[..., 2] = np.sqrt(s * (n - m) * (n + m)) * y_lower(m)
    return out


def surface_grad(n: int, m: int, xhat: np.ndarray) -> np.ndarray:
    xhat = np.asarray(xhat, dtype=float)
    return grad_solid_harmonic(n, m, xhat) - n * ynm(n, m, xhat)[..., None] * xhat


def eval_Ynm(n: int, m: int, p: PointLike) -> np.ndarray:
    """Orthonormal complex spherical harmonic with Condon-Shortley phase"""
    value = ynm(n, m, unit_vectors(p))
    return value if np.ndim(value) else complex(value)


def surface_gradient_Ynm(n: int, m: int, p: PointLike) -> np.ndarray:
    return surface_grad(n, m, unit_vectors(p))


def a_nm(n: int, lame: LameParams) -> complex:
    if n < 1:
        raise DomainError(f"a_n needs n >= 1, got {n}")
    lam, mu = lame.lam, lame.mu
    den = (n + 2) * lam + (n + 4) * mu
    if den == 0:
        raise SingularParameterError(f"a_{n} has a vanishing denominator for lambda={lam}, mu={mu}")
    value = (2 * (n - 1) * lam + 2 * (3 * n - 2) * mu) / den
    return value.real if value.imag == 0 else value


def trace_mode(idx: ModeIndex, lame: LameParams, xhat: np.ndarray) -> np.ndarray:
    """Trace T, M or N of a mode on the unit sphere, at unit vectors xhat"""
    xhat = np.asarray(xhat, dtype=float)
    n, m = idx.n, idx.m
    if idx.family is ModeFamily.T:
        return np.cross(surface_grad(n, m, xhat), xhat)
    if idx.family is ModeFamily.M:
        return grad_solid_harmonic(n, m, xhat)
    k = n - 1
    coeff = a_nm(n, lame) / (2 * n - 1)
    return coeff * (-surface_grad(k, m, xhat) + n * ynm(k, m, xhat)[..., None] * xhat)


def solid_mode(idx: ModeIndex, lame: LameParams, x: np.ndarray) -> np.ndarray:
    """Solid vector polynomial of a mode at points x of shape (..., 3)"""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    xhat = unit_vectors(x)
    n, m = idx.n, idx.m
    if idx.family is ModeFamily.T:
        return (r ** n)[..., None] * np.cross(grad_solid_harmonic(n, m, xhat), xhat)
    if idx.family is ModeFamily.M:
        return (r ** (n - 1))[..., None] * grad_solid_harmonic(n, m, xhat)
    k = n - 1
    a = a_nm(n, lame)
    radial = a * (r ** k * ynm(k, m, xhat))[..., None] * x
    if k == 0:
        return radial
    grad_lower = (r ** (k - 1))[..., None] * grad_solid_harmonic(k, m, xhat)
    return radial + (1 - a / (2 * n - 1) - r ** 2)[..., None] * grad_lower


def exterior_T(n: int, m: int, x: np.ndarray) -> np.ndarray:
    """grad(r^-(n+1) Y_n^m) x x, the decaying companion of the solid T mode"""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    xhat = unit_vectors(x)
    return (r ** -(n + 1))[..., None] * np.cross(surface_grad(n, m, xhat), xhat)


def eval_solid_mode(idx: ModeIndex, lame: LameParams, x: PointLike) -> np.ndarray:
    return solid_mode(idx, lame, positions(x))


def eval_trace_mode(idx: ModeIndex, lame: LameParams, p: PointLike) -> np.ndarray:
    return trace_mode(idx, lame, unit_vectors(p))


def mode_norm_squared(idx: ModeIndex, lame: LameParams) -> float:
    """Closed-form integral of |trace|^2 over the unit sphere"""
    n = idx.n
    if idx.family is ModeFamily.T:
        return float(n * (n + 1))
    if idx.family is ModeFamily.M:
        return float(n * (2 * n + 1))
    return float(abs(a_nm(n, lame)) ** 2 * n / (2 * n - 1))


def iter_modes(n_max: int, families: Iterable[ModeFamily] = tuple(ModeFamily),
               n_min: int = 1) -> Iterator[ModeIndex]:
    """All valid modes with n_min <= n <= n_max, ordered by family, degree, order"""
    for family in families:
        if not isinstance(family, ModeFamily):
            family = ModeFamily.from_str(family)
        for n in range(n_min, n_max + 1):
            top = n - 1 if family is ModeFamily.N else n
            for m in range(-top, top + 1):
                yield ModeIndex(family, n, m)


class CoefficientSpectrum:
    """Finite expansion sum_k c_k * trace_k in the T/M/N basis"""

    def __init__(self, coeffs: Dict[ModeIndex, complex] = None):
        self._coeffs: Dict[ModeIndex, complex] = {}
        for idx, value in (coeffs or {}).items():
            self[idx] = value

    def __getitem__(self, idx: ModeIndex) -> complex:
        return self._coeffs.get(idx, 0j)

    def __setitem__(self, idx: ModeIndex, value: complex):
        if not isinstance(idx, ModeIndex):
            raise DomainError(f"Spectrum keys must be ModeIndex, got {idx!r}")
        self._coeffs[idx] = complex(value)

    def __len__(self):
        return len(self._coeffs)

    def __iter__(self):
        return iter(sorted(self._coeffs))

    def __contains__(self, idx):
        return idx in self._coeffs

    def items(self) -> List[Tuple[ModeIndex, complex]]:
        return [(idx, self._coeffs[idx]) for idx in sorted(self._coeffs)]

    def map(self, factor) -> 'CoefficientSpectrum':
        """New spectrum with each coefficient multiplied by factor(idx)"""
        return CoefficientSpectrum({idx: factor(idx) * c for idx, c in self.items()})

    def scaled(self, scale: complex) -> 'CoefficientSpectrum':
        return self.map(lambda _: scale)

    def is_zero(self) -> bool:
        return all(c == 0 for c in self._coeffs.values())

    def evaluate(self, lame: LameParams, p: PointLike) -> np.ndarray:
        xhat = unit_vectors(p)
        total = np.zeros(np.shape(xhat), dtype=complex)
        for idx, c in self.items():
            total = total + c * trace_mode(idx, lame, xhat)
        return total

    def allclose(self, other: 'CoefficientSpectrum', rtol: float = 1e-10, atol: float = 0.0) -> bool:
        keys = set(self._coeffs) | set(other._coeffs)
        return all(np.isclose(self[k], other[k], rtol=rtol, atol=atol) for k in keys)

    def __repr__(self):
        body = ", ".join(f"{idx}: {c:.6g}" for idx, c in self.items())
        return f"CoefficientSpectrum({{{body}}})"


@dataclass
class GramResult:
    modes: List[ModeIndex]
    matrix: np.ndarray

    @property
    def max_off_diagonal(self) -> float:
        if len(self.modes) < 2:
            return 0.0
        off = self.matrix - np.diag(np.diag(self.matrix))
        return float(np.max(np.abs(off)))

    def diagonal_for(self, idx: ModeIndex) -> complex:
        return self.matrix[self.modes.index(idx), self.modes.index(idx)]


def gram_matrix(n_max: int, lame: LameParams, quad: 'QuadratureRule') -> GramResult:
    """Inner products of all trace modes with n <= n_max over the unit sphere"""
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}")
    # products of traces are polynomials of degree 2*n_max + 2
    if 2 * quad.n_theta - 1 < 2 * n_max + 2 or quad.n_phi <= 2 * n_max + 2:
        warn(f"Quadrature ({quad.n_theta}, {quad.n_phi}) under-resolves Gram matrix up to n={n_max}",
             AccuracyWarning)
    modes = list(iter_modes(n_max))
    nodes, weights = quad.sphere_nodes()
    values = np.stack([trace_mode(idx, lame, nodes) for idx in modes])
    # G_ij = sum_k w_k v_i(k) . conj(v_j(k))
    matrix = np.einsum('ikc,jkc,k->ij', values, np.conj(values), weights)
    logger.debug(f"Gram matrix of {len(modes)} modes up to n={n_max}")
    return GramResult(modes=modes, matrix=matrix)
