import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from src.errors import SingularParameterError, SingularityError

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class KernelCoeffs:
    """Constants of the Kelvin matrix and of its traction decomposition"""
    alpha1: complex
    alpha2: complex
    b1: complex
    b2: complex

    @classmethod
    def from_lame(cls, lam: complex, mu: complex) -> 'KernelCoeffs':
        p_modulus = 2 * mu + lam
        if mu == 0 or p_modulus == 0:
            raise SingularParameterError(f"Kernel constants undefined for lambda={lam}, mu={mu}")
        return cls(
            alpha1=(1 / mu + 1 / p_modulus) / 2,
            alpha2=(1 / mu - 1 / p_modulus) / 2,
            b1=mu / p_modulus,
            b2=3 * (mu + lam) / p_modulus,
        )


@dataclass(frozen=True)
class LameParams:
    """Lamé constants of an isotropic material.

    `lam` holds lambda (a Python keyword). Both constants may be complex: the
    plasmonic shell carries a common imaginary part delta > 0.
    """
    lam: complex
    mu: complex

    def __post_init__(self):
        object.__setattr__(self, 'lam', complex(self.lam))
        object.__setattr__(self, 'mu', complex(self.mu))
        if self.mu == 0:
            raise SingularParameterError("mu must be nonzero")
        if 2 * self.mu + self.lam == 0:
            raise SingularParameterError(f"2*mu + lambda vanishes for lambda={self.lam}, mu={self.mu}")

    @cached_property
    def coeffs(self) -> KernelCoeffs:
        return KernelCoeffs.from_lame(self.lam, self.mu)

    @property
    def is_real(self) -> bool:
        return self.lam.imag == 0 and self.mu.imag == 0

    @property
    def is_convex(self) -> bool:
        """Strong convexity: real, mu > 0 and 3*lambda + 2*mu > 0"""
        return self.is_real and self.mu.real > 0 and 3 * self.lam.real + 2 * self.mu.real > 0

    @property
    def loss(self) -> float:
        """Common imaginary part, or nan when lambda and mu differ there"""
        if self.lam.imag != self.mu.imag:
            return float('nan')
        return self.mu.imag

    @property
    def is_lossy(self) -> bool:
        return self.loss > 0

    def plasmonic(self, scale: complex) -> 'LameParams':
        """Material scale*(lambda, mu), e.g. (eps + i*delta) for the shell or c for the core"""
        return LameParams(scale * self.lam, scale * self.mu)

    def as_dict(self) -> dict:
        return {'lambda': self.lam, 'mu': self.mu}


def kernel_coeffs(lame: LameParams) -> KernelCoeffs:
    return lame.coeffs


def _norms(x: np.ndarray, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise SingularityError(f"{what} evaluated at a coincident point")
    return r


def gamma_laplace(x) -> np.ndarray:
    """Laplace fundamental solution -1/(4*pi*|x|); x has shape (..., 3)"""
    r = _norms(x, "Laplace kernel")
    result = -1.0 / (FOUR_PI * r)
    return result if result.ndim else float(result)


def kelvin_matrix(x, lame: LameParams) -> np.ndarray:
    """Kelvin matrix G(x) of shape (..., 3, 3)"""
    x = np.asarray(x, dtype=float)
    r = _norms(x, "Kelvin matrix")
    k = lame.coeffs
    outer = x[..., :, None] * x[..., None, :]
    eye = np.broadcast_to(np.eye(3), outer.shape)
    return (-(k.alpha1 / FOUR_PI) * eye / r[..., None, None]
            - (k.alpha2 / FOUR_PI) * outer / (r ** 3)[..., None, None])


def antisymmetric_kernel(x, y, normal=None) -> np.ndarray:
    """K1(x, y) = (nu d^T - d nu^T) / (4*pi*|d|^3) with d = x - y"""
    x = np.asarray(x, dtype=float)
    d = x - np.asarray(y, dtype=float)
    r = _norms(d, "Traction kernel")
    nu = _radial_normal(x) if normal is None else np.broadcast_to(np.asarray(normal, dtype=float), d.shape)
    num = nu[..., :, None] * d[..., None, :] - d[..., :, None] * nu[..., None, :]
    return num / (FOUR_PI * r ** 3)[..., None, None]


def symmetric_kernel(x, y, lame: LameParams, normal=None) -> np.ndarray:
    """K2(x, y) = b1 (d.nu) I / (4*pi*|d|^3) + b2 (d.nu) d d^T / (4*pi*|d|^5)"""
    x = np.asarray(x, dtype=float)
    d = x - np.asarray(y, dtype=float)
    r = _norms(d, "Traction kernel")
    nu = _radial_normal(x) if normal is None else np.broadcast_to(np.asarray(normal, dtype=float), d.shape)
    k = lame.coeffs
    d_nu = np.sum(d * nu, axis=-1)
    outer = d[..., :, None] * d[..., None, :]
    eye = np.broadcast_to(np.eye(3), outer.shape)
    return (k.b1 * (d_nu / (FOUR_PI * r ** 3))[..., None, None] * eye
            + k.b2 * (d_nu / (FOUR_PI * r ** 5))[..., None, None] * outer)


def traction_kernel(x, y, lame: LameParams) -> np.ndarray:
    """Conormal derivative of G(x - y) in x, for x on an origin-centered sphere"""
    return -lame.coeffs.b1 * antisymmetric_kernel(x, y) + symmetric_kernel(x, y, lame)


def _radial_normal(x: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise SingularityError("Radial normal undefined at the origin")
    return x / r[..., None]
