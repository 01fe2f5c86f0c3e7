"""Brute-force checks for the closed forms: sphere quadrature, finite differences."""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable, Optional, Tuple

import numpy as np
from scipy.special import roots_legendre

from src.errors import (AccuracyWarning, ConditioningWarning, DomainError, NonEigenfunctionError,
                        warn)
from src.harmonics import ModeFamily, ModeIndex, PointLike, positions, trace_mode
from src.kelvin import FOUR_PI, LameParams, kelvin_matrix, traction_kernel

if TYPE_CHECKING:
    from src.transmission import ShellGeometry

logger = logging.getLogger(__name__)

Field = Callable[[np.ndarray], np.ndarray]

DEFAULT_LAME = LameParams(1.0, 1.0)


def pole_frame(pole) -> np.ndarray:
    """Rotation whose third column is the unit vector along pole"""
    e3 = np.asarray(pole, dtype=float)
    e3 = e3 / np.linalg.norm(e3)
    helper = np.array([1.0, 0.0, 0.0]) if abs(e3[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = helper - helper.dot(e3) * e3
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    return np.column_stack([e1, e2, e3])


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre x trapezoid product rule on a sphere.

    `sphere_nodes` uses Gauss-Legendre in cos(theta) and is exact for
    spherical polynomials of degree <= 2*n_theta - 1. `polar_nodes` uses
    Gauss-Legendre in theta itself about a chosen pole, for integrands
    singular at that pole.
    """
    n_theta: int = 64
    n_phi: int = 128
    rotation: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.n_theta < 1:
            raise DomainError(f"n_theta must be >= 1, got {self.n_theta}")
        if self.n_phi < 2 * self.n_theta:
            raise DomainError(f"n_phi={self.n_phi} must be at least 2*n_theta={2 * self.n_theta}")

    @property
    def size(self) -> int:
        return self.n_theta * self.n_phi

    def _phi(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi

    def _place(self, local: np.ndarray, frame: Optional[np.ndarray]) -> np.ndarray:
        return local if frame is None else local @ frame.T

    def sphere_nodes(self, radius: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
        t, w = roots_legendre(self.n_theta)
        phi = self._phi()
        sin_t = np.sqrt(1.0 - t ** 2)
        local = np.stack([
            np.outer(sin_t, np.cos(phi)),
            np.outer(sin_t, np.sin(phi)),
            np.outer(t, np.ones_like(phi)),
        ], axis=-1).reshape(-1, 3)
        weights = np.repeat(w * (2.0 * np.pi / self.n_phi) * radius ** 2, self.n_phi)
        return radius * self._place(local, self.rotation), weights

    def polar_nodes(self, pole, radius: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
        t, w = roots_legendre(self.n_theta)
        theta = 0.5 * np.pi * (t + 1.0)
        phi = self._phi()
        sin_t = np.sin(theta)
        local = np.stack([
            np.outer(sin_t, np.cos(phi)),
            np.outer(sin_t, np.sin(phi)),
            np.outer(np.cos(theta), np.ones_like(phi)),
        ], axis=-1).reshape(-1, 3)
        weights = np.repeat(0.5 * np.pi * w * sin_t * (2.0 * np.pi / self.n_phi) * radius ** 2, self.n_phi)
        return radius * self._place(local, pole_frame(pole)), weights

    def rotated_to(self, pole) -> 'QuadratureRule':
        return replace(self, rotation=pole_frame(pole))

    def halved(self) -> 'QuadratureRule':
        n_theta = max(self.n_theta // 2, 1)
        return replace(self, n_theta=n_theta, n_phi=max(self.n_phi // 2, 2 * n_theta))


@dataclass(frozen=True)
class FDStencil:
    h: float = 1e-4
    order: int = 2

    def __post_init__(self):
        if not self.h > 0:
            raise DomainError(f"Finite-difference step must be positive, got {self.h}")
        if self.order not in (2, 4):
            raise DomainError(f"Stencil order must be 2 or 4, got {self.order}")

    @property
    def first(self) -> Tuple[Tuple[int, float], ...]:
        """(offset, weight) pairs of the first-derivative stencil, before dividing by h"""
        if self.order == 2:
            return ((-1, -0.5), (1, 0.5))
        return ((-2, 1 / 12), (-1, -8 / 12), (1, 8 / 12), (2, -1 / 12))

    @property
    def second(self) -> Tuple[Tuple[int, float], ...]:
        if self.order == 2:
            return ((-1, 1.0), (0, -2.0), (1, 1.0))
        return ((-2, -1 / 12), (-1, 16 / 12), (0, -30 / 12), (1, 16 / 12), (2, -1 / 12))

    def check_conditioning(self, length: float):
        floor = 1e-2 * np.finfo(float).eps ** (1.0 / (self.order + 2)) * length
        if self.h < floor:
            warn(f"Step h={self.h:g} is below the roundoff floor {floor:.3g} for order {self.order}",
                 ConditioningWarning)


@dataclass(frozen=True)
class LameResidual:
    absolute: float
    relative: float
    scale: float


@dataclass(frozen=True)
class NPEstimate:
    mode: ModeIndex
    value: complex
    residual: float
    samples: int


def fsum_complex(values: np.ndarray) -> np.ndarray:
    """Compensated sum over the first axis, in fixed node order"""
    values = np.asarray(values, dtype=complex)
    flat = values.reshape(values.shape[0], -1)
    out = np.array([complex(math.fsum(col.real), math.fsum(col.imag)) for col in flat.T])
    return out.reshape(values.shape[1:]) if values.ndim > 1 else out[0]


def quad_surface_integral(f: Field, rule: QuadratureRule, radius: float = 1.0):
    points, weights = rule.sphere_nodes(radius)
    values = np.asarray(f(points))
    weighted = values * weights.reshape((-1,) + (1,) * (values.ndim - 1))
    total = fsum_complex(weighted)
    return total if np.ndim(total) else complex(total)


def _target(x: PointLike) -> Tuple[np.ndarray, float]:
    x = positions(x)
    r0 = float(np.linalg.norm(x))
    if r0 == 0:
        raise DomainError("Target point must lie on a sphere of positive radius")
    return x, r0


def _density(idx: ModeIndex, lame: LameParams, y: np.ndarray) -> np.ndarray:
    return trace_mode(idx, lame, y / np.linalg.norm(y, axis=-1, keepdims=True))


def _scalar_sl(idx, x, r0, lame, rule) -> np.ndarray:
    y, w = rule.polar_nodes(x, r0)
    gamma = -1.0 / (FOUR_PI * np.linalg.norm(x - y, axis=-1))
    return fsum_complex((w * gamma)[:, None] * _density(idx, lame, y))


def _with_richardson(compute, rule: QuadratureRule, what: str, tol: float):
    value = compute(rule)
    coarse = compute(rule.halved())
    scale = max(float(np.linalg.norm(value)), 1e-300)
    estimate = float(np.linalg.norm(value - coarse)) / scale
    if estimate > tol:
        warn(f"{what}: Richardson error estimate {estimate:.2e} exceeds {tol:g}", AccuracyWarning)
    return value


def quad_scalar_sl(idx: ModeIndex, x: PointLike, rule: QuadratureRule,
                   lame: LameParams = DEFAULT_LAME, warn_tol: float = 1e-6) -> np.ndarray:
    """Scalar single layer of a vector trace mode at x on its sphere"""
    x, r0 = _target(x)
    return _with_richardson(lambda q: _scalar_sl(idx, x, r0, lame, q), rule,
                            f"scalar single layer of {idx}", warn_tol)


def _elastic_sl(idx, x, r0, lame, rule) -> np.ndarray:
    y, w = rule.polar_nodes(x, r0)
    g = kelvin_matrix(x - y, lame)
    return fsum_complex(w[:, None] * np.einsum('kij,kj->ki', g, _density(idx, lame, y)))


def quad_elastic_sl(idx: ModeIndex, x: PointLike, lame: LameParams, rule: QuadratureRule,
                    warn_tol: float = 1e-6) -> np.ndarray:
    x, r0 = _target(x)
    return _with_richardson(lambda q: _elastic_sl(idx, x, r0, lame, q), rule,
                            f"elastic single layer of {idx}", warn_tol)


def _curl_grad(idx, x, r0, lame, rule) -> np.ndarray:
    # the azimuthally symmetric rule cancels the odd 1/|x-y|^2 part ring by ring
    y, w = rule.polar_nodes(x, r0)
    d = x - y
    r = np.linalg.norm(d, axis=-1)
    nu_y = y / r0
    phi = _density(idx, lame, y)
    d_phi = np.einsum('kc,kc->k', d, phi)
    nu_phi = np.einsum('kc,kc->k', nu_y, phi)
    d_nu = np.einsum('kc,kc->k', d, nu_y)
    integrand = nu_y * d_phi[:, None] - d * nu_phi[:, None] - phi * d_nu[:, None]
    return fsum_complex((w / (FOUR_PI * r ** 3))[:, None] * integrand)


def quad_curl_grad(idx: ModeIndex, x: PointLike, lame: LameParams, rule: QuadratureRule) -> np.ndarray:
    """Principal value of curl S[nu x phi] - grad S[nu . phi] at x on the sphere"""
    x, r0 = _target(x)
    return _curl_grad(idx, x, r0, lame, rule)


def _np_decomposed(idx, x, r0, lame, rule) -> np.ndarray:
    b1 = lame.coeffs.b1
    return (-(3 * lame.mu / r0) * _elastic_sl(idx, x, r0, lame, rule)
            + (1.5 + b1 / 2) / r0 * _scalar_sl(idx, x, r0, lame, rule)
            - b1 * _curl_grad(idx, x, r0, lame, rule))


def _np_kernel(idx, x, r0, lame, rule) -> np.ndarray:
    y, w = rule.polar_nodes(x, r0)
    k = traction_kernel(np.broadcast_to(x, y.shape), y, lame)
    return fsum_complex(w[:, None] * np.einsum('kij,kj->ki', k, _density(idx, lame, y)))


NP_PATHS = {'decomposed': _np_decomposed, 'kernel': _np_kernel}


def sample_directions(count: int) -> np.ndarray:
    """Golden-spiral unit vectors, deterministic and off the poles"""
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    s = np.sqrt(1.0 - z ** 2)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=-1)


def quad_np_apply(idx: ModeIndex, lame: LameParams, rule: QuadratureRule, r0: float = 1.0,
                  samples: int = 6, path: str = 'decomposed', tol: float = 1e-6) -> NPEstimate:
    """Estimate the N-P eigenvalue of a trace mode by quadrature at sample points"""
    if path not in NP_PATHS:
        raise DomainError(f"Unknown N-P quadrature path {path!r}; choose from {sorted(NP_PATHS)}")
    apply = NP_PATHS[path]
    points = r0 * sample_directions(samples)
    phi = trace_mode(idx, lame, points / r0)
    k_phi = np.stack([apply(idx, x, r0, lame, rule) for x in points])
    norm2 = float(np.sum(np.abs(phi) ** 2))
    if norm2 == 0:
        raise NonEigenfunctionError(f"{idx} vanishes at every sample point")
    value = complex(np.sum(np.conj(phi) * k_phi) / norm2)
    residual = float(np.sqrt(np.sum(np.abs(k_phi - value * phi) ** 2) / norm2))
    logger.debug(f"N-P quadrature of {idx} ({path}): {value:.12g}, residual {residual:.2e}")
    if residual > tol:
        raise NonEigenfunctionError(
            f"{idx} is not reproduced as an eigenfunction: residual {residual:.2e} > {tol:g}")
    return NPEstimate(idx, value, residual, samples)


def _offset_eval(u: Field, x: np.ndarray, offset: np.ndarray) -> np.ndarray:
    return np.asarray(u(x + offset), dtype=complex)


def fd_jacobian(u: Field, x, stencil: FDStencil) -> np.ndarray:
    """J[..., i, j] = d u_i / d x_j"""
    x = np.asarray(x, dtype=float)
    h = stencil.h
    cols = []
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        cols.append(sum(w * _offset_eval(u, x, k * e) for k, w in stencil.first) / h)
    return np.stack(cols, axis=-1)


def fd_hessian(u: Field, x, stencil: FDStencil) -> np.ndarray:
    """H[..., i, j, k] = d^2 u_i / dx_j dx_k"""
    x = np.asarray(x, dtype=float)
    h = stencil.h
    eye = np.eye(3) * h
    base = _offset_eval(u, x, np.zeros(3))
    hess = np.zeros(base.shape + (3, 3), dtype=complex)
    for j in range(3):
        hess[..., j, j] = sum(w * _offset_eval(u, x, k * eye[j]) for k, w in stencil.second) / h ** 2
        for k in range(j + 1, 3):
            mixed = sum(wa * wb * _offset_eval(u, x, a * eye[j] + b * eye[k])
                        for a, wa in stencil.first for b, wb in stencil.first) / h ** 2
            hess[..., j, k] = mixed
            hess[..., k, j] = mixed
    return hess


def fd_lame_operator(u: Field, lame: LameParams, x, stencil: FDStencil) -> np.ndarray:
    """mu * Laplacian(u) + (lambda + mu) * grad(div u), by central differences"""
    hess = fd_hessian(u, x, stencil)
    laplacian = np.einsum('...ijj->...i', hess)
    grad_div = np.einsum('...jji->...i', hess)
    return lame.mu * laplacian + (lame.lam + lame.mu) * grad_div


def fd_lame_residual(u: Field, lame: LameParams, x, stencil: FDStencil) -> LameResidual:
    """|L u(x)| and its size relative to the field's local derivative scale"""
    x = positions(x)
    length = max(float(np.linalg.norm(x)), 100 * stencil.h)
    stencil.check_conditioning(length)
    absolute = float(np.linalg.norm(fd_lame_operator(u, lame, x, stencil)))
    hess = fd_hessian(u, x, stencil)
    jac = fd_jacobian(u, x, stencil)
    value = _offset_eval(u, x, np.zeros(3))
    scale = (abs(lame.mu) + abs(lame.lam + lame.mu)) * (
        np.linalg.norm(hess) + np.linalg.norm(jac) / length + np.linalg.norm(value) / length ** 2)
    relative = absolute / scale if scale > 0 else absolute
    return LameResidual(absolute, float(relative), float(scale))


def traction_from_jacobian(jac: np.ndarray, lame: LameParams, normal: np.ndarray) -> np.ndarray:
    div = np.trace(jac, axis1=-2, axis2=-1)
    strain2 = jac + np.swapaxes(jac, -1, -2)
    return (lame.lam * div[..., None] * normal
            + lame.mu * np.einsum('...ij,...j->...i', strain2, normal))


def fd_traction(u: Field, lame: LameParams, p: PointLike, stencil: FDStencil,
                normal: Optional[np.ndarray] = None) -> np.ndarray:
    """lambda (div u) nu + mu (grad u + grad u^T) nu at p"""
    x = positions(p)
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    nu = x / r if normal is None else np.asarray(normal, dtype=float)
    stencil.check_conditioning(float(np.max(r)))
    return traction_from_jacobian(fd_jacobian(u, x, stencil), lame, nu)


def quad_energy_shell(u: Field, lame: LameParams, delta: float, geom: 'ShellGeometry',
                      rule: QuadratureRule, n_radial: int = 24,
                      stencil: Optional[FDStencil] = None,
                      jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> float:
    """(delta/2) * integral over the shell of lambda|div u|^2 + 2 mu |sym grad u|^2.

    Uses `jacobian` when given, otherwise order-4 finite differences of u.
    """
    if n_radial < 1:
        raise DomainError(f"n_radial must be >= 1, got {n_radial}")
    if stencil is None:
        stencil = FDStencil(h=1e-3 * geom.r_e, order=4)
    t, w_r = roots_legendre(n_radial)
    half = 0.5 * (geom.r_e - geom.r_i)
    radii = geom.r_i + half * (t + 1.0)
    unit, w_sphere = rule.sphere_nodes(1.0)
    points = (radii[:, None, None] * unit[None, :, :]).reshape(-1, 3)
    weights = ((half * w_r * radii ** 2)[:, None] * w_sphere[None, :]).reshape(-1)
    jac = jacobian(points) if jacobian is not None else fd_jacobian(u, points, stencil)
    div = np.trace(jac, axis1=-2, axis2=-1)
    sym = 0.5 * (jac + np.swapaxes(jac, -1, -2))
    density = (lame.lam.real * np.abs(div) ** 2
               + 2 * lame.mu.real * np.sum(np.abs(sym) ** 2, axis=(-2, -1)))
    total = math.fsum(weights * density)
    return 0.5 * delta * total
