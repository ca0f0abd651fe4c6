"""Exact tensor algebra on 2x2 matrices: isotropic laws, ellipticity constants,
the cofactor shift K, the Gutierrez homogenized tensor and plane-wave analysis.

Matrices are flattened in the ordered basis (e1(x)e1, e1(x)e2, e2(x)e1, e2(x)e2),
so a Tensor4 is a 4x4 array acting on full (not only symmetric) matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigError, HypothesisError
from .logs import log_event

HYPOTHESIS_TOL = 1e-12
UNIT_TOL = 1e-12
SE_SAMPLES = 720
SE_TOL = 1e-10

_INDEX = {(1, 1): 0, (1, 2): 1, (2, 1): 2, (2, 2): 3}

# vec(M) -> vec(cof M): (a, b, c, d) -> (d, -c, -b, a)
COFACTOR = np.array(
    [
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0, 0.0],
        [0.0, -1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
    ]
)

# Orthonormal basis of symmetric matrices, as columns.
SYMMETRIC_BASIS = np.array(
    [
        [1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0 / math.sqrt(2.0)],
        [0.0, 0.0, 1.0 / math.sqrt(2.0)],
        [0.0, 1.0, 0.0],
    ]
)

I2 = np.eye(2)
R_PERP = np.array([[0.0, -1.0], [1.0, 0.0]])
G_DIAG = np.array([[1.0, 0.0], [0.0, -1.0]])
H_SHEAR = np.array([[0.0, 1.0], [1.0, 0.0]])


def _log(level: str, message: str, **fields: Any) -> None:
    log_event(level, "tensors", message, **fields)


def vec(matrix: Any) -> np.ndarray:
    return np.asarray(matrix, dtype=float).reshape(4)


def unvec(values: Any) -> np.ndarray:
    return np.asarray(values, dtype=float).reshape(2, 2)


@dataclass(frozen=True)
class IsotropicPhase:
    lam: float
    mu: float
    rho: float = 1.0

    def __post_init__(self) -> None:
        if not self.mu > 0:
            raise ConfigError("phase.mu", f"shear modulus must be positive, got {self.mu}")
        if not self.lam + 2.0 * self.mu > 0:
            raise ConfigError(
                "phase.lambda",
                f"lambda + 2 mu must be positive, got {self.lam + 2.0 * self.mu}",
            )
        if not self.rho > 0:
            raise ConfigError("phase.rho", f"density must be positive, got {self.rho}")


@dataclass(frozen=True, eq=False)
class Tensor4:
    m: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.array(self.m, dtype=float)
        if matrix.shape != (4, 4):
            raise ValueError(f"Tensor4 needs a 4x4 matrix, got shape {matrix.shape}")
        matrix.setflags(write=False)
        object.__setattr__(self, "m", matrix)

    @classmethod
    def identity(cls) -> Tensor4:
        return cls(np.eye(4))

    @classmethod
    def from_symmetric_form(cls, form: Any) -> Tensor4:
        """Build a minor-symmetric tensor from its quadratic form on the loads
        (e1(x)e1, e2(x)e2, e1(x)e2 + e2(x)e1)."""
        q = np.asarray(form, dtype=float)
        l1111, l2222, l1122 = q[0, 0], q[1, 1], 0.5 * (q[0, 1] + q[1, 0])
        l1212 = q[2, 2] / 4.0
        l1112 = 0.25 * (q[0, 2] + q[2, 0])
        l2212 = 0.25 * (q[1, 2] + q[2, 1])
        m = np.array(
            [
                [l1111, l1112, l1112, l1122],
                [l1112, l1212, l1212, l2212],
                [l1112, l1212, l1212, l2212],
                [l1122, l2212, l2212, l2222],
            ]
        )
        return cls(m)

    def component(self, i: int, j: int, k: int, h: int) -> float:
        return float(self.m[_INDEX[(i, j)], _INDEX[(k, h)]])

    def apply(self, matrix: Any) -> np.ndarray:
        return unvec(self.m @ vec(matrix))

    def form(self, left: Any, right: Any | None = None) -> float:
        """L M . N (Frobenius pairing); N defaults to M."""
        a = vec(left)
        b = a if right is None else vec(right)
        return float(b @ self.m @ a)

    def acoustic(self, k: Any) -> np.ndarray:
        """A_ik = L_ijkh k_j k_h, without normalizing k."""
        kk = np.asarray(k, dtype=float)
        t = self.m.reshape(2, 2, 2, 2)
        return np.einsum("ijkh,j,h->ik", t, kk, kk)

    def symmetric_block(self) -> np.ndarray:
        return SYMMETRIC_BASIS.T @ self.m @ SYMMETRIC_BASIS

    def is_major_symmetric(self, tol: float = 0.0) -> bool:
        return bool(np.max(np.abs(self.m - self.m.T)) <= tol)

    def is_minor_symmetric(self, tol: float = 0.0) -> bool:
        t = self.m.reshape(2, 2, 2, 2)
        left = np.max(np.abs(t - t.transpose(1, 0, 2, 3)))
        right = np.max(np.abs(t - t.transpose(0, 1, 3, 2)))
        return bool(max(left, right) <= tol)

    def to_dict(self) -> dict[str, float]:
        return {
            f"{i}{j}{k}{h}": self.component(i, j, k, h)
            for i in (1, 2)
            for j in (1, 2)
            for k in (1, 2)
            for h in (1, 2)
        }


@dataclass(frozen=True)
class GutierrezModuli:
    lbar: float
    mbar1: float
    mbar2: float
    mbar3: float

    @property
    def nonnegativity_condition(self) -> float:
        """(lbar+2 mbar1)(lbar+2 mbar3) - lbar(lbar+2 mbar2); A(k) >= 0 when this is >= 0."""
        return (self.lbar + 2.0 * self.mbar1) * (self.lbar + 2.0 * self.mbar3) - self.lbar * (
            self.lbar + 2.0 * self.mbar2
        )


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    residual: float


@dataclass(frozen=True, eq=False)
class KSpectrum:
    eigenvalues: tuple[float, float, float]
    multiplicities: tuple[int, int, int]
    eigenbasis: tuple[tuple[np.ndarray, ...], ...]


@dataclass(frozen=True, eq=False)
class PlaneWaveMode:
    omega: float
    eta: np.ndarray
    eigenvalue: float


@dataclass(frozen=True, eq=False)
class DispersionResult:
    k: np.ndarray
    modes: tuple[PlaneWaveMode, PlaneWaveMode]
    zero_mode: bool
    negative_mode: bool
    condition: float | None = None
    notes: list[str] = field(default_factory=list)


def iso_tensor(phase: IsotropicPhase) -> Tensor4:
    """M -> lambda tr(M) I2 + 2 mu sym(M)."""
    lam, mu = phase.lam, phase.mu
    m = np.array(
        [
            [lam + 2.0 * mu, 0.0, 0.0, lam],
            [0.0, mu, mu, 0.0],
            [0.0, mu, mu, 0.0],
            [lam, 0.0, 0.0, lam + 2.0 * mu],
        ]
    )
    return Tensor4(m)


def vse_constant(tensor: Tensor4) -> float:
    return float(np.linalg.eigvalsh(tensor.symmetric_block())[0])


def _rank_one_minimum(tensor: Tensor4, angle_b: float) -> float:
    b = np.array([math.cos(angle_b), math.sin(angle_b)])
    acoustic = tensor.acoustic(b)
    return float(np.linalg.eigvalsh(0.5 * (acoustic + acoustic.T))[0])


def se_constant(tensor: Tensor4, *, samples: int = SE_SAMPLES, tol: float = SE_TOL) -> float:
    """Twice the minimum of L(a(x)b).(a(x)b) over unit a, b.

    The factor 2 puts the value on the scale of vse_constant; isotropic tensors give
    2 min{mu, lambda + 2 mu}.
    """
    angles = np.linspace(0.0, math.pi, samples, endpoint=False)
    a = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    rank_one = np.einsum("pi,qj->pqij", a, a).reshape(samples, samples, 4)
    values = np.einsum("pqi,ij,pqj->pq", rank_one, tensor.m, rank_one)
    _, qbest = np.unravel_index(int(np.argmin(values)), values.shape)
    best = float(values.min())

    step = math.pi / samples
    center = float(angles[qbest])
    refined = minimize_scalar(
        lambda angle: _rank_one_minimum(tensor, angle),
        bounds=(center - step, center + step),
        method="bounded",
        options={"xatol": tol},
    )
    best = min(best, _rank_one_minimum(tensor, center), float(refined.fun))
    return 2.0 * best


def k_transform(tensor: Tensor4, mu1: float) -> Tensor4:
    """K M = L M + 2 mu1 cof(M)."""
    return Tensor4(tensor.m + 2.0 * mu1 * COFACTOR)


def k_spectrum(phase: IsotropicPhase, mu1: float) -> KSpectrum:
    eigenvalues = (
        2.0 * (phase.lam + phase.mu + mu1),
        2.0 * mu1,
        2.0 * (phase.mu - mu1),
    )
    return KSpectrum(
        eigenvalues=eigenvalues,
        multiplicities=(1, 1, 2),
        eigenbasis=((I2.copy(),), (R_PERP.copy(),), (G_DIAG.copy(), H_SHEAR.copy())),
    )


def check_gutierrez_hypotheses(
    p1: IsotropicPhase, p2: IsotropicPhase, *, tol: float = HYPOTHESIS_TOL
) -> list[HypothesisCheck]:
    shift = -p2.lam - p2.mu
    return [
        HypothesisCheck("0 < -lambda2 - mu2", shift > 0, shift),
        HypothesisCheck("-lambda2 - mu2 = mu1", abs(shift - p1.mu) <= tol, abs(shift - p1.mu)),
        HypothesisCheck("mu1 < mu2", p1.mu < p2.mu, p2.mu - p1.mu),
        HypothesisCheck("lambda1 + mu1 > 0", p1.lam + p1.mu > 0, p1.lam + p1.mu),
    ]


def project_gutierrez(p1: IsotropicPhase, p2: IsotropicPhase) -> IsotropicPhase:
    """Phase 2 moved onto the constraint -lambda2 - mu2 = mu1."""
    return IsotropicPhase(lam=-p1.mu - p2.mu, mu=p2.mu, rho=p2.rho)


def gutierrez_tensor(p1: IsotropicPhase, p2: IsotropicPhase) -> tuple[Tensor4, GutierrezModuli]:
    checks = check_gutierrez_hypotheses(p1, p2)
    failed = [check.name for check in checks if not check.passed]
    if failed:
        _log("warning", "gutierrez_hypotheses_failed", violated=failed)
        raise HypothesisError(failed, "Gutierrez hypotheses violated: " + ", ".join(failed))

    l1111 = 2.0 / (1.0 / (p1.lam + 2.0 * p1.mu) + 1.0 / (p2.lam + 2.0 * p2.mu))
    l1212 = 2.0 * p1.mu * p2.mu / (p1.mu + p2.mu)
    l1122 = -2.0 * p1.mu
    m = np.array(
        [
            [l1111, 0.0, 0.0, l1122],
            [0.0, l1212, l1212, 0.0],
            [0.0, l1212, l1212, 0.0],
            [l1122, 0.0, 0.0, 0.0],
        ]
    )
    moduli = GutierrezModuli(
        lbar=l1122,
        mbar1=0.5 * (l1111 - l1122),
        mbar2=l1212,
        mbar3=p1.mu,
    )
    return Tensor4(m), moduli


def _check_unit(k: Any) -> np.ndarray:
    kk = np.asarray(k, dtype=float).reshape(2)
    if abs(float(np.linalg.norm(kk)) - 1.0) > UNIT_TOL:
        raise ConfigError("k", f"wavevector must have unit length, got |k|={np.linalg.norm(kk)}")
    return kk


def _acoustic_matrix(moduli: GutierrezModuli, k: Any) -> np.ndarray:
    k1, k2 = (float(value) for value in np.asarray(k, dtype=float).reshape(2))
    lbar, m1, m2, m3 = moduli.lbar, moduli.mbar1, moduli.mbar2, moduli.mbar3
    off = (lbar + m2) * k1 * k2
    return np.array(
        [
            [(lbar + 2.0 * m1) * k1**2 + m2 * k2**2, off],
            [off, (lbar + 2.0 * m3) * k2**2 + m2 * k1**2],
        ]
    )


def acoustic_tensor(moduli: GutierrezModuli, k: Any) -> np.ndarray:
    return _acoustic_matrix(moduli, _check_unit(k))


def _plane_waves(acoustic: np.ndarray, rho_bar: float, k: np.ndarray) -> DispersionResult:
    if not rho_bar > 0:
        raise ConfigError("rho_bar", f"effective density must be positive, got {rho_bar}")
    eigenvalues, vectors = np.linalg.eigh(acoustic)
    scale = float(np.linalg.norm(acoustic, 2))
    modes = []
    for index in range(2):
        eta = vectors[:, index]
        if eta[int(np.argmax(np.abs(eta)))] < 0:
            eta = -eta
        value = float(eigenvalues[index])
        omega = math.sqrt(max(value, 0.0) / rho_bar)
        modes.append(PlaneWaveMode(omega=omega, eta=eta, eigenvalue=value))

    notes: list[str] = []
    zero_mode = abs(modes[0].eigenvalue) < 1e-12 * scale or scale == 0.0
    negative_mode = modes[0].eigenvalue < -1e-12 * scale
    if negative_mode:
        notes.append("negative eigenvalue: acoustic tensor is not nonnegative")
        _log("warning", "negative_acoustic_eigenvalue", k=k.tolist(), value=modes[0].eigenvalue)
    if zero_mode:
        notes.append("zero mode")
    return DispersionResult(
        k=k,
        modes=(modes[0], modes[1]),
        zero_mode=bool(zero_mode and not negative_mode),
        negative_mode=bool(negative_mode),
        notes=notes,
    )


def dispersion(moduli: GutierrezModuli, rho_bar: float, k: Any) -> DispersionResult:
    kk = _check_unit(k)
    result = _plane_waves(_acoustic_matrix(moduli, kk), rho_bar, kk)
    return DispersionResult(
        k=result.k,
        modes=result.modes,
        zero_mode=result.zero_mode,
        negative_mode=result.negative_mode,
        condition=moduli.nonnegativity_condition,
        notes=result.notes,
    )


def tensor_dispersion(tensor: Tensor4, rho_bar: float, k: Any) -> DispersionResult:
    kk = _check_unit(k)
    acoustic = tensor.acoustic(kk)
    return _plane_waves(0.5 * (acoustic + acoustic.T), rho_bar, kk)


def max_wave_speed(tensor: Tensor4, rho: float, *, directions: int = 64) -> float:
    """sqrt(max eigenvalue of A(k) / rho) over evenly spaced unit k."""
    angles = np.linspace(0.0, math.pi, directions, endpoint=False)
    top = 0.0
    for angle in angles:
        acoustic = tensor.acoustic((math.cos(angle), math.sin(angle)))
        top = max(top, float(np.linalg.eigvalsh(0.5 * (acoustic + acoustic.T))[-1]))
    return math.sqrt(top / rho)
