"""Amplitude damping towards the |0><0| dark state.

The production path applies the exact Kraus solution of the single-qubit
damping master equation; :func:`lindblad_rk4_evolve` integrates the same
equation numerically and is only used to cross-check it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qcore import DensityRegister, _check_targets, embed_unitary

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|


@dataclass(frozen=True)
class DampingParams:
    gamma: float
    duration: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.duration < 0:
            raise ValueError(f"duration must be >= 0, got {self.duration}")

    @property
    def p(self) -> float:
        """Probability that an excitation has decayed after ``duration``."""
        return -math.expm1(-self.gamma * self.duration)


def kraus_operators(p: float) -> tuple[np.ndarray, np.ndarray]:
    k0 = np.array([[1, 0], [0, math.sqrt(1 - p)]], dtype=complex)
    k1 = math.sqrt(p) * SIGMA_MINUS
    return k0, k1


def damp_matrix(rho: np.ndarray, target: int, n: int, p: float) -> np.ndarray:
    """Amplitude-damp qubit ``target`` of an n-qubit density matrix by ``p``.

    Populations of the target move from |1> to |0> with probability ``p``;
    coherences on the target shrink by ``sqrt(1 - p)``.
    """
    if p == 0.0:
        return rho.copy()
    hi, lo = 2**target, 2 ** (n - target - 1)
    keep = math.sqrt(1.0 - p)
    r = rho.reshape(hi, 2, lo, hi, 2, lo)
    out = np.empty_like(r)
    np.add(r[:, 0, :, :, 0, :], p * r[:, 1, :, :, 1, :], out=out[:, 0, :, :, 0, :])
    np.multiply(r[:, 0, :, :, 1, :], keep, out=out[:, 0, :, :, 1, :])
    np.multiply(r[:, 1, :, :, 0, :], keep, out=out[:, 1, :, :, 0, :])
    np.multiply(r[:, 1, :, :, 1, :], 1.0 - p, out=out[:, 1, :, :, 1, :])
    return out.reshape(rho.shape)


def apply_damping(reg: DensityRegister, target: int, params: DampingParams) -> DensityRegister:
    (target,) = _check_targets([target], reg.num_qubits)
    rho = damp_matrix(reg.matrix, target, reg.num_qubits, params.p)
    return DensityRegister(rho, list(reg.labels))


def phenotype_decay_closed_form(a: float, gamma: float, t: float) -> float:
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"population a must lie in [0, 1], got {a}")
    return 1.0 - 2.0 * math.exp(-gamma * t) * (1.0 - a)


def death_time(a: float, gamma: float, epsilon: float) -> float:
    """Age at which <sigma_z> of the phenotype reaches ``1 - epsilon``.

    Returns ``0.0`` when the threshold is already met at birth (this covers
    ``a == 1`` and any ``epsilon >= 2(1 - a)``) and ``math.inf`` when
    ``gamma == 0`` leaves a living individual undamped forever.
    """
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"population a must lie in [0, 1], got {a}")
    if not 0.0 < epsilon < 2.0:
        raise ValueError(f"epsilon must lie in (0, 2), got {epsilon}")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    headroom = 2.0 * (1.0 - a)
    if epsilon >= headroom:
        return 0.0
    if gamma == 0:
        return math.inf
    return math.log(headroom / epsilon) / gamma


@dataclass(frozen=True)
class LindbladSpec:
    """Damping generator with jump operator |0><1| on each of ``targets``."""

    targets: tuple[int, ...]
    gamma: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))


def lindbladian(spec: LindbladSpec, n: int):
    jumps = [embed_unitary(SIGMA_MINUS, [t], n) for t in _check_targets(spec.targets, n)]
    number = [j.conj().T @ j for j in jumps]

    def rhs(rho: np.ndarray) -> np.ndarray:
        out = np.zeros_like(rho)
        for jump, nn in zip(jumps, number):
            out += jump @ rho @ jump.conj().T - 0.5 * (nn @ rho + rho @ nn)
        return spec.gamma * out

    return rhs


def lindblad_rk4_evolve(reg: DensityRegister, spec: LindbladSpec, duration: float, step: float) -> DensityRegister:
    """Classic fixed-step RK4 integration of the damping master equation."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if duration < 0:
        raise ValueError(f"duration must be >= 0, got {duration}")
    rhs = lindbladian(spec, reg.num_qubits)
    rho = reg.matrix.copy()
    n_steps = int(math.ceil(duration / step - 1e-9)) if duration > 0 else 0
    h = duration / n_steps if n_steps else 0.0
    for _ in range(n_steps):
        k1 = rhs(rho)
        k2 = rhs(rho + 0.5 * h * k1)
        k3 = rhs(rho + 0.5 * h * k2)
        k4 = rhs(rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return DensityRegister(rho, list(reg.labels))
