"""Dense multi-qubit density-matrix arithmetic.

Qubit 0 is the most significant bit of a basis-state index, so a register of
``n`` qubits reshaped to ``(2,) * n`` has qubit ``q`` on axis ``q``.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

GENOTYPE = "genotype"
PHENOTYPE = "phenotype"

DEFAULT_QUBIT_CAP = 12

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)
KET0_PROJ = np.array([[1, 0], [0, 0]], dtype=complex)


class CapacityError(RuntimeError):
    """Raised when growing a register would exceed its qubit cap."""


@dataclass
class DensityRegister:
    """Density matrix over an ordered list of labelled qubits.

    ``labels[q]`` is ``(owner_id, role)`` for qubit ``q``; the owner is the
    individual holding the qubit and the role is ``"genotype"`` or
    ``"phenotype"``. Anonymous qubits may carry ``None`` as label.
    """

    matrix: np.ndarray
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        dim = self.matrix.shape[0]
        if self.matrix.ndim != 2 or self.matrix.shape[1] != dim or dim < 1:
            raise ValueError(f"density matrix must be square, got {self.matrix.shape}")
        n = dim.bit_length() - 1
        if 1 << n != dim:
            raise ValueError(f"matrix dimension {dim} is not a power of two")
        if not self.labels:
            self.labels = [None] * n
        if len(self.labels) != n:
            raise ValueError(f"{len(self.labels)} labels for {n} qubits")
        self.labels = list(self.labels)

    @property
    def num_qubits(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def copy(self) -> DensityRegister:
        return DensityRegister(self.matrix.copy(), list(self.labels))

    def index_of(self, owner, role: str) -> int:
        """Position of the qubit labelled ``(owner, role)``."""
        try:
            return self.labels.index((owner, role))
        except ValueError:
            raise KeyError(f"no qubit labelled {(owner, role)!r}") from None

    @classmethod
    def empty(cls) -> DensityRegister:
        """The zero-qubit register (scalar 1); the neutral element of growth."""
        return cls(np.ones((1, 1), dtype=complex), [])

    @classmethod
    def ground(cls, num_qubits: int, labels=None) -> DensityRegister:
        dim = 2**num_qubits
        rho = np.zeros((dim, dim), dtype=complex)
        rho[0, 0] = 1.0
        return cls(rho, list(labels) if labels is not None else [None] * num_qubits)


@dataclass(frozen=True)
class Diagnostics:
    hermiticity_defect: float
    trace_defect: float
    min_eigenvalue: float | None = None

    def ok(self, tol: float = 1e-10, psd_tol: float = 1e-8) -> bool:
        if self.hermiticity_defect > tol or self.trace_defect > tol:
            return False
        return self.min_eigenvalue is None or self.min_eigenvalue >= -psd_tol


def kron(a, b) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def _check_targets(targets: Sequence[int], n: int, k: int | None = None) -> list[int]:
    targets = [int(t) for t in targets]
    if k is not None and len(targets) != k:
        raise ValueError(f"operator acts on {k} qubits but {len(targets)} targets given")
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate targets in {targets}")
    for t in targets:
        if not 0 <= t < n:
            raise ValueError(f"target {t} out of range for {n} qubits")
    return targets


def _num_qubits_of(op: np.ndarray) -> int:
    d = op.shape[0]
    if op.ndim != 2 or op.shape[1] != d:
        raise ValueError(f"operator must be square, got {op.shape}")
    k = d.bit_length() - 1
    if 1 << k != d:
        raise ValueError(f"operator dimension {d} is not a power of two")
    return k


def _apply_left(tensor: np.ndarray, op: np.ndarray, axes: list[int]) -> np.ndarray:
    """Contract ``op`` into the given axes of a ``(2,)*m`` tensor."""
    k = len(axes)
    front = np.moveaxis(tensor, axes, range(k))
    rest = front.shape[k:]
    out = (op @ front.reshape(2**k, -1)).reshape((2,) * k + rest)
    return np.moveaxis(out, range(k), axes)


def embed_unitary(u, targets: Sequence[int], n: int) -> np.ndarray:
    """Full ``2**n`` operator acting as ``u`` on ``targets`` (in that order)."""
    u = np.asarray(u, dtype=complex)
    k = _num_qubits_of(u)
    targets = _check_targets(targets, n, k)
    eye = np.eye(2**n, dtype=complex).reshape((2,) * (2 * n))
    return _apply_left(eye, u, targets).reshape(2**n, 2**n)


def conjugate(rho: np.ndarray, op: np.ndarray, targets: list[int], n: int) -> np.ndarray:
    """``op rho op^dagger`` with ``op`` acting on ``targets`` of an n-qubit matrix."""
    t = rho.reshape((2,) * (2 * n))
    t = _apply_left(t, op, targets)
    t = _apply_left(t, op.conj(), [n + q for q in targets])
    return t.reshape(rho.shape)


def apply_unitary(reg: DensityRegister, u, targets: Sequence[int]) -> DensityRegister:
    u = np.asarray(u, dtype=complex)
    k = _num_qubits_of(u)
    targets = _check_targets(targets, reg.num_qubits, k)
    rho = conjugate(reg.matrix, u, targets, reg.num_qubits)
    return DensityRegister(rho, list(reg.labels))


def append_qubits(reg: DensityRegister, k: int, labels=None, cap: int | None = None) -> DensityRegister:
    """Tensor ``k`` fresh ``|0><0|`` ancillas onto the end of the register."""
    if k < 0:
        raise ValueError("cannot append a negative number of qubits")
    labels = list(labels) if labels is not None else [None] * k
    if len(labels) != k:
        raise ValueError(f"{len(labels)} labels for {k} new qubits")
    if cap is not None and reg.num_qubits + k > cap:
        raise CapacityError(f"register would hold {reg.num_qubits + k} qubits, cap is {cap}")
    if k == 0:
        return reg.copy()
    dim = reg.dim
    grown = np.zeros((dim << k, dim << k), dtype=complex)
    # |0...0> ancillas occupy the lowest bits, so rho lands on a strided sub-lattice
    grown[:: 1 << k, :: 1 << k] = reg.matrix
    return DensityRegister(grown, reg.labels + labels)


def partial_trace(reg: DensityRegister, keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix over ``keep``, in the listed order."""
    n = reg.num_qubits
    keep = _check_targets(keep, n)
    if not keep:
        raise ValueError("keep must list at least one qubit")
    t = reg.matrix.reshape((2,) * (2 * n))
    row = list(range(n))
    col = list(range(n, 2 * n))
    for q in range(n):
        if q not in keep:
            col[q] = row[q]
    out = [row[q] for q in keep] + [col[q] for q in keep]
    reduced = np.einsum(t, row + col, out)
    d = 2 ** len(keep)
    return reduced.reshape(d, d)


def is_hermitian(op: np.ndarray, tol: float = 1e-10) -> bool:
    return bool(np.max(np.abs(op - op.conj().T)) <= tol)


def expect(reg: DensityRegister, obs, targets: Sequence[int]) -> float:
    """``Tr(rho O)`` for a Hermitian observable on ``targets``."""
    obs = np.asarray(obs, dtype=complex)
    k = _num_qubits_of(obs)
    targets = _check_targets(targets, reg.num_qubits, k)
    if not is_hermitian(obs):
        raise ValueError("observable is not Hermitian")
    value = np.trace(partial_trace(reg, targets) @ obs)
    if abs(value.imag) > 1e-9:
        raise ArithmeticError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def z_expectation(reg: DensityRegister, qubit: int) -> float:
    """<sigma_z> of one qubit, read off the diagonal."""
    n = reg.num_qubits
    probs = reg.matrix.diagonal().real.reshape(2**qubit, 2, 2 ** (n - qubit - 1))
    return float(probs[:, 0, :].sum() - probs[:, 1, :].sum())


def z_expectations(reg: DensityRegister) -> np.ndarray:
    """<sigma_z> of every qubit at once."""
    n = reg.num_qubits
    probs = reg.matrix.diagonal().real.reshape((2,) * n)
    out = np.empty(n)
    for q in range(n):
        marginal = probs.sum(axis=tuple(a for a in range(n) if a != q))
        out[q] = marginal[0] - marginal[1]
    return out


def sigma_x_all(reg: DensityRegister) -> float:
    """<sigma_x tensor-power n> over every register qubit.

    ``X^{(n)}`` maps basis state ``j`` to its complement, so the trace is the
    sum of the anti-diagonal.
    """
    if reg.num_qubits == 0:
        return 1.0
    return float(np.fliplr(reg.matrix).diagonal().sum().real)


def validate(reg: DensityRegister, check_psd: bool = False) -> Diagnostics:
    rho = reg.matrix
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    trace = float(abs(np.trace(rho) - 1.0))
    min_eig = None
    if check_psd:
        hermitian_part = (rho + rho.conj().T) / 2
        min_eig = float(np.linalg.eigvalsh(hermitian_part)[0])
    return Diagnostics(herm, trace, min_eig)


def random_density_matrix(num_qubits: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Ginibre-distributed mixed state; full rank unless ``rank`` is given."""
    dim = 2**num_qubits
    g = rng.normal(size=(dim, rank or dim)) + 1j * rng.normal(size=(dim, rank or dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
