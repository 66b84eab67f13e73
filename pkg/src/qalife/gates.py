"""Unitaries of the model: cloning, mutation, imperfect cloning, interaction."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .qcore import IDENTITY_2

K1 = np.array([[1, 0], [0, 0]], dtype=complex)  # |0><0|
K2 = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|
K3 = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|
K4 = np.array([[0, 0], [0, 1]], dtype=complex)  # |1><1|


class GateName(Enum):
    CNOT = "CNOT"
    MUTATION_M = "MutationM"
    IMPERFECT_CLONE = "ImperfectClone"
    INTERACTION_UI = "InteractionUI"
    TOFFOLI = "Toffoli"


ARITY = {
    GateName.CNOT: 2,
    GateName.MUTATION_M: 1,
    GateName.IMPERFECT_CLONE: 2,
    GateName.INTERACTION_UI: 4,
    GateName.TOFFOLI: 3,
}


@dataclass(frozen=True)
class GateSpec:
    name: GateName
    theta: float | None = None

    def __post_init__(self):
        needs_theta = self.name in (GateName.MUTATION_M, GateName.IMPERFECT_CLONE)
        if needs_theta and self.theta is None:
            raise ValueError(f"{self.name.value} requires theta")
        if not needs_theta and self.theta is not None:
            raise ValueError(f"{self.name.value} takes no theta")

    @property
    def arity(self) -> int:
        return ARITY[self.name]

    def matrix(self) -> np.ndarray:
        if self.name is GateName.CNOT:
            return cnot()
        if self.name is GateName.MUTATION_M:
            return mutation_m(self.theta)
        if self.name is GateName.IMPERFECT_CLONE:
            return imperfect_clone(self.theta)
        if self.name is GateName.INTERACTION_UI:
            return interaction_ui()
        return toffoli()


def _kron(*ops) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def cnot() -> np.ndarray:
    """CNOT with the first qubit as control."""
    return _kron(K1, IDENTITY_2) + _kron(K4, np.array([[0, 1], [1, 0]], dtype=complex))


def mutation_m(theta: float) -> np.ndarray:
    """Real reflection ``[[cos, sin], [sin, -cos]]``; Hermitian and involutive."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [s, -c]], dtype=complex)


def imperfect_clone(theta: float) -> np.ndarray:
    """Copy-error cloning gate; equals CNOT at theta=0 and the identity at theta=pi."""
    flip = np.array([[-1, 1], [1, -1]], dtype=complex)
    return np.eye(4, dtype=complex) + 0.5 * _kron(K4, flip) * (np.exp(1j * theta) + 1)


def interaction_ui() -> np.ndarray:
    """Four-qubit gate on (g1, p1, g2, p2): swap p1 and p2 when g1 != g2."""
    return _interaction_ui().copy()


@lru_cache(maxsize=1)
def _interaction_ui() -> np.ndarray:
    i2 = IDENTITY_2
    g1_zero = (
        _kron(i2, K1, i2)
        + _kron(K1, K4, K1)
        + _kron(K4, K4, K4)
        + _kron(K2, K4, K3)
        + _kron(K3, K4, K2)
    )
    g1_one = (
        _kron(i2, K4, i2)
        + _kron(K1, K1, K1)
        + _kron(K4, K1, K4)
        + _kron(K2, K1, K3)
        + _kron(K3, K1, K2)
    )
    return _kron(K1, g1_zero) + _kron(K4, g1_one)


def toffoli() -> np.ndarray:
    """CCNOT with the first two qubits as controls."""
    u = np.eye(8, dtype=complex)
    u[6:, 6:] = [[0, 1], [1, 0]]
    return u


def permutation_matrix(mapping) -> np.ndarray:
    """Matrix ``P`` with ``P|i> = |mapping[i]>``."""
    d = len(mapping)
    p = np.zeros((d, d), dtype=complex)
    p[list(mapping), list(range(d))] = 1.0
    return p


# Relabelings of the 16 four-qubit levels listed for the Toffoli decomposition,
# as 1-based level numbers.
LISTED_RELABELING = ((4, 7), (7, 8), (10, 15), (13, 16))


def _level_to_index(level: int, one_based: bool, msb_first: bool) -> int:
    idx = level - 1 if one_based else level
    if not 0 <= idx < 16:
        raise ValueError
    if msb_first:
        return idx
    return int(f"{idx:04b}"[::-1], 2)


@dataclass(frozen=True)
class RelabelingResult:
    """Outcome of the search for a basis relabeling turning U_I into 1 x CCNOT.

    ``mapping[i]`` is the new label of basis state ``i`` (0-based, qubit 0 most
    significant); ``relabel`` is the matrix ``R`` with ``R^dagger U_I R`` equal to
    ``1 x CCNOT``. When ``found`` is false the other fields are ``None``.
    """

    found: bool
    mapping: tuple[int, ...] | None = None
    convention: str | None = None
    defect: float | None = None

    @property
    def relabel(self) -> np.ndarray | None:
        if self.mapping is None:
            return None
        return permutation_matrix(self.mapping).conj().T


def verify_ui_toffoli_equivalence(tol: float = 1e-12) -> RelabelingResult:
    u_i = _interaction_ui()
    target = np.kron(IDENTITY_2, toffoli())
    for one_based, msb_first in itertools.product((True, False), (True, False)):
        try:
            pinned = {
                _level_to_index(src, one_based, msb_first): _level_to_index(dst, one_based, msb_first)
                for src, dst in LISTED_RELABELING
            }
        except ValueError:
            continue
        free_src = [i for i in range(16) if i not in pinned]
        free_dst = [i for i in range(16) if i not in pinned.values()]
        # identity wherever a state is neither moved nor displaced
        fixed = sorted(set(free_src) & set(free_dst))
        left_src = [i for i in free_src if i not in fixed]
        left_dst = [i for i in free_dst if i not in fixed]
        for perm in itertools.permutations(left_dst):
            mapping = dict(pinned)
            mapping.update({i: i for i in fixed})
            mapping.update(zip(left_src, perm))
            m = tuple(mapping[i] for i in range(16))
            p = permutation_matrix(m)
            defect = float(np.max(np.abs(p @ u_i @ p.conj().T - target)))
            if defect <= tol:
                convention = f"{'1' if one_based else '0'}-based, {'msb' if msb_first else 'lsb'}-first"
                return RelabelingResult(True, m, convention, defect)
    return RelabelingResult(False)
