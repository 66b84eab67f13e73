"""Individuals living on a periodic grid, sharing one global density matrix.

A :class:`World` advances in discrete steps. Each step runs, in order: random
moves, pairwise interactions between co-located individuals, replication,
mutation, amplitude damping of every living phenotype, and the death check.
Every random draw comes from ``World.rng``, so a seed fixes the whole run.
"""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from . import gates, qcore
from .channels import DampingParams, damp_matrix
from .qcore import GENOTYPE, PHENOTYPE, CapacityError, DensityRegister

TWO_PI = 2.0 * math.pi

# stay, up, down, left, right as (row, col) offsets
MOVES = ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1))
MOVE_NAMES = ("stay", "up", "down", "left", "right")


def _draw(rng: np.random.Generator, p: float) -> bool:
    """Bernoulli trial; certain outcomes consume no random numbers."""
    if p <= 0.0:
        return False
    if p >= 1.0:
        return True
    return bool(rng.random() < p)


class PreconditionError(RuntimeError):
    """An operation was requested on individuals that cannot take part in it."""


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class RegionParams:
    mutation_rate: float = 0.01
    replication_prob: float = 0.05
    gamma: float = 1.0
    copy_error_prob: float = 0.01

    def __post_init__(self):
        _check_probability("mutation_rate", self.mutation_rate)
        _check_probability("replication_prob", self.replication_prob)
        _check_probability("copy_error_prob", self.copy_error_prob)
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")


@dataclass
class GridSpec:
    """Torus of ``rows x cols`` cells, each mapped to one region.

    ``region_index[r, c]`` points into ``region_table``.
    """

    rows: int
    cols: int
    region_table: list[RegionParams] = field(default_factory=lambda: [RegionParams()])
    region_index: np.ndarray | None = None

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if self.region_index is None:
            self.region_index = np.zeros((self.rows, self.cols), dtype=int)
        self.region_index = np.asarray(self.region_index, dtype=int)
        if self.region_index.shape != (self.rows, self.cols):
            raise ValueError("region map does not match grid shape")
        if self.region_index.min() < 0 or self.region_index.max() >= len(self.region_table):
            raise ValueError("region map refers to an unknown region")

    @classmethod
    def uniform(cls, rows: int, cols: int, params: RegionParams | None = None) -> GridSpec:
        return cls(rows, cols, [params or RegionParams()])

    def region_at(self, position) -> RegionParams:
        r, c = position
        return self.region_table[self.region_index[r % self.rows, c % self.cols]]

    def wrap(self, position) -> tuple[int, int]:
        return (int(position[0]) % self.rows, int(position[1]) % self.cols)


@dataclass
class Dynamics:
    """Time step, death threshold and the knobs that are not region-dependent."""

    dt: float = 0.1
    epsilon: float = 0.01
    qubit_cap: int = qcore.DEFAULT_QUBIT_CAP
    move_probs: tuple[float, ...] = (0.2, 0.2, 0.2, 0.2, 0.2)
    interaction_prob: float = 1.0
    recycle: bool = False
    trace_out_dead: bool = False
    log_moves: bool = True

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0.0 < self.epsilon < 2.0:
            raise ValueError(f"epsilon must lie in (0, 2), got {self.epsilon}")
        if self.qubit_cap < 2:
            raise ValueError("qubit cap must allow at least one individual")
        if len(self.move_probs) != len(MOVES):
            raise ValueError(f"need {len(MOVES)} move probabilities")
        for name, p in zip(MOVE_NAMES, self.move_probs):
            _check_probability(f"move probability '{name}'", p)
        if abs(sum(self.move_probs) - 1.0) > 1e-9:
            raise ValueError(f"move probabilities sum to {sum(self.move_probs)}, not 1")
        _check_probability("interaction_prob", self.interaction_prob)
        self.move_probs = tuple(float(p) for p in self.move_probs)


@dataclass
class Individual:
    id: int
    genotype_qubit: int | None
    phenotype_qubit: int | None
    position: tuple[int, int]
    birth_time: float
    alive: bool = True
    lineage: int | None = None
    death_time: float | None = None
    # expectations frozen at death, used once the qubits have left the register
    final_sigma_z: tuple[float | None, float | None] | None = None


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    ids: tuple[int, ...]
    params: dict = field(default_factory=dict)

    def to_record(self, **extra) -> dict:
        rec = {"t": self.time, "type": self.kind, "ids": list(self.ids)}
        rec.update(self.params)
        rec.update(extra)
        return rec

    def to_json(self, **extra) -> str:
        return json.dumps(self.to_record(**extra), sort_keys=True)


@dataclass(frozen=True)
class ForcedEvent:
    """An operation pinned to a time rather than drawn at random."""

    time: float
    kind: str  # "interact", "mutate" or "replicate"
    ids: tuple[int, ...]
    theta: float | None = None

    def __post_init__(self):
        arity = {"interact": 2, "mutate": 1, "replicate": 1}
        if self.kind not in arity:
            raise ValueError(f"unknown forced event type {self.kind!r}")
        if len(self.ids) != arity[self.kind]:
            raise ValueError(f"{self.kind} takes {arity[self.kind]} ids, got {len(self.ids)}")


class World:
    def __init__(self, grid: GridSpec, dynamics: Dynamics | None = None, rng=None,
                 forced: Sequence[ForcedEvent] = ()):
        self.grid = grid
        self.dynamics = dynamics or Dynamics()
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.register = DensityRegister.empty()
        self.individuals: list[Individual] = []
        self.events: list[Event] = []
        self.steps = 0
        self._extra_time = 0.0
        self._forced = sorted(forced, key=lambda e: e.time)
        self._forced_done = 0
        self._cum_move = np.cumsum(self.dynamics.move_probs)

    @property
    def clock(self) -> float:
        return self._extra_time + self.steps * self.dynamics.dt

    @property
    def living(self) -> list[Individual]:
        return [ind for ind in self.individuals if ind.alive]

    def __getitem__(self, ind_id: int) -> Individual:
        return self.individuals[ind_id]

    def _log(self, kind: str, ids, time: float | None = None, **params) -> None:
        t = self.clock if time is None else time
        self.events.append(Event(t, kind, tuple(int(i) for i in ids), params))

    def _reindex(self) -> None:
        for ind in self.individuals:
            for role, attr in ((GENOTYPE, "genotype_qubit"), (PHENOTYPE, "phenotype_qubit")):
                if getattr(ind, attr) is not None:
                    setattr(ind, attr, self.register.index_of(ind.id, role))

    def _apply(self, u: np.ndarray, targets) -> None:
        self.register = qcore.apply_unitary(self.register, u, targets)

    def sigma_z(self, qubit: int) -> float:
        return qcore.z_expectation(self.register, qubit)

    def genotype_sigma_z(self, ind: Individual) -> float:
        if ind.genotype_qubit is None:
            return ind.final_sigma_z[0]
        return self.sigma_z(ind.genotype_qubit)

    def phenotype_sigma_z(self, ind: Individual) -> float | None:
        if ind.phenotype_qubit is None:
            return ind.final_sigma_z[1] if ind.final_sigma_z else None
        return self.sigma_z(ind.phenotype_qubit)

    # -- births ---------------------------------------------------------

    def spawn_primordial(self, genotype: tuple[float, float, float], position,
                         age: float = 0.0) -> Individual:
        """Create an individual from a primordial genotype ``(a, b, c)``.

        The genotype qubit is prepared in ``[[a, b - ic], [b + ic, 1 - a]]``
        and copied into a fresh phenotype ancilla with a CNOT. A positive
        ``age`` pre-damps the new phenotype as if it were born that long ago.
        """
        if age < 0:
            raise ValueError(f"age must be >= 0, got {age}")
        a, b, c = (float(x) for x in genotype)
        if not 0.0 <= a <= 1.0:
            raise ValueError(f"genotype population a must lie in [0, 1], got {a}")
        if b * b + c * c > a * (1.0 - a) + 1e-12:
            raise ValueError(f"genotype (a={a}, b={b}, c={c}) is not positive: need b^2 + c^2 <= a(1-a)")
        n = self.register.num_qubits
        if n + 2 > self.dynamics.qubit_cap:
            raise CapacityError(f"spawning needs 2 qubits, {self.dynamics.qubit_cap - n} free")
        ind_id = len(self.individuals)
        rho_g = np.array([[a, b - 1j * c], [b + 1j * c, 1.0 - a]], dtype=complex)
        grown = qcore.kron(self.register.matrix, np.kron(rho_g, qcore.KET0_PROJ))
        self.register = DensityRegister(grown, self.register.labels + [(ind_id, GENOTYPE), (ind_id, PHENOTYPE)])
        self._apply(gates.cnot(), [n, n + 1])
        ind = Individual(ind_id, n, n + 1, self.grid.wrap(position), self.clock - age)
        if age > 0:
            p = DampingParams(self.grid.region_at(ind.position).gamma, age).p
            rho = damp_matrix(self.register.matrix, n + 1, n + 2, p)
            self.register = DensityRegister(rho, self.register.labels)
        self.individuals.append(ind)
        self._log("spawn", [ind_id], a=a, b=b, c=c, position=list(ind.position), age=age)
        return ind

    def replicate(self, parent: Individual, copy_error: bool | None = None,
                  theta: float | None = None) -> Individual | None:
        """Two-step partial cloning of ``parent`` into a newborn at its cell.

        The parent genotype is copied onto a fresh ancilla, with a CNOT or, on a
        copy error, with the imperfect-cloning gate at a random angle. The new
        genotype is then copied onto a second ancilla with a CNOT to form the
        phenotype. Returns ``None`` when the qubit cap blocks the birth.
        """
        if not parent.alive:
            raise PreconditionError(f"individual {parent.id} is dead and cannot replicate")
        region = self.grid.region_at(parent.position)
        if copy_error is None:
            copy_error = _draw(self.rng, region.copy_error_prob)
        if copy_error and theta is None:
            theta = float(self.rng.uniform(0.0, TWO_PI))

        donor = None
        if self.dynamics.recycle:
            donor = next((d for d in self.individuals if not d.alive and d.phenotype_qubit is not None), None)
        needed = 1 if donor is not None else 2
        n = self.register.num_qubits
        if n + needed > self.dynamics.qubit_cap:
            self._log("replication_skipped", [parent.id], reason="qubit_cap", cap=self.dynamics.qubit_cap)
            return None

        child_id = len(self.individuals)
        if donor is None:
            self.register = qcore.append_qubits(self.register, 2, [(child_id, GENOTYPE), (child_id, PHENOTYPE)])
            g, p = n, n + 1
        else:
            self.register = qcore.append_qubits(self.register, 1, [(child_id, GENOTYPE)])
            g, p = n, donor.phenotype_qubit
            self.register.labels[p] = (child_id, PHENOTYPE)
            donor.final_sigma_z = (None, self.sigma_z(p))
            donor.phenotype_qubit = None

        clone = gates.imperfect_clone(theta) if copy_error else gates.cnot()
        self._apply(clone, [parent.genotype_qubit, g])
        self._apply(gates.cnot(), [g, p])
        child = Individual(child_id, g, p, parent.position, self.clock, lineage=parent.id)
        self.individuals.append(child)
        params = {"gate": gates.GateName.IMPERFECT_CLONE.value if copy_error else gates.GateName.CNOT.value}
        if copy_error:
            params["theta"] = theta
        if donor is not None:
            params["recycled_from"] = donor.id
        self._log("birth", [child_id, parent.id], **params)
        return child

    # -- mutations and interactions ------------------------------------

    def mutate(self, target: Individual, theta: float) -> bool:
        if not target.alive:
            self._log("mutation_skipped", [target.id], reason="dead", theta=theta)
            return False
        self._apply(gates.mutation_m(theta), [target.genotype_qubit])
        self._log("mutate", [target.id], theta=theta)
        return True

    def interact(self, first: Individual, second: Individual) -> None:
        if first.id == second.id:
            raise PreconditionError("an individual cannot interact with itself")
        if not (first.alive and second.alive):
            raise PreconditionError(f"interaction of {first.id} and {second.id} needs both alive")
        if first.position != second.position:
            raise PreconditionError(f"individuals {first.id} and {second.id} occupy different cells")
        targets = [first.genotype_qubit, first.phenotype_qubit, second.genotype_qubit, second.phenotype_qubit]
        self._apply(gates._interaction_ui(), targets)
        self._log("interact", [first.id, second.id], cell=list(first.position))

    # -- per-step processes --------------------------------------------

    def move_all(self) -> None:
        for ind in self.living:
            choice = int(np.searchsorted(self._cum_move, self.rng.random(), side="right"))
            dr, dc = MOVES[min(choice, len(MOVES) - 1)]
            old = ind.position
            ind.position = self.grid.wrap((old[0] + dr, old[1] + dc))
            if self.dynamics.log_moves and ind.position != old:
                self._log("move", [ind.id], frm=list(old), to=list(ind.position))

    def _interaction_phase(self) -> None:
        cells: dict[tuple[int, int], list[Individual]] = {}
        for ind in self.living:
            cells.setdefault(ind.position, []).append(ind)
        for cell in sorted(cells):
            members = cells[cell]
            if len(members) < 2:
                continue
            order = self.rng.permutation(len(members))
            for i in range(0, len(order) - 1, 2):
                if _draw(self.rng, self.dynamics.interaction_prob):
                    self.interact(members[order[i]], members[order[i + 1]])

    def _replication_phase(self) -> None:
        for ind in self.living:
            if _draw(self.rng, self.grid.region_at(ind.position).replication_prob):
                self.replicate(ind)

    def _mutation_phase(self) -> None:
        for ind in self.living:
            if _draw(self.rng, self.grid.region_at(ind.position).mutation_rate):
                self.mutate(ind, float(self.rng.uniform(0.0, TWO_PI)))

    def damp_phenotypes(self, duration: float) -> None:
        """Couple every living phenotype to its region's environment for ``duration``."""
        rho = self.register.matrix
        n = self.register.num_qubits
        for ind in self.living:
            p = DampingParams(self.grid.region_at(ind.position).gamma, duration).p
            rho = damp_matrix(rho, ind.phenotype_qubit, n, p)
        self.register = DensityRegister(rho, self.register.labels)

    def advance(self, duration: float) -> None:
        """Damp for an arbitrary duration outside the stepping loop, then run the death check."""
        if duration < 0:
            raise ValueError("cannot advance backwards in time")
        self.damp_phenotypes(duration)
        self._extra_time += duration
        for ind in self.living:
            self.death_check(ind)

    def death_check(self, ind: Individual, time: float | None = None) -> bool:
        if not ind.alive:
            return False
        if self.phenotype_sigma_z(ind) >= 1.0 - self.dynamics.epsilon:
            ind.alive = False
            ind.death_time = self.clock if time is None else time
            self._log("death", [ind.id], time=ind.death_time, age=ind.death_time - ind.birth_time)
            if self.dynamics.trace_out_dead:
                self._trace_out(ind)
        return ind.alive

    def _trace_out(self, ind: Individual) -> None:
        qubits = [q for q in (ind.genotype_qubit, ind.phenotype_qubit) if q is not None]
        ind.final_sigma_z = (self.genotype_sigma_z(ind), self.phenotype_sigma_z(ind))
        keep = [q for q in range(self.register.num_qubits) if q not in qubits]
        labels = [self.register.labels[q] for q in keep]
        if keep:
            self.register = DensityRegister(qcore.partial_trace(self.register, keep), labels)
        else:
            self.register = DensityRegister.empty()
        ind.genotype_qubit = ind.phenotype_qubit = None
        self._reindex()

    def _apply_forced(self) -> None:
        horizon = self.clock + 0.5 * self.dynamics.dt
        while self._forced_done < len(self._forced) and self._forced[self._forced_done].time < horizon:
            ev = self._forced[self._forced_done]
            self._forced_done += 1
            inds = [self.individuals[i] for i in ev.ids]
            if ev.kind == "interact":
                if all(ind.alive for ind in inds):
                    self.interact(*inds)
                else:
                    self._log("interaction_skipped", ev.ids, reason="dead")
            elif ev.kind == "mutate":
                self.mutate(inds[0], ev.theta if ev.theta is not None else float(self.rng.uniform(0.0, TWO_PI)))
            elif inds[0].alive:
                self.replicate(inds[0], copy_error=ev.theta is not None, theta=ev.theta)

    def step(self) -> None:
        self._apply_forced()
        self.move_all()
        self._interaction_phase()
        self._replication_phase()
        self._mutation_phase()
        self.damp_phenotypes(self.dynamics.dt)
        end = self.clock + self.dynamics.dt
        for ind in self.living:
            self.death_check(ind, time=end)
        self.steps += 1

    def run(self, total_time: float, on_step=None) -> None:
        n_steps = int(round(total_time / self.dynamics.dt))
        for _ in range(n_steps):
            self.step()
            if on_step is not None:
                on_step(self)

    def event_log_lines(self, **extra) -> list[str]:
        return [ev.to_json(**extra) for ev in self.events]
