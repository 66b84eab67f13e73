"""Per-individual readouts, the collective coherence witness, and histograms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import qcore

DEFAULT_BIN_COUNT = 41
DEFAULT_PEAK_THRESHOLD = 0.01


@dataclass(frozen=True)
class IndividualRecord:
    id: int
    position: tuple[int, int]
    sigma_z_g: float
    sigma_z_p: float | None
    alive: bool


@dataclass(frozen=True)
class Snapshot:
    time: float
    grid_shape: tuple[int, int]
    records: tuple[IndividualRecord, ...]
    collective_sigma_x: float | None

    @property
    def living(self) -> tuple[IndividualRecord, ...]:
        return tuple(r for r in self.records if r.alive)


def snapshot(world, coherence: bool = True) -> Snapshot:
    """Read every individual's <sigma_z> pair and, optionally, <sigma_x^(2n)>."""
    z = qcore.z_expectations(world.register) if world.register.num_qubits else np.empty(0)
    records = []
    for ind in world.individuals:
        g = float(z[ind.genotype_qubit]) if ind.genotype_qubit is not None else world.genotype_sigma_z(ind)
        if ind.phenotype_qubit is not None:
            p = float(z[ind.phenotype_qubit])
        else:
            p = world.phenotype_sigma_z(ind)
        records.append(IndividualRecord(ind.id, ind.position, g, p, ind.alive))
    sx = qcore.sigma_x_all(world.register) if coherence else None
    return Snapshot(world.clock, (world.grid.rows, world.grid.cols), tuple(records), sx)


def bin_edges(bin_count: int = DEFAULT_BIN_COUNT) -> np.ndarray:
    """Uniform edges whose bin centres run from -1 to +1 inclusive."""
    half = 1.0 / (bin_count - 1)
    return np.linspace(-1.0 - half, 1.0 + half, bin_count + 1)


def bin_centers(bin_count: int = DEFAULT_BIN_COUNT) -> np.ndarray:
    return np.linspace(-1.0, 1.0, bin_count)


def _bin_index(value: float, bin_count: int) -> int:
    idx = int(np.floor((value + 1.0) * (bin_count - 1) / 2.0 + 0.5))
    return min(max(idx, 0), bin_count - 1)


@dataclass
class HistogramSet:
    rows: int
    cols: int
    bin_count: int = DEFAULT_BIN_COUNT
    include_dead: bool = True
    position: np.ndarray = field(default=None)
    genotype: np.ndarray = field(default=None)
    phenotype: np.ndarray = field(default=None)
    coherence: np.ndarray = field(default=None)
    realization_count: int = 0
    position_snapshots: int = 0

    def __post_init__(self):
        if self.bin_count < 3 or self.bin_count % 2 == 0:
            raise ValueError("bin_count must be odd and at least 3")
        if self.position is None:
            self.position = np.zeros((self.rows, self.cols), dtype=np.int64)
        for name in ("genotype", "phenotype", "coherence"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(self.bin_count, dtype=np.int64))

    @property
    def individuals_recorded(self) -> int:
        return int(self.genotype.sum())

    def accumulate(self, snap: Snapshot, positions: bool = True, expectations: bool = True) -> None:
        """Add a snapshot's living positions and/or its binned expectations."""
        if snap.grid_shape != (self.rows, self.cols):
            raise ValueError(f"snapshot grid {snap.grid_shape} does not match histogram grid {(self.rows, self.cols)}")
        if positions:
            self.position_snapshots += 1
            for rec in snap.living:
                self.position[rec.position] += 1
        if expectations:
            for rec in snap.records:
                if not (rec.alive or self.include_dead):
                    continue
                self.genotype[_bin_index(rec.sigma_z_g, self.bin_count)] += 1
                if rec.sigma_z_p is not None:
                    self.phenotype[_bin_index(rec.sigma_z_p, self.bin_count)] += 1
            if snap.collective_sigma_x is not None and snap.records:
                self.coherence[_bin_index(snap.collective_sigma_x, self.bin_count)] += 1

    def merge(self, other: HistogramSet) -> HistogramSet:
        if (other.rows, other.cols, other.bin_count) != (self.rows, self.cols, self.bin_count):
            raise ValueError("cannot merge histograms of different shapes")
        return HistogramSet(
            self.rows, self.cols, self.bin_count, self.include_dead,
            self.position + other.position,
            self.genotype + other.genotype,
            self.phenotype + other.phenotype,
            self.coherence + other.coherence,
            self.realization_count + other.realization_count,
            self.position_snapshots + other.position_snapshots,
        )

    def family(self, name: str) -> np.ndarray:
        if name not in ("genotype", "phenotype", "coherence"):
            raise ValueError(f"unknown histogram family {name!r}")
        return getattr(self, name)


def peak_report(hist: HistogramSet, family: str = "genotype",
                threshold: float = DEFAULT_PEAK_THRESHOLD) -> list[tuple[float, float]]:
    """Local maxima holding at least ``threshold`` of the total mass, heaviest first.

    A bin is a peak when its count is strictly greater than each neighbour's.
    Masses are returned as fractions of the family total.
    """
    counts = hist.family(family).astype(float)
    total = counts.sum()
    if total == 0:
        return []
    padded = np.concatenate(([-np.inf], counts, [-np.inf]))
    centers = bin_centers(hist.bin_count)
    peaks = []
    for i, c in enumerate(counts):
        if c > padded[i] and c > padded[i + 2] and c / total >= threshold:
            peaks.append((float(centers[i]), float(c / total)))
    peaks.sort(key=lambda pk: (-pk[1], pk[0]))
    return peaks
