"""Per-slot QBER and encoding-agreement analysis.

Counts are integrated per output channel and sequence position after
temporal filtering.  The QBER of slot i uses only the two channels of the
basis encoded in that slot; the encoding agreement compares the
count-derived state matrix against the ideal one via the Frobenius norm.
"""

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .channel import DetectionRecord
from .encoder import ModulationSequence, SYMBOL_CODE, SYMBOL_ORDER
from .errors import ConfigError, ParameterError, SequenceError, UndefinedSlotError
from .polarization import Basis, Bb84Symbol

SLOT_COUNTS_CSV_HEADER = ["seq_pos", "c_D", "c_A", "c_R", "c_L"]


@dataclass
class SlotCounts:
    """Counts c[channel][seq_pos]; rows in D,A,R,L order."""

    counts: np.ndarray  # shape (4, sequence_length), non-negative ints

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != 4:
            raise ParameterError("counts must have shape (4, sequence_length)")
        if (self.counts < 0).any():
            raise ParameterError("counts must be non-negative")

    @property
    def sequence_length(self) -> int:
        return self.counts.shape[1]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_record(
        cls, record: DetectionRecord, filter_window_ps: float | None = None
    ) -> "SlotCounts":
        """Integrate a detection record, keeping only events inside the
        temporal filter window when one is given."""
        if record.sequence_length <= 0:
            raise ParameterError("record lacks sequence metadata")
        counts = np.zeros((4, record.sequence_length), dtype=np.int64)
        if len(record) == 0:
            return cls(counts)
        if filter_window_ps is None:
            mask = slice(None)
        else:
            mask = (record.time_ps >= 0.0) & (record.time_ps <= filter_window_ps)
        np.add.at(counts, (record.channel[mask], record.seq_pos[mask]), 1)
        return cls(counts)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SLOT_COUNTS_CSV_HEADER)
            for pos in range(self.sequence_length):
                writer.writerow([pos] + [int(self.counts[c, pos]) for c in range(4)])

    @classmethod
    def from_csv(cls, path) -> "SlotCounts":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != SLOT_COUNTS_CSV_HEADER:
                raise ConfigError(f"unexpected slot-counts header {header!r} in {path}")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    rows.append([int(v) for v in row])
                except ValueError as exc:
                    raise ConfigError(
                        f"malformed slot-counts row at line {lineno} of {path}: {row!r}"
                    ) from exc
        rows.sort()
        counts = np.zeros((4, len(rows)), dtype=np.int64)
        for pos, r in enumerate(rows):
            counts[:, pos] = r[1:5]
        return cls(counts)


def qber_per_slot(counts: SlotCounts, seq: ModulationSequence, i: int) -> float:
    """Wrong-state fraction among in-basis counts for slot i."""
    if not (0 <= i < len(seq)):
        raise ParameterError(f"slot index {i} outside sequence of length {len(seq)}")
    if counts.sequence_length != len(seq):
        raise ParameterError("counts and sequence have different lengths")
    sym = seq.symbols[i]
    right = int(counts.counts[SYMBOL_CODE[sym], i])
    wrong = int(counts.counts[SYMBOL_CODE[sym.orthogonal], i])
    if right + wrong == 0:
        raise UndefinedSlotError(f"no in-basis counts for slot {i} ({sym.value})")
    return wrong / (right + wrong)


@dataclass
class QberSummary:
    """Unweighted per-slot QBER means, overall and per encoded basis."""

    overall: float
    x_basis: float
    y_basis: float
    per_slot: list  # per-slot QBER, None where undefined
    stderr_overall: float
    stderr_x: float
    stderr_y: float
    undefined_slots: list


def mean_qber(counts: SlotCounts, seq: ModulationSequence) -> QberSummary:
    """Average per-slot QBERs (unweighted).

    Slots without in-basis counts are excluded from the means with a
    warning; if no slot is defined an UndefinedSlotError is raised.
    """
    per_slot: list[float | None] = []
    variances = []
    undefined = []
    for i in range(len(seq)):
        try:
            q = qber_per_slot(counts, seq, i)
        except UndefinedSlotError:
            per_slot.append(None)
            variances.append(None)
            undefined.append(i)
            continue
        per_slot.append(q)
        sym = seq.symbols[i]
        n = int(
            counts.counts[SYMBOL_CODE[sym], i]
            + counts.counts[SYMBOL_CODE[sym.orthogonal], i]
        )
        variances.append(q * (1.0 - q) / n)
    if undefined:
        warnings.warn(
            f"slots {undefined} have no in-basis counts and are excluded from QBER means",
            stacklevel=2,
        )

    def _mean(indices):
        vals = [per_slot[i] for i in indices if per_slot[i] is not None]
        if not vals:
            raise UndefinedSlotError("no slot with in-basis counts in the requested set")
        var = sum(variances[i] for i in indices if variances[i] is not None)
        return sum(vals) / len(vals), math.sqrt(var) / len(vals)

    all_idx = range(len(seq))
    x_idx = [i for i in all_idx if seq.symbols[i].basis is Basis.X]
    y_idx = [i for i in all_idx if seq.symbols[i].basis is Basis.Y]
    overall, se_all = _mean(all_idx)
    x_mean, se_x = _mean(x_idx) if x_idx else (float("nan"), float("nan"))
    y_mean, se_y = _mean(y_idx) if y_idx else (float("nan"), float("nan"))
    return QberSummary(
        overall=overall,
        x_basis=x_mean,
        y_basis=y_mean,
        per_slot=per_slot,
        stderr_overall=se_all,
        stderr_x=se_x,
        stderr_y=se_y,
        undefined_slots=undefined,
    )


# Ideal (unnormalized) channel-response columns in D,A,R,L channel order.
_IDEAL_COLUMNS = {
    Bb84Symbol.D: (1.0, 0.0, 0.5, 0.5),
    Bb84Symbol.A: (0.0, 1.0, 0.5, 0.5),
    Bb84Symbol.R: (0.5, 0.5, 1.0, 0.0),
    Bb84Symbol.L: (0.5, 0.5, 0.0, 1.0),
}


def theoretical_state_matrix() -> np.ndarray:
    """Ideal state matrix; columns are the unit-normalized expected
    channel-response vectors of D, A, R, L."""
    m = np.array([_IDEAL_COLUMNS[sym] for sym in SYMBOL_ORDER]).T
    return m / np.linalg.norm(m, axis=0, keepdims=True)


def experimental_state_matrix(counts: SlotCounts, seq: ModulationSequence) -> np.ndarray:
    """Column-wise unit-normalized measured channel vectors per encoded state."""
    if counts.sequence_length != len(seq):
        raise ParameterError("counts and sequence have different lengths")
    cols = []
    for sym in SYMBOL_ORDER:
        idx = [i for i, s in enumerate(seq.symbols) if s is sym]
        if not idx:
            raise SequenceError(f"state {sym.value} never encoded in the sequence")
        v = counts.counts[:, idx].sum(axis=1).astype(float)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise UndefinedSlotError(f"no counts recorded for encoded state {sym.value}")
        cols.append(v / norm)
    return np.stack(cols, axis=1)


def encoding_agreement(counts: SlotCounts, seq: ModulationSequence) -> float:
    """F = 1 - ||M_exp - M_theo||_F / ||M_theo||_F."""
    m_exp = experimental_state_matrix(counts, seq)
    m_theo = theoretical_state_matrix()
    return 1.0 - np.linalg.norm(m_exp - m_theo) / np.linalg.norm(m_theo)
