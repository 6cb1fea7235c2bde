"""Fiber channel, passive BB84 decoder, and the end-to-end Monte Carlo run.

The simulation collapses all efficiencies into a single Bernoulli survival
per photon (loss position along the chain does not affect single-photon
statistics), decodes survivors through a passive 50/50 basis choice, and
adds per-channel Poisson dark counts uniform in time.  Runs are chunked
with one RNG stream per fixed-size chunk, so results are bit-identical for
a given seed regardless of worker count.
"""

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .encoder import (
    EncoderParams,
    ModulationSequence,
    PHASE_BY_CODE,
    SYMBOL_CODE,
    SYMBOL_ORDER,
    encoder_transmission,
)
from .errors import ConfigError, ParameterError, ResourceLimitError
from .polarization import Bb84Symbol, JonesVector, jones_to_stokes
from .source import SourceParams, photon_number_probs

# Slots per RNG chunk; fixed so that chunking (and therefore output) does not
# depend on the number of workers.
CHUNK_SLOTS = 1_000_000
# Refuse runs whose expected event count would exhaust memory.
MAX_EXPECTED_EVENTS = 2**29

CHANNEL_LETTERS = tuple(sym.value for sym in SYMBOL_ORDER)

EVENTS_CSV_HEADER = ["slot_index", "seq_pos", "channel", "time_ps"]


@dataclass(frozen=True)
class ChannelParams:
    attenuation_db_per_km: float = 0.18
    distance_km: float = 0.0
    excess_loss_db: float = 0.0

    def __post_init__(self):
        if self.attenuation_db_per_km < 0.0:
            raise ParameterError("attenuation_db_per_km must be >= 0")
        if self.distance_km < 0.0:
            raise ParameterError("distance_km must be >= 0")
        if self.excess_loss_db < 0.0:
            raise ParameterError("excess_loss_db must be >= 0")

    @property
    def loss_db(self) -> float:
        return self.attenuation_db_per_km * self.distance_km + self.excess_loss_db


@dataclass(frozen=True)
class DetectorParams:
    decoder_efficiency: float = 0.8
    detector_efficiency: float = 0.8
    dark_rate_hz: float = 40.0  # counts per second per channel

    def __post_init__(self):
        for name in ("decoder_efficiency", "detector_efficiency"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ParameterError(f"{name} must be in [0, 1]")
        if self.dark_rate_hz < 0.0:
            raise ParameterError("dark_rate_hz must be >= 0")


@dataclass(frozen=True)
class ExperimentParams:
    """Composite parameter set for one end-to-end run."""

    source: SourceParams = field(default_factory=SourceParams)
    encoder: EncoderParams = field(default_factory=EncoderParams)
    channel: ChannelParams = field(default_factory=ChannelParams)
    detector: DetectorParams = field(default_factory=DetectorParams)
    sequence: ModulationSequence = field(default_factory=ModulationSequence.default)

    def __post_init__(self):
        # the encoder timing grid must match the source repetition rate
        if not math.isclose(
            self.encoder.slot_period_ps, self.source.slot_period_ps, rel_tol=1e-6
        ):
            raise ParameterError(
                "encoder slot_period_ps inconsistent with source rep_rate_hz"
            )

    @property
    def total_efficiency(self) -> float:
        return (
            encoder_transmission(self.encoder)
            * channel_transmission(self.channel)
            * self.detector.decoder_efficiency
            * self.detector.detector_efficiency
        )

    def to_dict(self) -> dict:
        return {
            "source": {
                "mean_photon_number": self.source.mean_photon_number,
                "g2_zero": self.source.g2_zero,
                "decay_time_ps": self.source.decay_time_ps,
                "irf_sigma_ps": self.source.irf_sigma_ps,
                "rep_rate_hz": self.source.rep_rate_hz,
            },
            "encoder": {
                "v_pi_volts": self.encoder.v_pi_volts,
                "delta_t_ps": self.encoder.delta_t_ps,
                "slot_period_ps": self.encoder.slot_period_ps,
                "extinction_ratio_db": self.encoder.extinction_ratio_db,
                "total_loss_db": self.encoder.total_loss_db,
                "p_mis": self.encoder.p_mis,
                "filter_window_ps": self.encoder.filter_window_ps,
            },
            "channel": {
                "attenuation_db_per_km": self.channel.attenuation_db_per_km,
                "distance_km": self.channel.distance_km,
                "excess_loss_db": self.channel.excess_loss_db,
            },
            "detector": {
                "decoder_efficiency": self.detector.decoder_efficiency,
                "detector_efficiency": self.detector.detector_efficiency,
                "dark_rate_hz": self.detector.dark_rate_hz,
            },
            "sequence": self.sequence.as_string(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentParams":
        return cls(
            source=SourceParams(**d["source"]),
            encoder=EncoderParams(**d["encoder"]),
            channel=ChannelParams(**d["channel"]),
            detector=DetectorParams(**d["detector"]),
            sequence=ModulationSequence.from_string(d["sequence"]),
        )


def channel_transmission(ch: ChannelParams) -> float:
    """Fiber transmission 10^(-(attenuation*distance + excess)/10)."""
    return 10.0 ** (-ch.loss_db / 10.0)


def decode(state: JonesVector, rng: np.random.Generator) -> Bb84Symbol:
    """Passive BB84 measurement of one photon: 50/50 basis choice, then the
    Born-rule projection inside the chosen basis."""
    s = jones_to_stokes(state)
    if rng.random() < 0.5:  # X basis
        return Bb84Symbol.D if rng.random() < 0.5 * (1.0 + s.s2) else Bb84Symbol.A
    return Bb84Symbol.R if rng.random() < 0.5 * (1.0 + s.s3) else Bb84Symbol.L


def decode_counts(state: JonesVector, n: int, rng: np.random.Generator) -> np.ndarray:
    """Channel counts (D, A, R, L order) after n independent decodes."""
    s = jones_to_stokes(state)
    y_basis = rng.random(n) < 0.5
    u = rng.random(n)
    chan = np.where(
        y_basis,
        np.where(u < 0.5 * (1.0 + s.s3), SYMBOL_CODE[Bb84Symbol.R], SYMBOL_CODE[Bb84Symbol.L]),
        np.where(u < 0.5 * (1.0 + s.s2), SYMBOL_CODE[Bb84Symbol.D], SYMBOL_CODE[Bb84Symbol.A]),
    )
    return np.bincount(chan, minlength=4)


@dataclass
class DetectionRecord:
    """Detected events of a run, sorted by slot then time.

    `is_dark` is simulation-side debug information; it is not part of the
    on-disk CSV schema.
    """

    slot_index: np.ndarray
    seq_pos: np.ndarray
    channel: np.ndarray  # codes 0..3 in D,A,R,L order
    time_ps: np.ndarray
    is_dark: np.ndarray
    n_slots: int
    slot_period_ps: float
    sequence_length: int
    seed: int | None = None
    params: ExperimentParams | None = None

    def __len__(self) -> int:
        return self.slot_index.size

    def channel_symbols(self) -> list[Bb84Symbol]:
        return [SYMBOL_ORDER[c] for c in self.channel]

    def metadata(self) -> dict:
        meta = {
            "n_slots": self.n_slots,
            "n_events": len(self),
            "seed": self.seed,
            "slot_period_ps": self.slot_period_ps,
            "sequence_length": self.sequence_length,
        }
        if self.params is not None:
            meta["params"] = self.params.to_dict()
        return meta

    def to_csv(self, path, meta_path=None) -> None:
        """Write `slot_index,seq_pos,channel,time_ps` rows plus a JSON sidecar."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(EVENTS_CSV_HEADER)
            letters = CHANNEL_LETTERS
            writer.writerows(
                (int(s), int(p), letters[c], f"{t:.6f}")
                for s, p, c, t in zip(self.slot_index, self.seq_pos, self.channel, self.time_ps)
            )
        if meta_path is not None:
            with open(meta_path, "w") as fh:
                json.dump(self.metadata(), fh, indent=2, sort_keys=True)
                fh.write("\n")

    @classmethod
    def from_csv(cls, path, meta_path=None, params: ExperimentParams | None = None) -> "DetectionRecord":
        meta = {}
        if meta_path is not None:
            with open(meta_path) as fh:
                meta = json.load(fh)
            if params is None and "params" in meta:
                params = ExperimentParams.from_dict(meta["params"])

        code_of = {sym.value: SYMBOL_CODE[sym] for sym in SYMBOL_ORDER}
        slots, poss, chans, times = [], [], [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != EVENTS_CSV_HEADER:
                raise ConfigError(f"unexpected events header {header!r} in {path}")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    slots.append(int(row[0]))
                    poss.append(int(row[1]))
                    chans.append(code_of[row[2]])
                    times.append(float(row[3]))
                except (ValueError, KeyError, IndexError) as exc:
                    raise ConfigError(f"malformed events row at line {lineno} of {path}: {row!r}") from exc

        if params is not None:
            slot_period = params.encoder.slot_period_ps
            seq_len = len(params.sequence)
        else:
            slot_period = meta.get("slot_period_ps", 0.0)
            seq_len = meta.get("sequence_length", 0)
        n = len(slots)
        return cls(
            slot_index=np.asarray(slots, dtype=np.int64),
            seq_pos=np.asarray(poss, dtype=np.int64),
            channel=np.asarray(chans, dtype=np.uint8),
            time_ps=np.asarray(times, dtype=float),
            is_dark=np.zeros(n, dtype=bool),
            n_slots=int(meta.get("n_slots", (max(slots) + 1) if slots else 0)),
            slot_period_ps=float(slot_period),
            sequence_length=int(seq_len),
            seed=meta.get("seed"),
            params=params,
        )


def _simulate_chunk(params: ExperimentParams, lo: int, hi: int, n_slots: int, seed_seq):
    """Simulate slots [lo, hi); returns event columns (unsorted)."""
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    n = hi - lo
    p0, p1, p2 = photon_number_probs(params.source)
    eta = params.total_efficiency
    period = params.encoder.slot_period_ps
    delta_t = params.encoder.delta_t_ps
    seq_codes = params.sequence.codes()
    seq_len = seq_codes.size
    p_mis = params.encoder.p_mis
    p_leak = params.encoder.leakage_prob

    # photon numbers per slot: 2 w.p. p2, 1 w.p. p1, else 0
    u = rng.random(n)
    n_ph = (u < p1 + p2).astype(np.int8)
    n_ph += u < p2
    ph_slot = np.repeat(np.arange(lo, hi, dtype=np.int64), n_ph)

    m = ph_slot.size
    t = rng.normal(0.0, params.source.irf_sigma_ps, m) + rng.exponential(
        params.source.decay_time_ps, m
    )
    keep = rng.random(m) < eta
    ph_slot = ph_slot[keep]
    t = t[keep]
    k = ph_slot.size

    # modulation window actually seen (step model, adjacent half-windows)
    off = mismodulation_offset(t, delta_t, period)
    phases = PHASE_BY_CODE[seq_codes[(ph_slot + off) % seq_len]]

    # misencoding and extinction-ratio leakage both flip to the orthogonal
    # state; two flips cancel
    flip = rng.random(k) < p_mis
    flip ^= rng.random(k) < p_leak
    phases = np.where(flip, phases + np.pi, phases)

    # passive decoding from the state's (s2, s3) = (cos phi, sin phi)
    y_basis = rng.random(k) < 0.5
    u2 = rng.random(k)
    chan = np.where(
        y_basis,
        np.where(u2 < 0.5 * (1.0 + np.sin(phases)), 2, 3),
        np.where(u2 < 0.5 * (1.0 + np.cos(phases)), 0, 1),
    ).astype(np.uint8)

    # detection slot: late/early emissions land in the neighboring slot
    shift = np.floor_divide(t, period).astype(np.int64)
    det_slot = ph_slot + shift
    time_in_slot = t - shift * period
    inside = (det_slot >= 0) & (det_slot < n_slots)
    det_slot, time_in_slot, chan = det_slot[inside], time_in_slot[inside], chan[inside]

    # dark counts: Poisson per slot and channel, uniform in time
    mean_darks = 4.0 * params.detector.dark_rate_hz * (period * 1e-12) * n
    nd = int(rng.poisson(mean_darks))
    d_slot = rng.integers(lo, hi, nd, dtype=np.int64)
    d_chan = rng.integers(0, 4, nd, dtype=np.uint8)
    d_time = rng.uniform(0.0, period, nd)

    slot = np.concatenate([det_slot, d_slot])
    chanl = np.concatenate([chan, d_chan])
    time = np.concatenate([time_in_slot, d_time])
    dark = np.zeros(slot.size, dtype=bool)
    dark[det_slot.size:] = True
    return slot, chanl, time, dark


def simulate_run(
    params: ExperimentParams,
    n_slots: int,
    seed: int,
    n_jobs: int = 1,
) -> DetectionRecord:
    """End-to-end Monte Carlo over `n_slots` time slots.

    Per slot the photon number is sampled; each photon gets an emission
    time, the phase of the modulation window it actually sees, a possible
    misencoding/leakage flip, one Bernoulli survival at the total
    efficiency, and a decoded output channel.  Dark counts are added per
    channel.  Deterministic for a fixed seed, independent of `n_jobs`.
    """
    if n_slots < 1:
        raise ParameterError("n_slots must be >= 1")
    p0, p1, p2 = photon_number_probs(params.source)
    expected = n_slots * (
        (p1 + 2.0 * p2) * params.total_efficiency
        + 4.0 * params.detector.dark_rate_hz * params.encoder.slot_period_ps * 1e-12
    )
    if expected > MAX_EXPECTED_EVENTS:
        raise ResourceLimitError(
            f"expected {expected:.3g} events exceeds the storage limit {MAX_EXPECTED_EVENTS}"
        )

    n_chunks = (n_slots + CHUNK_SLOTS - 1) // CHUNK_SLOTS
    seeds = np.random.SeedSequence(seed).spawn(n_chunks)
    bounds = [
        (i * CHUNK_SLOTS, min(n_slots, (i + 1) * CHUNK_SLOTS)) for i in range(n_chunks)
    ]

    if n_jobs > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(
                pool.map(
                    lambda args: _simulate_chunk(params, args[0][0], args[0][1], n_slots, args[1]),
                    zip(bounds, seeds),
                )
            )
    else:
        parts = [
            _simulate_chunk(params, lo, hi, n_slots, s) for (lo, hi), s in zip(bounds, seeds)
        ]

    slot = np.concatenate([p[0] for p in parts])
    chan = np.concatenate([p[1] for p in parts])
    time = np.concatenate([p[2] for p in parts])
    dark = np.concatenate([p[3] for p in parts])

    order = np.lexsort((dark, chan, time, slot))
    seq_len = len(params.sequence)
    slot = slot[order]
    return DetectionRecord(
        slot_index=slot,
        seq_pos=slot % seq_len,
        channel=chan[order],
        time_ps=time[order],
        is_dark=dark[order],
        n_slots=n_slots,
        slot_period_ps=params.encoder.slot_period_ps,
        sequence_length=seq_len,
        seed=seed,
        params=params,
    )


@dataclass
class SlotHistogram:
    """Event-time histograms split by channel and sequence position."""

    counts: np.ndarray  # shape (4, sequence_length, n_bins)
    bin_edges_ps: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def histogram(record: DetectionRecord, bin_width_ps: float) -> SlotHistogram:
    """Bin event times per channel and sequence position.

    The bin width must divide the slot period to within one bin of slack;
    the last bin absorbs the remainder.
    """
    if bin_width_ps <= 0.0:
        raise ParameterError("bin_width_ps must be > 0")
    period = record.slot_period_ps
    if period <= 0.0 or record.sequence_length <= 0:
        raise ParameterError("record lacks slot_period/sequence metadata")
    n_bins = max(1, round(period / bin_width_ps))
    if abs(n_bins * bin_width_ps - period) > bin_width_ps * (1.0 + 1e-9):
        raise ParameterError(
            f"bin width {bin_width_ps} does not divide the slot period {period} "
            "to within one bin"
        )
    counts = np.zeros((4, record.sequence_length, n_bins), dtype=np.int64)
    if len(record) == 0:
        return SlotHistogram(counts, np.arange(n_bins + 1) * bin_width_ps)
    bins = np.minimum((record.time_ps // bin_width_ps).astype(np.int64), n_bins - 1)
    np.add.at(counts, (record.channel, record.seq_pos, bins), 1)
    return SlotHistogram(counts, np.arange(n_bins + 1) * bin_width_ps)
