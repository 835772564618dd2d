"""Stochastic photon streams: quantum jumps, detection chain, telegraph.

Quantum-jump unravelling of the four-level master equation: between
emissions the state evolves under H_eff = H_rot - (i/2)(G_a P_a + G_d P_d)
and the waiting time is sampled by inverting the squared-norm decay. The
three jump channels (F'=3 -> F=2 at Gamma, F'=2 -> F=1 and F'=2 -> F=2 at
Gamma/2 each) all collapse the atom onto a ground level, so only two
no-jump survival curves exist (start in F=1 or in F=2); they are
precomputed on a fine grid once per parameter set and inverted by table
lookup, which makes the emission stream cheap to sample exactly.

Randomness uses the counter-based Philox generator; every consumer owns a
(seed, stream, index) key, so a fixed seed reproduces streams bit-for-bit
no matter how many workers execute the trajectory segments.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .bloch import RotatingFrameSystem, build_system
from .constants import EXC_F2, EXC_F3, GND_F1, GND_F2
from .params import ExperimentParams

# RNG stream salts
_STREAM_EMISSION = 0
_STREAM_DETECTION = 1
_STREAM_DARK = 2
_STREAM_TELEGRAPH = 3

_TABLE_FLOOR = 1e-8       # survival level the wait tables reach before the tail
_TABLE_MAX_POINTS = 1 << 21


class EmptyStreamError(ValueError):
    """A correlation was requested from a channel with no events."""


class ThresholdRangeError(ValueError):
    """Gate threshold does not separate background from one-atom counts."""


def stream_rng(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Independent counter-based generator for (seed, stream, index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream, index])))


# -- time-tag streams ---------------------------------------------------------

@dataclass
class TimeTagStream:
    """Detector clicks: integer-picosecond timestamps plus channel ids (0/1).

    Timestamps are sorted (ties broken by channel) and strictly increasing
    within each channel.
    """

    timestamps: np.ndarray
    channels: np.ndarray
    live_time_ps: int

    def __post_init__(self):
        self.timestamps = np.ascontiguousarray(self.timestamps, dtype=np.uint64)
        self.channels = np.ascontiguousarray(self.channels, dtype=np.uint8)
        if self.timestamps.shape != self.channels.shape or self.timestamps.ndim != 1:
            raise ValueError("timestamps and channels must be matching 1-d arrays")
        if self.live_time_ps <= 0:
            raise ValueError("live_time_ps must be positive")
        if np.any(self.channels > 1):
            raise ValueError("channels must be 0 or 1")
        if self.timestamps.size:
            if np.any(np.diff(self.timestamps.astype(np.int64)) < 0):
                raise ValueError("timestamps must be sorted")
            for ch in (0, 1):
                t = self.timestamps[self.channels == ch].astype(np.int64)
                if t.size > 1 and np.any(np.diff(t) <= 0):
                    raise ValueError(f"timestamps must strictly increase within channel {ch}")

    def channel_times_s(self, channel: int) -> np.ndarray:
        return self.timestamps[self.channels == channel].astype(float) * 1e-12

    @property
    def live_time_s(self) -> float:
        return self.live_time_ps * 1e-12


# -- waiting-time tables ------------------------------------------------------

@dataclass
class _WaitTable:
    dt: float
    surv: np.ndarray       # squared norm S(k dt), decreasing from 1
    log_surv: np.ndarray
    frac_fp3: np.ndarray   # |psi_d|^2 / (|psi_a|^2 + |psi_d|^2) at k dt
    tail_rate: float       # d(-ln S)/dt beyond the table, 0 = no decay

    def __post_init__(self):
        self._neg_surv = -self.surv   # ascending view for searchsorted

    def waits(self, u: np.ndarray) -> np.ndarray:
        """Invert S(t) = u elementwise; inf when the norm never reaches u."""
        u = np.maximum(np.asarray(u, dtype=float), 1e-300)
        s, ls = self.surv, self.log_surv
        out = np.empty_like(u)
        tail = u < s[-1]
        j = np.searchsorted(self._neg_surv, -u[~tail], side="right") - 1
        j = np.clip(j, 0, s.size - 2)
        num = ls[j] - np.log(u[~tail])
        den = ls[j] - ls[j + 1]
        out[~tail] = (j + np.where(den > 0, num / np.maximum(den, 1e-300), 0.0)) * self.dt
        if np.any(tail):
            if self.tail_rate > 0:
                out[tail] = (s.size - 1) * self.dt + (ls[-1] - np.log(u[tail])) / self.tail_rate
            else:
                out[tail] = np.inf
        return out

    def frac_fp3_at(self, t: np.ndarray) -> np.ndarray:
        x = np.asarray(t, dtype=float) / self.dt
        j = np.clip(x.astype(np.int64), 0, self.frac_fp3.size - 2)
        w = np.clip(x - j, 0.0, 1.0)
        return (1.0 - w) * self.frac_fp3[j] + w * self.frac_fp3[j + 1]


def _propagate_grid(k_eff: np.ndarray, psi0: np.ndarray, dt: float, n: int) -> np.ndarray:
    """Amplitudes exp(-i K t) psi0 on t = (0..n-1) dt, shape (n, 4)."""
    lam, v = np.linalg.eig(-1j * k_eff)
    coef = np.linalg.solve(v, psi0)
    grid = np.arange(n) * dt
    amp = (np.exp(np.outer(grid, lam)) * coef) @ v.T
    # eigendecomposition can be ill-conditioned; verify against one exact point
    probe = min(n - 1, 1000)
    exact = expm(-1j * k_eff * (probe * dt)) @ psi0
    if np.abs(amp[probe] - exact).max() > 1e-8:
        u_dt = expm(-1j * k_eff * dt)
        amp = np.empty((n, 4), dtype=complex)
        amp[0] = psi0
        for i in range(1, n):
            amp[i] = u_dt @ amp[i - 1]
    return amp


def _build_wait_table(system: RotatingFrameSystem, start_level: int) -> _WaitTable:
    g = system.gamma
    k_eff = system.h_rot.astype(complex)
    k_eff[EXC_F2, EXC_F2] -= 0.5j * g
    k_eff[EXC_F3, EXC_F3] -= 0.5j * g

    scale = max(np.abs(system.h_rot).max(), g, 1.0)
    dt = (2.0 * np.pi / scale) / 48.0
    psi0 = np.zeros(4, dtype=complex)
    psi0[start_level] = 1.0

    # size the grid from the slowest decaying mode the state overlaps
    lam, v = np.linalg.eig(-1j * k_eff)
    coef = np.linalg.solve(v, psi0)
    active = np.abs(coef) > 1e-12 * max(np.abs(coef).max(), 1e-300)
    decay = -2.0 * lam.real
    slow = decay[active].min() if active.any() else 0.0
    if slow > 1e-12 * scale:
        amp_bound = max(float(np.abs(coef).sum()), 1.0)
        horizon = (2.0 * np.log(amp_bound) + np.log(1.0 / _TABLE_FLOOR)) / slow
        n = int(np.ceil(1.2 * horizon / dt)) + 2
    else:
        n = 1 << 12
    n = int(np.clip(n, 1 << 12, _TABLE_MAX_POINTS))

    prev_last = np.inf
    while True:
        amp = _propagate_grid(k_eff, psi0, dt, n)
        surv = np.einsum("ij,ij->i", amp, amp.conj()).real
        flattened = surv[-1] > 0.999 * min(prev_last, 1.0)
        if surv[-1] < _TABLE_FLOOR or n >= _TABLE_MAX_POINTS or flattened:
            break
        prev_last = surv[-1]
        n *= 2

    surv = np.minimum.accumulate(np.clip(surv, 1e-300, None))
    log_surv = np.log(surv)
    pa2 = np.abs(amp[:, EXC_F2]) ** 2
    pd2 = np.abs(amp[:, EXC_F3]) ** 2
    tot = pa2 + pd2
    frac = np.divide(pd2, tot, out=np.ones_like(tot), where=tot > 0)
    if tot[0] == 0 and frac.size > 1:
        frac[0] = frac[1]

    # asymptotic rate from the last decade of the table
    i0 = int(np.searchsorted(-surv, -(surv[-1] * 10.0)))
    i0 = min(max(i0, 0), surv.size - 2)
    drop = log_surv[i0] - log_surv[-1]
    tail_rate = drop / ((surv.size - 1 - i0) * dt) if drop > 1e-12 else 0.0
    return _WaitTable(dt=dt, surv=surv, log_surv=log_surv, frac_fp3=frac,
                      tail_rate=float(tail_rate))


def build_wait_tables(system: RotatingFrameSystem) -> dict[int, _WaitTable]:
    """No-jump survival tables from each post-emission level."""
    return {GND_F1: _build_wait_table(system, GND_F1),
            GND_F2: _build_wait_table(system, GND_F2)}


# -- emission sampling --------------------------------------------------------

def _segment_emissions(tables, seg_duration: float, rng: np.random.Generator,
                       initial_level: int) -> np.ndarray:
    """Jump times of one trajectory segment, seconds from segment start.

    Consumes one (u_wait, u_channel, u_branch) triple per attempted
    emission, in stream order, so the output depends only on the generator
    state, not on block sizes.
    """
    chunk = 1 << 13
    uw = uc = ub = None
    pos = chunk
    t = 0.0
    state = initial_level
    out: list[np.ndarray] = []
    while True:
        if pos >= chunk:
            uw, uc, ub = rng.random((3, chunk))
            pos = 0
        table = tables[state]
        # speculate a short run ahead; a level switch invalidates the rest of
        # the block, so deep speculation is wasted work (runs average ~10)
        m = min(chunk - pos, 32)
        w = table.waits(uw[pos:pos + m])
        tt = t + np.cumsum(w)
        n_fit = int(np.searchsorted(tt, seg_duration, side="left"))
        frac3 = table.frac_fp3_at(w)
        is_fp2 = uc[pos:pos + m] >= frac3          # jump came from F'=2
        to_f1 = is_fp2 & (ub[pos:pos + m] < 0.5)   # ... and branched to F=1
        # a jump from F'=2 to F=1 changes the start level; everything before
        # the first such jump was correctly sampled from the current table
        hits = np.flatnonzero(to_f1[:n_fit])
        if state == GND_F1:
            first_other = np.flatnonzero(~to_f1[:n_fit])
            cut = first_other[0] if first_other.size else n_fit
        else:
            cut = hits[0] if hits.size else n_fit
        if cut < n_fit:
            take = cut + 1
            out.append(tt[:take])
            t = float(tt[cut])
            state = GND_F1 if to_f1[cut] else GND_F2
            pos += take
        elif n_fit < m:
            out.append(tt[:n_fit])
            pos += n_fit + 1
            break
        else:
            out.append(tt)
            t = float(tt[-1])
            pos += m
    return np.concatenate(out) if out else np.empty(0)


def quantum_jump_emissions(params: ExperimentParams, duration: float, seed: int,
                           n_segments: int = 1, max_workers: int | None = None,
                           initial_level: int = GND_F2) -> np.ndarray:
    """Photon emission times (seconds) of one stochastic trajectory.

    The run is split into `n_segments` independent segments, each owning
    the Philox stream (seed, 0, segment); the result is a function of
    (params, duration, seed, n_segments) only, regardless of how many
    threads execute the segments. Segments restart in `initial_level`,
    which breaks correlations across boundaries; keep segments much longer
    than the correlation time.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    system = build_system(params)
    tables = build_wait_tables(system)
    seg_t = duration / n_segments

    def run(k: int) -> np.ndarray:
        rng = stream_rng(seed, _STREAM_EMISSION, k)
        return _segment_emissions(tables, seg_t, rng, initial_level) + k * seg_t

    if max_workers is not None and max_workers > 1 and n_segments > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            parts = list(pool.map(run, range(n_segments)))
    else:
        parts = [run(k) for k in range(n_segments)]
    return np.concatenate(parts) if parts else np.empty(0)


# -- detection ----------------------------------------------------------------

def _strictly_increasing_ps(t_ps: np.ndarray) -> np.ndarray:
    t_ps = np.sort(t_ps)
    for _ in range(64):
        d = np.diff(t_ps)
        bad = d <= 0
        if not bad.any():
            break
        t_ps[1:][bad] += 1 - d[bad]
    return t_ps


def detection_chain(emissions_s: np.ndarray, live_time_s: float,
                    params: ExperimentParams, seed: int) -> TimeTagStream:
    """Thin, split and pollute an emission stream into detector time tags.

    Each emission survives with probability `detection_efficiency`, is
    routed 50/50 by the beamsplitter, and each detector adds an
    independent Poisson dark-count stream. Output timestamps are integer
    picoseconds.
    """
    if live_time_s <= 0:
        raise ValueError("live_time_s must be positive")
    emissions_s = np.asarray(emissions_s, dtype=float)
    rng_det = stream_rng(seed, _STREAM_DETECTION)
    rng_dark = stream_rng(seed, _STREAM_DARK)

    keep = rng_det.random(emissions_s.size) < params.detection_efficiency
    route = rng_det.random(emissions_s.size) < 0.5
    per_channel = []
    for ch in (0, 1):
        t = emissions_s[keep & (route == bool(ch))]
        n_dark = rng_dark.poisson(params.dark_rate_per_detector * live_time_s)
        dark = rng_dark.random(n_dark) * live_time_s
        t_ps = np.rint(np.concatenate([t, dark]) * 1e12).astype(np.int64)
        t_ps = _strictly_increasing_ps(t_ps)
        per_channel.append(t_ps)

    times = np.concatenate(per_channel)
    chans = np.concatenate([np.zeros(per_channel[0].size, dtype=np.uint8),
                            np.ones(per_channel[1].size, dtype=np.uint8)])
    order = np.lexsort((chans, times))
    return TimeTagStream(timestamps=times[order].astype(np.uint64),
                         channels=chans[order],
                         live_time_ps=int(round(live_time_s * 1e12)))


@dataclass
class CoincidenceHistogram:
    """All-pairs D1-D2 lag histogram with the rates needed to normalise it."""

    tau: np.ndarray          # bin centres, seconds, symmetric around 0
    counts: np.ndarray
    rate1: float
    rate2: float
    bin_width: float
    live_time: float


def coincidence_histogram(stream: TimeTagStream, window: float,
                          bin_width: float) -> CoincidenceHistogram:
    """Histogram of t(D1) - t(D2) over all pairs with |lag| inside the window.

    Bins are centred on zero lag (the central bin spans +-bin/2); the
    effective window is rounded to a whole number of bins.
    """
    if bin_width <= 0 or window < bin_width:
        raise ValueError("need bin_width > 0 and window >= bin_width")
    t1 = stream.timestamps[stream.channels == 0].astype(np.int64)
    t2 = stream.timestamps[stream.channels == 1].astype(np.int64)
    if t1.size == 0 or t2.size == 0:
        raise EmptyStreamError("both detector channels need events")

    n_half = int(round(window / bin_width))
    bin_ps = bin_width * 1e12
    edges = (np.arange(2 * n_half + 2) - n_half - 0.5) * bin_ps
    reach = edges[-1]
    counts = np.zeros(2 * n_half + 1, dtype=np.int64)

    step = 200_000
    for a in range(0, t1.size, step):
        left = t1[a:a + step]
        lo = np.searchsorted(t2, left + np.int64(np.floor(-reach)))
        hi = np.searchsorted(t2, left + np.int64(np.ceil(reach)) + 1)
        cnt = hi - lo
        total = int(cnt.sum())
        if total == 0:
            continue
        offsets = np.repeat(np.cumsum(cnt) - cnt, cnt)
        j = np.repeat(lo, cnt) + (np.arange(total) - offsets)
        diffs = np.repeat(left, cnt) - t2[j]
        counts += np.histogram(diffs, bins=edges)[0]

    live = stream.live_time_s
    return CoincidenceHistogram(
        tau=(np.arange(-n_half, n_half + 1) * bin_width),
        counts=counts,
        rate1=t1.size / live, rate2=t2.size / live,
        bin_width=bin_width, live_time=live)


# -- telegraph signal ---------------------------------------------------------

@dataclass
class TelegraphTrace:
    """Binned counting trace of the loading/loss telegraph.

    `occupancy` is the hidden binary atom-number per bin (majority rule
    within the bin); `switch_times` are the exact occupancy toggle times,
    both kept for validation. The external CSV format carries only
    (bin_start_s, counts).
    """

    bin_width: float
    counts: np.ndarray
    occupancy: np.ndarray | None = None
    switch_times: np.ndarray | None = None

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        if self.occupancy is not None:
            self.occupancy = np.asarray(self.occupancy, dtype=np.uint8)
            if self.occupancy.shape != self.counts.shape:
                raise ValueError("occupancy must match counts")
            if np.any(self.occupancy > 1):
                raise ValueError("occupancy is 0 or 1 (collisional blockade)")

    @property
    def live_time(self) -> float:
        return self.counts.size * self.bin_width


def telegraph_signal(params: ExperimentParams, duration: float,
                     bin_width: float, seed: int) -> TelegraphTrace:
    """Two-state occupancy chain plus Poisson counting noise.

    Empty -> occupied at `load_rate`; occupied -> empty at
    `loss_rate + load_rate` (a second atom arriving during occupancy
    ejects both in a cold collision, so arrivals terminate occupancy too).
    Counts per bin are Poisson with mean
    bin * (background + occupancy * (atom_rate - background)).
    """
    if duration <= 0 or bin_width <= 0 or duration < bin_width:
        raise ValueError("need duration >= bin_width > 0")
    if params.atom_rate <= params.background_rate:
        raise ValueError("atom_rate must exceed background_rate")
    rng = stream_rng(seed, _STREAM_TELEGRAPH)

    switches = []
    t, occupied = 0.0, False
    while True:
        rate = (params.loss_rate + params.load_rate) if occupied else params.load_rate
        if rate <= 0:
            break
        t += rng.exponential(1.0 / rate)
        if t >= duration:
            break
        switches.append(t)
        occupied = not occupied
    switches = np.asarray(switches)

    n_bins = int(np.floor(duration / bin_width + 1e-9))
    frac = np.zeros(n_bins)
    bounds = np.concatenate([switches, [duration]])
    for i in range(0, bounds.size - 1, 2):   # occupied intervals start at even toggles
        a, b = bounds[i], bounds[i + 1]
        b = min(b, n_bins * bin_width)
        if b <= a:
            continue
        i0, i1 = int(a / bin_width), min(int(b / bin_width), n_bins - 1)
        if i0 == i1:
            frac[i0] += (b - a) / bin_width
        else:
            frac[i0] += (i0 + 1) - a / bin_width
            frac[i1] += b / bin_width - i1
            frac[i0 + 1:i1] += 1.0
    frac = np.clip(frac, 0.0, 1.0)

    mean = bin_width * (params.background_rate
                        + frac * (params.atom_rate - params.background_rate))
    counts = rng.poisson(mean)
    return TelegraphTrace(bin_width=bin_width, counts=counts,
                          occupancy=(frac >= 0.5).astype(np.uint8),
                          switch_times=switches)


def occupancy_histogram(trace: TelegraphTrace) -> tuple[np.ndarray, np.ndarray]:
    """Histogram of the per-bin count values: (count value, frequency)."""
    freq = np.bincount(trace.counts.astype(np.int64))
    return np.arange(freq.size), freq


def threshold_gate(trace: TelegraphTrace, threshold: float,
                   background_rate: float | None = None,
                   atom_rate: float | None = None) -> list[tuple[float, float]]:
    """Contiguous intervals (start_s, end_s) where the count rate exceeds
    `threshold` (counts/s). When the underlying rates are supplied the
    threshold must separate them."""
    if threshold <= 0:
        raise ThresholdRangeError("threshold must be positive")
    if background_rate is not None and threshold <= background_rate:
        raise ThresholdRangeError(
            f"threshold {threshold} must exceed the background rate {background_rate}")
    if atom_rate is not None and threshold >= atom_rate:
        raise ThresholdRangeError(
            f"threshold {threshold} must lie below the one-atom rate {atom_rate}")
    above = trace.counts > threshold * trace.bin_width
    edges = np.flatnonzero(np.diff(np.concatenate([[0], above.view(np.int8), [0]])))
    return [(float(s * trace.bin_width), float(e * trace.bin_width))
            for s, e in zip(edges[::2], edges[1::2])]


def detected_fraction(gates: list[tuple[float, float]], live_time: float) -> float:
    """Fraction of the trace covered by gate intervals."""
    return sum(e - s for s, e in gates) / live_time
