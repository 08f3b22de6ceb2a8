"""Interferometer network, detectors, and coincidence logic.

Event-level Monte Carlo of the three measurement arrangements: time-bin
entanglement analysis (two unbalanced Michelson analyzers), Hong-Ou-Mandel
interference of consecutive photons, and Hanbury Brown-Twiss
autocorrelation.  Each Michelson pass costs a factor 1/2 into the
detection port (the photon may return toward the source).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .cascade import EmitterParams, PulseTrain, blinking_telegraph, sample_pair_emission
from .kernels import dead_time_mask, pair_delay_counts
from .qcore import DensityMatrix

JITTER_FWHM_TO_SIGMA = 1.0 / 2.355


@dataclass(frozen=True)
class Interferometer:
    """Unbalanced Michelson analyzer: path delay (ps) and long-arm phase."""

    delay: float = 3000.0
    phase: float = 0.0
    split_ratio: float = 0.5

    def __post_init__(self):
        if self.delay <= 0:
            raise ValueError("interferometer delay must be positive")
        if not (0.0 < self.split_ratio < 1.0):
            raise ValueError("split_ratio must be in (0, 1)")


@dataclass(frozen=True)
class DetectorModel:
    """Detection efficiency, dark counts, Gaussian jitter, dead time."""

    efficiency: float = 0.25
    dark_count_rate: float = 100.0  # counts/s
    jitter_sigma: float = 16.0 * JITTER_FWHM_TO_SIGMA  # 16 ps FWHM resolution
    dead_time: float = 0.0  # ps

    def __post_init__(self):
        if not (0.0 < self.efficiency <= 1.0):
            raise ValueError("efficiency must be in (0, 1]")
        if self.dark_count_rate < 0 or self.jitter_sigma < 0 or self.dead_time < 0:
            raise ValueError("detector parameters must be non-negative")

    @classmethod
    def ideal(cls) -> "DetectorModel":
        return cls(efficiency=1.0, dark_count_rate=0.0, jitter_sigma=0.0, dead_time=0.0)


@dataclass(frozen=True)
class TimebinStateModel:
    """Generated two-photon time-bin state: coherence V and pump phase."""

    visibility: float = 1.0
    pump_phase: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.visibility <= 1.0):
            raise ValueError("visibility must be in [0, 1]")


@dataclass
class PhotonEvents:
    """Detector clicks: channel ids and timestamps (ps), sorted by time."""

    channel: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int8))
    time: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self) -> int:
        return len(self.time)

    def on_channel(self, ch: int) -> np.ndarray:
        return self.time[self.channel == ch]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("channel,timestamp_ps\n")
        for c, t in zip(self.channel, self.time):
            buf.write(f"{int(c)},{float(t)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PhotonEvents":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        if lines and lines[0].startswith("channel"):
            lines = lines[1:]
        ch, tm = [], []
        for i, ln in enumerate(lines):
            parts = ln.split(",")
            if len(parts) != 2:
                raise ValueError(f"malformed event row {i + 1}: {ln!r}")
            ch.append(int(parts[0]))
            tm.append(float(parts[1]))
        return cls(np.array(ch, dtype=np.int8), np.array(tm))


@dataclass
class CoincidenceHistogram:
    """Start-stop delay histogram with fixed bin width.

    Bin i covers [origin + i*w, origin + (i+1)*w); `symmetric_bins` places
    bin centers on integer multiples of the bin width with 0 included.
    """

    bin_width: float
    origin: float
    counts: np.ndarray

    def __post_init__(self):
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")
        self.bin_width = float(self.bin_width)
        self.origin = float(self.origin)
        c = np.asarray(self.counts, dtype=np.int64)
        if np.any(c < 0):
            raise ValueError("histogram counts must be non-negative")
        self.counts = c

    @property
    def centers(self) -> np.ndarray:
        return self.origin + (np.arange(len(self.counts)) + 0.5) * self.bin_width

    def total(self) -> int:
        return int(self.counts.sum())

    def window_area(self, center: float, half_width: float) -> int:
        """Sum of counts in bins whose centers lie within +-half_width."""
        c = self.centers
        return int(self.counts[np.abs(c - center) <= half_width].sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# bin_width_ps={self.bin_width!r}\n")
        buf.write(f"# origin_ps={self.origin!r}\n")
        buf.write("delay_ps,counts\n")
        for c, n in zip(self.centers, self.counts):
            buf.write(f"{float(c)!r},{n}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CoincidenceHistogram":
        bin_width = None
        origin = None
        rows = []
        for i, ln in enumerate(text.splitlines()):
            if not ln:
                continue
            if ln.startswith("#"):
                key, _, val = ln[1:].partition("=")
                key = key.strip()
                if key == "bin_width_ps":
                    bin_width = float(val)
                elif key == "origin_ps":
                    origin = float(val)
                continue
            if ln.startswith("delay_ps"):
                continue
            parts = ln.split(",")
            if len(parts) != 2:
                raise ValueError(f"malformed histogram row {i + 1}: {ln!r}")
            rows.append((float(parts[0]), int(parts[1])))
        if bin_width is None:
            raise ValueError("histogram file missing '# bin_width_ps=' header")
        counts = np.array([n for _, n in rows], dtype=np.int64)
        if origin is None:
            origin = rows[0][0] - 0.5 * bin_width if rows else 0.0
        return cls(bin_width=bin_width, origin=origin, counts=counts)


def symmetric_bins(max_delay: float, bin_width: float):
    """(origin, nbins) covering +-max_delay with 0 on a bin center."""
    half = int(np.ceil(max_delay / bin_width))
    return -(half + 0.5) * bin_width, 2 * half + 1


def merge_histograms(a: CoincidenceHistogram, b: CoincidenceHistogram) -> CoincidenceHistogram:
    if (a.bin_width != b.bin_width or a.origin != b.origin
            or len(a.counts) != len(b.counts)):
        raise ValueError("histograms have incompatible binning")
    return CoincidenceHistogram(a.bin_width, a.origin, a.counts + b.counts)


def histogram_events(events: PhotonEvents, start_channel: int, stop_channel: int,
                     bin_width: float, max_delay: float) -> CoincidenceHistogram:
    """Bin all start-stop delays with |delay| <= max_delay."""
    starts = np.sort(events.on_channel(start_channel))
    stops = np.sort(events.on_channel(stop_channel))
    origin, nbins = symmetric_bins(max_delay, bin_width)
    if len(starts) == 0 or len(stops) == 0:
        return CoincidenceHistogram(bin_width, origin, np.zeros(nbins, dtype=np.int64))
    counts = pair_delay_counts(starts, stops, origin, bin_width, nbins)
    return CoincidenceHistogram(bin_width, origin, counts)


# --- analytic pieces -------------------------------------------------------

def ideal_timebin_density(model: TimebinStateModel) -> DensityMatrix:
    """Density matrix of the generated state: Bell coherence scaled by V."""
    v, phi = model.visibility, model.pump_phase
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = m[3, 3] = 0.5
    m[0, 3] = 0.5 * v * np.exp(1j * phi)
    m[3, 0] = np.conj(m[0, 3])
    return DensityMatrix(m)


def coincidence_probability(phi_p: float, phi_x: float, phi_xx: float, visibility: float) -> float:
    """Middle-slot pair probability, normalized to 1/4 at zero coherence."""
    if not (0.0 <= visibility <= 1.0):
        raise ValueError("visibility must be in [0, 1]")
    return (1.0 + visibility * np.cos(phi_p - phi_x - phi_xx)) / 4.0


# --- detection chain -------------------------------------------------------

def _detect(raw_channel: np.ndarray, raw_time: np.ndarray, detectors: DetectorModel,
            duration: float, seed, n_channels: int = 2) -> PhotonEvents:
    """Apply efficiency, jitter, dark counts, and per-channel dead time."""
    r_eff = rng.CounterRng(seed, 100)
    r_jit = rng.CounterRng(seed, 101)
    r_dark = rng.CounterRng(seed, 102)

    keep = r_eff.uniform(len(raw_time)) < detectors.efficiency
    ch = raw_channel[keep]
    tm = raw_time[keep]
    if detectors.jitter_sigma > 0 and len(tm):
        tm = tm + r_jit.normal(len(tm), detectors.jitter_sigma)
    else:
        r_jit.counter += len(tm)

    mean_dark = detectors.dark_count_rate * duration * 1e-12
    if mean_dark > 0:
        n_dark = r_dark.poisson(np.full(n_channels, mean_dark))
        dark_ch = np.repeat(np.arange(n_channels, dtype=np.int8), n_dark)
        dark_tm = r_dark.uniform(int(n_dark.sum())) * duration
        ch = np.concatenate([ch, dark_ch])
        tm = np.concatenate([tm, dark_tm])

    order = np.argsort(tm, kind="stable")
    ch, tm = ch[order], tm[order]

    if detectors.dead_time > 0:
        keep = np.zeros(len(tm), dtype=bool)
        for c in range(n_channels):
            sel = ch == c
            keep[sel] = dead_time_mask(tm[sel], detectors.dead_time)
        ch, tm = ch[keep], tm[keep]
    return PhotonEvents(ch.astype(np.int8), tm)


# --- time-bin entanglement run --------------------------------------------

# stream ids local to simulate_timebin_run
_T_EXCITE = 10
_T_BIN = 11
_T_PATH_XX = 12
_T_PATH_X = 13
_T_SURV_1 = 14
_T_SURV_2 = 15
_T_EXP_XX = 16
_T_EXP_X = 17


def simulate_timebin_run(emitter: EmitterParams, state: TimebinStateModel,
                         analyzers, detectors: DetectorModel,
                         cycles: int, seed) -> PhotonEvents:
    """Event stream of the time-bin analysis: channel 0 = XX, channel 1 = X.

    Per excited cycle the pair picks a time bin and analyzer paths; the two
    indistinguishable middle-slot histories interfere with the fringe law
    (1 + V cos(phi_P - phi_X - phi_XX))/4.  Non-overlap outcomes keep
    independent 1/2 port losses per photon; for overlap candidates the pair
    survives jointly, so single-photon rates in that branch are not modeled.
    """
    an_xx, an_x = analyzers
    if abs(an_xx.delay - an_x.delay) > 1.0:
        raise ValueError(
            f"analyzer delays differ by {abs(an_xx.delay - an_x.delay):.3f} ps; "
            "time bins would not overlap"
        )
    delay = an_xx.delay
    fringe = coincidence_probability(state.pump_phase, an_x.phase, an_xx.phase,
                                     state.visibility)

    on = blinking_telegraph(emitter.blinking_on_fraction,
                            emitter.blinking_mean_on_cycles, seed, cycles).astype(bool)
    c = np.arange(cycles, dtype=np.uint64)
    u = {s: rng.uniform(rng.stream_seed(seed, s), c)
         for s in (_T_EXCITE, _T_BIN, _T_PATH_XX, _T_PATH_X, _T_SURV_1, _T_SURV_2)}
    e_xx = rng.exponential(rng.stream_seed(seed, _T_EXP_XX), c, emitter.tau_xx)
    e_x = rng.exponential(rng.stream_seed(seed, _T_EXP_X), c, emitter.tau_x)

    excited = on & (u[_T_EXCITE] < emitter.p_emit_pi)
    b = (u[_T_BIN] < 0.5).astype(np.int8)  # 0 = early, 1 = late
    path_xx = (u[_T_PATH_XX] < 0.5).astype(np.int8)  # 0 = short, 1 = long
    path_x = (u[_T_PATH_X] < 0.5).astype(np.int8)

    # overlap candidates: (early, long, long) or (late, short, short)
    mm = ((b == 0) & (path_xx == 1) & (path_x == 1)) | \
         ((b == 1) & (path_xx == 0) & (path_x == 0))
    # 4 * fringe = 1 + V cos(...) in [0, 2]; pair survival absorbs one 1/2
    pair_ok = (u[_T_SURV_1] < 0.5) & (u[_T_SURV_2] < 2.0 * fringe)
    surv_xx = np.where(mm, pair_ok, u[_T_SURV_1] < 0.5)
    surv_x = np.where(mm, pair_ok, u[_T_SURV_2] < 0.5)

    slot_xx = b + path_xx
    slot_x = b + path_x

    cyc_t = np.arange(cycles) * emitter.rep_period
    sel_xx = excited & surv_xx
    sel_x = excited & surv_x
    t_xx = cyc_t[sel_xx] + slot_xx[sel_xx] * delay + e_xx[sel_xx]
    t_x = cyc_t[sel_x] + slot_x[sel_x] * delay + e_xx[sel_x] + e_x[sel_x]

    raw_ch = np.concatenate([np.zeros(len(t_xx), dtype=np.int8),
                             np.ones(len(t_x), dtype=np.int8)])
    raw_tm = np.concatenate([t_xx, t_x])
    return _detect(raw_ch, raw_tm, detectors, cycles * emitter.rep_period, seed)


def timebin_slot_counts(events: PhotonEvents, rep_period: float, delay: float,
                        window: float = 500.0) -> np.ndarray:
    """3x3 table of same-cycle (slot_xx, slot_x) coincidences.

    A click is assigned slot s if it falls within +-window of cycle start +
    s*delay (the exponential emission tail beyond the window is dropped,
    uniformly over slots).
    """
    out = np.zeros((3, 3), dtype=np.int64)
    by_cycle = {}
    for ch in (0, 1):
        tm = events.on_channel(ch)
        cyc = np.floor(tm / rep_period).astype(np.int64)
        rel = tm - cyc * rep_period
        slot = np.rint(rel / delay).astype(np.int64)
        ok = (slot >= 0) & (slot <= 2) & (np.abs(rel - slot * delay) <= window)
        by_cycle[ch] = dict(zip(cyc[ok].tolist(), slot[ok].tolist()))
    for cyc, s_xx in by_cycle[0].items():
        s_x = by_cycle[1].get(cyc)
        if s_x is not None:
            out[s_xx, s_x] += 1
    return out


def middle_slot_fraction(slot_counts: np.ndarray) -> float:
    """Middle-middle coincidences over the coherence-independent pair rate.

    The baseline accepted-pair rate is estimated from the six
    non-interfering slot combinations (which carry 3/4 of it), so the
    returned fraction equals (1 + V cos dphi)/4 in expectation.
    """
    mm = slot_counts[1, 1]
    side = (slot_counts[0, 0] + slot_counts[0, 1] + slot_counts[1, 0]
            + slot_counts[1, 2] + slot_counts[2, 1] + slot_counts[2, 2])
    if side == 0:
        raise ValueError("no side-slot coincidences; cannot normalize")
    return float(mm / (side * 4.0 / 3.0))


# --- Hong-Ou-Mandel run ----------------------------------------------------

_H_EXC0 = 20
_H_EXC1 = 21
_H_PATH0 = 22
_H_PATH1 = 23
_H_SURV0 = 24
_H_SURV1 = 25
_H_EXP0 = 26
_H_EXP1 = 27
_H_BUNCH = 28
_H_DET0 = 29
_H_DET1 = 30
_H_BUNCH_DET = 31


def simulate_hom_run(emitter: EmitterParams, analyzer: Interferometer,
                     mutual_visibility: float, detectors: DetectorModel,
                     cycles: int, seed) -> PhotonEvents:
    """HOM interference of consecutively emitted XX photons.

    Two excitation pulses per cycle, separated by the analyzer delay.  Each
    photon takes the short or long arm (1/2 each) and survives into the
    output port with probability 1/2.  When the first photon takes the long
    arm and the second the short arm they overlap at the beamsplitter: with
    probability `mutual_visibility` they bunch into the same output
    detector, suppressing coincidences in peak A.

    Pulse pairs are spaced two repetition periods apart (pulse picking) so
    the neighbouring-cycle coincidence cluster cannot leak into the
    outermost five-peak windows.
    """
    if not (0.0 <= mutual_visibility <= 1.0):
        raise ValueError("mutual_visibility must be in [0, 1]")
    d = analyzer.delay
    on = blinking_telegraph(emitter.blinking_on_fraction,
                            emitter.blinking_mean_on_cycles, seed, cycles).astype(bool)
    c = np.arange(cycles, dtype=np.uint64)
    u = {s: rng.uniform(rng.stream_seed(seed, s), c)
         for s in (_H_EXC0, _H_EXC1, _H_PATH0, _H_PATH1, _H_SURV0, _H_SURV1,
                   _H_BUNCH, _H_DET0, _H_DET1, _H_BUNCH_DET)}
    e0 = rng.exponential(rng.stream_seed(seed, _H_EXP0), c, emitter.tau_xx)
    e1 = rng.exponential(rng.stream_seed(seed, _H_EXP1), c, emitter.tau_xx)

    emit0 = on & (u[_H_EXC0] < emitter.p_emit_pi) & (u[_H_SURV0] < 0.5)
    emit1 = on & (u[_H_EXC1] < emitter.p_emit_pi) & (u[_H_SURV1] < 0.5)
    path0 = (u[_H_PATH0] < 0.5).astype(np.int8)
    path1 = (u[_H_PATH1] < 0.5).astype(np.int8)

    overlap = emit0 & emit1 & (path0 == 1) & (path1 == 0)
    bunch = overlap & (u[_H_BUNCH] < mutual_visibility)

    det0 = (u[_H_DET0] < 0.5).astype(np.int8)
    det1 = (u[_H_DET1] < 0.5).astype(np.int8)
    bunch_det = (u[_H_BUNCH_DET] < 0.5).astype(np.int8)
    det0 = np.where(bunch, bunch_det, det0)
    det1 = np.where(bunch, bunch_det, det1)

    pair_period = 2.0 * emitter.rep_period
    cyc_t = np.arange(cycles) * pair_period
    t0 = cyc_t[emit0] + path0[emit0] * d + e0[emit0]
    t1 = cyc_t[emit1] + d + path1[emit1] * d + e1[emit1]

    raw_ch = np.concatenate([det0[emit0], det1[emit1]])
    raw_tm = np.concatenate([t0, t1])
    return _detect(raw_ch, raw_tm, detectors, cycles * pair_period, seed)


def hom_distinguishable_fixture() -> dict:
    """Exhaustive path-combination enumeration of the five-peak normalization.

    Enumerates the 4 path combinations x output-detector assignments (each
    photon surviving its output port).  Side peaks accumulate cross-detector
    coincidence weight; the central peak accumulates the full overlapping
    pair flux (same- and cross-detector alike), the classical normalization
    under which two distinguishable photons on a beamsplitter read out as
    g2 = 0.5.  Returns relative areas keyed by peak delay in units of the
    analyzer delay.
    """
    weights = {-2: 0.0, -1: 0.0, 0: 0.0, 1: 0.0, 2: 0.0}
    for path0 in (0, 1):
        for path1 in (0, 1):
            arrival0 = path0  # photon 0 emitted at 0
            arrival1 = 1 + path1  # photon 1 emitted one delay later
            overlap = arrival0 == arrival1
            for d0 in (0, 1):
                for d1 in (0, 1):
                    if d0 == d1 and not overlap:
                        continue  # same detector: no coincidence
                    # start on detector 0, stop on detector 1
                    if d0 == 0:
                        tau = arrival1 - arrival0
                    else:
                        tau = arrival0 - arrival1
                    weights[tau] += (0.25  # path combination
                                     * 0.25  # port survival of both photons
                                     * 0.25)  # detector assignment
    return weights


# --- autocorrelation -------------------------------------------------------

def simulate_autocorrelation(emitter: EmitterParams, photon: str,
                             detectors: DetectorModel, cycles: int, seed) -> PhotonEvents:
    """Hanbury Brown-Twiss stream of one photon species split 50/50."""
    if photon not in ("xx", "x"):
        raise ValueError("photon must be 'xx' or 'x'")
    records = sample_pair_emission(emitter, PulseTrain.single_pi(), seed, cycles)
    tm = records.t_xx if photon == "xx" else records.t_x
    r_split = rng.CounterRng(seed, 40)
    ch = (r_split.uniform(len(tm)) < 0.5).astype(np.int8)
    return _detect(ch, tm, detectors, cycles * emitter.rep_period, seed)


_POISSON_MAX_PER_PULSE = 12


def simulate_poissonian_source(mean_photons: float, tau: float, rep_period: float,
                               detectors: DetectorModel, cycles: int, seed) -> PhotonEvents:
    """Pulsed laser-like reference source: Poisson photon number per pulse.

    Calibration anchor for g2 extraction (expected g2(0) = 1).  The photon
    number distribution is truncated at 12 per pulse (negligible tail for
    the sub-photon means used here).
    """
    k = np.arange(_POISSON_MAX_PER_PULSE + 1)
    from scipy.stats import poisson as _poisson

    cdf = _poisson.cdf(k, mean_photons)
    r_n = rng.CounterRng(seed, 50)
    n = np.searchsorted(cdf, r_n.uniform(cycles), side="left")
    total = int(n.sum())
    cyc = np.repeat(np.arange(cycles), n)
    r_t = rng.CounterRng(seed, 51)
    r_split = rng.CounterRng(seed, 52)
    tm = cyc * rep_period + r_t.exponential(total, tau)
    ch = (r_split.uniform(total) < 0.5).astype(np.int8)
    return _detect(ch, tm, detectors, cycles * rep_period, seed)
