"""One-dimensional transfer-matrix model of the DBR micro-cavity.

Reflectivity/transmissivity spectra, cavity resonance and Q, a Gaussian
lateral-mode Purcell and extraction estimate for the self-aligned defect,
and the photon-budget ledger.
"""

from __future__ import annotations

import functools
import io
from dataclasses import dataclass

import numpy as np

# Defaults chosen so that the 68/82 nm quarter-wave pairs and the 270 nm
# spacer of the nominal structure resonate at 936 nm; overridable per stack.
N_GAAS = 3.46
N_ALAS = 2.845


@dataclass(frozen=True)
class Layer:
    refractive_index: float
    thickness: float  # nm

    def __post_init__(self):
        if not (np.isfinite(self.refractive_index) and self.refractive_index > 0):
            raise ValueError("refractive index must be positive and finite")
        if not (np.isfinite(self.thickness) and self.thickness >= 0):
            raise ValueError("thickness must be non-negative and finite")


@dataclass(frozen=True)
class LayerStack:
    """Ordered layers from the top (air side) to the substrate."""

    layers: tuple
    n_ambient: float = 1.0
    n_substrate: float = N_GAAS

    def __post_init__(self):
        if len(self.layers) == 0:
            raise ValueError("layer stack must be non-empty")
        if self.n_ambient <= 0 or self.n_substrate <= 0:
            raise ValueError("ambient and substrate indices must be positive")
        object.__setattr__(self, "layers", tuple(self.layers))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# n_ambient={self.n_ambient!r}\n")
        buf.write(f"# n_substrate={self.n_substrate!r}\n")
        buf.write("index,thickness_nm\n")
        for layer in self.layers:
            buf.write(f"{layer.refractive_index!r},{layer.thickness!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "LayerStack":
        n_ambient, n_substrate = 1.0, N_GAAS
        layers = []
        for i, ln in enumerate(text.splitlines()):
            if not ln:
                continue
            if ln.startswith("#"):
                key, _, val = ln[1:].partition("=")
                key = key.strip()
                if key == "n_ambient":
                    n_ambient = float(val)
                elif key == "n_substrate":
                    n_substrate = float(val)
                continue
            if ln.startswith("index"):
                continue
            parts = ln.split(",")
            if len(parts) != 2:
                raise ValueError(f"malformed stack row {i + 1}: {ln!r}")
            layers.append(Layer(float(parts[0]), float(parts[1])))
        return cls(tuple(layers), n_ambient=n_ambient, n_substrate=n_substrate)


@dataclass(frozen=True)
class DefectModel:
    """Self-aligned defect: dimple height and lateral diameter (nm)."""

    height: float = 20.0
    diameter: float = 2000.0

    def __post_init__(self):
        if self.height <= 0 or self.diameter <= 0:
            raise ValueError("defect height and diameter must be positive")


def make_cavity_stack(bottom_pairs: int = 24, top_pairs: int = 5,
                      t_high: float = 68.0, t_low: float = 82.0,
                      t_cavity: float = 270.0,
                      n_high: float = N_GAAS, n_low: float = N_ALAS,
                      n_cavity: float | None = None,
                      n_substrate: float | None = None) -> LayerStack:
    """Nominal structure: top DBR, lambda spacer, bottom DBR on substrate."""
    n_cavity = n_high if n_cavity is None else n_cavity
    n_substrate = n_high if n_substrate is None else n_substrate
    layers = []
    for _ in range(top_pairs):
        layers.append(Layer(n_high, t_high))
        layers.append(Layer(n_low, t_low))
    layers.append(Layer(n_cavity, t_cavity))
    for _ in range(bottom_pairs):
        layers.append(Layer(n_low, t_low))
        layers.append(Layer(n_high, t_high))
    return LayerStack(tuple(layers), n_ambient=1.0, n_substrate=n_substrate)


def characteristic_matrix(stack: LayerStack, wavelengths) -> np.ndarray:
    """2x2 characteristic matrix per wavelength (normal incidence)."""
    lam = np.atleast_1d(np.asarray(wavelengths, dtype=float))
    m = np.zeros((len(lam), 2, 2), dtype=complex)
    m[:, 0, 0] = m[:, 1, 1] = 1.0
    for layer in stack.layers:
        if layer.thickness == 0.0:
            continue
        delta = 2.0 * np.pi * layer.refractive_index * layer.thickness / lam
        c, s = np.cos(delta), np.sin(delta)
        ml = np.empty_like(m)
        ml[:, 0, 0] = c
        ml[:, 0, 1] = 1j * s / layer.refractive_index
        ml[:, 1, 0] = 1j * s * layer.refractive_index
        ml[:, 1, 1] = c
        m = np.einsum("kij,kjl->kil", m, ml)
    return m


def _amplitudes(stack: LayerStack, wavelengths):
    m = characteristic_matrix(stack, wavelengths)
    na, ns = stack.n_ambient, stack.n_substrate
    num_r = na * m[:, 0, 0] + na * ns * m[:, 0, 1] - m[:, 1, 0] - ns * m[:, 1, 1]
    den = na * m[:, 0, 0] + na * ns * m[:, 0, 1] + m[:, 1, 0] + ns * m[:, 1, 1]
    r = num_r / den
    t = 2.0 * na / den
    return r, t


def transfer_matrix_spectrum(stack: LayerStack, wavelengths):
    """Reflectivity and transmissivity; R + T = 1 for lossless stacks."""
    lam = np.atleast_1d(np.asarray(wavelengths, dtype=float))
    r, t = _amplitudes(stack, lam)
    big_r = np.abs(r) ** 2
    big_t = (stack.n_substrate / stack.n_ambient) * np.abs(t) ** 2
    return big_r, big_t


def reflection_phase(stack: LayerStack, wavelength: float) -> float:
    r, _ = _amplitudes(stack, [wavelength])
    return float(np.angle(r[0]))


class ResonanceNotFound(RuntimeError):
    pass


def cavity_resonance_and_q(stack: LayerStack, scan=(915.0, 965.0),
                           coarse_points: int = 5001) -> tuple[float, float]:
    """Transmission-peak wavelength and Q = lambda0 / FWHM."""
    lam = np.linspace(scan[0], scan[1], coarse_points)
    _, t = transfer_matrix_spectrum(stack, lam)
    i = int(np.argmax(t))
    if i == 0 or i == len(lam) - 1:
        raise ResonanceNotFound(f"no interior transmission peak in {scan}")

    # golden-section refinement of the peak
    def neg_t(x):
        return -transfer_matrix_spectrum(stack, [x])[1][0]

    from scipy.optimize import minimize_scalar

    res = minimize_scalar(neg_t, bracket=(lam[i - 1], lam[i], lam[i + 1]),
                          options={"xtol": 1e-10})
    lam0 = float(res.x)
    t_peak = -float(res.fun)
    if t_peak < 1e-6:
        raise ResonanceNotFound("transmission peak is vanishingly small")

    half = t_peak / 2.0

    def half_crossing(lo, hi):
        # T(lo) and T(hi) straddle the half maximum
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if transfer_matrix_spectrum(stack, [mid])[1][0] > half:
                hi = mid
            else:
                lo = mid
            if abs(hi - lo) < 1e-9:
                break
        return 0.5 * (lo + hi)

    span = scan[1] - scan[0]
    lo = lam0
    step = 1e-3
    while transfer_matrix_spectrum(stack, [lo - step])[1][0] > half:
        lo -= step
        if lam0 - lo > span:
            raise ResonanceNotFound("could not bracket the resonance FWHM")
    left = half_crossing(lo - step, lo)
    hi = lam0
    while transfer_matrix_spectrum(stack, [hi + step])[1][0] > half:
        hi += step
        if hi - lam0 > span:
            raise ResonanceNotFound("could not bracket the resonance FWHM")
    right = half_crossing(hi + step, hi)
    fwhm = right - left
    return lam0, float(lam0 / fwhm)


def mirror_penetration_depth(mirror: LayerStack, wavelength: float) -> float:
    """Field penetration depth from the reflection-phase dispersion (nm).

    L_pen = (lambda^2 / (4 pi n_inc)) |d phi_r / d lambda|, evaluated for
    the mirror seen from the cavity medium (the stack's ambient index).
    """
    dl = 0.01
    phi_plus = reflection_phase(mirror, wavelength + dl)
    phi_minus = reflection_phase(mirror, wavelength - dl)
    dphi = np.unwrap([phi_minus, phi_plus])
    slope = (dphi[1] - dphi[0]) / (2.0 * dl)
    return float(wavelength**2 / (4.0 * np.pi * mirror.n_ambient) * abs(slope))


def split_cavity_stack(stack: LayerStack):
    """(top mirror, spacer, bottom mirror) around the thickest layer."""
    i_spacer = int(np.argmax([layer.thickness for layer in stack.layers]))
    spacer = stack.layers[i_spacer]
    # mirrors are described as seen from the cavity medium
    top_layers = tuple(reversed(stack.layers[:i_spacer]))
    top = LayerStack(top_layers or (Layer(spacer.refractive_index, 0.0),),
                     n_ambient=spacer.refractive_index, n_substrate=stack.n_ambient)
    bottom = LayerStack(stack.layers[i_spacer + 1:] or (Layer(spacer.refractive_index, 0.0),),
                        n_ambient=spacer.refractive_index, n_substrate=stack.n_substrate)
    return top, spacer, bottom


def effective_cavity_length(stack: LayerStack, wavelength: float) -> float:
    """Spacer thickness plus both mirror penetration depths (nm)."""
    top, spacer, bottom = split_cavity_stack(stack)
    return (spacer.thickness
            + mirror_penetration_depth(top, wavelength)
            + mirror_penetration_depth(bottom, wavelength))


def mode_waist(defect: DefectModel, reference_height: float = 20.0) -> float:
    """Lateral Gaussian mode waist from the defect geometry (nm).

    The defect is reduced to a Gaussian confinement whose waist shrinks as
    the dimple height grows; a calibration knob, not a solved mode profile.
    """
    return float(0.5 * defect.diameter / np.sqrt(1.0 + defect.height / reference_height))


def purcell_estimate(q: float, defect: DefectModel, wavelength: float,
                     n_cavity: float, effective_length: float) -> float:
    """F_p = (3 / 4 pi^2) (lambda/n)^3 Q / V with V = (pi/4) w^2 L_eff."""
    if min(q, wavelength, n_cavity, effective_length) <= 0:
        raise ValueError("all inputs must be positive")
    w = mode_waist(defect)
    v_mode = (np.pi / 4.0) * w**2 * effective_length
    return float(3.0 / (4.0 * np.pi**2) * (wavelength / n_cavity) ** 3 * q / v_mode)


@functools.lru_cache(maxsize=16)
def _resonance_cached(stack: LayerStack) -> tuple[float, float]:
    return cavity_resonance_and_q(stack)


def top_emission_fraction(stack: LayerStack, wavelength: float) -> float:
    """Photon escape share through the top mirror: T_top / (T_top + T_bot)."""
    top, _, bottom = split_cavity_stack(stack)
    _, t_top = transfer_matrix_spectrum(top, [wavelength])
    _, t_bot = transfer_matrix_spectrum(bottom, [wavelength])
    return float(t_top[0] / (t_top[0] + t_bot[0]))


def extraction_efficiency(defect: DefectModel, wavelength: float, na: float,
                          stack: LayerStack | None = None,
                          n_cavity: float = N_GAAS) -> float:
    """Collection efficiency into an objective of the given NA.

    Product of the cavity-mode coupling beta = F_p / (F_p + 1), the
    top-mirror escape share, and the fraction of the Gaussian far field
    inside the NA cone.
    """
    if not (0.0 < na < 1.0):
        raise ValueError("NA must be in (0, 1)")
    if stack is None:
        stack = make_cavity_stack()
    lam0, q = _resonance_cached(stack)
    l_eff = effective_cavity_length(stack, lam0)
    f_p = purcell_estimate(q, defect, lam0, n_cavity, l_eff)
    beta = f_p / (f_p + 1.0)
    top_frac = top_emission_fraction(stack, lam0)
    theta_div = wavelength / (np.pi * mode_waist(defect))
    cone = 1.0 - np.exp(-2.0 * (na / theta_div) ** 2)
    return float(beta * top_frac * cone)


@dataclass(frozen=True)
class EfficiencyBudget:
    """Measured rate plus every efficiency factor in the detection chain."""

    count_rate: float  # counts/s
    rep_rate: float  # Hz
    blinking: float
    p_emit: float
    eta_detector: float
    eta_fiber: float
    eta_setup: float

    def __post_init__(self):
        if self.count_rate <= 0 or self.rep_rate <= 0:
            raise ValueError("rates must be positive")
        for name in ("blinking", "p_emit", "eta_detector", "eta_fiber", "eta_setup"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ValueError(f"{name} must be in (0, 1]")


def efficiency_budget(b: EfficiencyBudget) -> dict:
    """First-lens collection efficiency ledger, term by term."""
    denominator = (b.rep_rate * b.blinking * b.p_emit * b.eta_detector
                   * b.eta_fiber * b.eta_setup)
    if denominator == 0:
        raise ValueError("budget denominator is zero")
    eta = b.count_rate / denominator
    return {
        "count_rate_per_s": b.count_rate,
        "rep_rate_hz": b.rep_rate,
        "blinking": b.blinking,
        "p_emit": b.p_emit,
        "eta_detector": b.eta_detector,
        "eta_fiber": b.eta_fiber,
        "eta_setup": b.eta_setup,
        "denominator": denominator,
        "eta_first_lens": eta,
    }
