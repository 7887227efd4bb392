"""
Continuous-mode model of the cavity-coupled three-level atom used as a
photon-number-selective phase gate.

The atom has ground states g_h, g_v and an excited state e. The transitions
g_h <-> e and g_v <-> e couple to the waveguide modes a and b with equal
strength through a broadband cavity, so both channels decay at Gamma / 2 and
the excited amplitude at Gamma = 2 g^2 / kappa. The cavity is eliminated but
the excited-state dynamics are kept, so finite pulse bandwidth shows up as a
fidelity loss.

Time is cut into bins centred on the grid points and each bin meets the atom
once through an implicit midpoint step. Every bin update is orthogonal, so
the photon-number budget closes to rounding on any grid, and the scheme is
second order in Gamma * step.

A gate run is: subtract one photon from a two-photon pulse in mode a (it
leaves in mode b), imprint the phases, time-reverse, and let the atom add the
photon back.
"""

import logging
import math
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from tqdm import tqdm

from app.config import ScatteringSweepParams
from app.definitions import (
    DECAY_TAIL,
    LOG_FORMAT,
    PULSE_FWHM_SPAN,
    RICHARDSON_TOLERANCE,
    STEPS_PER_DECAY_TIME,
    STEPS_PER_PULSE_FWHM,
    SYMMETRY_TOLERANCE,
)
from app.errors import GridResolutionError

# ===============================
# Logging Configuration
# ===============================
_logger = logging.getLogger(__name__)
_logger.setLevel(logging.INFO)
if not _logger.handlers:
    _handler = logging.StreamHandler()
    _handler.setFormatter(logging.Formatter(LOG_FORMAT))
    _logger.addHandler(_handler)

SWEEP_COLUMNS = ["sigma_over_g", "kappa_over_g", "phi1", "phi2", "fidelity", "grid_step", "richardson_delta"]

_SQRT_LN2 = math.sqrt(math.log(2.0))


@dataclass(frozen=True)
class AtomParams:
    g: float
    kappa: float

    def __post_init__(self):
        if not (self.g > 0 and self.kappa > 0):
            raise ValueError(f"g and kappa must be positive, got g={self.g}, kappa={self.kappa}")

    @property
    def gamma(self) -> float:
        """Cavity-enhanced decay rate 2 g^2 / kappa."""
        return 2.0 * self.g**2 / self.kappa


@dataclass(frozen=True)
class PulseSpec:
    """
    Gaussian pulse on a uniform time grid symmetric about t = 0.

    ``sigma`` is the FWHM of the intensity spectrum |xi(w)|^2; the amplitude is
    xi(t) = (s^2 / pi)^(1/4) exp(-s^2 t^2 / 2) with s = sigma / (2 sqrt(ln 2)).
    """

    sigma: float
    step: float
    half_points: int  # grid is step * [-half_points, ..., half_points]
    center: float = 0.0

    @property
    def sigma_prime(self) -> float:
        return self.sigma / (2.0 * _SQRT_LN2)

    @property
    def duration(self) -> float:
        """FWHM of |xi(t)|^2."""
        return 4.0 * math.log(2.0) / self.sigma

    @property
    def size(self) -> int:
        return 2 * self.half_points + 1

    @property
    def times(self) -> NDArray[np.float64]:
        return self.step * np.arange(-self.half_points, self.half_points + 1)

    @property
    def span(self) -> Tuple[float, float]:
        return (-self.step * self.half_points, self.step * self.half_points)

    def envelope(self) -> NDArray[np.float64]:
        """xi on the grid, rescaled so that step * sum |xi|^2 = 1."""
        s = self.sigma_prime
        xi = (s**2 / math.pi) ** 0.25 * np.exp(-0.5 * (s * (self.times - self.center)) ** 2)
        return xi / math.sqrt(self.step * float(np.sum(xi**2)))

    def is_symmetric(self) -> bool:
        return abs(self.center) < 0.5 * self.step

    def check_resolution(self, atom: AtomParams) -> None:
        for quantity, rate in (("1/Gamma", atom.gamma), ("1/kappa", atom.kappa)):
            ratio = 1.0 / (self.step * rate)
            if ratio < STEPS_PER_DECAY_TIME * (1 - 1e-9):
                raise GridResolutionError(quantity, ratio, STEPS_PER_DECAY_TIME)
        coverage = 2 * self.half_points * self.step / self.duration
        if coverage < PULSE_FWHM_SPAN * (1 - 1e-9):
            raise GridResolutionError("the pulse FWHM (grid width)", coverage, PULSE_FWHM_SPAN)

    @classmethod
    def for_atom(cls, sigma: float, atom: AtomParams, step: Optional[float] = None) -> "PulseSpec":
        """
        Grid covering the pulse plus DECAY_TAIL decay times on each side. The
        default step resolves 1/Gamma, 1/kappa and the pulse duration.
        """
        if sigma <= 0:
            raise ValueError(f"pulse width must be positive, got {sigma}")
        duration = 4.0 * math.log(2.0) / sigma
        if step is None:
            step = min(
                1.0 / (STEPS_PER_DECAY_TIME * atom.gamma),
                1.0 / (STEPS_PER_DECAY_TIME * atom.kappa),
                duration / STEPS_PER_PULSE_FWHM,
            )
        half_width = 0.5 * PULSE_FWHM_SPAN * duration + DECAY_TAIL / atom.gamma
        pulse = cls(sigma=sigma, step=step, half_points=int(math.ceil(half_width / step)))
        pulse.check_resolution(atom)
        return pulse


class TwoPhotonAmplitude:
    """
    Two-time amplitude on a square grid with measure step^2. Exchange-symmetric
    amplitudes keep only the triangle t1 <= t2 and are symmetrized on read.
    """

    def __init__(self, grid: NDArray[np.complex128], step: float, symmetric: bool):
        grid = np.asarray(grid, dtype=np.complex128)
        if grid.ndim != 2 or grid.shape[0] != grid.shape[1]:
            raise ValueError(f"two-time amplitude must be a square array, got shape {grid.shape}")
        self.size = grid.shape[0]
        self.step = step
        self.symmetric = symmetric
        if symmetric:
            scale = max(float(np.max(np.abs(grid))), 1.0) if grid.size else 1.0
            asymmetry = float(np.max(np.abs(grid - grid.T))) if grid.size else 0.0
            if asymmetry > SYMMETRY_TOLERANCE * scale:
                raise ValueError(f"amplitude is not exchange symmetric (deviation {asymmetry:.3g})")
            self._data = grid[np.triu_indices(self.size)]
        else:
            self._data = grid.copy()

    def grid(self) -> NDArray[np.complex128]:
        if not self.symmetric:
            return self._data.copy()
        rows, cols = np.triu_indices(self.size)
        full = np.empty((self.size, self.size), dtype=np.complex128)
        full[rows, cols] = self._data
        full[cols, rows] = self._data
        return full

    def norm_squared(self) -> float:
        weight = float(np.sum(np.abs(self._data) ** 2))
        if self.symmetric:
            diagonal = float(np.sum(np.abs(np.diagonal(self.grid())) ** 2))
            weight = 2.0 * weight - diagonal
        return self.step**2 * weight

    def overlap(self, other: "TwoPhotonAmplitude") -> complex:
        """<self|other> with the grid measure."""
        if other.size != self.size:
            raise ValueError(f"grid sizes differ: {self.size} vs {other.size}")
        return complex(self.step**2 * np.vdot(self.grid(), other.grid()))

    def scaled(self, factor: complex) -> "TwoPhotonAmplitude":
        return TwoPhotonAmplitude(factor * self.grid(), self.step, self.symmetric)

    def reversed_conjugate(self) -> "TwoPhotonAmplitude":
        """Complex conjugate with both time arguments reflected about t = 0."""
        return TwoPhotonAmplitude(self.grid()[::-1, ::-1].conj(), self.step, self.symmetric)

    @classmethod
    def product(cls, xi: NDArray, step: float) -> "TwoPhotonAmplitude":
        return cls(np.outer(xi, xi), step, symmetric=True)

    @classmethod
    def zeros(cls, size: int, step: float, symmetric: bool) -> "TwoPhotonAmplitude":
        return cls(np.zeros((size, size), dtype=np.complex128), step, symmetric)


@dataclass
class SinglePhotonScattering:
    pulse: PulseSpec
    transmitted: NDArray[np.complex128]  # left in mode a
    subtracted: NDArray[np.complex128]  # emitted into mode b
    residual: float  # excited-state population at the end of the grid

    def subtraction_overlap(self) -> float:
        """|<xi|b>|, which tends to 1 for pulses much narrower than Gamma."""
        return abs(self.pulse.step * np.vdot(self.pulse.envelope(), self.subtracted))

    def norm_budget(self) -> Dict[str, float]:
        h = self.pulse.step
        budget = {
            "transmitted": h * float(np.sum(np.abs(self.transmitted) ** 2)),
            "subtracted": h * float(np.sum(np.abs(self.subtracted) ** 2)),
            "residual": self.residual,
        }
        budget["total"] = sum(budget.values())
        return budget


@dataclass
class ScatteredPair:
    """Two-photon state after the atom: both photons in a (atom in g_h) or one in each mode (atom in g_v)."""

    pulse: PulseSpec
    mode_a: TwoPhotonAmplitude
    mode_ab: TwoPhotonAmplitude  # indexed [a-photon time, b-photon time]
    residual: float = 0.0

    def norm_budget(self) -> Dict[str, float]:
        budget = {
            "mode_a": self.mode_a.norm_squared(),
            "mode_ab": self.mode_ab.norm_squared(),
            "residual": self.residual,
        }
        budget["total"] = sum(budget.values())
        return budget


def _bin_damping(n: int, k: int, gamma: float, h: float) -> NDArray:
    """1 + Gamma h / 2 off the diagonal; the doubly occupied bin k couples with an extra sqrt(2)."""
    damping = np.full(n, 1.0 + 0.5 * gamma * h)
    damping[k] = 1.0 + 0.75 * gamma * h
    return damping


def _scatter_pair(pair_a: NDArray, split: NDArray, gamma: float, step: float) -> float:
    """
    Two photons and one atom. ``pair_a`` (both photons in a, atom in g_h) and
    ``split`` (one photon in each mode, atom in g_v, indexed [a-time, b-time])
    hold the incoming amplitudes and are overwritten with the outgoing ones.
    Returns the excited-state norm left at the end of the grid.

    E[j] is the amplitude of an excited atom with the other a photon in bin j.
    Bin k meets the atom once: E couples to the bin-k inputs pair_a[k, j] and
    split[j, k] through

        dE/dt = -sqrt(2 Gamma) pair_a[k, j] - sqrt(Gamma) split[j, k]

    and emits into the same bins. The bin update is an implicit midpoint
    step, which is a Cayley transform of that generator and therefore
    orthogonal, so the norm budget holds to rounding. An a photon emitted
    into bin k is already part of pair_a[j, k] when bin j > k arrives, so
    re-absorption needs no extra term.
    """
    n = pair_a.shape[0]
    root = math.sqrt(gamma)
    pair_root = math.sqrt(2.0 * gamma)
    scale = math.sqrt(gamma / 2.0)
    excited = np.zeros(n, dtype=np.complex128)
    for k in range(n):
        drive = pair_root * pair_a[k] + root * split[:, k]
        mean = (excited - 0.5 * step * drive) / _bin_damping(n, k, gamma, step)
        excited = 2.0 * mean - excited
        pair_a[k, :] += scale * mean
        pair_a[:, k] += scale * mean
        split[:, k] += root * mean
    return step * float(np.sum(np.abs(excited) ** 2))


def subtract_one_photon(pulse: PulseSpec, atom: AtomParams) -> SinglePhotonScattering:
    """Single photon in mode a onto an atom in g_h."""
    pulse.check_resolution(atom)
    gamma, h = atom.gamma, pulse.step
    root = math.sqrt(gamma)
    xi = pulse.envelope()
    emitted = np.zeros(xi.size, dtype=np.complex128)
    amplitude = 0j
    for k in range(xi.size):
        mean = (amplitude - 0.5 * h * root * xi[k]) / (1.0 + 0.5 * gamma * h)
        amplitude = 2.0 * mean - amplitude
        emitted[k] = root * mean
    return SinglePhotonScattering(
        pulse=pulse,
        transmitted=xi + emitted,
        subtracted=emitted,
        residual=abs(amplitude) ** 2,
    )


def subtract_two_photon(pulse: PulseSpec, atom: AtomParams) -> ScatteredPair:
    """Two-photon product pulse xi (x) xi in mode a onto an atom in g_h."""
    pulse.check_resolution(atom)
    xi = pulse.envelope()
    pair_a = np.outer(xi, xi).astype(np.complex128)
    split = np.zeros_like(pair_a)
    residual = _scatter_pair(pair_a, split, atom.gamma, pulse.step)
    result = ScatteredPair(
        pulse=pulse,
        mode_a=TwoPhotonAmplitude(pair_a, pulse.step, symmetric=True),
        mode_ab=TwoPhotonAmplitude(split, pulse.step, symmetric=False),
        residual=residual,
    )
    _logger.debug("Subtraction norm budget: %s", result.norm_budget())
    return result


def phase_and_time_reverse(pair: ScatteredPair, phi1: float, phi2: float) -> ScatteredPair:
    """
    Phase e^{i phi1} on the b photon and e^{i phi2} on each a photon, then
    conjugate and reflect every time argument about the pulse center. The
    excited-state remainder is discarded. Applying the map twice with the same
    phases returns the input exactly.
    """
    if not pair.pulse.is_symmetric():
        raise ValueError(f"pulse centre {pair.pulse.center} is not the grid centre; time reversal needs xi(t) = xi(-t)")
    return ScatteredPair(
        pulse=pair.pulse,
        mode_a=pair.mode_a.scaled(np.exp(2j * phi2)).reversed_conjugate(),
        mode_ab=pair.mode_ab.scaled(np.exp(1j * (phi1 + phi2))).reversed_conjugate(),
        residual=pair.residual,
    )


def add_photon(pair: ScatteredPair, atom: AtomParams) -> ScatteredPair:
    """
    Send the reversed state back onto the atom, which starts in g_v for the
    one-photon-each part. ``mode_a`` of the result is the restored pulse.
    """
    pair.pulse.check_resolution(atom)
    pair_a = pair.mode_a.grid()
    split = pair.mode_ab.grid()
    residual = _scatter_pair(pair_a, split, atom.gamma, pair.pulse.step)
    return ScatteredPair(
        pulse=pair.pulse,
        mode_a=TwoPhotonAmplitude(pair_a, pair.pulse.step, symmetric=True),
        mode_ab=TwoPhotonAmplitude(split, pair.pulse.step, symmetric=False),
        residual=residual,
    )


def _restoration_overlap(output: ScatteredPair, phase: complex = 1.0) -> complex:
    ideal = TwoPhotonAmplitude.product(output.pulse.envelope(), output.pulse.step).scaled(phase)
    return ideal.overlap(output.mode_a)


def gate_fidelity(
    sigma_over_g: float,
    kappa_over_g: float,
    phi1: float,
    phi2: float,
    step: Optional[float] = None,
) -> float:
    """Subtract, phase and reverse, add; |overlap| with e^{i(phi1 + phi2)} xi (x) xi."""
    atom = AtomParams(g=1.0, kappa=kappa_over_g)
    pulse = PulseSpec.for_atom(sigma_over_g, atom, step)
    restored = add_photon(phase_and_time_reverse(subtract_two_photon(pulse, atom), phi1, phi2), atom)
    return min(1.0, abs(_restoration_overlap(restored, np.exp(1j * (phi1 + phi2)))))


@dataclass(frozen=True)
class GateResponse:
    """
    Overlaps of the restored pulse with xi (x) xi for the two reversed parts
    taken separately at zero phase. The addition is linear, so every phase
    pair follows from these two numbers.
    """

    both_in_a: complex
    one_each: complex
    grid_step: float

    def fidelity(self, phi1: float, phi2: float) -> float:
        z = np.exp(-2j * phi2) * self.both_in_a + np.exp(-1j * (phi1 + phi2)) * self.one_each
        return min(1.0, abs(z))


def gate_response(pulse: PulseSpec, atom: AtomParams) -> GateResponse:
    reversed_pair = phase_and_time_reverse(subtract_two_photon(pulse, atom), 0.0, 0.0)
    n, h = pulse.size, pulse.step
    only_a = ScatteredPair(pulse, reversed_pair.mode_a, TwoPhotonAmplitude.zeros(n, h, symmetric=False))
    only_ab = ScatteredPair(pulse, TwoPhotonAmplitude.zeros(n, h, symmetric=True), reversed_pair.mode_ab)
    return GateResponse(
        both_in_a=_restoration_overlap(add_photon(only_a, atom)),
        one_each=_restoration_overlap(add_photon(only_ab, atom)),
        grid_step=h,
    )


@dataclass(frozen=True)
class GateEvaluation:
    fidelity: float
    grid_step: float
    richardson_delta: Optional[float]  # |F(h/2) - F(h)|, None when not checked


def evaluate_gate(
    sigma_over_g: float,
    kappa_over_g: float,
    phi1: float,
    phi2: float,
    step: Optional[float] = None,
    richardson: bool = True,
) -> GateEvaluation:
    """Gate fidelity with an optional step-halving check; the finer solve is reported."""
    atom = AtomParams(g=1.0, kappa=kappa_over_g)
    coarse = PulseSpec.for_atom(sigma_over_g, atom, step)
    value = gate_response(coarse, atom).fidelity(phi1, phi2)
    if not richardson:
        return GateEvaluation(value, coarse.step, None)
    fine = PulseSpec.for_atom(sigma_over_g, atom, coarse.step / 2.0)
    refined = gate_response(fine, atom).fidelity(phi1, phi2)
    delta = abs(refined - value)
    if delta > RICHARDSON_TOLERANCE:
        _logger.warning(
            "Halving the step moved the fidelity by %.2e at sigma/g=%g, kappa/g=%g; refine the grid.",
            delta,
            sigma_over_g,
            kappa_over_g,
        )
    return GateEvaluation(refined, fine.step, delta)


def _sweep_point(args) -> List[dict]:
    sigma, kappa, phases, step, richardson = args
    atom = AtomParams(g=1.0, kappa=kappa)
    coarse_pulse = PulseSpec.for_atom(sigma, atom, step)
    coarse = gate_response(coarse_pulse, atom)
    fine = gate_response(PulseSpec.for_atom(sigma, atom, coarse_pulse.step / 2.0), atom) if richardson else None
    rows = []
    for phi1, phi2 in phases:
        value = coarse.fidelity(phi1, phi2)
        row = {"sigma_over_g": sigma, "kappa_over_g": kappa, "phi1": phi1, "phi2": phi2}
        if fine is None:
            row.update(fidelity=value, grid_step=coarse.grid_step, richardson_delta="")
        else:
            refined = fine.fidelity(phi1, phi2)
            row.update(fidelity=refined, grid_step=fine.grid_step, richardson_delta=abs(refined - value))
        rows.append(row)
    return rows


def run_sweep(params: ScatteringSweepParams, workers: int = 1, progress: bool = False) -> List[dict]:
    """One solve per (sigma, kappa) point; points run in a process pool when ``workers`` > 1."""
    phases: Sequence[Tuple[float, float]] = [(p1, p2) for p1 in params.phi1 for p2 in params.phi2]
    jobs = [
        (sigma, kappa, phases, params.step, params.richardson)
        for sigma in params.sigma_over_g
        for kappa in params.kappa_over_g
    ]
    _logger.info("Scattering sweep: %d grid points x %d phase pairs", len(jobs), len(phases))
    if workers <= 1:
        parts = [_sweep_point(job) for job in tqdm(jobs, desc="scattering", disable=not progress)]
    else:
        with Pool(processes=workers) as pool:
            parts = list(tqdm(pool.imap(_sweep_point, jobs), total=len(jobs), desc="scattering", disable=not progress))
    rows = [row for part in parts for row in part]
    unresolved = [r for r in rows if r["richardson_delta"] != "" and r["richardson_delta"] > RICHARDSON_TOLERANCE]
    if unresolved:
        _logger.warning("%d sweep rows changed by more than %.0e on step halving.", len(unresolved), RICHARDSON_TOLERANCE)
    return rows
