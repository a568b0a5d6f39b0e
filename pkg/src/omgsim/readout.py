"""Detection and thermometry models.

Covers the statistics of state readout and atom thermometry: Poisson
photon-count discrimination, detection-fidelity estimators with correction
for imperfect optical pumping, reset-probability estimators, a classical
Monte Carlo of release-and-recapture thermometry in a Gaussian tweezer, and
sideband-ratio estimation of the mean motional occupation.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.stats import poisson

from .constants import GRAVITY, HBAR, KB, TWEEZER_WAVELENGTH, YB171_MASS
from .errors import ClampWarning, DomainError, EmptyDataError

__all__ = [
    "HistogramModel",
    "DiscriminationResult",
    "discrimination_fidelity",
    "optimize_threshold",
    "CountsTable",
    "Estimate",
    "spam_correct",
    "apply_preparation_matrix",
    "detection_fidelities",
    "reset_probabilities",
    "TrapGeometry",
    "ThermometryConfig",
    "release_recapture",
    "fit_temperature",
    "nbar_from_sidebands",
    "nbar_to_temperature",
]

OUTCOMES = ("bb", "bd", "db", "dd")
STATES = ("g0", "g1")


# ---------------------------------------------------------------------------
# Photon-count discrimination
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HistogramModel:
    """Poisson photon-count model for bright/dark discrimination.

    Events with counts at or below the threshold are called dark, above it
    bright.
    """

    lambda_bright: float
    lambda_dark: float
    threshold: int = 0
    bright_prior: float = 0.5

    def __post_init__(self):
        if not self.lambda_bright > self.lambda_dark >= 0:
            raise DomainError("need lambda_bright > lambda_dark >= 0")
        if not 0.0 <= self.bright_prior <= 1.0:
            raise DomainError("bright_prior must lie in [0, 1]")
        if self.threshold < 0:
            raise DomainError("threshold must be >= 0")


class DiscriminationResult(NamedTuple):
    fidelity: float
    misid_bright: float
    misid_dark: float


def discrimination_fidelity(model: HistogramModel) -> DiscriminationResult:
    """Prior-weighted probability of correctly classifying an event.

    misid_dark = P(Poisson(lambda_dark) > threshold) and
    misid_bright = P(Poisson(lambda_bright) <= threshold).
    """
    mis_dark = float(poisson.sf(model.threshold, model.lambda_dark))
    mis_bright = float(poisson.cdf(model.threshold, model.lambda_bright))
    err = model.bright_prior * mis_bright + (1.0 - model.bright_prior) * mis_dark
    return DiscriminationResult(1.0 - err, mis_bright, mis_dark)


def optimize_threshold(model: HistogramModel) -> int:
    """Integer threshold maximizing the discrimination fidelity.

    Scans 0 .. ceil(lambda_bright + 10 sqrt(lambda_bright)); the smallest
    maximizer wins on ties.
    """
    upper = math.ceil(model.lambda_bright + 10.0 * math.sqrt(model.lambda_bright))
    thresholds = np.arange(upper + 1)
    mis_dark = poisson.sf(thresholds, model.lambda_dark)
    mis_bright = poisson.cdf(thresholds, model.lambda_bright)
    err = model.bright_prior * mis_bright + (1.0 - model.bright_prior) * mis_dark
    return int(np.argmin(err))


# ---------------------------------------------------------------------------
# Detection-fidelity and reset estimators
# ---------------------------------------------------------------------------

@dataclass
class CountsTable:
    """Event counts N[state][jk] for the two-image readout sequence.

    j and k are the image-1 and image-2 outcomes (b bright, d dark); states
    label the prepared spin.  epsilon_op is the optical-pumping infidelity,
    epsilon_inf and epsilon_iloss the image-2 detection infidelity and loss.
    """

    counts: dict
    epsilon_op: float = 0.0
    epsilon_inf: float = 0.0
    epsilon_iloss: float = 0.0

    def __post_init__(self):
        clean: dict[str, dict[str, float]] = {}
        for state, row in self.counts.items():
            if state not in STATES:
                raise DomainError(f"unknown prepared state {state!r}")
            clean[state] = {}
            for jk in OUTCOMES:
                value = float(row.get(jk, 0.0))
                if value < 0:
                    raise DomainError("counts must be >= 0")
                clean[state][jk] = value
        self.counts = clean
        for name in ("epsilon_op", "epsilon_inf", "epsilon_iloss"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise DomainError(f"{name} must lie in [0, 1)")

    @staticmethod
    def from_csv(
        text: str,
        epsilon_op: float = 0.0,
        epsilon_inf: float = 0.0,
        epsilon_iloss: float = 0.0,
    ) -> "CountsTable":
        """Parse rows of (state, j, k, count)."""
        counts: dict[str, dict[str, float]] = {}
        reader = csv.DictReader(io.StringIO(text))
        for row in reader:
            jk = row["j"].strip() + row["k"].strip()
            counts.setdefault(row["state"].strip(), {})[jk] = float(row["count"])
        return CountsTable(counts, epsilon_op, epsilon_inf, epsilon_iloss)

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["state", "j", "k", "count"])
        for state in STATES:
            for jk in OUTCOMES:
                writer.writerow([state, jk[0], jk[1], repr(self.counts[state][jk])])
        return out.getvalue()


class Estimate(NamedTuple):
    value: float
    sigma: float


def _wilson_sigma(successes: float, total: float) -> float:
    """Half-width of the 1-sigma Wilson interval; finite even at p = 0 or 1."""
    if total <= 0:
        raise EmptyDataError("no events for interval estimate")
    z2 = 1.0
    p = successes / total
    center_spread = math.sqrt(p * (1.0 - p) / total + z2 / (4.0 * total**2))
    return math.sqrt(z2) * center_spread / (1.0 + z2 / total)


def spam_correct(counts: CountsTable) -> dict:
    """Invert the optical-pumping confusion matrix on the image-2-bright counts.

    For each prepared state the (db, bb) pair is multiplied by the inverse of
    [[1-e, e], [e, 1-e]] with e the pumping infidelity; negative corrected
    counts are clamped to zero with a warning.
    """
    e = counts.epsilon_op
    if e >= 0.5:
        raise DomainError("epsilon_op must be < 0.5 for the correction to be invertible")
    det = 1.0 - 2.0 * e
    corrected = {}
    for state in STATES:
        n_db = counts.counts[state]["db"]
        n_bb = counts.counts[state]["bb"]
        c_db = ((1.0 - e) * n_db - e * n_bb) / det
        c_bb = (-e * n_db + (1.0 - e) * n_bb) / det
        clamped = False
        if c_db < 0:
            warnings.warn(f"clamping negative corrected count for {state}/db", ClampWarning)
            c_db, clamped = 0.0, True
        if c_bb < 0:
            warnings.warn(f"clamping negative corrected count for {state}/bb", ClampWarning)
            c_bb, clamped = 0.0, True
        corrected[state] = {"db": c_db, "bb": c_bb, "clamped": clamped}
    return corrected


def apply_preparation_matrix(corrected: dict, epsilon_op: float) -> dict:
    """Forward map undoing spam_correct; used for round-trip checks."""
    e = epsilon_op
    out = {}
    for state, row in corrected.items():
        out[state] = {
            "db": (1.0 - e) * row["db"] + e * row["bb"],
            "bb": e * row["db"] + (1.0 - e) * row["bb"],
        }
    return out


def detection_fidelities(counts: CountsTable) -> tuple[Estimate, Estimate]:
    """Probabilities of identifying g0 as dark and g1 as bright in image 1.

    Events are post-selected on atom survival in image 2 (k = b) and the
    counts are pumping-corrected before forming the ratios; uncertainties are
    1-sigma Wilson intervals on the corrected totals.
    """
    corrected = spam_correct(counts)
    out = []
    for state, good in (("g0", "db"), ("g1", "bb")):
        row = corrected[state]
        total = row["db"] + row["bb"]
        if total <= 0:
            raise EmptyDataError(f"no surviving events for state {state}")
        p = row[good] / total
        out.append(Estimate(p, _wilson_sigma(row[good], total)))
    return out[0], out[1]


def reset_probabilities(counts: CountsTable) -> tuple[Estimate, Estimate]:
    """Probability of re-initializing each spin state into the ground manifold.

    The image-2-bright counts are scaled up by (1 + epsilon_inf +
    epsilon_iloss) to undo image-2 infidelity and loss; the denominator is
    the raw total of all events for the prepared state.
    """
    scale = 1.0 + counts.epsilon_inf + counts.epsilon_iloss
    out = []
    for state in STATES:
        row = counts.counts[state]
        n_b = row["bb"] + row["db"]
        total = sum(row[jk] for jk in OUTCOMES)
        if total <= 0:
            raise EmptyDataError(f"no events for state {state}")
        p = min(scale * n_b / total, 1.0)
        out.append(Estimate(p, scale * _wilson_sigma(n_b, total)))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# Release-and-recapture thermometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrapGeometry:
    """Gaussian-beam optical tweezer described by depth, waist and wavelength.

    depth is in Joules; from_depth_uk converts a depth quoted as U/kB in
    microkelvin.
    """

    depth: float
    waist: float = 0.78e-6
    wavelength: float = TWEEZER_WAVELENGTH

    def __post_init__(self):
        if self.depth <= 0 or self.waist <= 0 or self.wavelength <= 0:
            raise DomainError("depth, waist and wavelength must be positive")

    @staticmethod
    def from_depth_uk(depth_uk: float, **kwargs) -> "TrapGeometry":
        return TrapGeometry(depth=depth_uk * 1e-6 * KB, **kwargs)

    @property
    def rayleigh_range(self) -> float:
        return math.pi * self.waist**2 / self.wavelength

    def radial_frequency(self, mass: float = YB171_MASS) -> float:
        return math.sqrt(4.0 * self.depth / (mass * self.waist**2))

    def axial_frequency(self, mass: float = YB171_MASS) -> float:
        return math.sqrt(2.0 * self.depth / (mass * self.rayleigh_range**2))

    def potential(self, x, y, z):
        """Gaussian trap potential, zero at infinity, -depth at the focus."""
        widen = 1.0 + (z / self.rayleigh_range) ** 2
        return -self.depth / widen * np.exp(-2.0 * (x**2 + y**2) / (self.waist**2 * widen))


@dataclass(frozen=True)
class ThermometryConfig:
    """Release-and-recapture experiment description."""

    trap: TrapGeometry
    temperature: float
    release_times: tuple = field(default_factory=lambda: tuple(np.linspace(0, 60e-6, 25)))
    n_samples: int = 100_000
    rng_seed: int = 0
    gravity: bool = True
    mass: float = YB171_MASS

    def __post_init__(self):
        if self.temperature < 0:
            raise DomainError("temperature must be >= 0")
        if self.n_samples < 1:
            raise DomainError("n_samples must be >= 1")
        if any(t < 0 for t in self.release_times):
            raise DomainError("release times must be >= 0")


def release_recapture(cfg: ThermometryConfig) -> np.ndarray:
    """Monte Carlo recapture probability for each release time.

    Atoms start from the thermal distribution of the harmonic approximation
    at the trap bottom, fly freely (optionally with gravity along one radial
    axis), and are recaptured when their total energy in the Gaussian trap is
    negative.  Returns rows (release_time, p_recapture); the same sample set
    is reused across release times.
    """
    trap = cfg.trap
    m = cfg.mass
    rng = np.random.default_rng(cfg.rng_seed)
    n = cfg.n_samples
    if cfg.temperature == 0:
        pos = np.zeros((3, n))
        vel = np.zeros((3, n))
    else:
        sig_v = math.sqrt(KB * cfg.temperature / m)
        omega = np.array(
            [trap.radial_frequency(m), trap.radial_frequency(m), trap.axial_frequency(m)]
        )
        sig_x = sig_v / omega
        pos = rng.normal(size=(3, n)) * sig_x[:, None]
        vel = rng.normal(size=(3, n)) * sig_v

    g = GRAVITY if cfg.gravity else 0.0
    rows = []
    for t in cfg.release_times:
        x = pos[0] + vel[0] * t - 0.5 * g * t**2
        y = pos[1] + vel[1] * t
        z = pos[2] + vel[2] * t
        vx = vel[0] - g * t
        kinetic = 0.5 * m * (vx**2 + vel[1] ** 2 + vel[2] ** 2)
        energy = kinetic + trap.potential(x, y, z)
        rows.append((float(t), float(np.mean(energy < 0))))
    return np.array(rows)


class TemperatureFit(NamedTuple):
    temperature: float
    grid: np.ndarray
    sse: np.ndarray


def fit_temperature(times, recapture, cfg: ThermometryConfig, temperatures) -> TemperatureFit:
    """Least-squares temperature estimate over a grid of candidate values.

    Each candidate temperature is simulated with the same sample count and
    seed as cfg; the grid value minimizing the summed squared residuals wins.
    """
    times = np.asarray(times, dtype=float)
    recapture = np.asarray(recapture, dtype=float)
    if cfg.n_samples < 100:
        raise DomainError("temperature fitting needs n_samples >= 100")
    grid = np.asarray(list(temperatures), dtype=float)
    if grid.size == 0:
        raise DomainError("temperature grid must be non-empty")
    sse = np.empty(grid.size)
    from dataclasses import replace

    for i, temp in enumerate(grid):
        sim = release_recapture(replace(cfg, temperature=float(temp), release_times=tuple(times)))
        sse[i] = float(np.sum((sim[:, 1] - recapture) ** 2))
    best = int(np.argmin(sse))
    return TemperatureFit(float(grid[best]), grid, sse)


# ---------------------------------------------------------------------------
# Sideband thermometry
# ---------------------------------------------------------------------------

def nbar_from_sidebands(red_height: float, blue_height: float) -> float:
    """Mean occupation from the red/blue sideband ratio r: nbar = r / (1 - r)."""
    if red_height < 0 or blue_height <= 0 or red_height >= blue_height:
        raise DomainError("need 0 <= red < blue for a finite occupation estimate")
    r = red_height / blue_height
    return r / (1.0 - r)


def nbar_to_temperature(nbar: float, trap_frequency: float, convention: str = "mean-energy") -> float:
    """Temperature equivalent of a mean occupation.

    'mean-energy' equates k_B T with the mean oscillator energy
    hbar omega (nbar + 1/2); 'bose' inverts the Bose occupation law
    T = hbar omega / (k_B ln(1 + 1/nbar)).
    """
    if nbar < 0:
        raise DomainError("nbar must be >= 0")
    if trap_frequency <= 0:
        raise DomainError("trap_frequency must be > 0")
    if convention == "mean-energy":
        return HBAR * trap_frequency * (nbar + 0.5) / KB
    if convention == "bose":
        if nbar == 0:
            return 0.0
        return HBAR * trap_frequency / (KB * math.log(1.0 + 1.0 / nbar))
    raise DomainError(f"unknown temperature convention {convention!r}")
