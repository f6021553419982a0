"""Model configuration, unit handling and derived physical quantities.

All frequencies and rates are stored internally as angular frequencies
(rad/s).  The config file loader accepts human-friendly unit suffixes
(``2pi*650 kHz``, ``-75 dBm``, ``11 ms``, ``100 mK``, ...) and normalizes
everything at load time, so the rest of the library never sees a unit.
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from scipy.constants import hbar, k as k_B

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """Raised for malformed or physically invalid configuration input."""


# ---------------------------------------------------------------------------
# Parameter dataclasses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AtomParams:
    """Single-ion properties of the three-level system.

    ``d13``/``d23`` are electric dipole moments in C*m, lifetimes in
    seconds, everything else in rad/s.
    """

    d13: float
    d23: float
    tau3: float
    tau2: float
    gamma_2d: float
    gamma_3d: float
    g_mu: float
    g_o: float
    omega_12: float
    omega_13: float

    def __post_init__(self):
        for name in ("tau3", "tau2", "omega_12", "omega_13"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be strictly positive")
        for name in ("d13", "d23", "gamma_2d", "gamma_3d", "g_mu", "g_o"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class CavityParams:
    """Microwave and optical cavity loss rates and resonance frequencies (rad/s)."""

    gamma_mu_c: float
    gamma_mu_i: float
    gamma_o_c: float
    gamma_o_i: float
    omega_c_mu: float
    omega_c_o: float

    def __post_init__(self):
        for name in ("gamma_mu_c", "gamma_mu_i", "gamma_o_c", "gamma_o_i"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.gamma_mu_c + self.gamma_mu_i <= 0:
            raise ConfigError("microwave cavity needs at least one nonzero loss")
        if self.gamma_o_c + self.gamma_o_i <= 0:
            raise ConfigError("optical cavity needs at least one nonzero loss")


@dataclass(frozen=True)
class EnsembleSpec:
    """Ion numbers, inhomogeneous linewidths (rad/s std dev) and temperature (K)."""

    n_total: float
    n_o: float
    sigma_o: float
    sigma_mu: float
    temperature: float

    def __post_init__(self):
        if not 0 <= self.n_o <= self.n_total:
            raise ConfigError("n_o must satisfy 0 <= n_o <= n_total")
        if self.sigma_o <= 0 or self.sigma_mu <= 0:
            raise ConfigError("sigma_o and sigma_mu must be strictly positive")
        if self.temperature < 0:
            raise ConfigError("temperature must be nonnegative")


@dataclass(frozen=True)
class DriveSettings:
    """Input amplitudes, pump Rabi frequency and drive-cavity detunings.

    Amplitudes are photon-flux normalized: ``|beta_in|**2`` is photons/s.
    ``pump_power`` (W), when given, is the source the Rabi frequency was
    derived from; it is kept so the Rabi frequency can be rederived when
    the optical coupling rate changes.
    """

    beta_in: complex = 0.0
    alpha_in: complex = 0.0
    rabi: complex = 0.0
    delta_mu: float = 0.0
    delta_o: float = 0.0
    pump_power: float | None = None


@dataclass(frozen=True)
class FieldState:
    """Complex intracavity amplitudes, photon-number normalized (|beta|**2 photons)."""

    beta: complex = 0.0
    alpha: complex = 0.0


@dataclass(frozen=True)
class NumericsSettings:
    """Tolerances and grid sizes for the quadrature and solvers."""

    window_sigmas: float = 6.0
    points_per_panel: int = 9
    outer_base_panels: int = 8
    quad_tol: float = 1e-4
    quad_max_refine: int = 6
    fp_tol: float = 1e-8
    fp_abs_tol: float = 1e-12
    fp_max_iter: int = 500
    steady_cond_warn: float = 1e12


@dataclass(frozen=True)
class ModelConfig:
    """Complete normalized model description."""

    atom: AtomParams
    cavity: CavityParams
    ensemble: EnsembleSpec
    drive: DriveSettings = field(default_factory=DriveSettings)
    numerics: NumericsSettings = field(default_factory=NumericsSettings)
    convention: str = "radiated"

    def __post_init__(self):
        if self.convention not in ("radiated", "standard"):
            raise ConfigError("convention must be 'radiated' or 'standard'")

    @property
    def center_delta_a_mu(self) -> float:
        """Center of the microwave inhomogeneous distribution relative to the cavity."""
        return self.atom.omega_12 - self.cavity.omega_c_mu

    @property
    def center_delta_a_o(self) -> float:
        """Center of the optical inhomogeneous distribution relative to the cavity."""
        return self.atom.omega_13 - self.cavity.omega_c_o


# ---------------------------------------------------------------------------
# Derived physical quantities
# ---------------------------------------------------------------------------


def planck_occupation(omega: float, temperature: float) -> float:
    """Thermal photon occupation 1/(exp(hbar*omega/kB*T) - 1), 0 at T=0."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    if temperature < 0:
        raise ValueError("temperature must be nonnegative")
    if temperature == 0:
        return 0.0
    x = hbar * omega / (k_B * temperature)
    if x > 700:
        return 0.0
    return 1.0 / math.expm1(x)


def effective_microwave_atom_number(spec: EnsembleSpec, omega_12: float) -> float:
    """Thermally weighted atom number N*tanh(hbar*omega/2kB*T) for the spin transition."""
    if spec.temperature == 0:
        return spec.n_total
    x = hbar * omega_12 / (k_B * spec.temperature)
    return spec.n_total * math.tanh(x / 2.0)


def input_amplitude_from_power(power: float, omega: float) -> float:
    """Photon-flux amplitude sqrt(P/hbar*omega); the phase reference is zero."""
    if power < 0:
        raise ValueError("power must be nonnegative")
    return math.sqrt(power / (hbar * omega))


def dbm_to_watts(dbm: float) -> float:
    return 1e-3 * 10.0 ** (dbm / 10.0)


def decay_rates_from_lifetimes(atom: AtomParams) -> tuple[float, float, float]:
    """Population decay rates (gamma_12, gamma_13, gamma_23) in rad/s.

    The upper-level decay 1/tau3 is split between the two optical branches
    in proportion to the squared dipole moments.
    """
    gamma_12 = 1.0 / atom.tau2
    total3 = 1.0 / atom.tau3
    if atom.d13 == 0 and atom.d23 == 0:
        # no dipole information: split evenly
        return gamma_12, total3 / 2.0, total3 / 2.0
    w13 = atom.d13**2
    w23 = atom.d23**2
    gamma_13 = total3 * w13 / (w13 + w23)
    gamma_23 = total3 * w23 / (w13 + w23)
    return gamma_12, gamma_13, gamma_23


def rabi_from_pump_power(power: float, cavity: CavityParams, atom: AtomParams) -> float:
    """Pump Rabi frequency for a resonant intracavity pump of the given power.

    The intracavity pump photon number is the resonant buildup
    4*gamma_oc*(P/hbar*omega_p)/(gamma_oc+gamma_oi)**2 and the 2-3 coupling
    is the optical coupling scaled by the dipole ratio d23/d13.
    """
    if power < 0:
        raise ValueError("power must be nonnegative")
    if power == 0:
        return 0.0
    flux = power / (hbar * atom.omega_13)
    n_pump = 4.0 * cavity.gamma_o_c * flux / (cavity.gamma_o_c + cavity.gamma_o_i) ** 2
    g_23 = atom.g_o * (atom.d23 / atom.d13)
    return g_23 * math.sqrt(n_pump)


def thermal_occupation_12(config: ModelConfig) -> float:
    """Planck occupation of the microwave transition at the config temperature."""
    return planck_occupation(config.atom.omega_12, config.ensemble.temperature)


# ---------------------------------------------------------------------------
# Config file parsing
# ---------------------------------------------------------------------------

_FREQ_UNITS = {
    "hz": 1.0,
    "khz": 1e3,
    "mhz": 1e6,
    "ghz": 1e9,
    "thz": 1e12,
}
_TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}
_TEMP_UNITS = {"k": 1.0, "mk": 1e-3, "uk": 1e-6}
_POWER_UNITS = {"w": 1.0, "mw": 1e-3, "uw": 1e-6, "nw": 1e-9, "pw": 1e-12}

_VALUE_RE = re.compile(
    r"^\s*(?P<twopi>2\s*pi\s*\*)?\s*(?P<num>[-+]?[\d.]+(?:[eE][-+]?\d+)?)\s*(?P<unit>[a-zA-Z/]*)\s*$"
)


def parse_quantity(text: str, key: str = "?", hz_is_cyclic: bool = False) -> float:
    """Parse a config value with an optional unit suffix into SI / rad/s.

    Frequencies written ``2pi*X Hz`` become ``2*pi*X`` rad/s.  A bare
    ``X Hz`` is taken as already-angular (X rad/s) unless ``hz_is_cyclic``.
    """
    m = _VALUE_RE.match(text)
    if not m:
        raise ConfigError(f"cannot parse value {text!r} for key {key!r}")
    value = float(m.group("num"))
    unit = m.group("unit").lower()
    twopi = m.group("twopi") is not None

    if unit == "" or unit == "rad/s":
        if twopi:
            value *= TWO_PI
        return value
    if unit in _FREQ_UNITS:
        value *= _FREQ_UNITS[unit]
        if twopi or hz_is_cyclic:
            value *= TWO_PI
        return value
    if twopi:
        raise ConfigError(f"2pi* prefix only applies to frequencies (key {key!r})")
    if unit in _TIME_UNITS:
        return value * _TIME_UNITS[unit]
    if unit in _TEMP_UNITS:
        return value * _TEMP_UNITS[unit]
    if unit in _POWER_UNITS:
        return value * _POWER_UNITS[unit]
    if unit == "dbm":
        return dbm_to_watts(value)
    if unit == "cm":  # dipole moment, C*m
        return value
    raise ConfigError(f"unknown unit suffix {m.group('unit')!r} for key {key!r}")


_REQUIRED_KEYS = [
    "d13",
    "d23",
    "tau3",
    "tau2",
    "g_mu",
    "g_o",
    "omega_12",
    "omega_13",
    "gamma_mu_c",
    "gamma_mu_i",
    "gamma_o_c",
    "gamma_o_i",
    "n_total",
    "sigma_o",
    "sigma_mu",
    "temperature",
]

_OPTIONAL_KEYS = [
    "gamma_2d",
    "gamma_3d",
    "n_o",
    "delta_a_mu_center",
    "delta_a_o_center",
    "delta_mu",
    "delta_o",
    "beta_in",
    "microwave_power",
    "alpha_in",
    "optical_power",
    "rabi",
    "pump_power",
    "hz_is_cyclic",
    "convention",
    "quad_points",
    "quad_window_sigmas",
    "quad_tol",
    "quad_max_refine",
]

DEFAULT_DEPHASING = TWO_PI * 1e3  # rad/s, configurable via gamma_2d / gamma_3d


def _parse_bool(text: str, key: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"cannot parse boolean value {text!r} for key {key!r}")


def parse_config_text(text: str) -> ModelConfig:
    """Parse the flat key/value config format into a normalized ModelConfig."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}")
        raw[key] = value.strip()

    known = set(_REQUIRED_KEYS) | set(_OPTIONAL_KEYS)
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown key {key!r}")
    for key in _REQUIRED_KEYS:
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")

    hz_is_cyclic = _parse_bool(raw["hz_is_cyclic"], "hz_is_cyclic") if "hz_is_cyclic" in raw else False

    def q(key: str, default: float | None = None) -> float:
        if key not in raw:
            assert default is not None
            return default
        return parse_quantity(raw[key], key, hz_is_cyclic=hz_is_cyclic)

    atom = AtomParams(
        d13=q("d13"),
        d23=q("d23"),
        tau3=q("tau3"),
        tau2=q("tau2"),
        gamma_2d=q("gamma_2d", DEFAULT_DEPHASING),
        gamma_3d=q("gamma_3d", DEFAULT_DEPHASING),
        g_mu=q("g_mu"),
        g_o=q("g_o"),
        omega_12=q("omega_12"),
        omega_13=q("omega_13"),
    )
    cavity = CavityParams(
        gamma_mu_c=q("gamma_mu_c"),
        gamma_mu_i=q("gamma_mu_i"),
        gamma_o_c=q("gamma_o_c"),
        gamma_o_i=q("gamma_o_i"),
        omega_c_mu=atom.omega_12 - q("delta_a_mu_center", 0.0),
        omega_c_o=atom.omega_13 - q("delta_a_o_center", 0.0),
    )
    n_total = q("n_total")
    ensemble = EnsembleSpec(
        n_total=n_total,
        n_o=q("n_o", n_total),
        sigma_o=q("sigma_o"),
        sigma_mu=q("sigma_mu"),
        temperature=q("temperature"),
    )

    if "beta_in" in raw and "microwave_power" in raw:
        raise ConfigError("give either 'beta_in' or 'microwave_power', not both")
    if "beta_in" in raw:
        beta_in = complex(q("beta_in"))
    else:
        beta_in = complex(input_amplitude_from_power(q("microwave_power", 0.0), atom.omega_12))
    if "alpha_in" in raw and "optical_power" in raw:
        raise ConfigError("give either 'alpha_in' or 'optical_power', not both")
    if "alpha_in" in raw:
        alpha_in = complex(q("alpha_in"))
    else:
        alpha_in = complex(input_amplitude_from_power(q("optical_power", 0.0), atom.omega_13))

    if "rabi" in raw and "pump_power" in raw:
        raise ConfigError("give either 'rabi' or 'pump_power', not both")
    pump_power = None
    if "pump_power" in raw:
        pump_power = q("pump_power")
        rabi = complex(rabi_from_pump_power(pump_power, cavity, atom))
    else:
        rabi = complex(q("rabi", 0.0))

    drive = DriveSettings(
        beta_in=beta_in,
        alpha_in=alpha_in,
        rabi=rabi,
        delta_mu=q("delta_mu", 0.0),
        delta_o=q("delta_o", 0.0),
        pump_power=pump_power,
    )

    numerics = NumericsSettings(
        window_sigmas=q("quad_window_sigmas", 6.0),
        points_per_panel=int(q("quad_points", 9)),
        quad_tol=q("quad_tol", 1e-4),
        quad_max_refine=int(q("quad_max_refine", 6)),
    )

    convention = raw.get("convention", "radiated")
    return ModelConfig(
        atom=atom,
        cavity=cavity,
        ensemble=ensemble,
        drive=drive,
        numerics=numerics,
        convention=convention,
    )


def load_config(path: str | Path) -> ModelConfig:
    """Load and normalize a model configuration from a key/value file."""
    return parse_config_text(Path(path).read_text())


# ---------------------------------------------------------------------------
# Convenience edits used by the optimizer and sweeps
# ---------------------------------------------------------------------------


def with_centers(config: ModelConfig, delta_a_mu: float, delta_a_o: float) -> ModelConfig:
    """Return a config whose inhomogeneous centers sit at the given detunings."""
    cavity = replace(
        config.cavity,
        omega_c_mu=config.atom.omega_12 - delta_a_mu,
        omega_c_o=config.atom.omega_13 - delta_a_o,
    )
    return replace(config, cavity=cavity)


def with_drive_detunings(config: ModelConfig, delta_mu: float, delta_o: float) -> ModelConfig:
    return replace(config, drive=replace(config.drive, delta_mu=delta_mu, delta_o=delta_o))


def with_couplings(config: ModelConfig, gamma_mu_c: float, gamma_o_c: float) -> ModelConfig:
    """Change cavity coupling rates, rederiving the pump Rabi frequency if needed."""
    cavity = replace(config.cavity, gamma_mu_c=gamma_mu_c, gamma_o_c=gamma_o_c)
    drive = config.drive
    if drive.pump_power is not None:
        rabi = rabi_from_pump_power(drive.pump_power, cavity, config.atom)
        phase = cmath.phase(drive.rabi) if drive.rabi != 0 else 0.0
        drive = replace(drive, rabi=rabi * cmath.exp(1j * phase))
    return replace(config, cavity=cavity, drive=drive)
