"""Device models and dB-domain power bookkeeping.

Optical power is a plain float in dBm.  ``DARK`` is ``-inf``: attenuating it
by any finite loss leaves it dark, and its linear power is exactly zero.
Levels under -120 dBm collapse to ``DARK``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable

from .errors import DomainError, ParseError

DARK = float("-inf")
FLOOR_DBM = -120.0
CEILING_DBM = 30.0

SPEED_OF_LIGHT_UM_PER_PS = 299.792458
HC_OVER_Q_UM = 1.23984  # photon energy constant, eV*um

PUMP_WAVELENGTH_NM = 532.0


def power(level: float) -> float:
    """Normalize a dBm level: collapse faint light to DARK, reject overdrive."""
    if math.isnan(level):
        raise DomainError("optical power is NaN")
    if level < FLOOR_DBM:
        return DARK
    if level > CEILING_DBM:
        raise DomainError(f"{level} dBm exceeds the {CEILING_DBM} dBm ceiling")
    return level


def attenuate(level: float, loss_db: float) -> float:
    if level == DARK:
        return DARK
    return power(level - loss_db)


def to_mw(level: float) -> float:
    if level == DARK:
        return 0.0
    return 10.0 ** (level / 10.0)


def from_mw(mw: float) -> float:
    if mw <= 0.0:
        return DARK
    return power(10.0 * math.log10(mw))


def combine(levels: Iterable[float], merge_loss_db: float) -> float:
    """Passive combiner: k inputs cost ``merge_loss_db`` per binary merge stage."""
    levels = list(levels)
    if not levels:
        return DARK
    if len(levels) == 1:
        return levels[0]
    total = sum(to_mw(p) for p in levels)
    if total == 0.0:
        return DARK
    return power(10.0 * math.log10(total) - merge_loss_db * math.log2(len(levels)))


@dataclass(frozen=True)
class PhysicsConfig:
    """Every tunable physical constant in one flat record."""

    insertion_loss_db: float = 0.5
    waveguide_loss_db_per_um: float = 0.001
    group_index: float = 4.2
    probe_wavelength_nm: float = 1550.0
    pump_wavelength_nm: float = PUMP_WAVELENGTH_NM
    laser_turnon_ps: float = 20.0
    logic1_margin_db: float = 5.0
    logic0_margin_db: float = 8.0
    modulation_depth_db: float = 10.0
    merge_loss_db: float = 3.0
    source_power_dbm: float = 0.0
    pump_power_dbm: float = 10.0
    segment_length_um: float = 50.0
    quantum_efficiency: float = 0.70
    bandwidth_ghz: float = 40.0

    def __post_init__(self):
        if self.insertion_loss_db < 0:
            raise DomainError("insertion_loss_db must be >= 0")
        if self.modulation_depth_db <= 0:
            raise DomainError("modulation_depth_db must be > 0")
        if self.group_index < 1:
            raise DomainError("group_index must be >= 1")
        if self.logic0_margin_db <= self.logic1_margin_db:
            raise DomainError("logic0_margin_db must exceed logic1_margin_db (guard band)")
        if not 0 < self.quantum_efficiency <= 1:
            raise DomainError("quantum_efficiency must lie in (0, 1]")
        if self.probe_wavelength_nm <= 0 or self.pump_wavelength_nm <= 0:
            raise DomainError("wavelengths must be positive")

    @property
    def logic1_threshold_dbm(self) -> float:
        return self.source_power_dbm - self.logic1_margin_db

    @property
    def logic0_ceiling_dbm(self) -> float:
        return self.source_power_dbm - self.logic0_margin_db

    def to_text(self) -> str:
        return "".join(f"{k}={_fmt(v)}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> "PhysicsConfig":
        overrides = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError("expected key=value", lineno, line)
            key, value = (s.strip() for s in line.split("=", 1))
            overrides[key] = value
        return cls().with_overrides(overrides)

    def with_overrides(self, overrides: dict[str, str | float]) -> "PhysicsConfig":
        known = {f.name for f in fields(self)}
        values = asdict(self)
        for key, value in overrides.items():
            if key not in known:
                raise ParseError(f"unknown configuration key {key!r}")
            try:
                values[key] = float(value)
            except ValueError:
                raise ParseError(f"value for {key} is not a number", token=str(value)) from None
        return type(self)(**values)


def _fmt(x: float) -> str:
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


# -- devices -----------------------------------------------------------------

@dataclass(frozen=True)
class RingResonatorSwitch:
    id: str
    pump: str  # laser id, or "ext:<line>" for an external pump line
    in_port: str
    through_port: str
    drop_port: str
    radius_um: float = 5.0
    width_um: float = 0.4
    gap_um: float = 0.2
    modulation_depth_db: float = 10.0
    insertion_loss_db: float = 0.5

    def __post_init__(self):
        if self.modulation_depth_db <= 0:
            raise DomainError(f"resonator {self.id}: modulation depth must be > 0")
        if self.insertion_loss_db < 0:
            raise DomainError(f"resonator {self.id}: insertion loss must be >= 0")
        if self.radius_um <= 0:
            raise DomainError(f"resonator {self.id}: radius must be > 0")


@dataclass(frozen=True)
class LaserDiode:
    id: str
    wavelength_nm: float
    power_dbm: float
    driven_by: str  # q:<ff>, qbar:<ff>, input:<name>, pd:<photodiode>

    def __post_init__(self):
        if self.wavelength_nm <= 0:
            raise DomainError(f"laser {self.id}: wavelength must be positive")
        power(self.power_dbm)

    @property
    def repeater_photodiode(self) -> str | None:
        if self.driven_by.startswith("pd:"):
            return self.driven_by[3:]
        return None


@dataclass(frozen=True)
class Photodiode:
    id: str
    port: str
    drives: tuple[str, ...] = ()  # j:<ff>, k:<ff>, output:<name>, laser:<id>
    quantum_efficiency: float = 0.70
    bandwidth_ghz: float = 40.0
    logic1_threshold_dbm: float = -5.0
    logic0_ceiling_dbm: float = -8.0

    def __post_init__(self):
        if not 0 < self.quantum_efficiency <= 1:
            raise DomainError(f"photodiode {self.id}: quantum efficiency must lie in (0, 1]")
        if self.bandwidth_ghz <= 0:
            raise DomainError(f"photodiode {self.id}: bandwidth must be positive")
        if not self.logic0_ceiling_dbm < self.logic1_threshold_dbm:
            raise DomainError(f"photodiode {self.id}: logic-0 ceiling must lie below logic-1 threshold")


@dataclass(frozen=True)
class Waveguide:
    id: str
    from_port: str
    to_port: str
    length_um: float
    loss_db_per_um: float = 0.001
    group_index: float = 4.2

    def __post_init__(self):
        if self.length_um < 0:
            raise DomainError(f"waveguide {self.id}: negative length")
        if self.group_index < 1:
            raise DomainError(f"waveguide {self.id}: group index must be >= 1")
        if self.loss_db_per_um < 0:
            raise DomainError(f"waveguide {self.id}: negative loss")


def default_photodiode(id: str, port: str, drives: tuple[str, ...],
                       config: PhysicsConfig) -> Photodiode:
    return Photodiode(id, port, drives, config.quantum_efficiency, config.bandwidth_ghz,
                      config.logic1_threshold_dbm, config.logic0_ceiling_dbm)


# -- operations --------------------------------------------------------------

def resonator_route(pump: int, level: float, switch: RingResonatorSwitch) -> tuple[float, float]:
    """Return ``(through, drop)``; a pumped ring steers light to its drop port."""
    if level == DARK:
        return DARK, DARK
    selected = attenuate(level, switch.insertion_loss_db)
    leaked = attenuate(selected, switch.modulation_depth_db)
    if pump:
        return leaked, selected
    return selected, leaked


def waveguide_attenuate(level: float, wg: Waveguide) -> float:
    return attenuate(level, wg.length_um * wg.loss_db_per_um)


def responsivity(wavelength_nm: float, quantum_efficiency: float) -> float:
    """Photodiode responsivity in A/W."""
    if wavelength_nm <= 0:
        raise DomainError("wavelength must be positive")
    if not 0 < quantum_efficiency <= 1:
        raise DomainError("quantum efficiency must lie in (0, 1]")
    return quantum_efficiency * (wavelength_nm / 1000.0) / HC_OVER_Q_UM


class Logic(enum.Enum):
    ZERO = 0
    ONE = 1
    INDETERMINATE = "X"

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class DetectionResult:
    logic: Logic
    photocurrent_ma: float
    power_dbm: float
    margin_db: float = field(default=math.inf)


def margin(level: float, logic1_threshold: float, logic0_ceiling: float) -> float:
    """Distance into the nearer valid region; negative inside the guard band."""
    if level == DARK:
        return math.inf
    return max(level - logic1_threshold, logic0_ceiling - level)


def photodiode_detect(level: float, pd: Photodiode,
                      probe_wavelength_nm: float = 1550.0) -> DetectionResult:
    current = responsivity(probe_wavelength_nm, pd.quantum_efficiency) * to_mw(level)
    m = margin(level, pd.logic1_threshold_dbm, pd.logic0_ceiling_dbm)
    if level != DARK and level >= pd.logic1_threshold_dbm:
        logic = Logic.ONE
    elif level == DARK or level <= pd.logic0_ceiling_dbm:
        logic = Logic.ZERO
    else:
        logic = Logic.INDETERMINATE
    return DetectionResult(logic, current, level, m)


def element_delay(element, config: PhysicsConfig | None = None) -> float:
    """Propagation delay in picoseconds."""
    config = config or PhysicsConfig()
    if isinstance(element, Waveguide):
        return element.length_um * element.group_index / SPEED_OF_LIGHT_UM_PER_PS
    if isinstance(element, RingResonatorSwitch):
        return 2 * math.pi * element.radius_um * config.group_index / SPEED_OF_LIGHT_UM_PER_PS
    if isinstance(element, Photodiode):
        # 10-90 % rise time of a single-pole response
        return 350.0 / element.bandwidth_ghz
    if isinstance(element, LaserDiode):
        return config.laser_turnon_ps
    raise TypeError(f"no delay model for {type(element).__name__}")
