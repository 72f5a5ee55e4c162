"""OFDM numerology and the TDD frame/slot/symbol schedule.

The slot grid follows the simplified NR-style layout used by the rest of
the simulator: a 10 ms frame of 10 subframes, `scs/15 kHz` slots per
subframe, 14 OFDM symbols per slot.  Slot 0 of every frame is reserved
for the synchronization signal; every other slot carries one pilot
symbol, two guard symbols when the link direction switches, and data
symbols otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

FRAME_S = 10e-3
SUBFRAME_S = 1e-3
SUBFRAMES_PER_FRAME = 10
BASE_SCS_HZ = 15e3


class SymbolRole(str, Enum):
    PSS = "PSS"
    GUARD = "GUARD"
    PILOT_UL = "PILOT_UL"
    PILOT_DL = "PILOT_DL"
    DATA_UL = "DATA_UL"
    DATA_DL = "DATA_DL"
    IDLE = "IDLE"


#: Number of guard symbols inserted when the link direction switches.
GUARDS_PER_SWITCH = 2


@dataclass(frozen=True)
class Numerology:
    """Static OFDM dimensioning shared by every processing stage.

    All durations are expressed in integer samples at ``sample_rate_hz``
    so that symbol, slot and frame boundaries are exact.
    """

    scs_hz: float
    fft_size: int
    n_data_sc: int
    sample_rate_hz: float
    cp_normal: int
    cp_long: int
    symbols_per_slot: int = 14
    slots_per_subframe: int = 4

    @property
    def slot_samples(self) -> int:
        return (self.fft_size + self.cp_long) + (self.symbols_per_slot - 1) * (
            self.fft_size + self.cp_normal
        )

    @property
    def slot_duration_s(self) -> float:
        return self.slot_samples / self.sample_rate_hz

    @property
    def slots_per_frame(self) -> int:
        return self.slots_per_subframe * SUBFRAMES_PER_FRAME

    @property
    def subframe_samples(self) -> int:
        return self.slot_samples * self.slots_per_subframe

    @property
    def frame_samples(self) -> int:
        return self.subframe_samples * SUBFRAMES_PER_FRAME

    def cp_length(self, symbol_in_slot: int) -> int:
        return self.cp_long if symbol_in_slot == 0 else self.cp_normal

    def symbol_samples(self, symbol_in_slot: int) -> int:
        return self.fft_size + self.cp_length(symbol_in_slot)

    def subcarrier_offsets(self) -> np.ndarray:
        """Signed subcarrier indices relative to DC, in ascending frequency.

        The ``n_data_sc`` data subcarriers sit symmetrically around an
        unused DC bin: offsets -n/2..-1 then +1..+n/2.
        """
        half = self.n_data_sc // 2
        return np.concatenate([np.arange(-half, 0), np.arange(1, half + 1)])

    def subcarrier_bins(self) -> np.ndarray:
        """FFT bin index for each data subcarrier (DC-centred mapping)."""
        return np.mod(self.subcarrier_offsets(), self.fft_size)


def build_numerology(
    scs_hz: float,
    fft_size: int,
    n_data_sc: int,
    sample_rate_hz: float,
    cp_normal: int | None = None,
    cp_length_long: int | None = None,
) -> Numerology:
    """Validate an (SCS, FFT, rate) triple and derive slot-exact CP lengths.

    Default CP rule: the normal CP is ``fft_size * 9 // 128`` samples
    (288 at an FFT size of 4096) and the first symbol of each slot
    absorbs the remainder so the 14-symbol slot fills the slot duration
    exactly.  Explicit CP lengths may be supplied instead; they must
    still fill the slot exactly.
    """
    if fft_size <= 0 or n_data_sc <= 0:
        raise ConfigurationError("fft_size and n_data_sc must be positive")
    if abs(fft_size * scs_hz - sample_rate_hz) > 1e-6 * sample_rate_hz:
        raise ConfigurationError(
            f"sample rate {sample_rate_hz} != fft_size*scs = {fft_size * scs_hz}"
        )
    if n_data_sc >= fft_size:
        raise ConfigurationError("n_data_sc must be smaller than fft_size")
    if n_data_sc % 2:
        raise ConfigurationError("n_data_sc must be even (symmetric mapping around DC)")

    slots_per_subframe = scs_hz / BASE_SCS_HZ
    if abs(slots_per_subframe - round(slots_per_subframe)) > 1e-9:
        raise ConfigurationError(f"subcarrier spacing {scs_hz} is not a multiple of 15 kHz")
    slots_per_subframe = int(round(slots_per_subframe))

    slot_samples = sample_rate_hz * SUBFRAME_S / slots_per_subframe
    if abs(slot_samples - round(slot_samples)) > 1e-6:
        raise ConfigurationError("slot duration is not an integer number of samples")
    slot_samples = int(round(slot_samples))

    symbols_per_slot = 14
    budget = slot_samples - symbols_per_slot * fft_size
    if cp_normal is None:
        cp_normal = fft_size * 9 // 128
    if cp_length_long is None:
        cp_length_long = budget - (symbols_per_slot - 1) * cp_normal
    if cp_normal < 0 or cp_length_long < cp_normal:
        raise ConfigurationError(
            f"CP budget of {budget} samples cannot host 14 symbols "
            f"(cp_normal={cp_normal}, cp_long={cp_length_long})"
        )
    if (fft_size + cp_length_long) + (symbols_per_slot - 1) * (fft_size + cp_normal) != slot_samples:
        raise ConfigurationError("CP lengths do not fill the slot exactly")

    return Numerology(
        scs_hz=float(scs_hz),
        fft_size=int(fft_size),
        n_data_sc=int(n_data_sc),
        sample_rate_hz=float(sample_rate_hz),
        cp_normal=int(cp_normal),
        cp_long=int(cp_length_long),
        symbols_per_slot=symbols_per_slot,
        slots_per_subframe=slots_per_subframe,
    )


def prototype_numerology() -> Numerology:
    """The 60 kHz / 4096-FFT / 3168-subcarrier configuration (245.76 MS/s)."""
    return build_numerology(60e3, 4096, 3168, 245.76e6)


@dataclass(frozen=True)
class SlotPlan:
    """Role of each OFDM symbol within one slot."""

    roles: tuple[SymbolRole, ...]

    @property
    def direction(self) -> str | None:
        for role in self.roles:
            if role in (SymbolRole.PILOT_UL, SymbolRole.DATA_UL):
                return "UL"
            if role in (SymbolRole.PILOT_DL, SymbolRole.DATA_DL):
                return "DL"
        return None

    def count(self, role: SymbolRole) -> int:
        return sum(1 for r in self.roles if r is role)


@dataclass(frozen=True)
class FrameSchedule:
    """Per-symbol roles for one 10 ms frame."""

    numerology: Numerology
    slots: tuple[SlotPlan, ...]


_DIRECTIONS = {"UL": "UL", "U": "UL", "DL": "DL", "D": "DL"}


def _normalize_directions(slot_directions) -> list[str]:
    if isinstance(slot_directions, str):
        slot_directions = list(slot_directions.replace(" ", ""))
    out = []
    for d in slot_directions:
        key = str(d).upper()
        if key not in _DIRECTIONS:
            raise ConfigurationError(f"unknown link direction {d!r}")
        out.append(_DIRECTIONS[key])
    return out


def build_frame_schedule(numerology: Numerology, slot_directions) -> FrameSchedule:
    """Build the slot-level TDD schedule for one frame.

    ``slot_directions`` holds one UL/DL entry per non-PSS slot (either a
    list of "UL"/"DL" strings or a compact "U"/"D" character string).
    Slot 0 carries the PSS and is otherwise idle.  A slot whose direction
    differs from the previous active slot starts with two guard symbols;
    the first non-guard symbol of every active slot is the pilot.
    """
    directions = _normalize_directions(slot_directions)
    n_active = numerology.slots_per_frame - 1
    if len(directions) != n_active:
        raise ConfigurationError(
            f"need {n_active} slot directions for this numerology, got {len(directions)}"
        )

    n_sym = numerology.symbols_per_slot
    slots = [SlotPlan((SymbolRole.PSS,) + (SymbolRole.IDLE,) * (n_sym - 1))]
    prev = None
    for d in directions:
        guards = GUARDS_PER_SWITCH if prev is not None and d != prev else 0
        pilot = SymbolRole.PILOT_UL if d == "UL" else SymbolRole.PILOT_DL
        data = SymbolRole.DATA_UL if d == "UL" else SymbolRole.DATA_DL
        roles = (SymbolRole.GUARD,) * guards + (pilot,) + (data,) * (n_sym - guards - 1)
        slots.append(SlotPlan(roles))
        prev = d
    return FrameSchedule(numerology=numerology, slots=tuple(slots))


def count_symbols(schedule: FrameSchedule, window: tuple[int, int] | None, role) -> int:
    """Count symbols with ``role`` over a half-open slot range ``window``.

    ``window=None`` counts over the whole frame.
    """
    role = SymbolRole(role)
    if window is None:
        window = (0, len(schedule.slots))
    start, stop = window
    if start < 0 or stop > len(schedule.slots) or start > stop:
        raise ConfigurationError(f"slot window {window} outside the frame")
    return sum(slot.count(role) for slot in schedule.slots[start:stop])


def _read_config(path) -> dict:
    with open(Path(path), "rb") as fh:
        return tomllib.load(fh)


def load_numerology(path) -> Numerology:
    """Load a numerology from the ``[numerology]`` section of a TOML file."""
    cfg = _read_config(path)
    try:
        sec = cfg["numerology"]
        return build_numerology(
            scs_hz=float(sec["scs_hz"]),
            fft_size=int(sec["fft_size"]),
            n_data_sc=int(sec["n_data_sc"]),
            sample_rate_hz=float(sec["sample_rate_hz"]),
            cp_normal=sec.get("cp_normal"),
            cp_length_long=sec.get("cp_long"),
        )
    except KeyError as exc:
        raise ConfigurationError(f"missing numerology key: {exc}") from exc


def load_frame_schedule(path, numerology: Numerology | None = None) -> FrameSchedule:
    """Load a frame schedule from the ``[schedule]`` section of a TOML file.

    Keys: ``directions`` (string of U/D characters or list of "UL"/"DL"),
    or ``uniform`` ("UL"/"DL") to fill every active slot identically.
    """
    cfg = _read_config(path)
    numerology = numerology or load_numerology(path)
    sec = cfg.get("schedule", {})
    if "directions" in sec:
        directions = sec["directions"]
    else:
        uniform = sec.get("uniform", "UL")
        directions = [uniform] * (numerology.slots_per_frame - 1)
    return build_frame_schedule(numerology, directions)
