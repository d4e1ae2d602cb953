"""Load-dependent base-station power model.

Consumption follows the classic affine model: a sleeping station draws a
fixed sleep power, an active one draws its operational floor plus a term
growing linearly with utilization through the amplifier branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

ROLE_SBS = "sbs"
ROLE_MBS = "mbs"
ROLE_HAPS = "haps"


@dataclass(frozen=True)
class BsPowerProfile:
    """Hardware constants of one base-station class (all in watts except
    the dimensionless amplifier efficiency factor)."""

    p_operational: float
    amp_efficiency: float
    p_transmit: float
    p_sleep: float

    def __post_init__(self):
        for name in ("p_operational", "amp_efficiency", "p_transmit", "p_sleep"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be finite and positive, got {value}")


DEFAULT_SBS = BsPowerProfile(p_operational=56.0, amp_efficiency=2.6,
                             p_transmit=6.3, p_sleep=6.0)
DEFAULT_MBS = BsPowerProfile(p_operational=130.0, amp_efficiency=4.7,
                             p_transmit=20.0, p_sleep=75.0)
DEFAULT_HAPS = BsPowerProfile(p_operational=130.0, amp_efficiency=4.7,
                              p_transmit=20.0, p_sleep=75.0)


def bs_power(profile: BsPowerProfile, load: float) -> float:
    """Instantaneous draw of one station at utilization ``load`` in [0, 1].

    Exactly zero load means the station sleeps; any positive load puts it on
    the active branch ``p_operational + amp_efficiency * load * p_transmit``.
    """
    if not math.isfinite(load) or load < 0 or load > 1:
        raise ValueError(f"load must lie in [0, 1], got {load}")
    if load == 0:
        return profile.p_sleep
    return profile.p_operational + profile.amp_efficiency * load * profile.p_transmit


@dataclass(frozen=True)
class NetworkPower:
    """Per-tier power breakdown; ``total`` is the exact fsum of the parts."""

    haps: float
    mbs: float
    sbs: tuple[float, ...]

    @property
    def total(self) -> float:
        return math.fsum((self.haps, self.mbs, *self.sbs))


def network_power(
    haps_load: float,
    mbs_load: float,
    sbs_loads: Iterable[float] = (),
    *,
    haps_profile: BsPowerProfile = DEFAULT_HAPS,
    mbs_profile: BsPowerProfile = DEFAULT_MBS,
    sbs_profile: BsPowerProfile = DEFAULT_SBS,
) -> NetworkPower:
    """Total draw of one macro area: aerial relay + macro station + small cells.

    The relay and the macro station always carry traffic, so their loads must
    be strictly inside (0, 1); small cells may sleep (load 0) or serve.
    """
    for name, load in (("haps_load", haps_load), ("mbs_load", mbs_load)):
        if not math.isfinite(load) or not (0.0 < load < 1.0):
            raise ValueError(f"{name} must lie strictly inside (0, 1), got {load}")
    sbs_loads = tuple(float(v) for v in sbs_loads)
    sbs_power = tuple(bs_power(sbs_profile, v) for v in sbs_loads)
    return NetworkPower(
        haps=bs_power(haps_profile, haps_load),
        mbs=bs_power(mbs_profile, mbs_load),
        sbs=sbs_power,
    )


def sleep_saving(profile: BsPowerProfile, load: float) -> float:
    """Watts saved by putting one station to sleep instead of serving ``load``."""
    return bs_power(profile, load) - profile.p_sleep
