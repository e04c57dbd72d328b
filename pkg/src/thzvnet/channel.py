"""THz link budget primitives: free-space and molecular-absorption path gains,
beam solid angle, two-level (main/side lobe) antenna gains, received power of a
serving link, and the absorption-plus-thermal noise floor.

Unit conventions: configuration files carry dBm/dB, everything here is linear
watts / dimensionless. The world is planar; the vertical beamwidth enters only
through the beam solid angle while the main/side lobe decision uses the
horizontal angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .geometry import Point2D, blockage_indicator

if TYPE_CHECKING:  # pragma: no cover
    from .scenario import Topology


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts <= 0:
        raise ValueError("cannot convert non-positive power to dBm")
    return 10.0 * math.log10(watts) + 30.0


@dataclass(frozen=True)
class ChannelConfig:
    """Physical-layer constants, all in linear units.

    Defaults correspond to the standard 1.05 THz street-block setup:
    40 dBm transmit power, 5 GHz bandwidth, -77 dBm noise floor,
    10 degree beams with 0.1 side-to-main lobe power ratio.
    """

    f: float = 1.05e12            # carrier frequency, Hz
    c: float = 3.0e8              # speed of light, m/s
    tau: float = 0.07512          # molecular absorption coefficient, 1/m
    tx_power: float = 10.0        # per-SPV transmit power, W (40 dBm)
    bandwidth: float = 5.0e9      # Hz
    noise_floor: float = dbm_to_watts(-77.0)  # Johnson-Nyquist floor, W
    side_lobe_ratio: float = 0.1  # side-to-main lobe power ratio, in (0,1)
    beam_h: float = math.radians(10.0)  # horizontal beamwidth, rad
    beam_v: float = math.radians(10.0)  # vertical beamwidth, rad
    rcs: float = 1.0              # radar cross section of sensed targets, m^2
    active_prob: float = 0.9      # probability an SPV is in the active state

    def __post_init__(self):
        positives = {
            "f": self.f, "c": self.c, "tx_power": self.tx_power,
            "bandwidth": self.bandwidth, "noise_floor": self.noise_floor,
            "rcs": self.rcs,
        }
        for name, val in positives.items():
            if not (val > 0 and math.isfinite(val)):
                raise ValueError(f"{name} must be strictly positive, got {val}")
        if self.tau < 0 or not math.isfinite(self.tau):
            raise ValueError(f"tau must be non-negative, got {self.tau}")
        if not 0.0 < self.side_lobe_ratio < 1.0:
            raise ValueError("side_lobe_ratio must lie in (0, 1)")
        for name, val in (("beam_h", self.beam_h), ("beam_v", self.beam_v)):
            if not 0.0 < val < math.pi:
                raise ValueError(f"{name} must lie in (0, pi), got {val}")
        if not 0.0 <= self.active_prob <= 1.0:
            raise ValueError("active_prob must lie in [0, 1]")

    @classmethod
    def from_db(cls, tx_power_dbm: float = 40.0, noise_floor_dbm: float = -77.0,
                beam_h_deg: float = 10.0, beam_v_deg: float = 10.0,
                **kwargs) -> "ChannelConfig":
        """Build a config from the dBm/degree units found in config files."""
        return cls(tx_power=dbm_to_watts(tx_power_dbm),
                   noise_floor=dbm_to_watts(noise_floor_dbm),
                   beam_h=math.radians(beam_h_deg),
                   beam_v=math.radians(beam_v_deg),
                   **kwargs)


@dataclass(frozen=True)
class AntennaState:
    """Orientation of a vehicle's main lobe in the plane."""

    owner: int
    boresight: float  # radians, normalized to [0, 2*pi)

    def __post_init__(self):
        object.__setattr__(self, "boresight", self.boresight % (2.0 * math.pi))


def free_space_gain(d: float, cfg: ChannelConfig) -> float:
    """Free-space spreading loss (4*pi*f*d/c)^2; dimensionless, grows as d^2."""
    if d <= 0:
        raise ValueError("coincident vehicles: free-space gain needs d > 0")
    return (4.0 * math.pi * cfg.f * d / cfg.c) ** 2


def absorption_gain(d: float, cfg: ChannelConfig) -> float:
    """Molecular absorption loss e^(tau*d), the inverse medium transmittance."""
    if d < 0:
        raise ValueError("negative distance")
    return math.exp(cfg.tau * d)


def transmittance(d: float, cfg: ChannelConfig) -> float:
    """Fraction of power surviving molecular absorption over distance d."""
    return math.exp(-cfg.tau * d)


def beam_solid_angle(beam_h: float, beam_v: float) -> float:
    """Solid angle (steradians) spanned by a beam with the given widths."""
    if not (0.0 < beam_h < math.pi and 0.0 < beam_v < math.pi):
        raise ValueError("beamwidths must lie in (0, pi)")
    s = math.tan(beam_h / 2.0) * math.tan(beam_v / 2.0)
    if s > 1.0:
        raise ValueError("invalid beamwidth pair: arcsin argument exceeds 1")
    return 4.0 * math.asin(s)


def main_lobe_gain(cfg: ChannelConfig) -> float:
    gamma = beam_solid_angle(cfg.beam_h, cfg.beam_v)
    return 4.0 * math.pi / ((cfg.side_lobe_ratio + 1.0) * gamma)


def side_lobe_gain(cfg: ChannelConfig) -> float:
    gamma = beam_solid_angle(cfg.beam_h, cfg.beam_v)
    return (4.0 * math.pi * cfg.side_lobe_ratio
            / ((cfg.side_lobe_ratio + 1.0) * (4.0 * math.pi - gamma)))


def _angle_between(ax: float, ay: float, bx: float, by: float) -> float:
    """Unsigned angle between two direction vectors, in [0, pi]."""
    da = math.atan2(ay, ax) - math.atan2(by, bx)
    da = (da + math.pi) % (2.0 * math.pi) - math.pi
    return abs(da)


def gain_towards(own_pos: Point2D, boresight: float, target: Point2D,
                 cfg: ChannelConfig) -> float:
    """Antenna gain of a vehicle at own_pos, boresight given in radians,
    evaluated in the direction of target. Main lobe when the offset angle is
    within half the horizontal beamwidth (boundary inclusive)."""
    dx, dy = target.x - own_pos.x, target.y - own_pos.y
    if dx == 0.0 and dy == 0.0:
        raise ValueError("gain undefined towards own position")
    off = _angle_between(dx, dy, math.cos(boresight), math.sin(boresight))
    if off <= cfg.beam_h / 2.0:
        return main_lobe_gain(cfg)
    return side_lobe_gain(cfg)


def antenna_gain(tx: AntennaState, target: Point2D, own_pos: Point2D,
                 cfg: ChannelConfig) -> float:
    """Effective gain of the antenna described by tx towards target."""
    return gain_towards(own_pos, tx.boresight, target, cfg)


def received_power(u: int, m: int, topo: "Topology", cfg: ChannelConfig) -> float:
    """Power received by comm vehicle m from its serving SPV u, in watts.

    The serving link has both boresights aligned (u at m, m at u), so both
    gains are main lobe. Returns 0 when the SPV is inactive or the path is
    blocked.
    """
    spv = topo.spv_by_id(u)
    req = topo.node_by_id(m)
    if spv.pos.dist(req.pos) < 1e-12:
        raise ValueError(f"coincident vehicles {u} and {m}")
    if spv.active == 0:
        return 0.0
    if blockage_indicator(spv.pos, req.pos, topo.obstacles) == 0:
        return 0.0
    d = spv.pos.dist(req.pos)
    g = main_lobe_gain(cfg)
    return (cfg.tx_power * g * g
            / (absorption_gain(d, cfg) * free_space_gain(d, cfg)))


def noise_power(u: int, m: int, topo: "Topology", cfg: ChannelConfig) -> float:
    """Thermal plus molecular-absorption noise at the receiver of link (u, m).

    Assignment-independent: every other active LoS SPV contributes re-radiated
    absorbed power regardless of what it transmits. Each contributor's
    transmit gain uses its travel heading as boresight (the unassigned
    default); the receiver m aims at its serving SPV u.
    """
    spv = topo.spv_by_id(u)
    rx = topo.node_by_id(m)
    total = cfg.noise_floor
    for other in topo.spvs:
        if other.id == u or other.active == 0:
            continue
        if blockage_indicator(other.pos, rx.pos, topo.obstacles) == 0:
            continue
        d = other.pos.dist(rx.pos)
        if d < 1e-12:
            raise ValueError(f"coincident vehicles {other.id} and {m}")
        g_tx = gain_towards(other.pos, other.heading, rx.pos, cfg)
        g_rx = gain_towards(rx.pos, _bearing(rx.pos, spv.pos), other.pos, cfg)
        total += (cfg.tx_power * g_tx * g_rx
                  * (1.0 - transmittance(d, cfg)) / free_space_gain(d, cfg))
    return total


def sensing_noise_power(u: int, n: int, topo: "Topology", cfg: ChannelConfig) -> float:
    """Noise construction mirrored at the SPV receiver of a sensing pair.

    The monostatic echo of pair (u, n) is received at SPV u with its antenna
    aimed at target n; all other active LoS SPVs contribute absorbed power.
    """
    spv = topo.spv_by_id(u)
    target = topo.node_by_id(n)
    total = cfg.noise_floor
    for other in topo.spvs:
        if other.id == u or other.active == 0:
            continue
        if blockage_indicator(other.pos, spv.pos, topo.obstacles) == 0:
            continue
        d = other.pos.dist(spv.pos)
        if d < 1e-12:
            raise ValueError(f"coincident vehicles {other.id} and {u}")
        g_tx = gain_towards(other.pos, other.heading, spv.pos, cfg)
        g_rx = gain_towards(spv.pos, _bearing(spv.pos, target.pos), other.pos, cfg)
        total += (cfg.tx_power * g_tx * g_rx
                  * (1.0 - transmittance(d, cfg)) / free_space_gain(d, cfg))
    return total


def sensing_spreading_loss(d: float, cfg: ChannelConfig) -> float:
    """Round-trip spreading loss of a monostatic echo: (4*pi)^3 f^2 d^4/(rcs c^2)."""
    if d <= 0:
        raise ValueError("coincident vehicles: sensing loss needs d > 0")
    return (4.0 * math.pi) ** 3 * cfg.f ** 2 * d ** 4 / (cfg.rcs * cfg.c ** 2)


def _bearing(frm: Point2D, to: Point2D) -> float:
    """Heading angle of the direction from frm to to, radians."""
    return math.atan2(to.y - frm.y, to.x - frm.x)
