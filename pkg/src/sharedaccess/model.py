"""Configuration types, unit conventions and validation.

Unit convention used everywhere in this package: powers in milliwatts,
distances in meters, rates in packets/slot, SINR threshold linear (not dB).
The CLI and the JSON config accept ``noise_dbm`` / ``theta_db`` and convert
at the boundary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from .errors import InvalidParameter, ValidationError

__all__ = [
    "ChannelParams",
    "Geometry",
    "ProtocolParams",
    "DelayConstraint",
    "Finite",
    "Infinite",
    "INFINITE",
    "CongestionLimit",
    "ValidatedConfig",
    "validate",
    "dbm_to_mw",
    "mw_to_dbm",
    "db_to_linear",
    "load_config",
    "config_from_dict",
]


def dbm_to_mw(x_dbm: float) -> float:
    """Convert dBm to milliwatts: 10^(x/10)."""
    return 10.0 ** (x_dbm / 10.0)


def mw_to_dbm(x_mw: float) -> float:
    """Convert milliwatts to dBm. Requires x > 0."""
    if x_mw <= 0:
        raise ValueError("mw_to_dbm requires a positive power")
    return 10.0 * math.log10(x_mw)


def db_to_linear(x_db: float) -> float:
    """Convert a dB ratio (e.g. an SINR threshold) to linear scale."""
    return 10.0 ** (x_db / 10.0)


@dataclass(frozen=True)
class Finite:
    """Finite congestion threshold: secondaries go silent while Q > m."""

    m: int

    def __str__(self) -> str:
        return str(self.m)


@dataclass(frozen=True)
class Infinite:
    """No congestion control (the threshold is never reached)."""

    def __str__(self) -> str:
        return "inf"


INFINITE = Infinite()

# Tagged congestion limit; the two cases have distinct closed forms and are
# always dispatched explicitly rather than via a sentinel integer.
CongestionLimit = Finite | Infinite


@dataclass(frozen=True)
class ChannelParams:
    """Pathloss/fading channel constants.

    alpha       pathloss exponent (> 2, required for interference convergence)
    theta       SINR decoding threshold, linear
    noise_mw    noise power in mW
    p1_mw       primary transmit power in mW
    p2_max_mw   maximum secondary transmit power in mW
    """

    alpha: float
    theta: float
    noise_mw: float
    p1_mw: float
    p2_max_mw: float


@dataclass(frozen=True)
class Geometry:
    """Network geometry: disk radius, link distances, secondary density."""

    d_p: float  # primary link distance, m
    d_s: float  # secondary link distance, m
    radius: float  # network disk radius, m
    lambda_s: float  # secondary transmitter density, 1/m^2


@dataclass(frozen=True)
class ProtocolParams:
    """Access-protocol parameters.

    lam     Bernoulli arrival rate at the primary, packets/slot, in [0, 1)
    q1      secondary access probability while the primary queue is empty
    q2      secondary access probability while 1 <= Q <= m
    m       congestion threshold (Finite(k) or INFINITE)
    p2_mw   secondary transmit power in mW, in (0, p2_max_mw]
    """

    lam: float
    q1: float
    q2: float
    m: CongestionLimit
    p2_mw: float


@dataclass(frozen=True)
class DelayConstraint:
    """Maximum tolerated primary average delay, slots/packet (> 1)."""

    d_max: float


@dataclass(frozen=True)
class ValidatedConfig:
    """Immutable, cross-validated parameter bundle.

    Instances only come out of :func:`validate`; every module downstream
    assumes the invariants hold and performs no re-checking.
    """

    channel: ChannelParams
    geometry: Geometry
    protocol: ProtocolParams
    delay: DelayConstraint | None = None


def _check_channel(c: ChannelParams, out: list) -> None:
    if not c.alpha > 2.0:
        out.append(InvalidParameter("alpha", f"must be > 2, got {c.alpha}"))
    if not c.theta > 0.0:
        out.append(InvalidParameter("theta", f"must be > 0, got {c.theta}"))
    if c.noise_mw < 0.0:
        out.append(InvalidParameter("noise_mw", f"must be >= 0, got {c.noise_mw}"))
    if not c.p1_mw > 0.0:
        out.append(InvalidParameter("p1_mw", f"must be > 0, got {c.p1_mw}"))
    if not c.p2_max_mw > 0.0:
        out.append(InvalidParameter("p2_max_mw", f"must be > 0, got {c.p2_max_mw}"))


def _check_geometry(g: Geometry, out: list) -> None:
    for name in ("d_p", "d_s", "radius", "lambda_s"):
        v = getattr(g, name)
        if not v > 0.0:
            out.append(InvalidParameter(name, f"must be > 0, got {v}"))
    if g.d_p > 0 and g.radius > 0 and not g.d_p < g.radius:
        out.append(
            InvalidParameter("d_p", f"primary transmitter must lie inside the disk: d_p={g.d_p} >= radius={g.radius}")
        )


def _check_protocol(p: ProtocolParams, channel: ChannelParams, out: list) -> None:
    if not 0.0 <= p.lam < 1.0:
        out.append(InvalidParameter("lambda", f"must be in [0, 1), got {p.lam}"))
    if not 0.0 <= p.q1 <= 1.0:
        out.append(InvalidParameter("q1", f"must be in [0, 1], got {p.q1}"))
    if not 0.0 <= p.q2 <= 1.0:
        out.append(InvalidParameter("q2", f"must be in [0, 1], got {p.q2}"))
    if isinstance(p.m, Finite):
        if p.m.m < 1:
            out.append(InvalidParameter("m", f"finite threshold must be >= 1, got {p.m.m}"))
    elif not isinstance(p.m, Infinite):
        out.append(InvalidParameter("m", f"must be Finite(k) or INFINITE, got {p.m!r}"))
    if not p.p2_mw > 0.0:
        out.append(InvalidParameter("p2_mw", f"must be > 0, got {p.p2_mw}"))
    elif channel.p2_max_mw > 0 and p.p2_mw > channel.p2_max_mw:
        out.append(InvalidParameter("p2_mw", f"exceeds p2_max_mw: {p.p2_mw} > {channel.p2_max_mw}"))


def validate(
    channel: ChannelParams,
    geometry: Geometry,
    protocol: ProtocolParams,
    delay: DelayConstraint | None = None,
) -> ValidatedConfig:
    """Cross-check every invariant; raise ValidationError listing all violations.

    Idempotent: validating the parts of an already valid bundle returns an
    equal bundle.
    """
    violations: list[InvalidParameter] = []
    _check_channel(channel, violations)
    _check_geometry(geometry, violations)
    _check_protocol(protocol, channel, violations)
    if delay is not None and not delay.d_max > 1.0:
        violations.append(InvalidParameter("d_max", f"must be > 1 slot/packet, got {delay.d_max}"))
    if violations:
        raise ValidationError(violations)
    return ValidatedConfig(channel=channel, geometry=geometry, protocol=protocol, delay=delay)


# ---------------------------------------------------------------------------
# JSON config ingestion

_CHANNEL_KEYS = {"alpha", "theta", "theta_db", "noise_mw", "noise_dbm", "p1_mw", "p2_max_mw"}
_GEOMETRY_KEYS = {"d_p", "d_s", "radius", "lambda_s"}
_PROTOCOL_KEYS = {"lambda", "q1", "q2", "m", "p2_mw"}
_DELAY_KEYS = {"d_max"}
_TOP_KEYS = {"channel", "geometry", "protocol", "delay_constraint"}


def _reject_unknown(section: str, given: dict, allowed: set, out: list) -> None:
    for k in given:
        if k not in allowed:
            out.append(InvalidParameter(f"{section}.{k}", "unknown key (check for typos)"))


def _parse_m(raw) -> CongestionLimit:
    if raw in ("inf", "infinite", None):
        return INFINITE
    if isinstance(raw, (int, float)) and math.isinf(raw):
        return INFINITE
    m = int(raw)
    if m != raw:
        raise ValueError(f"non-integer congestion threshold {raw!r}")
    return Finite(m)


def config_from_dict(doc: dict) -> ValidatedConfig:
    """Build and validate a config from a parsed JSON document.

    Accepts ``noise_dbm`` in place of ``noise_mw`` and ``theta_db`` in place
    of ``theta``; unknown keys anywhere are an error.
    """
    problems: list[InvalidParameter] = []
    _reject_unknown("", doc, _TOP_KEYS, problems)
    for section in ("channel", "geometry", "protocol"):
        if section not in doc:
            problems.append(InvalidParameter(section, "missing required section"))
    if problems:
        raise ValidationError(problems)

    ch = dict(doc["channel"])
    ge = dict(doc["geometry"])
    pr = dict(doc["protocol"])
    de = dict(doc.get("delay_constraint") or {})
    _reject_unknown("channel", ch, _CHANNEL_KEYS, problems)
    _reject_unknown("geometry", ge, _GEOMETRY_KEYS, problems)
    _reject_unknown("protocol", pr, _PROTOCOL_KEYS, problems)
    _reject_unknown("delay_constraint", de, _DELAY_KEYS, problems)
    if "noise_mw" in ch and "noise_dbm" in ch:
        problems.append(InvalidParameter("channel.noise_mw", "give either noise_mw or noise_dbm, not both"))
    if "theta" in ch and "theta_db" in ch:
        problems.append(InvalidParameter("channel.theta", "give either theta or theta_db, not both"))
    if problems:
        raise ValidationError(problems)

    if "noise_dbm" in ch:
        ch["noise_mw"] = dbm_to_mw(float(ch.pop("noise_dbm")))
    if "theta_db" in ch:
        ch["theta"] = db_to_linear(float(ch.pop("theta_db")))
    try:
        m = _parse_m(pr.get("m", "inf"))
    except (TypeError, ValueError):
        raise ValidationError([InvalidParameter("protocol.m", f"bad congestion threshold {pr.get('m')!r}")])

    try:
        channel = ChannelParams(
            alpha=float(ch["alpha"]),
            theta=float(ch["theta"]),
            noise_mw=float(ch["noise_mw"]),
            p1_mw=float(ch["p1_mw"]),
            p2_max_mw=float(ch["p2_max_mw"]),
        )
        geometry = Geometry(
            d_p=float(ge["d_p"]), d_s=float(ge["d_s"]), radius=float(ge["radius"]), lambda_s=float(ge["lambda_s"])
        )
        protocol = ProtocolParams(
            lam=float(pr["lambda"]), q1=float(pr["q1"]), q2=float(pr["q2"]), m=m, p2_mw=float(pr["p2_mw"])
        )
    except KeyError as e:
        raise ValidationError([InvalidParameter(str(e.args[0]), "missing required field")])
    delay = DelayConstraint(d_max=float(de["d_max"])) if de else None
    return validate(channel, geometry, protocol, delay)


def load_config(path: str) -> ValidatedConfig:
    """Read a JSON config file and validate it."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValidationError([InvalidParameter("", "config root must be a JSON object")])
    return config_from_dict(doc)


def with_protocol(cfg: ValidatedConfig, **changes) -> ValidatedConfig:
    """Revalidated copy of *cfg* with protocol fields replaced."""
    return validate(cfg.channel, cfg.geometry, replace(cfg.protocol, **changes), cfg.delay)
