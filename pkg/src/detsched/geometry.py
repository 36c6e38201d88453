"""Bi-pole network geometry and path-loss models."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidArgument

SINGULAR = "singular"
BOUNDED = "bounded"


@dataclass(frozen=True)
class PathLossModel:
    """Deterministic path-loss gain as a function of distance.

    ``singular``: ``(kappa * d) ** -beta`` (infinite at ``d = 0``).
    ``bounded``: ``(1 + d) ** -beta`` (equal to 1 at ``d = 0``).
    """

    kind: str = BOUNDED
    beta: float = 4.0
    kappa: float = 1.0

    def __post_init__(self):
        if self.kind not in (SINGULAR, BOUNDED):
            raise InvalidArgument(f"unknown path-loss kind {self.kind!r}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise InvalidArgument("beta must be a positive finite number")
        if self.kind == SINGULAR and not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise InvalidArgument("kappa must be a positive finite number")

    @classmethod
    def singular(cls, kappa: float = 1.0, beta: float = 4.0) -> "PathLossModel":
        return cls(SINGULAR, beta=beta, kappa=kappa)

    @classmethod
    def bounded(cls, beta: float = 4.0) -> "PathLossModel":
        return cls(BOUNDED, beta=beta)

    def gain(self, d):
        d = np.asarray(d, dtype=float)
        if self.kind == SINGULAR:
            with np.errstate(divide="ignore"):
                return (self.kappa * d) ** (-self.beta)
        return (1.0 + d) ** (-self.beta)

    def inverse_gain(self, d):
        """``1 / gain(d)``, finite everywhere (0 at ``d = 0`` for the singular law)."""
        d = np.asarray(d, dtype=float)
        if self.kind == SINGULAR:
            return (self.kappa * d) ** self.beta
        return (1.0 + d) ** self.beta

    def to_dict(self) -> dict:
        if self.kind == SINGULAR:
            return {"kind": SINGULAR, "kappa": self.kappa, "beta": self.beta}
        return {"kind": BOUNDED, "beta": self.beta}

    @classmethod
    def from_dict(cls, d: dict) -> "PathLossModel":
        kind = d.get("kind")
        if kind == SINGULAR:
            return cls.singular(kappa=float(d["kappa"]), beta=float(d["beta"]))
        if kind == BOUNDED:
            return cls.bounded(beta=float(d["beta"]))
        raise InvalidArgument(f"unknown path-loss kind {kind!r}")


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Network:
    """Fixed bi-pole configuration: transmitter ``i`` talks to receiver ``i``.

    ``window``, ``r_max`` and ``seed`` are generation metadata; they are
    ``None`` for hand-built networks.
    """

    transmitters: np.ndarray
    receivers: np.ndarray
    pathloss: PathLossModel = field(default_factory=PathLossModel)
    noise: float = 0.0
    window: Optional[float] = None
    r_max: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self):
        tx = _frozen(self.transmitters)
        rx = _frozen(self.receivers)
        if tx.ndim != 2 or tx.shape[1] != 2 or rx.shape != tx.shape:
            raise InvalidArgument(
                "transmitters and receivers must be equal-length lists of 2-D points"
            )
        if tx.shape[0] < 1:
            raise InvalidArgument("a network needs at least one pair")
        if not (np.all(np.isfinite(tx)) and np.all(np.isfinite(rx))):
            raise InvalidArgument("coordinates must be finite")
        if np.any(np.hypot(*(tx - rx).T) <= 0):
            raise InvalidArgument("zero-length links are not allowed")
        if not (self.noise >= 0 and math.isfinite(self.noise)):
            raise InvalidArgument("noise power must be nonnegative")
        object.__setattr__(self, "transmitters", tx)
        object.__setattr__(self, "receivers", rx)
        object.__setattr__(self, "noise", float(self.noise))

    @property
    def n(self) -> int:
        return self.transmitters.shape[0]

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (
            np.array_equal(self.transmitters, other.transmitters)
            and np.array_equal(self.receivers, other.receivers)
            and self.pathloss == other.pathloss
            and self.noise == other.noise
            and self.window == other.window
            and self.r_max == other.r_max
            and self.seed == other.seed
        )

    __hash__ = None

    def link_lengths(self) -> np.ndarray:
        return np.hypot(*(self.transmitters - self.receivers).T)

    def cross_distances(self) -> np.ndarray:
        """``D[i, j] = |x_j - y_i|``; the diagonal holds the link lengths."""
        diff = self.transmitters[None, :, :] - self.receivers[:, None, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    def permuted(self, perm) -> "Network":
        perm = np.asarray(perm)
        return Network(
            self.transmitters[perm],
            self.receivers[perm],
            self.pathloss,
            self.noise,
            self.window,
            self.r_max,
            self.seed,
        )

    def subnetwork(self, indices) -> "Network":
        return self.permuted(np.asarray(indices))

    def check_window(self) -> bool:
        """True when transmitters lie in ``[0, window]^2`` and receivers in the
        same square grown by ``r_max`` (vacuous without a recorded window)."""
        if self.window is None:
            return True
        tx_ok = np.all((self.transmitters >= 0) & (self.transmitters <= self.window))
        pad = self.r_max or 0.0
        rx_ok = np.all((self.receivers >= -pad) & (self.receivers <= self.window + pad))
        return bool(tx_ok and rx_ok)


def _check_index(net: Network, i: int, name: str = "index") -> int:
    if isinstance(i, bool) or not isinstance(i, (int, np.integer)):
        raise InvalidArgument(f"{name} must be an integer")
    if not 0 <= i < net.n:
        raise InvalidArgument(f"{name} {i} out of range for a network of {net.n} pairs")
    return int(i)


def link_distance(net: Network, i: int) -> float:
    i = _check_index(net, i)
    return float(np.hypot(*(net.transmitters[i] - net.receivers[i])))


def cross_distance(net: Network, j: int, i: int) -> float:
    """Distance from transmitter ``j`` to receiver ``i`` (``j != i``)."""
    j = _check_index(net, j, "j")
    i = _check_index(net, i, "i")
    if j == i:
        raise InvalidArgument("cross_distance needs j != i; use link_distance for the own link")
    return float(np.hypot(*(net.transmitters[j] - net.receivers[i])))


def generate_network(
    n: int,
    window_side: float = 1.0,
    r_max: float = 0.1,
    pathloss: Optional[PathLossModel] = None,
    noise: float = 0.0,
    seed: int = 0,
) -> Network:
    """Binomial bi-pole network.

    Transmitters are i.i.d. uniform in ``[0, window_side]^2``; receiver ``i``
    is uniform in the disc of radius ``r_max`` around transmitter ``i``.
    Randomness comes from ``numpy.random.default_rng(seed)`` (PCG64), drawn
    in the fixed order: transmitter coordinates, radii, angles.

    Receivers near the window edge may fall slightly outside the window.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgument("n must be >= 1")
    if not (window_side > 0 and math.isfinite(window_side)):
        raise InvalidArgument("window_side must be positive")
    if not (r_max > 0 and math.isfinite(r_max)):
        raise InvalidArgument("r_max must be positive")
    pathloss = pathloss or PathLossModel()
    rng = np.random.default_rng(seed)
    tx = window_side * rng.random((n, 2))
    radius = r_max * np.sqrt(rng.random(n))
    angle = 2.0 * np.pi * rng.random(n)
    rx = tx + np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    return Network(tx, rx, pathloss, noise, float(window_side), float(r_max), int(seed))


def network_to_dict(net: Network) -> dict:
    return {
        "transmitters": net.transmitters.tolist(),
        "receivers": net.receivers.tolist(),
        "pathloss": net.pathloss.to_dict(),
        "noise": net.noise,
        "window": net.window,
        "r_max": net.r_max,
        "seed": net.seed,
    }


def network_from_dict(d: dict) -> Network:
    net = Network(
        np.asarray(d["transmitters"], dtype=float),
        np.asarray(d["receivers"], dtype=float),
        PathLossModel.from_dict(d["pathloss"]),
        float(d.get("noise", 0.0)),
        None if d.get("window") is None else float(d["window"]),
        None if d.get("r_max") is None else float(d["r_max"]),
        None if d.get("seed") is None else int(d["seed"]),
    )
    if not net.check_window():
        warnings.warn("loaded network has points outside its recorded window", stacklevel=2)
    return net
