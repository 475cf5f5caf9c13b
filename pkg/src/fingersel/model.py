"""Discrete synchronous TH-IR multiuser model.

A scenario consists of one time-hopping chip offset and one polarity per
user (single frame per symbol), an ``L``-tap channel per user and the
resulting MAI signature seen at each path of the desired user (user 0).

All indices are zero-based: path ``l`` of user ``k`` arrives at chip
``c[k] + l``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "SystemConfig",
    "CodeSet",
    "ChannelSet",
    "MaiSignature",
    "tap_log_means",
    "generate_codes",
    "collision_indicator",
    "generate_channels",
    "build_mai_signature",
]


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SystemConfig:
    """Scenario parameters.

    Parameters
    ----------
    K : int
        Number of users; user 0 is the desired user.
    L : int
        Resolvable multipath components per user.
    M : int
        Number of Rake fingers to select.
    Nc : int
        Chips per frame.
    energies : sequence of float
        Linear bit energies of the ``K`` users.
    noise_var : float
        Thermal noise variance per sample.
    NT : int, optional
        TH codes are drawn from ``{0, ..., NT-1}``. Defaults to the largest
        value that avoids inter-frame interference, ``Nc - L``.
    decay : float
        Exponential power-delay-profile decay factor.
    shadow_var : float
        Variance of ``ln|alpha_l|``.
    """

    K: int
    L: int
    M: int
    Nc: int
    energies: Sequence[float]
    noise_var: float
    NT: Optional[int] = None
    decay: float = 0.1
    shadow_var: float = 0.5

    def __post_init__(self):
        for name in ("K", "L", "M", "Nc"):
            if int(getattr(self, name)) != getattr(self, name):
                raise ValueError(f"{name} must be an integer")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if not 1 <= self.M <= self.L:
            raise ValueError(f"M must satisfy 1 <= M <= L, got M={self.M}, L={self.L}")
        nt = self.Nc - self.L if self.NT is None else self.NT
        if not 1 <= nt <= self.Nc - self.L:
            raise ValueError(
                f"NT must satisfy 1 <= NT <= Nc - L = {self.Nc - self.L}, got {nt}"
            )
        object.__setattr__(self, "NT", int(nt))
        energies = tuple(float(e) for e in self.energies)
        if len(energies) != self.K:
            raise ValueError(f"expected {self.K} energies, got {len(energies)}")
        if not all(math.isfinite(e) and e >= 0 for e in energies):
            raise ValueError("energies must be finite and nonnegative")
        object.__setattr__(self, "energies", energies)
        if not (math.isfinite(self.noise_var) and self.noise_var > 0):
            raise ValueError("noise_var must be positive and finite")
        if not (math.isfinite(self.decay) and self.decay >= 0):
            raise ValueError("decay must be nonnegative")
        if not (math.isfinite(self.shadow_var) and self.shadow_var >= 0):
            raise ValueError("shadow_var must be nonnegative")

    @property
    def e1(self) -> float:
        """Bit energy of the desired user."""
        return self.energies[0]


@dataclass(frozen=True)
class CodeSet:
    """Per-user TH chip offset and polarity."""

    th: np.ndarray
    polarity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "th", _frozen_array(self.th, dtype=np.int64))
        object.__setattr__(self, "polarity", _frozen_array(self.polarity, dtype=np.int64))
        if self.th.shape != self.polarity.shape or self.th.ndim != 1:
            raise ValueError("th and polarity must be 1-D arrays of equal length")
        if np.any(self.th < 0):
            raise ValueError("TH codes must be nonnegative")
        if not np.all(np.abs(self.polarity) == 1):
            raise ValueError("polarity codes must be +1 or -1")


@dataclass(frozen=True)
class ChannelSet:
    """``K x L`` matrix of real tap amplitudes."""

    taps: np.ndarray

    def __post_init__(self):
        taps = _frozen_array(self.taps)
        if taps.ndim != 2:
            raise ValueError("taps must be a K x L matrix")
        if not np.all(np.isfinite(taps)):
            raise ValueError("taps must be finite")
        object.__setattr__(self, "taps", taps)


@dataclass(frozen=True)
class MaiSignature:
    """MAI seen at each path of the desired user.

    Attributes
    ----------
    alpha1 : ndarray, shape (L,)
        Desired-user taps.
    smai : ndarray, shape (L, K-1)
        ``smai[l, k-1]`` is the interferer-``k`` tap colliding with path
        ``l``, multiplied by the product of the two polarities.
    amat : ndarray, shape (K-1,)
        Interferer amplitudes ``sqrt(E_k)``.
    """

    alpha1: np.ndarray
    smai: np.ndarray
    amat: np.ndarray

    def __post_init__(self):
        for name in ("alpha1", "smai", "amat"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))
        L = self.alpha1.shape[0]
        if self.smai.ndim != 2 or self.smai.shape[0] != L:
            raise ValueError("smai must have one row per path")
        if self.amat.shape != (self.smai.shape[1],):
            raise ValueError("amat must have one entry per interferer")

    @property
    def L(self) -> int:
        return self.alpha1.shape[0]

    @property
    def weighted(self) -> np.ndarray:
        """``S_MAI @ diag(amat)``: interference amplitudes per path."""
        return self.smai * self.amat


def tap_log_means(L: int, decay: float, shadow_var: float) -> np.ndarray:
    """Log-domain means ``mu_l`` giving ``E|alpha_l|^2 = Omega_0 exp(-decay*l)``.

    ``Omega_0`` normalizes the profile to unit total energy; at ``decay=0`` its
    limit ``1/L`` is used.
    """
    if decay == 0:
        omega0 = 1.0 / L
    else:
        omega0 = -math.expm1(-decay) / -math.expm1(-decay * L)
    l = np.arange(L)
    return 0.5 * (math.log(omega0) - decay * l - 2.0 * shadow_var)


def generate_codes(cfg: SystemConfig, rng: np.random.Generator) -> CodeSet:
    th = rng.integers(0, cfg.NT, size=cfg.K)
    polarity = rng.choice(np.array([-1, 1]), size=cfg.K)
    return CodeSet(th=th, polarity=polarity)


def collision_indicator(c1: int, ck: int, l: int, m: int) -> int:
    """1 if path ``m`` of an interferer with offset ``ck`` hits path ``l`` of the
    desired user with offset ``c1``, else 0."""
    return int(c1 + l == ck + m)


def generate_channels(cfg: SystemConfig, rng: np.random.Generator) -> ChannelSet:
    """Draw lognormal taps with random signs and an exponential power profile."""
    mu = tap_log_means(cfg.L, cfg.decay, cfg.shadow_var)
    magnitude = np.exp(mu + math.sqrt(cfg.shadow_var) * rng.standard_normal((cfg.K, cfg.L)))
    sign = rng.choice(np.array([-1.0, 1.0]), size=(cfg.K, cfg.L))
    return ChannelSet(taps=sign * magnitude)


def build_mai_signature(
    cfg: SystemConfig, codes: CodeSet, channels: ChannelSet
) -> MaiSignature:
    K, L = cfg.K, cfg.L
    if codes.th.shape != (K,) or channels.taps.shape != (K, L):
        raise ValueError("codes/channels do not match the configuration")
    taps = channels.taps
    smai = np.zeros((L, K - 1))
    l = np.arange(L)
    for k in range(1, K):
        # synchronous, one frame, no IFI: at most one m collides with each l
        m = codes.th[0] + l - codes.th[k]
        hit = (m >= 0) & (m < L)
        smai[hit, k - 1] = codes.polarity[0] * codes.polarity[k] * taps[k, m[hit]]
    amat = np.sqrt(np.asarray(cfg.energies[1:], dtype=float))
    return MaiSignature(alpha1=taps[0].copy(), smai=smai, amat=amat)
