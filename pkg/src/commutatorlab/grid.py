"""Uniform periodic grid on [-L, L) and its exact DFT-dual momentum grid."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Nodes x_j = -L + j h (j = 0..N-1), h = 2L/N.

    Momentum nodes are xi_k = pi k / L for k = -N/2..N/2-1, stored in ascending
    order. ``fft_momentum`` holds the same set in numpy FFT order. Quadrature
    weights are the periodic trapezoid rule: every node carries h, so the
    weights sum to 2L.
    """

    L: float
    N: int

    def __post_init__(self):
        if not (self.L > 0 and np.isfinite(self.L)):
            raise ValueError(f"half width L must be positive, got {self.L}")
        if int(self.N) != self.N or self.N < 2 or self.N % 2:
            raise ValueError(f"grid size N must be a positive even integer, got {self.N}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @cached_property
    def nodes(self) -> np.ndarray:
        x = -self.L + self.h * np.arange(self.N)
        x.flags.writeable = False
        return x

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.N, self.h)
        w.flags.writeable = False
        return w

    @cached_property
    def momentum(self) -> np.ndarray:
        xi = np.pi / self.L * np.arange(-self.N // 2, self.N // 2)
        xi.flags.writeable = False
        return xi

    @cached_property
    def fft_momentum(self) -> np.ndarray:
        xi = 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.h)
        xi.flags.writeable = False
        return xi

    @property
    def dxi(self) -> float:
        return np.pi / self.L

    @property
    def nyquist(self) -> float:
        return np.pi / self.h

    def doubled(self) -> "GridSpec":
        """Twice the half width at the same spacing."""
        return GridSpec(2.0 * self.L, 2 * self.N)

    def index_of(self, x, atol=1e-9):
        """Node indices of points that must lie on the grid."""
        x = np.asarray(x, dtype=float)
        r = (x + self.L) / self.h
        idx = np.rint(r)
        if np.any(np.abs(r - idx) > atol) or np.any(idx < 0) or np.any(idx >= self.N):
            raise ValueError("points are not nodes of this grid")
        return idx.astype(int)

    def to_json(self) -> dict:
        return {"L": self.L, "N": self.N}

    @classmethod
    def from_json(cls, doc: dict) -> "GridSpec":
        return cls(float(doc["L"]), int(doc["N"]))
