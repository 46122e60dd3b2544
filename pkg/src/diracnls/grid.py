"""Uniform periodic grid on [-L, L) and the field samples living on it."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class SpatialGrid:
    """n nodes x_j = -L + 2L j/n with dual frequencies xi_k = pi k / L."""

    n: int
    half_width: float

    def __post_init__(self):
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not (self.half_width > 0 and np.isfinite(self.half_width)):
            raise ValueError(f"half_width must be positive, got {self.half_width}")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.n

    @cached_property
    def x(self) -> np.ndarray:
        x = -self.half_width + self.dx * np.arange(self.n)
        x.flags.writeable = False
        return x

    @cached_property
    def xi(self) -> np.ndarray:
        xi = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)
        xi.flags.writeable = False
        return xi

    @cached_property
    def xi2(self) -> np.ndarray:
        xi2 = self.xi**2
        xi2.flags.writeable = False
        return xi2

    def integrate(self, density: np.ndarray) -> float:
        """Rectangle rule, spectrally accurate for smooth periodic densities."""
        return float(np.sum(density) * self.dx)

    def derivative(self, values: np.ndarray) -> np.ndarray:
        return np.fft.ifft(1j * self.xi * np.fft.fft(values))

    def gradient_norm2(self, values: np.ndarray) -> float:
        """int |d/dx f|^2 computed on the spectral side (Parseval)."""
        coeffs = np.fft.fft(values)
        return float(np.sum(self.xi2 * np.abs(coeffs) ** 2) * self.dx / self.n)

    def edge_mask(self, fraction: float = 0.1) -> np.ndarray:
        return np.abs(self.x) >= (1.0 - fraction) * self.half_width

    def is_grid_frequency(self, k: float, rtol: float = 1e-12) -> bool:
        m = k * self.half_width / np.pi
        return abs(m - round(m)) <= rtol * max(1.0, abs(m)) and abs(round(m)) < self.n // 2


@dataclass(frozen=True)
class FieldState:
    """Complex samples of the evolved unknown at one time."""

    grid: SpatialGrid
    values: np.ndarray
    time: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray, time: float | None = None) -> "FieldState":
        return replace(self, values=values, time=self.time if time is None else time)

    def norm(self) -> float:
        return float(np.sqrt(self.grid.integrate(np.abs(self.values) ** 2)))

    def interpolate(self, y) -> np.ndarray:
        """Band-limited (trigonometric) interpolation at arbitrary points y."""
        y = np.asarray(y, dtype=float)
        grid = self.grid
        coeffs = np.fft.fft(self.values) / grid.n
        xi = grid.xi.copy()
        # split the Nyquist mode symmetrically so real data interpolates to real values
        nyq = grid.n // 2
        flat = y.reshape(-1)
        out = np.empty(flat.shape, dtype=complex)
        for start in range(0, flat.size, 512):
            chunk = flat[start:start + 512] + grid.half_width
            phase = np.exp(1j * np.outer(chunk, xi))
            vals = phase @ coeffs
            vals -= coeffs[nyq] * phase[:, nyq]
            vals += coeffs[nyq] * np.cos(xi[nyq] * chunk)
            out[start:start + 512] = vals
        return out.reshape(y.shape)
