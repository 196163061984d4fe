"""Exact one-parameter sub-flows for the three generators.

Transport is a per-velocity Fourier phase shift, relaxation toward the
velocity average is an explicit exponential mixture, and the
velocity-space Ornstein-Uhlenbeck operator decays Hermite coefficients.
None of the flows carries time-stepping error, so operator splitting is
the only discretization of the composed dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phase_space import (
    Grid,
    State,
    floor_immaterial,
    hermite_coefficients,
    hermite_values,
    project_pi,
)


@dataclass(frozen=True)
class BGK:
    """Relaxation toward the local velocity average at a fixed rate."""

    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"relaxation rate must be positive, got {self.rate}")

    def flow(self, state: State, t: float) -> State:
        return bgk_flow(state, self.rate, t)


@dataclass(frozen=True)
class FokkerPlanck:
    """Ornstein-Uhlenbeck diffusion in velocity."""

    def flow(self, state: State, t: float) -> State:
        return fokker_planck_flow(state, t)


@dataclass(frozen=True)
class Transport:
    """Free streaming along straight characteristics."""

    def flow(self, state: State, t: float) -> State:
        return transport_flow(state, t)


CollisionKind = BGK | FokkerPlanck


def _transport_phases(grid: Grid, t: float) -> np.ndarray:
    """exp(-i k.v t) table over the spatial modes and velocity nodes."""
    k = grid.k_axis
    if grid.dim == 1:
        # (nx, nv)
        return np.exp(-1j * np.outer(k, grid.v_nodes[:, 0]) * t)
    kv = (k[:, None, None] * grid.v_nodes[None, None, :, 0]
          + k[None, :, None] * grid.v_nodes[None, None, :, 1])
    return np.exp(-1j * kv * t)  # (nx, nx, nv_total)


def transport_flow(state: State, t: float) -> State:
    """h(x, v) <- h(x - v t, v), exact for any real t."""
    if t == 0.0:
        return state
    grid = state.grid
    nx = grid.spec.nx
    if grid.dim == 1:
        fh = np.fft.fft(state.h, axis=0)
        fh *= _transport_phases(grid, t)
        h = np.fft.ifft(fh, axis=0).real
    else:
        tens = state.h.reshape(nx, nx, grid.nv_total)
        fh = np.fft.fftn(tens, axes=(0, 1))
        fh *= _transport_phases(grid, t)
        h = np.fft.ifftn(fh, axes=(0, 1)).real.reshape(grid.nx_total, grid.nv_total)
    return state.replace(h, time=state.time + t)


def bgk_flow(state: State, rate: float, t: float) -> State:
    """Exponential mixing toward the velocity average; positivity-preserving."""
    if not rate > 0:
        raise ValueError(f"relaxation rate must be positive, got {rate}")
    if t < 0:
        raise ValueError(f"relaxation flow needs t >= 0, got {t}")
    if t == 0.0:
        return state
    decay = np.exp(-rate * t)
    pih = project_pi(state)
    h = decay * state.h + (1.0 - decay) * pih[:, None]
    return state.replace(h, time=state.time + t)


def fokker_planck_flow(state: State, t: float) -> State:
    """Hermite-coefficient decay exp(-|n| t) per spatial node.

    Streaming chirps spatial harmonics toward ever-higher velocity
    frequencies; while a filament transits the top of the Hermite band its
    (physically correct, tiny) band-edge coefficients reconstruct to large
    negative values at the far-tail abscissae, which carry ~1e-22 of the
    measure. The flow floors such excursions through floor_immaterial and
    errors when positivity is lost by a measurable amount.
    """
    if t < 0:
        raise ValueError(f"diffusion flow needs t >= 0, got {t}")
    if t == 0.0:
        return state
    grid = state.grid
    nv = grid.spec.nv
    n = np.arange(nv)
    if grid.dim == 1:
        factor = np.exp(-n * t)
    else:
        factor = np.exp(-(n[:, None] + n[None, :]).ravel() * t)
    # flow the fluctuation around the velocity average and reconstruct only
    # the change: the v-constant part is exactly invariant, so states at or
    # near local equilibrium never accumulate transform round-trip noise
    fluct = state.h - project_pi(state)[:, None]
    c = hermite_coefficients(fluct, grid)
    delta = hermite_values(c * (factor - 1.0)[None, :], grid)
    h = floor_immaterial(state.h + delta, grid)
    return state.replace(h, time=state.time + t)
