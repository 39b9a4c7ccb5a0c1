"""Scalar static Preisach model on a discretized triangular relay grid.

Each relay is a two-state switch with thresholds alpha >= beta: the state
flips to +1 when the input reaches alpha, to -1 when it falls to beta, and
keeps its value in between. The flux density is the weighted sum of relay
states times ``saturation_scale``.

The weight surface is an analytic product of Gaussians in the half-sum
(alpha + beta)/2 (interaction field, centered at zero so the plane is
symmetric) and the half-difference (alpha - beta)/2 (coercive field,
centered at ``coercivity_mean``). Weights are normalized to sum to one, so
``saturation_scale`` equals the saturation flux density in tesla.

The model is quasi-static: outputs depend only on the extremal history of
the input, never on traversal speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Relay", "relay_update", "PreisachPlane", "preisach_step"]


@dataclass(frozen=True)
class Relay:
    """Single hysteron with up/down switching thresholds in A/m."""

    alpha: float
    beta: float
    state: int = -1

    def __post_init__(self):
        if not self.alpha >= self.beta:
            raise ValueError(f"relay requires alpha >= beta, got {self.alpha} < {self.beta}")
        if self.state not in (-1, 1):
            raise ValueError(f"relay state must be -1 or +1, got {self.state}")


def relay_update(relay: Relay, u: float) -> Relay:
    """Switch to +1 at u >= alpha, to -1 at u <= beta, keep state otherwise."""
    if u >= relay.alpha:
        state = 1
    elif u <= relay.beta:
        state = -1
    else:
        state = relay.state
    return Relay(relay.alpha, relay.beta, state)


class PreisachPlane:
    """Relay grid over the triangle alpha >= beta with nonnegative weights.

    ``apply`` advances the plane in place; use ``copy`` or ``preisach_step``
    for value semantics. A single instance must not be mutated from two
    threads concurrently.
    """

    def __init__(
        self,
        grid_resolution: int = 200,
        h_sat: float = 1000.0,
        b_sat: float = 1.8,
        coercivity_mean: float = 60.0,
        coercivity_width: float = 40.0,
        interaction_width: float = 150.0,
    ):
        if grid_resolution < 2:
            raise ValueError("grid_resolution must be >= 2")
        if min(h_sat, b_sat, coercivity_width, interaction_width) <= 0:
            raise ValueError("h_sat, b_sat and Gaussian widths must be positive")
        levels = np.linspace(-h_sat, h_sat, grid_resolution)
        ii, jj = np.tril_indices(grid_resolution)
        alphas = levels[ii]
        betas = levels[jj]
        half_diff = 0.5 * (alphas - betas)
        half_sum = 0.5 * (alphas + betas)
        w = np.exp(-0.5 * ((half_diff - coercivity_mean) / coercivity_width) ** 2)
        w *= np.exp(-0.5 * (half_sum / interaction_width) ** 2)
        w /= w.sum()
        self._init_arrays(alphas, betas, w, float(b_sat))
        self.grid_resolution: int | None = grid_resolution
        self.h_sat = float(h_sat)

    def _init_arrays(self, alphas, betas, weights, scale):
        self.alphas = alphas
        self.betas = betas
        self.weights = weights
        self.saturation_scale = scale
        self.states = np.full(len(alphas), -1.0)

    @classmethod
    def from_relays(
        cls,
        alphas,
        betas,
        weights,
        saturation_scale: float = 1.0,
        states=None,
    ) -> "PreisachPlane":
        """Build a plane from explicit relay arrays (small hand-made planes)."""
        plane = cls.__new__(cls)
        alphas = np.asarray(alphas, dtype=np.float64)
        betas = np.asarray(betas, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        if not (len(alphas) == len(betas) == len(weights)):
            raise ValueError("alphas, betas, weights must have equal length")
        if np.any(alphas < betas):
            raise ValueError("every relay needs alpha >= beta")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        plane._init_arrays(alphas, betas, weights, float(saturation_scale))
        if states is not None:
            states = np.asarray(states, dtype=np.float64)
            if states.shape != alphas.shape or not np.all(np.abs(states) == 1.0):
                raise ValueError("states must be an array of -1/+1 per relay")
            plane.states = states.copy()
        plane.grid_resolution = None
        plane.h_sat = float(alphas.max())
        return plane

    # ------------------------------------------------------------------ state

    def copy(self) -> "PreisachPlane":
        plane = PreisachPlane.__new__(PreisachPlane)
        plane.alphas = self.alphas
        plane.betas = self.betas
        plane.weights = self.weights
        plane.saturation_scale = self.saturation_scale
        plane.states = self.states.copy()
        plane.grid_resolution = self.grid_resolution
        plane.h_sat = self.h_sat
        return plane

    def saturate_negative(self) -> None:
        """Deep negative saturation: the reproducible initial history."""
        self.states = np.full(len(self.alphas), -1.0)

    def apply(self, h: float) -> float:
        """Advance every relay with input h (in place) and return B in tesla."""
        self.states = np.where(
            h >= self.alphas, 1.0, np.where(h <= self.betas, -1.0, self.states)
        )
        return self.output()

    def output(self) -> float:
        return float(self.saturation_scale * (self.weights @ self.states))

    @property
    def saturation_b(self) -> float:
        """Flux density with every relay at +1."""
        return float(self.saturation_scale * self.weights.sum())

    @property
    def quantum(self) -> float:
        """Largest single-relay contribution to B: the output resolution."""
        return float(2.0 * self.saturation_scale * self.weights.max())

    def relays(self) -> list[Relay]:
        """Materialize the relay list; meant for small planes in tests."""
        return [
            Relay(float(a), float(b), int(s))
            for a, b, s in zip(self.alphas, self.betas, self.states)
        ]


def preisach_step(plane: PreisachPlane, h: float) -> tuple[PreisachPlane, float]:
    """Value-semantics step: returns (advanced copy, B)."""
    out = plane.copy()
    b = out.apply(h)
    return out, b
