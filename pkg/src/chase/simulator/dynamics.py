"""Overdamped 2D dynamics of one vesicle pair.

Connected pairs are pulled toward their rest length by a spring whose
stiffness follows u(t). Not-connected pairs reuse the same u(t) to drive a
shared drift and a temporary approach (the distractor). Both vesicles take
independent Brownian steps and bounce off the arena walls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import SimConfig
from ..labels import CONNECTED
from .profiles import ActivityProfile


@dataclass(frozen=True)
class PairTrajectory:
    """True and observed centroids, shape (T, 2 vesicles, 2 axes), plus latent bridge b(t)."""

    positions: np.ndarray
    observed: np.ndarray
    bridge: np.ndarray
    radii: np.ndarray
    rest_length: float


def rest_length(radii: np.ndarray, config: SimConfig) -> float:
    return float(radii[0] + radii[1] + config.rest_offset)


def distractor_target(rest: float, alpha: float, config: SimConfig) -> float:
    """Approach distance for not-connected pairs: far_factor * rest at alpha 0, rest at alpha 1."""

    far = config.proximity_far_factor
    return rest * (far - (far - 1.0) * alpha)


def _reflect(points: np.ndarray, low: np.ndarray, high: np.ndarray) -> np.ndarray:
    points = np.where(points < low, 2.0 * low - points, points)
    points = np.where(points > high, 2.0 * high - points, points)
    return np.clip(points, low, high)


def _initial_positions(radii: np.ndarray, rest: float, config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    centre = config.box_size * (0.5 + rng.uniform(-0.2, 0.2, size=2))
    gap_low, gap_high = config.initial_gap_range
    distance = rest + rng.uniform(gap_low, gap_high)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    offset = 0.5 * distance * np.array([np.cos(angle), np.sin(angle)])
    return np.stack([centre - offset, centre + offset])


def latent_bridge(
    label: int,
    u: np.ndarray,
    distance: np.ndarray,
    rest: float,
    alpha: float,
    config: SimConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Bridge visibility b(t) in [0, 1].

    Connected: u(t) degraded by alpha plus latent noise. Not connected: a false
    bridge of strength gain * alpha that grows as the pair comes inside
    ``false_bridge_range`` rest lengths.
    """

    if label == CONNECTED:
        visible = u * (1.0 - config.bridge_degradation * alpha)
        noise = rng.normal(0.0, config.bridge_latent_noise, size=u.shape)
        return np.clip(visible + noise, 0.0, 1.0)
    reach = config.false_bridge_range
    proximity = np.clip((reach * rest - distance) / max((reach - 1.0) * rest, 1e-12), 0.0, 1.0)
    return np.clip(config.false_bridge_gain * alpha * proximity, 0.0, 1.0)


def integrate_pair(
    label: int,
    profile: ActivityProfile,
    alpha: float,
    config: SimConfig,
    rng: np.random.Generator,
) -> PairTrajectory:
    frames = len(profile.u)
    low_r, high_r = config.radius_range
    radii = rng.uniform(low_r, high_r, size=2)
    rest = rest_length(radii, config)
    low = radii[:, None] * np.ones((2, 2))
    high = config.box_size - low

    positions = np.empty((frames, 2, 2))
    positions[0] = _reflect(_initial_positions(radii, rest, config, rng), low, high)
    heading = rng.uniform(0.0, 2.0 * np.pi)
    target = distractor_target(rest, alpha, config)
    stiffness = config.spring_stiffness

    for t in range(1, frames):
        u_t = profile.u[t]
        current = positions[t - 1]
        step = rng.normal(0.0, config.brownian_sigma, size=(2, 2))
        heading += rng.normal(0.0, config.drift_turn_sigma)
        drift = config.drift_amplitude * u_t * np.array([np.cos(heading), np.sin(heading)])

        separation = current[1] - current[0]
        distance = float(np.linalg.norm(separation))
        direction = separation / distance if distance > 1e-12 else np.zeros(2)
        if label == CONNECTED:
            step += config.connected_drift_scale * drift
            pull = stiffness * u_t * (distance - rest)
        else:
            step += drift
            pull = config.proximity_stiffness_scale * stiffness * u_t * max(distance - target, 0.0)
        step[0] += pull * direction
        step[1] -= pull * direction
        positions[t] = _reflect(current + step, low, high)

    noise_scale = config.obs_noise * (1.0 + 2.0 * alpha)
    observed = positions + rng.normal(0.0, noise_scale, size=positions.shape) if noise_scale > 0 else positions.copy()
    true_distance = np.linalg.norm(positions[:, 1] - positions[:, 0], axis=-1)
    bridge = latent_bridge(label, profile.u, true_distance, rest, alpha, config, rng)
    return PairTrajectory(positions=positions, observed=observed, bridge=bridge, radii=radii, rest_length=rest)
