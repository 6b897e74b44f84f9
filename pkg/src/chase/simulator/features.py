"""Per-frame six-column descriptors computed from observed centroids and bridge evidence."""

from __future__ import annotations

import numpy as np

from ..config import SimConfig
from ..errors import InvalidShapeError
from ..labels import N_FEATURES

_EPS = 1e-12


def relative_motion(velocities: np.ndarray) -> np.ndarray:
    """Cosine between the two vesicles' velocity vectors; 0 when either is at rest."""

    first, second = velocities[:, 0], velocities[:, 1]
    norms = np.linalg.norm(first, axis=-1) * np.linalg.norm(second, axis=-1)
    dots = np.einsum("ij,ij->i", first, second)
    cosine = np.divide(dots, norms, out=np.zeros_like(dots), where=norms > _EPS)
    return np.clip(cosine, -1.0, 1.0)


def extract_features(
    trajectory: np.ndarray,
    bridge_state: np.ndarray,
    alpha: float,
    rng: np.random.Generator,
    config: SimConfig | None = None,
) -> np.ndarray:
    """Return the (T, 6) feature matrix.

    ``trajectory`` holds observed centroids (T, 2, 2); ``bridge_state`` the latent
    bridge visibility b(t). Bridge columns are read out with alpha-scaled noise.
    """

    config = config or SimConfig()
    if trajectory.ndim != 3 or trajectory.shape[1:] != (2, 2):
        raise InvalidShapeError(f"Expected trajectory of shape (T, 2, 2), got {trajectory.shape}.")
    frames = trajectory.shape[0]
    if bridge_state.shape != (frames,):
        raise InvalidShapeError(f"Bridge state must have shape ({frames},), got {bridge_state.shape}.")

    distance = np.linalg.norm(trajectory[:, 1] - trajectory[:, 0], axis=-1)
    distance_change = np.concatenate([[0.0], np.diff(distance)])
    velocities = np.concatenate([np.zeros((1, 2, 2)), np.diff(trajectory, axis=0)])
    motion = relative_motion(velocities)

    support_std = config.support_noise[0] + config.support_noise[1] * alpha
    support_jitter = np.rint(rng.normal(0.0, support_std, size=frames))
    support = np.maximum(0.0, np.rint(config.support_scale * bridge_state) + support_jitter)

    score_std = config.score_noise[0] + config.score_noise[1] * alpha
    score = np.clip(bridge_state + rng.normal(0.0, score_std, size=frames), 0.0, 1.0)
    width_std = config.width_noise[0] + config.width_noise[1] * alpha
    width = np.clip(config.width_scale * bridge_state + rng.normal(0.0, width_std, size=frames), 0.0, 1.0)

    features = np.column_stack([distance, distance_change, motion, support, score, width])
    assert features.shape == (frames, N_FEATURES)
    return features
