"""Synthetic multi-modal Gaussian blob datasets for benchmarks and tests."""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError
from .features import Dataset
from .rng import Xoshiro256StarStar, subseed


def place_centers(
    n_centers: int,
    dim: int,
    min_distance: float,
    seed: int,
    box_half: float,
    layout: str = "box",
    max_tries: int = 100_000,
) -> np.ndarray:
    """Rejection-sample centers with a pairwise-distance floor.

    layout "box": uniform in [-box_half, box_half]^dim — center distances vary
    widely.  layout "shell": random directions at radius box_half — distances
    concentrate near box_half*sqrt(2).  layout "orthoplex": vertices of a
    randomly rotated cross-polytope at radius box_half — non-antipodal pairs
    are all exactly box_half*sqrt(2) apart, so no region is farther than any
    other (requires n_centers <= 2*dim).
    """
    if layout not in ("box", "shell", "orthoplex"):
        raise ConfigError(f"unknown center layout {layout!r}")
    rng = Xoshiro256StarStar(subseed(seed, "centers"))
    if layout == "orthoplex":
        if n_centers > 2 * dim:
            raise ConfigError(f"orthoplex layout supports at most {2 * dim} centers in {dim}-d")
        if box_half * math.sqrt(2.0) < min_distance:
            raise ConfigError("orthoplex radius too small for the distance floor")
        gaussian = rng.normals(dim * dim).reshape(dim, dim)
        q, r = np.linalg.qr(gaussian)
        q = q * np.sign(np.diag(r))  # sign-fixed, deterministic rotation
        vertices = [sign * q[:, i] * box_half for i in range(dim) for sign in (1.0, -1.0)]
        order = rng.permutation(len(vertices))[:n_centers]
        return np.stack([vertices[i] for i in order])
    centers: list[np.ndarray] = []
    tries = 0
    while len(centers) < n_centers:
        tries += 1
        if tries > max_tries:
            raise ConfigError(
                f"could not place {n_centers} centers {min_distance} apart "
                f"in a {layout} of size {box_half}"
            )
        if layout == "shell":
            direction = rng.normals(dim)
            candidate = direction / np.linalg.norm(direction) * box_half
        else:
            candidate = (rng.uniforms(dim) * 2.0 - 1.0) * box_half
        if all(np.linalg.norm(candidate - c) >= min_distance for c in centers):
            centers.append(candidate)
    return np.stack(centers)


def make_blob_dataset(
    n_classes: int = 10,
    clusters_per_class: int = 3,
    dim: int = 16,
    samples_per_cluster: int = 42,
    center_min_distance: float = 20.0,
    sigma: float = 1.0,
    seed: int = 0,
    box_half: float | None = None,
    layout: str = "box",
) -> Dataset:
    """Classes made of several well-separated Gaussian sub-clusters.

    Every sub-cluster center keeps at least center_min_distance from every
    other (within and across classes); samples are N(center, sigma^2 I).
    """
    n_centers = n_classes * clusters_per_class
    if box_half is None:
        box_half = center_min_distance * {"shell": 1.0, "orthoplex": 0.75, "box": 1.6}[layout]
    centers = place_centers(n_centers, dim, center_min_distance, seed, box_half, layout)
    features = []
    labels = []
    for cid in range(n_classes):
        for k in range(clusters_per_class):
            center = centers[cid * clusters_per_class + k]
            rng = Xoshiro256StarStar(subseed(seed, "cluster", cid, k))
            z = rng.normals(samples_per_cluster * dim).reshape(samples_per_cluster, dim)
            features.append(center + sigma * z)
            labels.extend([cid] * samples_per_cluster)
    names = tuple(f"class_{c:02d}" for c in range(n_classes))
    return Dataset(np.concatenate(features), np.array(labels), names)
