"""Shift and orientation between a query frame and a matched scene frame.

Frames: ``u`` points are in the matched scene's frame, ``v`` points in the
query frame, related by ``v = R^T (u - shift)``. The shift is therefore the
query viewpoint expressed in the scene frame and the orientation is the
query heading relative to the scene axes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateDirection,
    InsufficientCorrespondences,
    UnderdeterminedRotation,
    ZeroWeight,
)
from .scene import wrap_pi


@dataclass(frozen=True, eq=False)
class CorrespondenceSet:
    u: np.ndarray
    v: np.ndarray
    saliency: np.ndarray

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.u, dtype=float))
        v = np.atleast_2d(np.asarray(self.v, dtype=float))
        s = np.asarray(self.saliency, dtype=float).reshape(-1)
        if u.shape != v.shape or u.shape[1] not in (2, 3):
            raise ValueError(f"u and v must both be N x 2 or N x 3, got {u.shape} and {v.shape}")
        if len(s) != len(u) or len(u) < 1:
            raise ValueError("one saliency per pair, at least one pair")
        if (s < 0).any() or (s > 1).any():
            raise ValueError("saliencies must lie in [0, 1]")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "saliency", s)

    @property
    def dimension(self) -> int:
        return self.u.shape[1]

    def __len__(self):
        return len(self.u)

    def shifted(self, shift) -> "CorrespondenceSet":
        """Scene points re-expressed about the estimated query viewpoint."""
        return CorrespondenceSet(self.u - np.asarray(shift, dtype=float), self.v, self.saliency)


@dataclass(frozen=True)
class PoseEstimate:
    shift: tuple[float, ...]
    orientation: float
    shift_determinate: bool
    rank: int


def shift_system(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``u_i - u_j`` and entries ``|u_i|^2 - |u_j|^2 - |v_i|^2 + |v_j|^2``
    over all unordered pairs i < j."""
    nu = np.einsum("ij,ij->i", u, u)
    nv = np.einsum("ij,ij->i", v, v)
    idx = np.array(list(combinations(range(len(u)), 2)), dtype=np.intp).reshape(-1, 2)
    i, j = idx[:, 0], idx[:, 1]
    B = u[i] - u[j]
    b = nu[i] - nu[j] - nv[i] + nv[j]
    return B, b


def estimate_shift(corr: CorrespondenceSet) -> tuple[np.ndarray, int]:
    """Least-squares shift ``0.5 * pinv(B) @ b`` and the numerical rank of B."""
    if len(corr) < 2:
        raise InsufficientCorrespondences(f"need at least 2 correspondences, got {len(corr)}")
    B, b = shift_system(corr.u, corr.v)
    U, s, Vt = np.linalg.svd(B, full_matrices=False)
    tol = (s.max() if s.size else 0.0) * np.finfo(float).eps * max(B.shape)
    keep = s > tol
    rank = int(keep.sum())
    # minimum-norm solution restricted to the numerically nonzero spectrum
    coef = (U[:, keep].T @ b) / s[keep]
    shift = 0.5 * (Vt[keep].T @ coef)
    return shift, rank


def pairwise_orientation(corr: CorrespondenceSet) -> np.ndarray:
    """Signed angle from each query direction to its scene direction.

    Expects ``corr`` already shifted so both frames share an origin.
    """
    if corr.dimension != 2:
        raise ValueError("pairwise orientation is defined for 2D correspondences")
    u, v = corr.u, corr.v
    if (np.hypot(u[:, 0], u[:, 1]) == 0).any() or (np.hypot(v[:, 0], v[:, 1]) == 0).any():
        raise DegenerateDirection("a matched point sits on the frame origin")
    cross = v[:, 0] * u[:, 1] - v[:, 1] * u[:, 0]
    dot = v[:, 0] * u[:, 0] + v[:, 1] * u[:, 1]
    theta = np.arctan2(cross, dot)
    # arctan2 returns -pi for (-0.0, negative); keep the half-open (-pi, pi]
    theta[theta == -math.pi] = math.pi
    return theta


def align_orientation(thetas: Sequence[float], saliencies: Sequence[float]) -> float:
    """Saliency-weighted circular mean, in (-pi, pi]."""
    t = np.asarray(thetas, dtype=float)
    w = np.asarray(saliencies, dtype=float)
    if t.shape != w.shape or t.size == 0:
        raise ValueError("need equally many angles and weights, at least one")
    if w.sum() <= 0:
        raise ZeroWeight("saliency weights sum to zero")
    return wrap_pi(math.atan2(float(np.dot(w, np.sin(t))), float(np.dot(w, np.cos(t)))))


def weighted_arithmetic_orientation(thetas, saliencies) -> float:
    """Plain weighted mean of angles; correct only away from the +-pi seam."""
    t = np.asarray(thetas, dtype=float)
    w = np.asarray(saliencies, dtype=float)
    return float(np.dot(w, t) / w.sum())


def estimate_rotation_3d(corr: CorrespondenceSet) -> np.ndarray:
    """Rotation R minimising ``sum_i S_i |u_i - R v_i|^2`` over SO(3).

    ``corr`` must already be shifted (scene points about the query viewpoint).
    """
    if corr.dimension != 3:
        raise ValueError("3D rotation needs 3D correspondences")
    if len(corr) < 3:
        raise UnderdeterminedRotation(f"need at least 3 correspondences, got {len(corr)}")
    H = (corr.v * corr.saliency[:, None]).T @ corr.u
    U, s, Vt = np.linalg.svd(H)
    if s[1] <= s[0] * 1e-12:
        raise UnderdeterminedRotation("correspondences do not span a plane")
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    if d == 0:
        d = 1.0
    D = np.diag([1.0, 1.0, d])
    return Vt.T @ D @ U.T


def euler_xyz(R: np.ndarray) -> tuple[float, float, float]:
    """Angles (alpha, beta, gamma) with ``R = Rx(alpha) @ Ry(beta) @ Rz(gamma)``."""
    sb = float(np.clip(R[0, 2], -1.0, 1.0))
    beta = math.asin(sb)
    if abs(sb) < 1.0 - 1e-12:
        alpha = math.atan2(-R[1, 2], R[2, 2])
        gamma = math.atan2(-R[0, 1], R[0, 0])
    else:
        # gimbal lock: fold everything into gamma
        alpha = 0.0
        gamma = math.atan2(R[1, 0], R[1, 1])
    return alpha, beta, gamma


def rotation_xyz(alpha: float, beta: float, gamma: float) -> np.ndarray:
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    cg, sg = math.cos(gamma), math.sin(gamma)
    Rx = np.array([[1, 0, 0], [0, ca, -sa], [0, sa, ca]])
    Ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    Rz = np.array([[cg, -sg, 0], [sg, cg, 0], [0, 0, 1]])
    return Rx @ Ry @ Rz


def estimate_pose_2d(corr: CorrespondenceSet) -> PoseEstimate:
    """Shift then saliency-weighted orientation for planar correspondences."""
    shift, rank = estimate_shift(corr)
    thetas = pairwise_orientation(corr.shifted(shift))
    theta = align_orientation(thetas, corr.saliency)
    return PoseEstimate(tuple(float(x) for x in shift), theta, rank == corr.dimension, rank)


def correspondences_from_match(localization, query, topo, dims: int = 2) -> CorrespondenceSet:
    """Matched node centroids: scene frame (u) against query frame (v)."""
    scene = topo.node(localization.matched_scene_id).graph
    pairs = localization.alignment.pairs
    if len(pairs) < 2:
        raise InsufficientCorrespondences(f"localization matched {len(pairs)} node(s)")
    u = np.array([scene.nodes[b].centroid[:dims] for _, b in pairs], dtype=float)
    v = np.array([query.nodes[a].centroid[:dims] for a, _ in pairs], dtype=float)
    s = np.array([scene.nodes[b].saliency for _, b in pairs], dtype=float)
    return CorrespondenceSet(u, v, s)


def estimate_pose(localization, query, topo) -> PoseEstimate:
    """SE(2) pose of the query viewpoint relative to the matched scene node."""
    return estimate_pose_2d(correspondences_from_match(localization, query, topo, dims=2))
