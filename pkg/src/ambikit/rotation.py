"""Rotation matrices for real spherical harmonics.

Blocks are built order by order with the Ivanic-Ruedenberg recurrence, so any
order is supported. The resulting matrix M satisfies Y(R d) = M Y(d) for the
SN3D (or N3D) vector Y, i.e. it moves a source at d to R d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .sh import channel_count


@dataclass(frozen=True)
class RotationSpec:
    """Intrinsic yaw (z), then pitch (y), then roll (x), radians."""

    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0

    @classmethod
    def from_degrees(cls, yaw=0.0, pitch=0.0, roll=0.0) -> "RotationSpec":
        return cls(math.radians(yaw), math.radians(pitch), math.radians(roll))

    @classmethod
    def from_matrix(cls, matrix) -> "RotationSpec":
        yaw, pitch, roll = Rotation.from_matrix(matrix).as_euler("ZYX")
        return cls(yaw, pitch, roll)

    def matrix(self) -> np.ndarray:
        return Rotation.from_euler("ZYX", [self.yaw, self.pitch, self.roll]).as_matrix()

    def inverse(self) -> "RotationSpec":
        return RotationSpec.from_matrix(self.matrix().T)

    def is_identity(self) -> bool:
        return self.yaw == 0.0 and self.pitch == 0.0 and self.roll == 0.0


def sh_rotation_blocks(R: np.ndarray, order: int) -> list[np.ndarray]:
    """Per-order rotation blocks, block n has shape (2n+1, 2n+1) in m = -n..n order."""
    R = np.asarray(R, dtype=float)
    # first-order real SH are proportional to (y, z, x)
    perm = [1, 2, 0]
    r1 = R[np.ix_(perm, perm)]
    blocks = [np.ones((1, 1))]
    if order >= 1:
        blocks.append(r1)
    for n in range(2, order + 1):
        blocks.append(_next_block(r1, blocks[-1], n))
    return blocks


def _next_block(r1: np.ndarray, prev: np.ndarray, l: int) -> np.ndarray:
    def R1(i, j):
        return r1[i + 1, j + 1]

    def Rp(a, b):
        return prev[a + l - 1, b + l - 1]

    def P(i, a, b):
        if b == l:
            return R1(i, 1) * Rp(a, l - 1) - R1(i, -1) * Rp(a, -l + 1)
        if b == -l:
            return R1(i, 1) * Rp(a, -l + 1) + R1(i, -1) * Rp(a, l - 1)
        return R1(i, 0) * Rp(a, b)

    out = np.zeros((2 * l + 1, 2 * l + 1))
    for m in range(-l, l + 1):
        am = abs(m)
        d0 = 1.0 if m == 0 else 0.0
        for mp in range(-l, l + 1):
            denom = (l + mp) * (l - mp) if abs(mp) < l else (2 * l) * (2 * l - 1)
            u = math.sqrt((l + m) * (l - m) / denom)
            v = 0.5 * math.sqrt((1 + d0) * (l + am - 1) * (l + am) / denom) * (1 - 2 * d0)
            w = -0.5 * math.sqrt((l - am - 1) * (l - am) / denom) * (1 - d0)
            val = 0.0
            if u:
                val += u * P(0, m, mp)
            if v:
                if m == 0:
                    V = P(1, 1, mp) + P(-1, -1, mp)
                elif m > 0:
                    d1 = 1.0 if m == 1 else 0.0
                    V = P(1, m - 1, mp) * math.sqrt(1 + d1) - P(-1, -m + 1, mp) * (1 - d1)
                else:
                    d1 = 1.0 if m == -1 else 0.0
                    V = P(1, m + 1, mp) * (1 - d1) + P(-1, -m - 1, mp) * math.sqrt(1 + d1)
                val += v * V
            if w:
                if m > 0:
                    W = P(1, m + 1, mp) + P(-1, -m - 1, mp)
                else:
                    W = P(1, m - 1, mp) - P(-1, -m + 1, mp)
                val += w * W
            out[m + l, mp + l] = val
    return out


def sh_rotation_matrix(R: np.ndarray, order: int) -> np.ndarray:
    """Block-diagonal ((order+1)^2 square) SH rotation matrix for the 3x3 rotation R."""
    M = np.zeros((channel_count(order),) * 2)
    for n, block in enumerate(sh_rotation_blocks(R, order)):
        M[n * n:(n + 1) ** 2, n * n:(n + 1) ** 2] = block
    return M
