"""Vector-base amplitude panning, used by the AllRAD decoder."""

from __future__ import annotations

import numpy as np
from scipy.spatial import ConvexHull

_EPS = 1e-9


def _imaginary_speakers(vectors: np.ndarray) -> np.ndarray:
    """Extra directions needed so the hull of ``vectors`` encloses the origin."""
    extra = []
    pts = vectors
    for _ in range(3):
        if np.linalg.matrix_rank(pts - pts.mean(axis=0), tol=1e-6) < 3:
            # flat (e.g. horizontal-only) layout: close it at both poles
            _, _, vt = np.linalg.svd(pts - pts.mean(axis=0))
            normal = vt[-1]
            extra += [normal, -normal]
            pts = np.vstack([vectors] + [np.array(extra)])
            continue
        hull = ConvexHull(pts)
        if np.all(hull.equations[:, -1] < -1e-6):
            break
        mean = vectors.mean(axis=0)
        away = -mean / np.linalg.norm(mean) if np.linalg.norm(mean) > 1e-9 else np.array([0.0, 0.0, -1.0])
        extra.append(away)
        pts = np.vstack([vectors, np.array(extra)])
    return np.array(extra).reshape(-1, 3)


def vbap_3d(speakers: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Gains (L, Q) panning each target direction onto a speaker triplet.

    Gains are nonnegative and unit-energy per target. Imaginary speakers added
    to close the hull are dropped afterwards.
    """
    speakers = np.asarray(speakers, dtype=float)
    speakers = speakers / np.linalg.norm(speakers, axis=1, keepdims=True)
    extra = _imaginary_speakers(speakers)
    pts = np.vstack([speakers, extra]) if len(extra) else speakers
    hull = ConvexHull(pts)
    tri = hull.simplices
    inv = np.linalg.inv(pts[tri])  # (T, 3, 3): gains = p @ inv
    L = len(speakers)
    gains = np.zeros((L, len(targets)))
    for q, p in enumerate(np.asarray(targets, dtype=float)):
        g_all = np.einsum("j,tjk->tk", p, inv)
        ok = np.all(g_all >= -_EPS, axis=1)
        t = int(np.argmax(ok)) if ok.any() else int(np.argmax(g_all.min(axis=1)))
        g = np.clip(g_all[t], 0.0, None)
        full = np.zeros(len(pts))
        full[tri[t]] = g
        g = full[:L]
        norm = np.linalg.norm(full)
        if norm > 0:
            gains[:, q] = g / norm
    return gains


def vbap_2d(speaker_azimuth: np.ndarray, target_azimuth: np.ndarray) -> np.ndarray:
    """Pairwise panning on a circle, gains (L, Q), nonnegative and unit-energy."""
    az = np.asarray(speaker_azimuth, dtype=float)
    order = np.argsort(az)
    L = len(az)
    gains = np.zeros((L, len(target_azimuth)))
    for q, t in enumerate(np.asarray(target_azimuth, dtype=float)):
        best = None
        for k in range(L):
            i, j = order[k], order[(k + 1) % L]
            span = (az[j] - az[i]) % (2 * np.pi)
            off = (t - az[i]) % (2 * np.pi)
            if L > 1 and span < np.pi and off <= span + _EPS:
                best = (i, j)
                break
        if best is None:
            nearest = int(np.argmin(np.abs(np.angle(np.exp(1j * (az - t))))))
            gains[nearest, q] = 1.0
            continue
        i, j = best
        base = np.array([[np.cos(az[i]), np.sin(az[i])], [np.cos(az[j]), np.sin(az[j])]])
        g = np.linalg.solve(base.T, np.array([np.cos(t), np.sin(t)]))
        g = np.clip(g, 0.0, None)
        g /= np.linalg.norm(g)
        gains[i, q] += g[0]
        gains[j, q] += g[1]
    return gains
