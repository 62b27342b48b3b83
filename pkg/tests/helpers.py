"""Closed-form oracles used to cross-check the iterative numerics.

Everything here is deliberately independent of the package's own power
iteration: eigenvalue magnitudes come from the quadratic formula (2x2) and
a trigonometric/Cardano cubic solve (3x3), singular values from the same
formulas applied to M^T M. Desk scale only.
"""
from __future__ import annotations

import math

import numpy as np


def rel_close(a: float, b: float, rtol: float) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b), 1e-30)


def eig_magnitudes_2x2(m) -> list[float]:
    """|eigenvalues| of a real 2x2 matrix via the quadratic formula."""
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    disc = tr * tr - 4.0 * det
    if disc >= 0.0:
        root = math.sqrt(disc)
        return sorted([abs((tr - root) / 2.0), abs((tr + root) / 2.0)])
    mag = math.sqrt(det)  # conjugate pair; |lambda|^2 = det
    return [mag, mag]


def _cubic_roots_real_coeffs(b: float, c: float, d: float) -> list[complex]:
    """Roots of x^3 + b x^2 + c x + d, real coefficients, no eigensolver.

    Depressed via x = t - b/3; trigonometric form for three real roots,
    Cardano for one real plus a conjugate pair.
    """
    shift = -b / 3.0
    p = c - b * b / 3.0
    q = 2.0 * b ** 3 / 27.0 - b * c / 3.0 + d
    if abs(p) < 1e-30 and abs(q) < 1e-30:
        return [complex(shift)] * 3
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc > 0.0:
        root = math.sqrt(disc)
        u = math.copysign(abs(-q / 2.0 + root) ** (1.0 / 3.0), -q / 2.0 + root)
        v = math.copysign(abs(-q / 2.0 - root) ** (1.0 / 3.0), -q / 2.0 - root)
        t1 = u + v
        # remaining quadratic t^2 + t1 t + (t1^2 + p)
        re = -t1 / 2.0
        im = math.sqrt(max(t1 * t1 + p - re * re, 0.0))
        return [complex(t1 + shift),
                complex(re + shift, im),
                complex(re + shift, -im)]
    # three real roots
    r = math.sqrt(-p / 3.0)
    arg = 3.0 * q / (2.0 * p * r) if r > 0.0 else 0.0
    arg = min(1.0, max(-1.0, arg))
    theta = math.acos(arg)
    return [
        complex(2.0 * r * math.cos(theta / 3.0 - 2.0 * math.pi * k / 3.0) + shift)
        for k in range(3)
    ]


def eig_magnitudes_3x3(m) -> list[float]:
    """|eigenvalues| of a real 3x3 matrix via the characteristic cubic."""
    m = np.asarray(m, dtype=float)
    tr = float(np.trace(m))
    minors = (
        m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1]
        + m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]
        + m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    )
    det = float(np.linalg.det(m))  # cofactor expansion would do; 3x3 det is exact enough
    roots = _cubic_roots_real_coeffs(-tr, minors, -det)
    return sorted(abs(r) for r in roots)


def spectral_radius_closed(m) -> float:
    m = np.asarray(m, dtype=float)
    if m.shape == (1, 1):
        return abs(float(m[0, 0]))
    if m.shape == (2, 2):
        return eig_magnitudes_2x2(m)[-1]
    if m.shape == (3, 3):
        return eig_magnitudes_3x3(m)[-1]
    raise ValueError(f"no closed form for shape {m.shape}")


def spectral_norm_closed(m) -> float:
    """Largest singular value via the closed-form eigenvalues of M^T M."""
    m = np.asarray(m, dtype=float)
    gram = m.T @ m
    if gram.shape == (1, 1):
        return math.sqrt(abs(float(gram[0, 0])))
    if gram.shape == (2, 2):
        return math.sqrt(eig_magnitudes_2x2(gram)[-1])
    if gram.shape == (3, 3):
        return math.sqrt(eig_magnitudes_3x3(gram)[-1])
    raise ValueError(f"no closed form for shape {m.shape}")
