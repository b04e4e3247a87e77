"""
Exact maximization of a quadratic over a ball

max_{||v|| <= rho} loss + g.v + 1/2 v.H v. In the eigenbasis of H the
maximizer is v(s) = (sI - H)^-1 g for the multiplier s >= max(lambda1, 0)
with ||v(s)|| = rho, unless the unconstrained maximizer (s = 0, H negative
definite) is already inside the ball, or g has no component along the
leading eigenspace and ||v(lambda1)|| <= rho (hard case, completed along
the leading eigenvector).
"""
import numpy as np
from scipy.optimize import brentq

EIGEN_TOLERANCE = 1e-10
COMPONENT_TOLERANCE = 1e-12


def _step(coefficients, eigenvalues, s, basis):
    return basis @ (coefficients / (s - eigenvalues))


def trust_region_max(q):
    """
    :param q: (QuadModel) quadratic model and radius
    :return: (float, np.ndarray) maximal value and a maximizer v*
    """
    d = q.dimension
    if q.rho == 0 or d == 0:
        return q.loss, np.zeros(d)
    eigenvalues, basis = q.eigen()
    coefficients = basis.T @ q.g
    lambda1 = eigenvalues[-1]
    scale = max(1.0, float(np.abs(eigenvalues).max()))
    g_norm = float(np.linalg.norm(q.g))

    if lambda1 < -EIGEN_TOLERANCE * scale:
        interior = _step(coefficients, eigenvalues, 0.0, basis)
        if np.linalg.norm(interior) <= q.rho:
            return float(q.value_at(interior)), interior

    lower = max(lambda1, 0.0)
    leading = eigenvalues >= lambda1 - EIGEN_TOLERANCE * scale
    leading_norm = float(np.linalg.norm(coefficients[leading]))
    if lambda1 >= 0 and leading_norm <= COMPONENT_TOLERANCE * max(1.0, g_norm):
        rest = ~leading
        partial = basis[:, rest] @ (coefficients[rest] / (lambda1 - eigenvalues[rest]))
        remaining = q.rho ** 2 - float(partial @ partial)
        if remaining >= 0:
            v = partial + np.sqrt(remaining) * basis[:, -1]
            return float(q.value_at(v)), v

    def excess(s):
        return float(np.linalg.norm(coefficients / (s - eigenvalues))) - q.rho

    upper = lower + 2.0 * g_norm / q.rho + 1e-12
    gap = upper - lower
    start = lower + gap
    while excess(start) <= 0 and gap > 1e-300:
        gap /= 2.0
        start = lower + gap
    if excess(start) <= 0:
        # multiplier sits at the lower end of the bracket to round-off
        v = _step(coefficients, eigenvalues, start, basis)
    else:
        s = brentq(excess, start, upper, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        v = _step(coefficients, eigenvalues, s, basis)
    norm = float(np.linalg.norm(v))
    if norm > q.rho:
        v = v * (q.rho / norm)
    return float(q.value_at(v)), v
