"""Independent reference computations used only by the tests."""

from __future__ import annotations

import mpmath as mp
import numpy as np
from scipy.integrate import solve_ivp


def theta_prime_by_bisection(theta: float) -> float:
    """Zero of F in (theta, 1) by bisection on the closed-form quartic."""

    def F(s):
        return -(s**4) / 4 + (1 + theta) * s**3 / 3 - theta * s**2 / 2

    lo, hi = theta, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if F(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def length_mp(q, p, r, theta, d_u, dps=40):
    """sqrt(d_u/2) * int_p^q du / sqrt(F(q) - F(u)) with tanh-sinh quadrature in high precision.

    ``q`` may be given as a deficit via ``q = ('eps', value)``.  The factor
    ``q - u`` is divided out of F(q) - F(u) symbolically and ``u = q - t^2``
    is substituted, so the integrand carries no cancellation near ``u = q``.
    """
    with mp.workdps(dps):
        r, theta, d_u, p = mp.mpf(r), mp.mpf(theta), mp.mpf(d_u), mp.mpf(p)
        if isinstance(q, tuple):
            eps = mp.mpf(q[1])
            q = 1 - eps
        else:
            q = mp.mpf(q)
            eps = 1 - q
        k = r / theta

        def quotient(u):
            # (F(q) - F(u)) / (q - u)
            return k * (
                -(q**3 + q**2 * u + q * u**2 + u**3) / 4
                + (1 + theta) * (q**2 + q * u + u**2) / 3
                - theta * (q + u) / 2
            )

        t_max = mp.sqrt(q - p)
        breaks = [mp.mpf(0)]
        s = mp.sqrt(eps)
        while s < t_max:
            breaks.append(s)
            s *= 10
        breaks.append(t_max)
        val = mp.quad(lambda t: 2 / mp.sqrt(quotient(q - t * t)), breaks)
        return float(mp.sqrt(d_u / 2) * val)


def shoot_back(g, d_u, q, x_right, x_eval):
    """Integrate -d_u u'' = f(u) backwards from u(x_right) = q, u'(x_right) = 0."""
    sol = solve_ivp(
        lambda x, y: [y[1], -g.f(y[0]) / d_u],
        (x_right, float(np.min(x_eval))),
        [q, 0.0],
        method="DOP853",
        rtol=1e-13,
        atol=1e-15,
        dense_output=True,
    )
    y = sol.sol(np.asarray(x_eval))
    return y[0], y[1]


def dense_principal_eig(grid, p, u):
    """Smallest eigenvalue of the non-symmetric matrix -d_v Lap_v - diag(alpha u - gamma)."""
    uA = np.asarray(u, float)[: grid.n_pred]
    A = -p.d_v * grid.lap_v.toarray() - np.diag(p.alpha * uA - p.gamma)
    vals, vecs = np.linalg.eig(A)
    k = int(np.argmin(vals.real))
    phi = np.abs(vecs[:, k].real)
    return float(vals[k].real), phi / phi.max()


def fd_jacobian(fun, y, eps=1e-7):
    """Central finite-difference Jacobian of ``fun`` at ``y``."""
    y = np.asarray(y, float)
    f0 = fun(y)
    J = np.empty((f0.size, y.size))
    for j in range(y.size):
        h = eps * max(1.0, abs(y[j]))
        yp = y.copy()
        ym = y.copy()
        yp[j] += h
        ym[j] -= h
        J[:, j] = (fun(yp) - fun(ym)) / (2 * h)
    return J
