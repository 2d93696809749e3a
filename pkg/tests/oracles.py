"""Independent reference computations used by several test modules."""
import numpy as np

LMAX = 3.0


def quadratic_grid_oracle(r_lo=0.1, r_hi=10.0, n=10_000, steps=12_600):
    """Classify x' = (x + Λ(r t))² − 1, Λ(τ) = 1.5 (tanh(τ/2) + 1), on a log-spaced r-grid.

    Plain vectorised RK4 in the original time from the past sink x = −1 at
    t = −30/r to t = 30/r + 30.  Returns (r, tipped) with tipped True where
    |x| exceeds 1e3, False where |x + 4| < 1e-3; anything else is NaN.
    """
    r = np.geomspace(r_lo, r_hi, n)
    t0 = -30.0 / r
    t1 = 30.0 / r + 30.0
    dt = (t1 - t0) / steps
    x = np.full(n, -1.0)
    alive = np.ones(n, dtype=bool)

    def f(t, x):
        lam = 0.5 * LMAX * (np.tanh(r * t / 2.0) + 1.0)
        return (x + lam) ** 2 - 1.0

    t = t0.copy()
    for _ in range(steps):
        k1 = f(t, x)
        k2 = f(t + dt / 2, x + dt / 2 * k1)
        k3 = f(t + dt / 2, x + dt / 2 * k2)
        k4 = f(t + dt, x + dt * k3)
        x_new = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        x = np.where(alive, x_new, x)
        escaped = ~np.isfinite(x) | (np.abs(x) > 1e3)
        x = np.where(escaped, 1e4, x)
        alive &= ~escaped
        t = t + dt
    out = np.full(n, np.nan)
    out[np.abs(x) > 1e3] = 1.0
    out[np.abs(x + 4.0) < 1e-3] = 0.0
    return r, out


def grid_boundary(r, tipped):
    """Midpoint between the last tracked and first tipped grid value, and the local spacing."""
    if np.any(np.isnan(tipped)):
        raise AssertionError("grid oracle left points unclassified")
    first = int(np.argmax(tipped == 1.0))
    if first == 0 or np.any(tipped[first:] != 1.0) or np.any(tipped[:first] != 0.0):
        raise AssertionError("grid oracle classification is not a single switch")
    return 0.5 * (r[first - 1] + r[first]), r[first] - r[first - 1]
