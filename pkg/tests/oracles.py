"""Independent reference values for square wells (root finding, no grids)."""

from __future__ import annotations

import math

from scipy.optimize import brentq
from scipy.special import j0, j1, k0, k1

# Frozen from the root solves below (depth 4, radius 1).
E1_1D = -2.93937493178173
KAPPA1_1D = 1.7144605366650263
E2_1D = -0.40710148364132825
KAPPA2_1D = 0.638045048285251
E1_DISK = -1.6646535706200978
KAPPA1_DISK = 1.2902145444150355


def square_well_1d(lambda_sq: float, a: float = 1.0, parity: str = "even") -> float:
    """Bound energy from k tan(ka) = kappa (even) or -k cot(ka) = kappa (odd)."""
    q = math.sqrt(lambda_sq)

    def kappa(k):
        return math.sqrt(max(lambda_sq - k * k, 0.0))

    if parity == "even":
        f = lambda k: k * math.tan(k * a) - kappa(k)
        lo, hi = 1e-12, min(q, math.pi / (2 * a)) - 1e-12
    else:
        if q * a <= math.pi / 2:
            raise ValueError("no odd bound state")
        f = lambda k: -k / math.tan(k * a) - kappa(k)
        lo, hi = math.pi / (2 * a) + 1e-12, min(q, math.pi / a) - 1e-12
    k = brentq(f, lo, hi, xtol=1e-15)
    return -(lambda_sq - k * k)


def disk_ground_state(lambda_sq: float, a: float = 1.0) -> float:
    """Lowest m = 0 energy: k J1(ka)/J0(ka) = kappa K1(kappa a)/K0(kappa a)."""
    q = math.sqrt(lambda_sq)

    def f(k):
        kap = math.sqrt(lambda_sq - k * k)
        return k * j1(k * a) / j0(k * a) - kap * k1(kap * a) / k0(kap * a)

    k = brentq(f, 1e-9, min(q, 2.404825557695773 / a) - 1e-9, xtol=1e-15)
    return -(lambda_sq - k * k)
