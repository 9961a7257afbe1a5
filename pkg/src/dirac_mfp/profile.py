"""Self-similar congestion profile and the fields it generates.

For a congestion exponent ``theta > 0`` the scaling exponent is
``alpha = 2 / (2 + theta)`` and the stationary rescaled density is the
compactly supported bump

    phi(y) = (c (R^2 - y^2))_+^{1/theta},    c = alpha (1 - alpha) / 2,

with the radius ``R = r_alpha`` fixed by unit mass.  Writing
``B(p) = int_{-1}^{1} (1 - s^2)^p ds`` (a beta function), unit mass reads
``R^{1 + 2/theta} c^{1/theta} B(1/theta) = 1``, which is solved here in
closed form and cross-checked against adaptive quadrature on construction.

All integrals of powers of phi reduce to regularized incomplete beta
functions; `Profile.power_mass` exposes that primitive and the rest of the
package routes every integral against phi (cell masses, L^p norms,
reciprocal integrals) through it, so degenerate-endpoint quadrature error
never enters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import InvalidParameterError, UnsupportedParameterError

__all__ = ["Profile", "make_profile"]

# construction-time agreement between the closed-form radius and quadrature
_RADIUS_CHECK_TOL = 1e-10


@dataclass(frozen=True)
class Profile:
    """Derived constants of the self-similar profile for one exponent.

    Attributes
    ----------
    theta : float
        Congestion exponent in the coupling ``m**theta``.
    alpha : float
        Scaling exponent ``2 / (2 + theta)``.
    r_alpha : float
        Support radius of the unit-mass profile.
    kappa : float
        Spectral rate ``1 - 2 alpha``; positive iff ``theta > 2``.
    c : float
        Parabola coefficient ``alpha (1 - alpha) / 2`` in ``phi**theta``.
    value_constant : float
        Prefactor ``alpha (1-alpha) r_alpha^2 / (2 (2 alpha - 1))`` of the
        ``t**(2 alpha - 1)`` term in the value function; ``nan`` at the
        critical exponent ``theta = 2`` where the power law degenerates.
    """

    theta: float
    alpha: float
    r_alpha: float
    kappa: float
    c: float
    value_constant: float

    # -- profile and its exact integrals ------------------------------------

    def phi(self, r):
        """Profile density, zero outside ``[-r_alpha, r_alpha]``."""
        r = np.asarray(r, dtype=float)
        rad = self.c * (self.r_alpha**2 - r * r)
        out = np.power(np.clip(rad, 0.0, None), 1.0 / self.theta)
        return out if out.ndim else float(out)

    def cdf(self, r):
        """Antiderivative of phi vanishing at ``-r_alpha`` (a regularized
        incomplete beta function in ``(r / r_alpha + 1) / 2``)."""
        r = np.asarray(r, dtype=float)
        q = 1.0 + 1.0 / self.theta
        z = np.clip(0.5 * (r / self.r_alpha + 1.0), 0.0, 1.0)
        out = special.betainc(q, q, z)
        return out if out.ndim else float(out)

    def quantile(self, u):
        """Monotone inverse of `cdf` on [0, 1]; exact at both endpoints."""
        u = np.asarray(u, dtype=float)
        if np.any((u < 0.0) | (u > 1.0)):
            raise InvalidParameterError("quantile argument outside [0, 1]")
        q = 1.0 + 1.0 / self.theta
        R = self.r_alpha
        out = R * (2.0 * special.betaincinv(q, q, u) - 1.0)
        # betaincinv alone drifts to ~1e-8 near the flat endpoints; two
        # safeguarded Newton corrections on the closed-form cdf restore
        # machine-level inversion
        for _ in range(2):
            miss = special.betainc(q, q, np.clip(0.5 * (out / R + 1.0), 0.0, 1.0)) - u
            dens = np.power(np.clip(self.c * (R * R - out * out), 0.0, None),
                            1.0 / self.theta)
            out = np.clip(out - np.where(dens > 0.0, miss / np.where(dens > 0.0, dens, 1.0), 0.0),
                          -R, R)
        return out if out.ndim else float(out)

    def power_mass(self, p: float, lo: float | None = None,
                   hi: float | None = None) -> float:
        """Exact ``int_lo^hi phi(y)**p dy``.

        Requires ``p / theta > -1`` (otherwise the endpoint singularity is
        not integrable).  Defaults to the full support.
        """
        e = p / self.theta
        if not e > -1.0:
            raise InvalidParameterError(
                f"phi**{p} is not integrable for theta={self.theta}")
        R = self.r_alpha
        lo = -R if lo is None else lo
        hi = R if hi is None else hi
        z0 = np.clip(0.5 * (lo / R + 1.0), 0.0, 1.0)
        z1 = np.clip(0.5 * (hi / R + 1.0), 0.0, 1.0)
        total = (self.c**e * R ** (2.0 * e + 1.0) * 2.0 * 4.0**e
                 * special.beta(e + 1.0, e + 1.0))
        return float(total * (special.betainc(e + 1.0, e + 1.0, z1)
                              - special.betainc(e + 1.0, e + 1.0, z0)))

    def cell_masses(self, edges: np.ndarray) -> np.ndarray:
        """Exact masses ``int phi`` between consecutive edges."""
        F = self.cdf(np.asarray(edges, dtype=float))
        return np.diff(F)

    def power_cell_masses(self, p: float, edges: np.ndarray) -> np.ndarray:
        """Exact ``int phi**p`` between consecutive edges.

        Same integrability constraint as `power_mass`.  For p < 0 the
        endpoint cells absorb the (integrable) singularity of phi**p
        exactly, so integrands of the form f * phi**p can be handled with
        plain nodal values of f.
        """
        e = p / self.theta
        if not e > -1.0:
            raise InvalidParameterError(
                f"phi**{p} is not integrable for theta={self.theta}")
        R = self.r_alpha
        z = np.clip(0.5 * (np.asarray(edges, dtype=float) / R + 1.0), 0.0, 1.0)
        total = (self.c**e * R ** (2.0 * e + 1.0) * 2.0 * 4.0**e
                 * special.beta(e + 1.0, e + 1.0))
        return total * np.diff(special.betainc(e + 1.0, e + 1.0, z))

    def power_node_masses(self, p: float, y: np.ndarray) -> np.ndarray:
        """Dual-cell quadrature weights for integrals against phi**p dy."""
        y = np.asarray(y, dtype=float)
        half = np.concatenate([[y[0]], 0.5 * (y[:-1] + y[1:]), [y[-1]]])
        return self.power_cell_masses(p, half)

    def node_masses(self, y: np.ndarray) -> np.ndarray:
        """Dual-cell quadrature weights for integrals against phi dy.

        ``sum(node_masses(y) * f(y))`` integrates ``f phi`` exactly for
        piecewise constants on the dual mesh; second order for smooth f.
        """
        y = np.asarray(y, dtype=float)
        half = np.concatenate([[y[0]], 0.5 * (y[:-1] + y[1:]), [y[-1]]])
        return self.cell_masses(half)

    def second_moment(self) -> float:
        """Exact ``int y^2 phi(y) dy``."""
        e = 1.0 / self.theta
        return float(self.c**e * self.r_alpha ** (3.0 + 2.0 * e)
                     * special.beta(1.5, e + 1.0))

    # -- self-similar space-time fields -------------------------------------

    def self_similar_density(self, t: float, x):
        """``t^{-alpha} phi(t^{-alpha} x)`` for ``t > 0``."""
        _require_positive_time(t)
        s = t ** (-self.alpha)
        return s * self.phi(np.asarray(x, dtype=float) * s) if np.ndim(x) \
            else s * self.phi(x * s)

    def self_similar_value(self, t: float, x):
        """Value function ``-alpha x^2 / (2t) - C t^{2 alpha - 1}`` on the
        support of the self-similar density.

        Raises
        ------
        UnsupportedParameterError
            At ``theta = 2``, where ``2 alpha - 1 = 0`` and the power-law
            prefactor degenerates; see `critical_self_similar_value`.
        """
        if self.theta == 2.0:
            raise UnsupportedParameterError(
                "theta = 2 is critical: the t**(2 alpha - 1) prefactor "
                "degenerates (use critical_self_similar_value)")
        _require_positive_time(t)
        x = np.asarray(x, dtype=float)
        out = (-self.alpha * x * x / (2.0 * t)
               - self.value_constant * t ** (2.0 * self.alpha - 1.0))
        return out if out.ndim else float(out)

    def critical_self_similar_value(self, t: float, x):
        """Logarithmic-correction value function at ``theta = 2``:
        ``-x^2 / (4t) - (r_alpha^2 / 8) ln t``.  This closes the
        Hamilton-Jacobi equation because ``alpha (1 - alpha) / 2 = 1/8``
        exactly at ``alpha = 1/2``."""
        if self.theta != 2.0:
            raise UnsupportedParameterError(
                "the logarithmic value correction only applies at theta = 2")
        _require_positive_time(t)
        x = np.asarray(x, dtype=float)
        out = -x * x / (4.0 * t) - self.r_alpha**2 / 8.0 * math.log(t)
        return out if out.ndim else float(out)


def _require_positive_time(t: float) -> None:
    if not t > 0.0:
        raise InvalidParameterError(f"time must be positive, got {t}")


def make_profile(theta: float) -> Profile:
    """Build the profile for one congestion exponent.

    The closed-form radius is verified against adaptive quadrature of the
    profile mass before the object is returned.
    """
    theta = float(theta)
    if not math.isfinite(theta) or theta <= 0.0:
        raise InvalidParameterError(f"theta must be a positive real, got {theta}")

    alpha = 2.0 / (2.0 + theta)
    kappa = 1.0 - 2.0 * alpha
    c = 0.5 * alpha * (1.0 - alpha)
    e = 1.0 / theta
    beta_int = special.beta(0.5, e + 1.0)  # int (1 - s^2)^{1/theta} ds
    r_alpha = (c**e * beta_int) ** (-theta / (theta + 2.0))

    if theta == 2.0:
        value_constant = math.nan
    else:
        value_constant = alpha * (1.0 - alpha) * r_alpha**2 / (2.0 * (2.0 * alpha - 1.0))

    # independent route: int phi = c^e int (R-y)^e (R+y)^e dy by quadrature
    mass, err = integrate.quad(lambda y: c**e, -r_alpha, r_alpha,
                               weight="alg", wvar=(e, e))
    if abs(mass - 1.0) > _RADIUS_CHECK_TOL:
        raise InvalidParameterError(
            f"profile normalization failed its quadrature cross-check: "
            f"mass({r_alpha}) = {mass}")

    return Profile(theta=theta, alpha=alpha, r_alpha=r_alpha, kappa=kappa,
                   c=c, value_constant=value_constant)
