"""Special functions: parabolic cylinder functions of integer order,
complex erfc and the zeroth-order Hankel function of the first kind.

All routines accept scalars or numpy arrays and broadcast elementwise.

Notes
-----
Non-negative orders use the Hermite-Gaussian form

    D_m(z) = exp(-z^2/4) He_m(z),   He_{m+1} = z He_m - m He_{m-1}

Negative orders start from D_0 and D_{-1} = sqrt(pi/2) exp(-z^2/4) w(iz/sqrt 2),
with w the Faddeeva function, and use the three-term recurrence

    D_{nu+1}(z) - z D_nu(z) + nu D_{nu-1}(z) = 0.

Running it towards more negative orders is only stable while Re(z) is
small: D_{-m}(z) is the minimal solution for Re(z) > 0. Beyond that the
sequence is produced by Miller's backward algorithm (upward in order from
a deep starting index) and normalised to the exact D_{-1}.
"""
from __future__ import annotations

import numpy as np
from scipy import special

SQRT_HALF_PI = np.sqrt(np.pi / 2.0)

# forward recurrence error grows ~ eps * exp(2 sqrt(m) Re z)
_FORWARD_EXPONENT_LIMIT = 12.0
# Miller truncation error ~ exp(-2 Re z (sqrt(L) - sqrt(m)))
_MILLER_EXPONENT = 24.0
_RESCALE = 1e250


def pcf_nonneg_all(m_max, z):
    """Return D_0(z) ... D_{m_max}(z) stacked along a new leading axis."""
    if m_max < 0:
        raise ValueError("m_max must be non-negative")
    z = np.asarray(z, dtype=complex)
    out = np.empty((m_max + 1,) + z.shape, dtype=complex)
    gauss = np.exp(-z * z / 4.0)
    he_prev = np.zeros_like(z)
    he = np.ones_like(z)
    out[0] = gauss
    for m in range(m_max):
        he_prev, he = he, z * he - m * he_prev
        out[m + 1] = gauss * he
    return out


def pcf_nonneg(m, z):
    """Parabolic cylinder function D_m(z) for integer m >= 0.

    Evaluated as 2^(-m/2) exp(-z^2/4) H_m(z/sqrt 2). For very large |z|
    the Gaussian factor may overflow and the result is then non-finite.
    """
    m = int(m)
    if m < 0:
        raise ValueError(f"pcf_nonneg needs m >= 0, got {m}")
    out = pcf_nonneg_all(m, z)[m]
    return out[()] if out.ndim == 0 else out


def erfc_complex(z):
    """Complementary error function of complex argument."""
    return special.erfc(np.asarray(z, dtype=complex))


def pcf_minus_one(z):
    """D_{-1}(z) = sqrt(pi/2) exp(z^2/4) erfc(z/sqrt 2), in scaled form."""
    z = np.asarray(z, dtype=complex)
    return SQRT_HALF_PI * np.exp(-z * z / 4.0) * special.wofz(1j * z / np.sqrt(2.0))


def _forward(m_max, z, d0, dm1):
    out = np.empty((m_max + 1,) + z.shape, dtype=complex)
    out[0] = d0
    if m_max >= 1:
        out[1] = dm1
    for m in range(1, m_max):
        # D_{-m-1} = (z D_{-m} - D_{-m+1}) / (-m)
        out[m + 1] = (out[m - 1] - z * out[m]) / m
    return out


def _miller(m_max, z, dm1):
    re = z.real
    start = int(np.ceil((np.sqrt(m_max) + _MILLER_EXPONENT / re.min()) ** 2))
    start = max(start, m_max + 20)
    out = np.zeros((m_max + 1,) + z.shape, dtype=complex)
    # f_hi ~ D_{-(m+1)}, f ~ D_{-m}, recursed from m=start towards m=0
    f_hi = np.zeros_like(z)
    f = np.full_like(z, 1e-300)
    for m in range(start, 0, -1):
        # D_{-m+1} = z D_{-m} + m D_{-m-1}
        f_lo = z * f + m * f_hi
        f_hi, f = f, f_lo
        if m - 1 <= m_max:
            out[m - 1] = f
        big = np.abs(f) > _RESCALE
        if big.any():
            scale = np.where(big, 1.0 / _RESCALE, 1.0)
            f = f * scale
            f_hi = f_hi * scale
            out[m - 1 :] *= scale
    return out * (dm1 / out[1])


def pcf_neg_all(m_max, z):
    """Return D_0(z), D_{-1}(z), ..., D_{-m_max}(z) along a new leading axis.

    Raises
    ------
    OverflowError
        If any value is not representable in double precision.
    """
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    z = z.ravel()
    out = np.empty((m_max + 1, z.size), dtype=complex)
    use_miller = 2.0 * np.sqrt(m_max) * z.real > _FORWARD_EXPONENT_LIMIT
    fwd = ~use_miller
    # non-finite values are reported once, as OverflowError, below
    with np.errstate(over="ignore", invalid="ignore"):
        d0 = np.exp(-z * z / 4.0)
        dm1 = pcf_minus_one(z)
        if fwd.any():
            out[:, fwd] = _forward(m_max, z[fwd], d0[fwd], dm1[fwd])
        if use_miller.any():
            out[:, use_miller] = _miller(m_max, z[use_miller], dm1[use_miller])
            out[0, use_miller] = d0[use_miller]
    if not np.all(np.isfinite(out)):
        raise OverflowError(
            f"D_-m overflow for m <= {m_max}: intermediate values exceed double range"
        )
    return out.reshape((m_max + 1,) + shape)


def pcf_neg(m, z):
    """Parabolic cylinder function D_{-m}(z) for integer m >= 1."""
    m = int(m)
    if m < 1:
        raise ValueError(f"pcf_neg needs m >= 1, got {m}")
    out = pcf_neg_all(m, z)[m]
    return out[()] if out.ndim == 0 else out


def pcf(m, z):
    """D_m(z) for any integer order m."""
    return pcf_nonneg(m, z) if m >= 0 else pcf_neg(-m, z)


def hankel0(x):
    """H_0^(1)(x) = J_0(x) + i Y_0(x) for real x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("hankel0 is defined here only for x > 0")
    out = special.hankel1(0, x)
    return out[()] if out.ndim == 0 else out
