"""Small-amplitude swimming analytics.

Closed-form linear-response machinery on the clamped biharmonic eigenbasis:
modal response coefficients, the time-averaged swimming speed as a quadratic
form coupled through the antisymmetric S matrix, the diagonal work form, and
the instantaneous-speed / displacement diagnostics evaluated on simulation
states.

Sign conventions: kappa0 = sum_m [A_m cos(m w t) - B_m sin(m w t)] with
A_m = sum_k a_{m,k} psi_k, B_m = sum_k b_{m,k} psi_k. Leftward propulsion is
a negative time-averaged speed.
"""

import numpy as np

from .model import recover_curvature

__all__ = [
    "avg_speed",
    "avg_work",
    "instantaneous_speed",
    "predicted_displacement",
    "project_case_profiles",
    "response_coeffs",
    "speed_quadratic_form",
    "work_diagonal",
]


def _coeff_arrays(a, b):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"coefficient arrays must have equal shapes, got {a.shape} vs {b.shape}")
    return a, b


def response_coeffs(a, b, omega, basis):
    """Linearized curvature-response coefficients (c_{m,k}, d_{m,k}).

    For each temporal mode m and spatial mode k, with q = w^2 m^2/(w^2 m^2 + lam_k^2):

        c = q * (lam_k/(w m) * b - a)
        d = q * (-lam_k/(w m) * a - b)

    a, b may be 1-D (single mode m=1) or (m_max, k_max).
    """
    a, b = _coeff_arrays(a, b)
    m_max, k_max = a.shape
    if m_max < 1:
        raise ValueError("need at least one temporal mode (m >= 1)")
    if k_max > basis.k_max:
        raise ValueError(f"k_max={k_max} exceeds basis size {basis.k_max}")
    lam = basis.lam[:k_max]
    m = np.arange(1, m_max + 1, dtype=float)[:, None]
    wm = omega * m
    q = wm ** 2 / (wm ** 2 + lam[None, :] ** 2)
    c = q * (lam[None, :] / wm * b - a)
    d = q * (-lam[None, :] / wm * a - b)
    return c, d


def speed_quadratic_form(omega, gamma, basis, m_max, k_max):
    """Symmetric matrix M such that <U> = z^T M z for z = (a_1., b_1., a_2., b_2., ...).

    Block-diagonal over temporal modes m; each block couples (a_m, b_m) through
    the antisymmetric S matrix, so single-mode and same-parity forcings give 0.
    """
    if k_max > basis.k_max:
        raise ValueError(f"k_max={k_max} exceeds basis size {basis.k_max}")
    lam = basis.lam[:k_max]
    S = basis.S[:k_max, :k_max]
    dim = 2 * k_max * m_max
    M = np.zeros((dim, dim))
    for m in range(1, m_max + 1):
        wm = omega * m
        q = wm ** 2 / (wm ** 2 + lam ** 2)
        P = q[:, None] * S
        R = (lam / wm * q)[:, None] * S
        Psym = 0.5 * (P + P.T)
        C = 0.5 * (R - R.T)
        o = 2 * k_max * (m - 1)
        M[o:o + k_max, o:o + k_max] = Psym
        M[o + k_max:o + 2 * k_max, o + k_max:o + 2 * k_max] = Psym
        M[o:o + k_max, o + k_max:o + 2 * k_max] = C
        M[o + k_max:o + 2 * k_max, o:o + k_max] = C.T
    return 0.5 * gamma * M


def work_diagonal(omega, basis, m_max, k_max):
    """Diagonal weights of the work form, ordered like speed_quadratic_form's z."""
    if k_max > basis.k_max:
        raise ValueError(f"k_max={k_max} exceeds basis size {basis.k_max}")
    lam = basis.lam[:k_max]
    out = np.empty(2 * k_max * m_max)
    for m in range(1, m_max + 1):
        wm = omega * m
        w_k = 0.5 * lam * wm ** 2 / (wm ** 2 + lam ** 2)
        o = 2 * k_max * (m - 1)
        out[o:o + k_max] = w_k
        out[o + k_max:o + 2 * k_max] = w_k
    return out


def pack_coeffs(a, b):
    """(m_max, k_max) coefficient arrays -> interleaved z vector (a_m, b_m per mode)."""
    a, b = _coeff_arrays(a, b)
    return np.concatenate([np.concatenate([a[m], b[m]]) for m in range(a.shape[0])])


def unpack_coeffs(z, m_max, k_max):
    """Inverse of pack_coeffs."""
    z = np.asarray(z, dtype=float)
    if z.size != 2 * m_max * k_max:
        raise ValueError(f"z has size {z.size}, expected {2 * m_max * k_max}")
    a = np.empty((m_max, k_max))
    b = np.empty((m_max, k_max))
    for m in range(m_max):
        o = 2 * k_max * m
        a[m] = z[o:o + k_max]
        b[m] = z[o + k_max:o + 2 * k_max]
    return a, b


def avg_speed(a, b, omega, gamma, basis):
    """Time-averaged swimming speed of the modal forcing (leading order).

    <U> = gamma/2 sum_{m,k,l} w^2 m^2/(w^2 m^2 + lam_k^2)
            [ lam_k/(w m) (a_{mk} b_{ml} - b_{mk} a_{ml}) + a_{mk} a_{ml} + b_{mk} b_{ml} ] S_{kl}
    """
    a, b = _coeff_arrays(a, b)
    m_max, k_max = a.shape
    M = speed_quadratic_form(omega, gamma, basis, m_max, k_max)
    z = pack_coeffs(a, b)
    return float(z @ M @ z)


def avg_work(a, b, omega, basis):
    """Average work per period: sum (lam_k/2) w^2 m^2/(w^2 m^2 + lam_k^2) (a^2 + b^2)."""
    a, b = _coeff_arrays(a, b)
    m_max, k_max = a.shape
    w = work_diagonal(omega, basis, m_max, k_max)
    z = pack_coeffs(a, b)
    return float(w @ z ** 2)


def project_case_profiles(forcing, basis):
    """Project a single-temporal-mode forcing onto the eigenbasis.

    Returns (a, b, tail) where a_k = <A_1, psi_k>, b_k = <B_1, psi_k> and tail
    is the squared L2 mass of (A_1, B_1) outside the truncated basis, made
    visible because catalog waveforms are not finite eigenmode sums.
    """
    modes = [m for m in forcing.modes]
    if len(modes) != 1 or modes[0].m != 1:
        raise ValueError("projection expects a single m=1 temporal mode")
    s = basis.s_grid
    a, tail_a = basis.project(modes[0].a_profile.value(s))
    b, tail_b = basis.project(modes[0].b_profile.value(s))
    return a, b, tail_a + tail_b


def instantaneous_speed(state, forcing, gamma, sampled=None):
    """U(t) = -gamma * int (kappa0)_s (kappa - kappa0) ds on a simulation state.

    Trapezoid over the interior nodes where the discrete curvature lives; the
    integrand vanishes at the clamped ends (kappa - kappa0 -> 0 there).
    """
    n = state.n_segments
    kappa = recover_curvature(state)
    if sampled is None:
        s_nodes = np.arange(1, n) / n
        k0, k0_s, _, _ = forcing.eval(s_nodes, state.time)
    else:
        k0, k0_s, _, _ = sampled
    return -gamma * float(k0_s @ (kappa - k0)) / n


def predicted_displacement(traj, t_start, t_end):
    """Time-trapezoid of the stored U(t) samples over [t_start, t_end]."""
    records = traj.window(t_start, t_end)
    if len(records) < 2:
        raise ValueError("window too short: need at least two records")
    t = np.array([r.state.time for r in records])
    u = np.array([r.diagnostics.speed for r in records])
    return float(np.trapezoid(u, t))
