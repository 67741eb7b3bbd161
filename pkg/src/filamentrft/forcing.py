"""Preferred-curvature forcing: closed-form profile algebra and the case library.

A forcing is kappa0(s, t) = sum_m [A_m(s) cos(m w t) - B_m(s) sin(m w t)].
The swimmer case library follows the kappa0 = F1 cos(w t) + F2 sin(w t)
convention, which maps to A_1 = F1, B_1 = -F2.

Profiles form a tiny fixed algebra (trig in pi*s, polynomials, eigenmode
combinations, sums and scalings) so that s- and t-derivatives are analytic;
no expression parsing.
"""

import numpy as np

from .eigenbasis import simpson_weights

__all__ = [
    "CASE_IDS",
    "ForcingSpec",
    "ForcingSampler",
    "Mode",
    "ModeCombination",
    "Polynomial",
    "Trig",
    "ZERO",
    "make_case",
    "modal_forcing",
    "traveling_wave",
    "zero_forcing",
]

NORMALIZATION_POINTS = 2001  # composite-Simpson grid used to set ||F||_L2 = 1


class Profile:
    """Scalar function of s in [0, 1] with an analytic derivative."""

    def value(self, s):
        raise NotImplementedError

    def deriv(self, s):
        raise NotImplementedError

    def scaled(self, factor):
        if factor == 1.0:
            return self
        return Scaled(self, float(factor))

    def l2_norm(self, n_points=NORMALIZATION_POINTS):
        s = np.linspace(0.0, 1.0, n_points)
        v = self.value(s)
        return float(np.sqrt((v * v) @ simpson_weights(n_points)))

    def normalized(self, n_points=NORMALIZATION_POINTS):
        nrm = self.l2_norm(n_points)
        if nrm == 0.0:
            raise ValueError("cannot normalize an identically zero profile")
        return self.scaled(1.0 / nrm)


class Trig(Profile):
    """amplitude * sin(a*pi*s + phase) or cos(a*pi*s + phase)."""

    def __init__(self, kind, a, phase=0.0, amplitude=1.0):
        if kind not in ("sin", "cos"):
            raise ValueError(f"kind must be 'sin' or 'cos', got {kind!r}")
        self.kind = kind
        self.a = float(a)
        self.phase = float(phase)
        self.amplitude = float(amplitude)

    def _arg(self, s):
        return self.a * np.pi * np.asarray(s, float) + self.phase

    def value(self, s):
        f = np.sin if self.kind == "sin" else np.cos
        return self.amplitude * f(self._arg(s))

    def deriv(self, s):
        w = self.a * np.pi
        if self.kind == "sin":
            return self.amplitude * w * np.cos(self._arg(s))
        return -self.amplitude * w * np.sin(self._arg(s))

    def scaled(self, factor):
        return Trig(self.kind, self.a, self.phase, self.amplitude * factor)


class Polynomial(Profile):
    """sum coeffs[i] * s^i."""

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.ndim != 1 or self.coeffs.size == 0:
            raise ValueError("coeffs must be a nonempty 1-D sequence")

    def value(self, s):
        return np.polynomial.polynomial.polyval(np.asarray(s, float), self.coeffs)

    def deriv(self, s):
        return np.polynomial.polynomial.polyval(
            np.asarray(s, float), np.polynomial.polynomial.polyder(self.coeffs)
        )

    def scaled(self, factor):
        return Polynomial(self.coeffs * factor)


class ModeCombination(Profile):
    """sum_k coeffs[k] * psi_{k+1}(s) over a clamped biharmonic eigenbasis."""

    def __init__(self, basis, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim != 1:
            raise ValueError("coeffs must be 1-D")
        if coeffs.size > basis.k_max:
            raise ValueError(
                f"{coeffs.size} mode coefficients exceed the basis size k_max={basis.k_max}"
            )
        self.basis = basis
        self.coeffs = coeffs

    def value(self, s):
        out = np.zeros_like(np.asarray(s, float))
        for k, c in enumerate(self.coeffs, start=1):
            if c != 0.0:
                v, _ = self.basis.eval_mode(k, s)
                out = out + c * v
        return out

    def deriv(self, s):
        out = np.zeros_like(np.asarray(s, float))
        for k, c in enumerate(self.coeffs, start=1):
            if c != 0.0:
                _, d = self.basis.eval_mode(k, s)
                out = out + c * d
        return out

    def scaled(self, factor):
        return ModeCombination(self.basis, self.coeffs * factor)


class Sum(Profile):
    def __init__(self, terms):
        self.terms = tuple(terms)

    def value(self, s):
        return sum(t.value(s) for t in self.terms)

    def deriv(self, s):
        return sum(t.deriv(s) for t in self.terms)

    def scaled(self, factor):
        return Sum([t.scaled(factor) for t in self.terms])


class Scaled(Profile):
    def __init__(self, base, factor):
        self.base = base
        self.factor = factor

    def value(self, s):
        return self.factor * self.base.value(s)

    def deriv(self, s):
        return self.factor * self.base.deriv(s)

    def scaled(self, factor):
        return Scaled(self.base, self.factor * factor)


class _Zero(Profile):
    def value(self, s):
        return np.zeros_like(np.asarray(s, float))

    def deriv(self, s):
        return np.zeros_like(np.asarray(s, float))

    def scaled(self, factor):
        return self

    def l2_norm(self, n_points=NORMALIZATION_POINTS):
        return 0.0


ZERO = _Zero()


class Mode:
    """One temporal mode: A(s) cos(m w t) - B(s) sin(m w t)."""

    def __init__(self, m, a_profile, b_profile):
        if m < 1:
            raise ValueError("temporal mode index m must be >= 1")
        self.m = int(m)
        self.a_profile = a_profile
        self.b_profile = b_profile


class ForcingSpec:
    """Time-periodic preferred curvature with analytic s/t derivatives."""

    def __init__(self, omega, modes, label=""):
        if omega <= 0:
            raise ValueError("omega must be positive")
        self.omega = float(omega)
        self.modes = tuple(modes)
        self.label = label

    @property
    def period(self):
        return 2.0 * np.pi / self.omega

    def eval(self, s, t):
        """(kappa0, d_s kappa0, d_t kappa0, d_t d_s kappa0) at points s, time t."""
        s = np.asarray(s, dtype=float)
        k0 = np.zeros_like(s)
        k0_s = np.zeros_like(s)
        k0_t = np.zeros_like(s)
        k0_st = np.zeros_like(s)
        for mode in self.modes:
            mw = mode.m * self.omega
            c, sn = np.cos(mw * t), np.sin(mw * t)
            a, b = mode.a_profile.value(s), mode.b_profile.value(s)
            da, db = mode.a_profile.deriv(s), mode.b_profile.deriv(s)
            k0 += a * c - b * sn
            k0_s += da * c - db * sn
            k0_t += -mw * (a * sn + b * c)
            k0_st += -mw * (da * sn + db * c)
        return k0, k0_s, k0_t, k0_st

    def sampler(self, s):
        """Precompute spatial profiles on a fixed grid; returns a fast t -> 4-tuple."""
        return ForcingSampler(self, s)

    def scaled(self, factor):
        return ForcingSpec(
            self.omega,
            [Mode(m.m, m.a_profile.scaled(factor), m.b_profile.scaled(factor)) for m in self.modes],
            label=self.label,
        )


class ForcingSampler:
    """Spatial profiles frozen on a grid; per-call cost is one trig pair per mode."""

    def __init__(self, forcing, s):
        s = np.asarray(s, dtype=float)
        self.omega = forcing.omega
        self.m = np.array([mode.m for mode in forcing.modes], dtype=float)
        self.a = np.array([mode.a_profile.value(s) for mode in forcing.modes])
        self.b = np.array([mode.b_profile.value(s) for mode in forcing.modes])
        self.da = np.array([mode.a_profile.deriv(s) for mode in forcing.modes])
        self.db = np.array([mode.b_profile.deriv(s) for mode in forcing.modes])
        self.shape = s.shape

    def __call__(self, t):
        if self.m.size == 0:
            z = np.zeros(self.shape)
            return z, z.copy(), z.copy(), z.copy()
        mw = self.m * self.omega
        c, sn = np.cos(mw * t), np.sin(mw * t)
        k0 = c @ self.a - sn @ self.b
        k0_s = c @ self.da - sn @ self.db
        k0_t = -(mw * sn) @ self.a - (mw * c) @ self.b
        k0_st = -(mw * sn) @ self.da - (mw * c) @ self.db
        return k0, k0_s, k0_t, k0_st


def zero_forcing(omega=2.0 * np.pi):
    return ForcingSpec(omega, [], label="zero")


def modal_forcing(basis, a, b, omega=2.0 * np.pi, label="modal"):
    """Forcing from modal coefficient arrays a[m-1, k-1], b[m-1, k-1]."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise ValueError("a and b coefficient arrays must have equal shapes")
    modes = []
    for row in range(a.shape[0]):
        if np.any(a[row] != 0.0) or np.any(b[row] != 0.0):
            modes.append(Mode(row + 1, ModeCombination(basis, a[row]), ModeCombination(basis, b[row])))
    return ForcingSpec(omega, modes, label=label)


def traveling_wave(omega=2.0 * np.pi):
    """kappa0(s, t) = sin(2 pi (s - t)) for omega = 2 pi; unnormalized amplitude."""
    # sin(2 pi s - w t) = sin(2 pi s) cos(w t) - cos(2 pi s) sin(w t)
    return ForcingSpec(
        omega,
        [Mode(1, Trig("sin", 2.0), Trig("cos", 2.0))],
        label="traveling-wave",
    )


#: F1/F2 pairs of the swimmer catalog; None marks the optimizer-backed cases.
_CASE_TABLE = {
    "case1": (Trig("cos", 4.0), Trig("cos", 2.0)),                    # both even: non-swimmer
    "case2": (Trig("sin", 4.0), Trig("sin", 2.0)),                    # both odd: non-swimmer
    "case3": (Sum([Trig("cos", 2.0), Trig("sin", 2.0)]),
              Sum([Trig("cos", 2.0), Trig("sin", 2.0)])),             # F2 = F1: bad swimmer
    "case4": (ZERO, Sum([Trig("cos", 2.0), Trig("sin", 2.0)])),       # F1 = 0: bad swimmer
    "case5": (Sum([Trig("cos", 2.0), Trig("sin", 2.0)]),
              Sum([Trig("cos", 2.0), Trig("sin", 2.0)]).scaled(-1.0)),  # F2 = -F1: bad swimmer
    "case6": (Trig("cos", 2.0), Trig("sin", 2.0)),                    # traveling wave: good
    "case7": (Polynomial([0.0, 0.0, 1.0]), Polynomial([1.0, -2.0, 1.0])),  # s^2, (s-1)^2: good
    "case8": None,
    "case9": None,
}

CASE_IDS = tuple(sorted(_CASE_TABLE))


def _from_f_pair(f1, f2, omega, label, normalize=True):
    if normalize:
        f1 = f1.normalized() if not isinstance(f1, _Zero) else f1
        f2 = f2.normalized() if not isinstance(f2, _Zero) else f2
    # kappa0 = F1 cos + F2 sin  ->  A = F1, B = -F2
    return ForcingSpec(omega, [Mode(1, f1, f2.scaled(-1.0))], label=label)


def make_case(case_id, omega=2.0 * np.pi, basis=None, coefficients=None, normalize=True):
    """Build a catalog forcing by id ("case1".."case9").

    Cases 8 and 9 are the optimizer-produced waveforms: pass `basis` and
    `coefficients` = (a, b) 1-D arrays of spatial-mode coefficients (m = 1).
    Per the catalog convention the profiles are renormalized to unit L2 norm
    unless `normalize=False`.
    """
    if case_id not in _CASE_TABLE:
        raise KeyError(f"unknown case id {case_id!r}; valid ids: {', '.join(CASE_IDS)}")
    entry = _CASE_TABLE[case_id]
    if entry is None:
        if basis is None or coefficients is None:
            raise ValueError(f"{case_id} needs an eigenbasis and optimizer coefficients (a, b)")
        a, b = (np.asarray(c, dtype=float).reshape(-1) for c in coefficients)
        # kappa0 = sum (a cos - b sin) psi: F1 = sum a psi, F2 = -sum b psi
        f1 = ModeCombination(basis, a)
        f2 = ModeCombination(basis, -b)
        return _from_f_pair(f1, f2, omega, case_id, normalize=normalize)
    f1, f2 = entry
    return _from_f_pair(f1, f2, omega, case_id, normalize=normalize)
