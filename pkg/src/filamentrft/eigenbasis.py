"""Clamped-clamped biharmonic eigenbasis.

Eigenpairs of u'''' = lam * u on [0,1] with u(0)=u(1)=0, u'(0)=u'(1)=0:
roots xi_k of cos(xi) cosh(xi) = 1 give lam_k = xi_k^4, and the eigenfunctions
are the classic free-beam combinations of trig and hyperbolic terms,
normalized to unit L2 norm.

Naive evaluation of the eigenfunctions is useless in double precision beyond
k ~ 5 (cosh(xi s) terms cancel catastrophically near s = 1), so evaluation
uses a regrouped form scaled by 1/cosh(xi) in which every term is O(1).
"""

import numpy as np

__all__ = [
    "STABILITY_CAP",
    "EigenBasis",
    "build_basis",
    "coupling_matrix",
    "eigenfunction_residual",
    "eval_eigenfunction",
    "find_roots",
    "root_residual",
    "simpson",
    "simpson_weights",
]

# Hard cap on mode count: xi_20 ~ 64.4, and the e^{xi s} / e^{-xi} products in
# the stable form lose their last digits past that. The studies use k <= 12.
STABILITY_CAP = 20


def simpson_weights(n_points, dx=None):
    """Composite-Simpson weights for a uniform grid on [0, 1].

    Parameters
    ----------
    n_points : int
        Number of grid points; must be odd (even panel count).
    dx : float, optional
        Grid spacing. Defaults to 1/(n_points - 1).

    Returns
    -------
    ndarray of shape (n_points,)
    """
    if n_points < 3 or n_points % 2 == 0:
        raise ValueError(f"composite Simpson needs an odd point count >= 3, got {n_points}")
    if dx is None:
        dx = 1.0 / (n_points - 1)
    w = np.ones(n_points)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (dx / 3.0)


def simpson(values, dx=None):
    """Integrate sampled values over [0, 1] by composite Simpson.

    `values` must sit on a uniform grid with an odd number of points; the last
    axis is the grid axis.
    """
    values = np.asarray(values, dtype=float)
    out = values @ simpson_weights(values.shape[-1], dx)
    return float(out) if np.ndim(out) == 0 else out


def root_residual(xi):
    """Scaled characteristic residual cos(xi) - sech(xi).

    Equals (cos xi cosh xi - 1)/cosh xi; the unscaled form is not computable
    to 1e-12 in doubles for k >= 3 because d/dxi(cos xi cosh xi) ~ cosh xi.
    """
    xi = np.asarray(xi, dtype=float)
    return np.cos(xi) - 1.0 / np.cosh(xi)


def find_roots(k_max):
    """First `k_max` positive roots of cos(xi) cosh(xi) = 1.

    Newton on the bounded form cos(xi) - sech(xi), seeded at (2k+1)pi/2 and
    safeguarded by bisection on the bracket [k pi, (k+1) pi]; residual target
    1e-13 on the scaled form.

    Raises
    ------
    ValueError
        If k_max exceeds the double-precision stability cap.
    RuntimeError
        If an iteration fails to converge (should not happen with the bracket).
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if k_max > STABILITY_CAP:
        raise ValueError(
            f"k_max={k_max} exceeds the stability cap {STABILITY_CAP}; "
            "eigenfunction evaluation is not reliable in double precision beyond it"
        )
    roots = np.empty(k_max)
    for k in range(1, k_max + 1):
        lo, hi = k * np.pi, (k + 1) * np.pi
        f = lambda x: np.cos(x) - 1.0 / np.cosh(x)
        df = lambda x: -np.sin(x) + np.tanh(x) / np.cosh(x)
        flo = f(lo)
        x = 0.5 * (2 * k + 1) * np.pi
        converged = False
        for _ in range(100):
            fx = f(x)
            if abs(fx) < 1e-13:
                converged = True
                break
            # maintain the bracket for the bisection safeguard
            if (fx < 0) == (flo < 0):
                lo, flo = x, fx
            else:
                hi = x
            step = fx / df(x)
            x_new = x - step
            if not (lo < x_new < hi):
                x_new = 0.5 * (lo + hi)
            x = x_new
        if not converged:
            raise RuntimeError(f"root iteration for k={k} did not converge")
        roots[k - 1] = x
    return roots


def _stable_coeffs(xi):
    """O(1) coefficients of the regrouped eigenfunction form at root xi."""
    u = np.exp(-2.0 * xi)
    sech = 2.0 * np.exp(-xi) / (1.0 + u)
    tanh = (1.0 - u) / (1.0 + u)
    cbar = np.cos(xi) * sech
    sbar = np.sin(xi) * sech
    # alpha = 1 - cbar - sbar - tanh, with 1 - tanh formed without cancellation
    alpha = 2.0 * u / (1.0 + u) - cbar - sbar
    beta = (1.0 - cbar) + sbar + tanh
    return cbar, sbar, tanh, alpha, beta


def eval_eigenfunction(xi, s):
    """Evaluate the unnormalized mode psi_hat/cosh(xi) and its s-derivative.

    The regrouping
        (cbar-1) cos(xi s) + (sbar+tanh) sin(xi s)
            + (alpha/2) e^{xi s} + (beta/2) e^{-xi s}
    keeps every term O(1): alpha is O(e^{-xi}) so alpha*e^{xi s} <= O(1).
    Dividing psi_hat by cosh(xi) > 0 only rescales; normalization absorbs it.

    Returns
    -------
    (values, derivatives) : pair of ndarrays shaped like `s`
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < -1e-12) or np.any(s > 1 + 1e-12):
        raise ValueError("eigenfunctions are defined on s in [0, 1]")
    if xi > 710.0:  # exp overflow guard; unreachable below STABILITY_CAP
        raise ValueError(f"xi={xi} too large for double evaluation")
    cbar, sbar, tanh, alpha, beta = _stable_coeffs(xi)
    es = np.exp(xi * (s - 1.0)) * np.exp(xi)
    ems = np.exp(-xi * s)
    cs, sn = np.cos(xi * s), np.sin(xi * s)
    val = (cbar - 1.0) * cs + (sbar + tanh) * sn + 0.5 * alpha * es + 0.5 * beta * ems
    der = xi * (-(cbar - 1.0) * sn + (sbar + tanh) * cs + 0.5 * alpha * es - 0.5 * beta * ems)
    return val, der


class EigenBasis:
    """Normalized eigenbasis sampled on a Simpson quadrature grid.

    Attributes
    ----------
    k_max : int
    xi : (k_max,) roots of cos cosh = 1
    lam : (k_max,) eigenvalues xi^4
    s_grid : (n_quad,) uniform quadrature grid on [0, 1]
    weights : (n_quad,) Simpson weights
    psi, dpsi : (k_max, n_quad) normalized eigenfunctions and derivatives
    norm_factors : (k_max,) L2 norms of the paper-scale psi_hat
    S : (k_max, k_max) coupling matrix int psi_k (psi_l)' ds
    """

    def __init__(self, k_max, xi, lam, s_grid, weights, psi, dpsi, norm_factors, S, phi_norms):
        self.k_max = k_max
        self.xi = xi
        self.lam = lam
        self.s_grid = s_grid
        self.weights = weights
        self.psi = psi
        self.dpsi = dpsi
        self.norm_factors = norm_factors
        self.S = S
        self._phi_norms = phi_norms
        for arr in (xi, lam, s_grid, weights, psi, dpsi, norm_factors, S, phi_norms):
            arr.setflags(write=False)

    def integrate(self, values):
        """Quadrature of values sampled on this basis's grid."""
        return float(np.asarray(values) @ self.weights)

    def eval_mode(self, k, s):
        """Normalized (psi_k, psi_k') at arbitrary s in [0, 1]; k is 1-based."""
        if not 1 <= k <= self.k_max:
            raise ValueError(f"mode k={k} outside basis (k_max={self.k_max})")
        val, der = eval_eigenfunction(self.xi[k - 1], s)
        scale = self._phi_norms[k - 1]
        return val / scale, der / scale

    def project(self, values):
        """Coefficients <values, psi_k> on the quadrature grid, plus L2 tail mass.

        Returns (coeffs, tail) where tail = ||values||^2 - sum coeffs^2,
        the squared L2 mass outside the truncated basis.
        """
        values = np.asarray(values, dtype=float)
        coeffs = self.psi @ (self.weights * values)
        total = float(values @ (self.weights * values))
        return coeffs, total - float(coeffs @ coeffs)

    def check_invariants(self, tol_root=1e-12, tol_norm=1e-10, tol_bc=1e-8, tol_s=1e-8):
        """Raise AssertionError if any structural invariant fails."""
        assert np.all(np.abs(root_residual(self.xi)) < tol_root)
        assert np.all(np.diff(self.xi) > 0)
        norms = np.sqrt((self.psi ** 2) @ self.weights)
        assert np.all(np.abs(norms - 1.0) < tol_norm)
        for k in range(1, self.k_max + 1):
            v0, d0 = self.eval_mode(k, np.array([0.0, 1.0]))
            assert np.all(np.abs(v0) < tol_bc) and np.all(np.abs(d0) < tol_bc)
        # parity about s = 1/2: even for odd k, odd for even k
        flipped = self.psi[:, ::-1]
        for k in range(1, self.k_max + 1):
            sign = 1.0 if k % 2 == 1 else -1.0
            assert np.max(np.abs(self.psi[k - 1] - sign * flipped[k - 1])) < tol_bc
        assert np.max(np.abs(self.S + self.S.T)) < tol_s
        same_parity = (np.add.outer(np.arange(self.k_max), np.arange(self.k_max)) % 2) == 0
        assert np.max(np.abs(self.S[same_parity])) < tol_s
        return True


def coupling_matrix(psi, dpsi, weights):
    """S_{kl} = int psi_k (psi_l)' ds on the quadrature grid.

    The diagonal is zeroed exactly: int psi psi' = [psi^2/2] at clamped ends = 0.
    """
    S = psi @ (weights[None, :] * dpsi).T
    np.fill_diagonal(S, 0.0)
    return S


def build_basis(k_max, n_quad=20001):
    """Construct an EigenBasis with `k_max` modes.

    n_quad defaults to 20,001: Simpson error scales like (h * 2 xi_k)^4 and the
    S-matrix parity/antisymmetry checks at k_max = 12 need ~1e-10.
    """
    if n_quad % 2 == 0:
        raise ValueError("n_quad must be odd for composite Simpson")
    xi = find_roots(k_max)
    lam = xi ** 4
    s_grid = np.linspace(0.0, 1.0, n_quad)
    weights = simpson_weights(n_quad)
    psi = np.empty((k_max, n_quad))
    dpsi = np.empty((k_max, n_quad))
    phi_norms = np.empty(k_max)
    for k in range(k_max):
        v, d = eval_eigenfunction(xi[k], s_grid)
        nrm = np.sqrt(float((v * v) @ weights))
        phi_norms[k] = nrm
        psi[k] = v / nrm
        dpsi[k] = d / nrm
    # paper-scale norm ||psi_hat|| = cosh(xi) * ||psi_hat/cosh(xi)||
    norm_factors = np.cosh(xi) * phi_norms
    S = coupling_matrix(psi, dpsi, weights)
    return EigenBasis(k_max, xi, lam, s_grid, weights, psi, dpsi, norm_factors, S, phi_norms)


def eigenfunction_residual(basis, k, n_grid=4001):
    """Relative interior residual of the 4th finite difference against lam*psi.

    Second-order stencil; used by the grid-refinement convergence check.
    """
    s = np.linspace(0.0, 1.0, n_grid)
    h = s[1] - s[0]
    v, _ = basis.eval_mode(k, s)
    d4 = (v[:-4] - 4 * v[1:-3] + 6 * v[2:-2] - 4 * v[3:-1] + v[4:]) / h ** 4
    target = basis.lam[k - 1] * v[2:-2]
    return float(np.max(np.abs(d4 - target)) / np.max(np.abs(target)))
