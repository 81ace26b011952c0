"""Radially symmetric self-similar profiles of u_t = Δ log u.

A profile ψ = ψ_λ solves

    (ψ'/ψ)' + (n-1)/r · ψ'/ψ + α ψ + β r ψ' = 0,    ψ(0) = λ, ψ'(0) = 0,

and for α = 2β it generates the exact solution
φ_λ(x, t) = exp(-2βt) ψ_λ(exp(-βt) x).  Multiplying the ODE by r^{n-1} and
integrating once gives the non-singular first-order form

    ψ' = -β r ψ² + (nβ - α) ψ M / r^{n-1},    M' = r^{n-1} ψ,

which is what is integrated here.  For r > 1 the same system is advanced in
s = log r through the scaled pair p = r²ψ, q = M / r^{n-2}:

    dp/ds = p (2 - β p + (nβ - α) q),    dq/ds = p - (n-2) q,

which is autonomous and keeps both unknowns O(log r).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from . import _dopri
from .radial import mixed_radii, shell_measures

NODES_PER_DECADE = 64
SERIES_START = 1e-3  # r0 = SERIES_START / sqrt(lambda)
DEFAULT_TOL = 1e-10
NOISE_FACTOR = 10.0


class ProfileError(RuntimeError):
    """Profile integration failed or produced an invariant violation."""


@dataclass(frozen=True)
class ProfileParams:
    n: int
    alpha: float
    beta: float
    lam: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"dimension n must be an integer >= 3, got {self.n}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")

    @classmethod
    def self_similar(cls, n: int, beta: float, lam: float) -> ProfileParams:
        """Parameters with α = 2β, the case that yields exact solutions."""
        return cls(n=n, alpha=2.0 * beta, beta=beta, lam=lam)

    @property
    def is_self_similar(self) -> bool:
        return math.isclose(self.alpha, 2.0 * self.beta, rel_tol=1e-14)

    @property
    def monotone_in_lambda(self) -> bool:
        """Whether n·β > α > 0, the hypothesis for ordering in λ."""
        return self.n * self.beta > self.alpha > 0

    def with_lambda(self, lam: float) -> ProfileParams:
        return ProfileParams(self.n, self.alpha, self.beta, lam)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    params: ProfileParams
    radii: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    moment: np.ndarray
    r_max: float
    tol: float = float("nan")
    stats: dict = field(default_factory=dict)

    @cached_property
    def _spline(self) -> CubicHermiteSpline:
        # log ψ against log(1 + r): ψ spans many decades, its log is smooth
        x = np.log1p(self.radii)
        y = np.log(self.values)
        dydx = (1.0 + self.radii) * self.derivs / self.values
        return CubicHermiteSpline(x, y, _limit_slopes(x, y, dydx))

    def __call__(self, r):
        return eval_profile(self, r)[0]


def _limit_slopes(x: np.ndarray, y: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Fritsch-Carlson limiting so the Hermite cubic is monotone on every
    interval where the data are.  Exact ODE slopes pass through unchanged
    except in pathological cases."""
    m = m.copy()
    delta = np.diff(y) / np.diff(x)
    for i, d in enumerate(delta):
        if d == 0.0:
            m[i] = m[i + 1] = 0.0
            continue
        for j in (i, i + 1):
            if m[j] * d < 0:
                m[j] = 0.0
            elif abs(m[j]) > 3.0 * abs(d):
                m[j] = 3.0 * d
    return m


def _profile_nodes(r0: float, r_max: float) -> np.ndarray:
    k_lo = math.floor(NODES_PER_DECADE * math.log10(r0)) + 1
    k_hi = math.ceil(NODES_PER_DECADE * math.log10(r_max)) - 1
    geo = 10.0 ** (np.arange(k_lo, k_hi + 1) / NODES_PER_DECADE)
    geo = geo[(geo > r0 * (1 + 1e-9)) & (geo < r_max * (1 - 1e-9))]
    return np.concatenate([[r0], geo, [r_max]])


def solve_profile(params: ProfileParams, r_max: float, tol: float = DEFAULT_TOL) -> RadialProfile:
    """Integrate the profile ODE from the origin out to ``r_max``.

    The singular point r = 0 is bypassed with the series
    ψ = λ - αλ²/(2n) r² + O(r⁴) at r0 = 1e-3/√λ.  Nodes are stored at
    64 per decade (plus r = 0, r0, 1 and r_max); the integrator lands on each
    node exactly.

    Raises
    ------
    ProfileError
        If the step size collapses (e.g. ψ cannot be kept positive), if the
        moment overflows, or if the computed profile breaks a sign law.
    """
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    if not tol > 0:
        raise ValueError("tol must be positive")
    n, alpha, beta, lam = params.n, params.alpha, params.beta, params.lam
    gamma = n * beta - alpha
    r0 = SERIES_START / math.sqrt(lam)
    if r_max <= r0:
        raise ValueError(f"r_max must exceed the series start r0={r0:.3g}")

    a2 = -alpha * lam**2 / (2 * n)
    v0 = lam + a2 * r0**2
    M0 = lam * r0**n / n + a2 * r0 ** (n + 2) / (n + 2)

    nodes = _profile_nodes(r0, r_max)
    switch = max(1.0, r0)
    inner = nodes[nodes <= switch]
    outer = nodes[nodes >= switch]

    def rhs_r(r, y):
        v, M = y
        return np.array([-beta * r * v * v + gamma * v * M / r ** (n - 1), r ** (n - 1) * v])

    def rhs_s(s, y):
        p, q = y
        return np.array([p * (2.0 - beta * p + gamma * q), p - (n - 2) * q])

    def positive(y):
        return y[0] > 0.0 and y[1] > 0.0

    stats = {"accepted": 0, "rejected": 0}
    try:
        if inner.size > 1:
            ys_in, st = _dopri.integrate(
                rhs_r, inner, [v0, M0], rtol=tol, atol=[tol * lam, 0.0],
                admissible=positive, h0=r0,
            )
            _merge(stats, st)
        else:
            ys_in = np.array([[v0, M0]])
        if outer.size > 1:
            v1, M1 = ys_in[-1]
            r1 = outer[0]
            s_nodes = np.log(outer)
            y1 = [r1**2 * v1, M1 / r1 ** (n - 2)]
            # p = r^2 psi grows without bound when alpha < 2 beta, making the system stiff
            if alpha < 2.0 * beta and not params.is_self_similar:
                ys_s, st = _stiff_outer(rhs_s, s_nodes, y1, tol, lam, beta, gamma, n)
            else:
                ys_s, st = _dopri.integrate(rhs_s, s_nodes, y1, rtol=tol,
                                            atol=[tol * lam, 0.0], admissible=positive)
            _merge(stats, st)
            p, q = ys_s[1:, 0], ys_s[1:, 1]
            r_out = outer[1:]
            with np.errstate(over="raise"):
                try:
                    v_out = p / r_out**2
                    M_out = q * r_out ** (n - 2)
                except FloatingPointError as exc:
                    raise ProfileError(
                        f"moment overflow: r_max={r_max:g} too large for floating range"
                    ) from exc
            dv_out = (p * (2.0 - beta * p + gamma * q) - 2.0 * p) / r_out**3
        else:
            r_out = v_out = M_out = dv_out = np.empty(0)
    except _dopri.IntegrationError as exc:
        raise ProfileError(f"profile integration failed for {params}: {exc}") from exc

    v_in, M_in = ys_in[:, 0], ys_in[:, 1]
    dv_in = rhs_r(inner, (v_in, M_in))[0]
    radii = np.concatenate([[0.0], inner, r_out])
    values = np.concatenate([[lam], v_in, v_out])
    derivs = np.concatenate([[0.0], dv_in, dv_out])
    moment = np.concatenate([[0.0], M_in, M_out])
    if not np.all(np.isfinite(moment)):
        raise ProfileError(f"moment overflow: r_max={r_max:g} too large for floating range")

    profile = RadialProfile(params, radii, values, derivs, moment, float(r_max), tol, stats)
    check_profile_invariants(profile)
    return profile


def _stiff_outer(rhs, s_nodes, y1, tol, lam, beta, gamma, n):
    """Implicit (Radau IIA) integration of the log-r system.

    With α < 2β the quantity p = r²ψ grows without bound and the system
    relaxes onto a slow manifold at a rate ~βp, so the explicit pair needs
    ever smaller steps.
    """
    def jac(s, y):
        p, q = y
        return np.array([[2.0 - 2.0 * beta * p + gamma * q, gamma * p], [1.0, -(n - 2.0)]])

    sol = solve_ivp(rhs, (s_nodes[0], s_nodes[-1]), y1, method="Radau", t_eval=s_nodes,
                    rtol=tol, atol=[tol * lam, 1e-300], jac=jac)
    if not sol.success or np.any(sol.y <= 0):
        raise _dopri.IntegrationError(sol.message)
    return sol.y.T, {"rhs_evals": int(sol.nfev), "jac_evals": int(sol.njev)}


def _merge(total: dict, st: dict) -> None:
    for key, val in st.items():
        total[key] = total.get(key, 0) + val


def derivative_noise(profile: RadialProfile) -> np.ndarray:
    """Integration noise floor of the stored ψ'.

    ψ' is the sum of -βrψ² and (nβ-α)ψM/r^{n-1}; when these nearly cancel
    (α < 0 at large r) an error of order tol in ψ and M is amplified.  Signs
    smaller than this floor are not resolved by the computation.
    """
    p = profile.params
    r, v, M = profile.radii, profile.values, profile.moment
    tol = profile.tol if math.isfinite(profile.tol) else DEFAULT_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.abs(p.beta * r * v * v) + np.abs((p.n * p.beta - p.alpha) * v * M
                                                    / r ** (p.n - 1))
    scale[0] = 0.0
    return NOISE_FACTOR * tol * scale


def sign_violations(profile: RadialProfile) -> dict[str, int]:
    """Count nodes breaking the sign laws of the profile.

    Signs of ψ' and of ψ + (β/α)rψ' count as violated only when they are
    wrong by more than :func:`derivative_noise`.
    """
    p = profile.params
    noise = derivative_noise(profile)
    out = {
        "nonpositive_values": int(np.sum(profile.values <= 0)),
        "moment_decreasing": int(np.sum(np.diff(profile.moment) < 0)),
        "negative_moment": int(np.sum(profile.moment < 0)),
    }
    if p.alpha > 0:
        out["nonnegative_derivs"] = int(np.sum(profile.derivs[1:] >= noise[1:]))
    elif p.alpha < 0:
        out["nonpositive_derivs"] = int(np.sum(profile.derivs[1:] <= -noise[1:]))
    if p.alpha != 0:
        combo = profile.values + p.beta / p.alpha * profile.radii * profile.derivs
        floor = abs(p.beta / p.alpha) * profile.radii * noise
        out["v_plus_rv_nonpositive"] = int(np.sum(combo <= -floor))
    return out


def check_profile_invariants(profile: RadialProfile) -> None:
    if profile.values[0] != profile.params.lam or profile.derivs[0] != 0.0:
        raise ProfileError("initial condition not reproduced at r = 0")
    if np.any(np.diff(profile.radii) <= 0):
        raise ProfileError("radii not strictly increasing")
    bad = {k: v for k, v in sign_violations(profile).items() if v}
    if bad:
        raise ProfileError(f"profile invariants violated: {bad}")


def eval_profile(profile: RadialProfile, r):
    """Interpolated (ψ(r), ψ'(r)); exact at the stored nodes.

    Accepts scalars or arrays.  Raises ``ValueError`` outside [0, r_max].
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or np.any(r_arr > profile.r_max * (1 + 1e-12)):
        raise ValueError(
            f"radius outside profile range [0, {profile.r_max:g}]: "
            f"min={r_arr.min():g}, max={r_arr.max():g}"
        )
    r_arr = np.minimum(r_arr, profile.r_max)
    x = np.log1p(r_arr)
    spl = profile._spline
    psi = np.exp(spl(x))
    dpsi = psi * spl(x, 1) / (1.0 + r_arr)
    # hit the nodes bit-for-bit
    idx = np.searchsorted(profile.radii, r_arr)
    idx = np.clip(idx, 0, profile.radii.size - 1)
    on_node = profile.radii[idx] == r_arr
    psi = np.where(on_node, profile.values[idx], psi)
    dpsi = np.where(on_node, profile.derivs[idx], dpsi)
    if r_arr.ndim == 0:
        return float(psi), float(dpsi)
    return psi, dpsi


def rescaled_profile(profile_psi1: RadialProfile, lam: float, r):
    """λ ψ₁(√λ r): the profile with center value λ built from the λ = 1 one."""
    p = profile_psi1.params
    if p.lam != 1.0 or not p.is_self_similar:
        raise ValueError("rescaling needs the lambda = 1 profile with alpha = 2 beta")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    arg = math.sqrt(lam) * np.asarray(r, dtype=float)
    if np.any(arg > profile_psi1.r_max * (1 + 1e-12)):
        raise ValueError(
            f"sqrt(lambda)*r exceeds r_max={profile_psi1.r_max:g} of the lambda=1 profile"
        )
    psi, _ = eval_profile(profile_psi1, arg)
    return lam * psi


@dataclass(frozen=True)
class AsymptoticDiagnostics:
    r: np.ndarray
    ratio_log: np.ndarray
    flux_ratio: np.ndarray
    log_slope: np.ndarray
    extrapolated_ratio_log: float
    extrapolated_flux: float
    corrected_slope: float
    fit_window: tuple[float, float]

    def rows(self):
        return zip(self.r, self.ratio_log, self.flux_ratio, self.log_slope)


def asymptotic_diagnostics(profile: RadialProfile, sample_radii) -> AsymptoticDiagnostics:
    """Tail ratios of a profile and their extrapolated limits.

    Per radius: r²ψ/log r, w(r)/r² with w = r⁴(ψ + ½rψ'), and 2 + rψ'/ψ.

    ``extrapolated_ratio_log`` is the least-squares slope of r²ψ against
    log r over the top decade of the samples.  ``extrapolated_flux`` fits
    w/r² = a + b/log r over the same window and reports a.
    ``corrected_slope`` regresses r²ψ on log r - ½ log log r instead, the
    leading-order tail of the α = 2β profile; it removes the O(1/log r) bias
    carried by the plain slope.
    """
    r = np.sort(np.asarray(sample_radii, dtype=float))
    if r.size < 3:
        raise ValueError("need at least 3 sample radii")
    if r[0] <= 1.0 or r[-1] > profile.r_max * (1 + 1e-12):
        raise ValueError(f"sample radii must lie in (1, {profile.r_max:g}]")
    psi, dpsi = eval_profile(profile, r)
    logr = np.log(r)
    r2psi = r**2 * psi
    ratio_log = r2psi / logr
    flux = r**2 * (psi + 0.5 * r * dpsi)
    log_slope = 2.0 + r * dpsi / psi

    window = r >= r[-1] / 10.0 * (1 - 1e-12)
    if window.sum() < 3:
        window = np.zeros_like(r, dtype=bool)
        window[-3:] = True
    slope = np.polyfit(logr[window], r2psi[window], 1)[0]
    flux_fit = np.polyfit(1.0 / logr[window], flux[window], 1)
    corr = np.polyfit(logr[window] - 0.5 * np.log(logr[window]), r2psi[window], 1)[0]
    return AsymptoticDiagnostics(
        r=r, ratio_log=ratio_log, flux_ratio=flux, log_slope=log_slope,
        extrapolated_ratio_log=float(slope), extrapolated_flux=float(flux_fit[1]),
        corrected_slope=float(corr),
        fit_window=(float(r[window][0]), float(r[window][-1])),
    )


def quadrature_radii(R: float, inner_h: float = 1e-2, nodes_per_decade: int = 256) -> np.ndarray:
    return mixed_radii(R, inner_h, nodes_per_decade)


def difference_mass(profile_a: RadialProfile, profile_b: RadialProfile, R: float) -> float:
    """ω_n ∫₀^R ρ^{n-1} (ψ_a - ψ_b) dρ by shell-measure quadrature.

    ``profile_a`` must have the larger center value; all other parameters
    must agree.
    """
    pa, pb = profile_a.params, profile_b.params
    if (pa.n, pa.alpha, pa.beta) != (pb.n, pb.alpha, pb.beta):
        raise ValueError(f"mismatched profile parameters: {pa} vs {pb}")
    if not pa.lam > pb.lam:
        raise ValueError("profile_a must have the larger lambda")
    if R < 0 or R > min(profile_a.r_max, profile_b.r_max) * (1 + 1e-12):
        raise ValueError("R must lie within both profile ranges")
    if R == 0:
        return 0.0
    radii = quadrature_radii(R)
    weights = shell_measures(radii, pa.n)
    diff = eval_profile(profile_a, radii)[0] - eval_profile(profile_b, radii)[0]
    return float(np.dot(weights, diff))


def self_similar_eval(profile: RadialProfile, x_radius, t):
    """φ_λ(x, t) = exp(-2βt) ψ_λ(exp(-βt)|x|)."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be nonnegative")
    beta = profile.params.beta
    scale = np.exp(-beta * np.asarray(t, dtype=float))
    psi, _ = eval_profile(profile, scale * np.asarray(x_radius, dtype=float))
    return scale**2 * psi


def barenblatt_eval(k: float, T: float, n: int, x_radius, t):
    """B_k(x, t) = 2(n-2)(T-t)_+^{n/(n-2)} / (k + (T-t)_+^{2/(n-2)} |x|²)."""
    if not (k > 0 and T > 0 and n >= 3):
        raise ValueError("need k > 0, T > 0, n >= 3")
    tau = np.maximum(T - np.asarray(t, dtype=float), 0.0)
    x2 = np.asarray(x_radius, dtype=float) ** 2
    out = 2.0 * (n - 2) * tau ** (n / (n - 2)) / (k + tau ** (2.0 / (n - 2)) * x2)
    return float(out) if np.ndim(out) == 0 else out


def save_profile_csv(profile: RadialProfile, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "psi", "dpsi", "moment"])
        for row in zip(profile.radii, profile.values, profile.derivs, profile.moment):
            w.writerow([f"{x:.17g}" for x in row])
    return path


def load_profile_csv(path, params: ProfileParams) -> RadialProfile:
    """Read a profile written by :func:`save_profile_csv`.

    The file carries no parameters, so they are supplied by the caller and
    checked against the stored center value.
    """
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    with open(path) as fh:
        header = fh.readline().strip()
    if header != "r,psi,dpsi,moment":
        raise ValueError(f"unexpected profile CSV header {header!r}")
    radii, values, derivs, moment = data.T
    if values[0] != params.lam:
        raise ValueError(f"stored psi(0)={values[0]!r} does not match lambda={params.lam!r}")
    profile = RadialProfile(params, radii, values, derivs, moment, float(radii[-1]))
    check_profile_invariants(profile)
    return profile


@lru_cache(maxsize=64)
def cached_profile(n: int, beta: float, lam: float, r_max: float, tol: float = DEFAULT_TOL) -> RadialProfile:
    """Memoised α = 2β profile; profiles are immutable so sharing is safe."""
    return solve_profile(ProfileParams.self_similar(n, beta, lam), r_max, tol)
