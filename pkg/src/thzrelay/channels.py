"""Channel primitives shared by the analytic and Monte Carlo paths.

Covers the generalized alpha-mu fading envelope, the misalignment (pointing
error) attenuation of the line-of-sight hop, exact SNR densities for both
hops, and the deterministic link budgets (path gain, thermal noise, average
SNR) used by the bundled scenario presets.

The SNR of a hop is gamma = gbar * W**2 with W the fading envelope (times the
pointing attenuation on the second hop) and gbar the budget scale
P * |H|^2 / sigma_n^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.special import exp1, gammainc, gammaincc, gammaln

from thzrelay.specfun import (
    FoxHUnivariateSpec,
    GammaTriple,
    fox_h_univariate,
)

__all__ = [
    "AlphaMuParams",
    "PointingErrorParams",
    "LinkBudget",
    "sample_alpha_mu",
    "sample_pointing",
    "envelope_pdf",
    "snr_pdf_rf",
    "snr_cdf_rf",
    "snr_pdf_thz",
    "snr_cdf_thz",
    "thz_snr_kernel",
    "upper_gamma",
    "path_gain_rf",
    "path_gain_thz",
    "noise_power_w",
    "link_budget",
    "budget_from_avg_snrs",
    "dbm_to_watt",
    "db_to_linear",
    "linear_to_db",
]


@dataclass(frozen=True)
class AlphaMuParams:
    """Alpha-mu envelope: R**alpha is Gamma(mu) with mean omega**alpha.

    ``alpha`` is the nonlinearity exponent, ``mu`` the number of multipath
    clusters, ``omega`` the alpha-root-mean envelope scale.  Special cases:
    (2, 1) Rayleigh, (2, m) Nakagami-m, (a, 1) Weibull.
    """

    alpha: float
    mu: float
    omega: float = 1.0

    def __post_init__(self) -> None:
        for name in ("alpha", "mu", "omega"):
            value = float(getattr(self, name))
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"AlphaMuParams.{name} must be positive, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def a_const(self) -> float:
        """Envelope PDF normalization alpha*mu**mu / (omega**(alpha*mu) Gamma(mu))."""
        log_a = (
            math.log(self.alpha)
            + self.mu * math.log(self.mu)
            - self.alpha * self.mu * math.log(self.omega)
            - gammaln(self.mu)
        )
        return math.exp(log_a)

    @property
    def b_const(self) -> float:
        """Exponential rate mu / omega**alpha of R**alpha."""
        return self.mu / self.omega**self.alpha

    def envelope_moment(self, k: float) -> float:
        """E[R**k] = omega**k Gamma(mu + k/alpha) / (mu**(k/alpha) Gamma(mu))."""
        log_m = (
            k * math.log(self.omega)
            + gammaln(self.mu + k / self.alpha)
            - (k / self.alpha) * math.log(self.mu)
            - gammaln(self.mu)
        )
        return math.exp(log_m)

    def scaled(self, factor: float) -> "AlphaMuParams":
        """Envelope of factor*R: alpha-mu is closed under positive scaling."""
        return AlphaMuParams(self.alpha, self.mu, self.omega * factor)


@dataclass(frozen=True)
class PointingErrorParams:
    """Misalignment attenuation h_p on (0, s0] with PDF phi*h^(phi-1)/s0^phi.

    ``phi`` is the squared ratio of equivalent beam radius to twice the jitter
    standard deviation; large phi means a steady beam, phi -> infinity removes
    the impairment.  ``s0`` is the fraction of power collected at zero offset.
    ``sigma_s`` (jitter std, m) and ``w_eq`` (equivalent beam radius, m) are
    optional provenance; when both are given they must reproduce phi.
    """

    phi: float
    s0: float = 1.0
    sigma_s: float | None = None
    w_eq: float | None = None

    def __post_init__(self) -> None:
        for name in ("phi", "s0"):
            value = float(getattr(self, name))
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(
                    f"PointingErrorParams.{name} must be positive, got {value!r}"
                )
            object.__setattr__(self, name, value)
        if self.s0 > 1.0:
            raise ValueError("s0 is a collected-power fraction and cannot exceed 1")
        for name in ("sigma_s", "w_eq"):
            value = getattr(self, name)
            if value is not None:
                value = float(value)
                if not (value >= 0 and math.isfinite(value)):
                    raise ValueError(f"PointingErrorParams.{name} must be nonnegative")
                object.__setattr__(self, name, value)
        if self.sigma_s and self.w_eq:
            implied = self.w_eq**2 / (4.0 * self.sigma_s**2)
            if abs(implied - self.phi) > 1e-9 * max(self.phi, implied):
                raise ValueError(
                    f"phi={self.phi} inconsistent with w_eq**2/(4 sigma_s**2)={implied}"
                )

    @classmethod
    def from_jitter(
        cls, beam_radius_m: float, jitter_std_m: float, s0: float = 1.0
    ) -> "PointingErrorParams":
        """phi = w_eq**2 / (4 sigma_s**2) for beam radius w_eq and jitter sigma_s."""
        if beam_radius_m <= 0 or jitter_std_m <= 0:
            raise ValueError("beam radius and jitter must be positive")
        return cls(
            phi=beam_radius_m**2 / (4.0 * jitter_std_m**2),
            s0=s0,
            sigma_s=jitter_std_m,
            w_eq=beam_radius_m,
        )


def sample_alpha_mu(
    params: AlphaMuParams, size, rng: np.random.Generator
) -> np.ndarray:
    """Draw envelopes: R = G**(1/alpha) with G ~ Gamma(mu, omega**alpha/mu)."""
    g = rng.gamma(shape=params.mu, scale=params.omega**params.alpha / params.mu, size=size)
    return g ** (1.0 / params.alpha)


def sample_pointing(
    params: PointingErrorParams, size, rng: np.random.Generator
) -> np.ndarray:
    """Draw pointing attenuations: h_p = s0 * U**(1/phi), U uniform(0,1)."""
    return params.s0 * rng.random(size) ** (1.0 / params.phi)


def envelope_pdf(r, params: AlphaMuParams):
    """Alpha-mu envelope density A r**(alpha mu - 1) exp(-B r**alpha)."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    pos = r > 0
    rp = r[pos]
    out[pos] = (
        params.a_const
        * rp ** (params.alpha * params.mu - 1.0)
        * np.exp(-params.b_const * rp**params.alpha)
    )
    return out if out.ndim else float(out)


def snr_pdf_rf(snr, params: AlphaMuParams, avg_snr: float):
    """Density of gamma = avg_snr * R**2 for an alpha-mu envelope R."""
    if avg_snr <= 0:
        raise ValueError("avg_snr must be positive")
    snr = np.asarray(snr, dtype=float)
    out = np.zeros_like(snr)
    pos = snr > 0
    x = snr[pos]
    am = params.alpha * params.mu
    out[pos] = (
        params.a_const
        / (2.0 * avg_snr ** (am / 2.0))
        * x ** (am / 2.0 - 1.0)
        * np.exp(-params.b_const * (x / avg_snr) ** (params.alpha / 2.0))
    )
    return out if out.ndim else float(out)


def snr_cdf_rf(snr, params: AlphaMuParams, avg_snr: float):
    """CDF of gamma = avg_snr * R**2: regularized lower gamma P(mu, B (g/gbar)^(a/2))."""
    if avg_snr <= 0:
        raise ValueError("avg_snr must be positive")
    snr = np.asarray(snr, dtype=float)
    out = np.zeros_like(snr)
    pos = snr > 0
    out[pos] = gammainc(
        params.mu, params.b_const * (snr[pos] / avg_snr) ** (params.alpha / 2.0)
    )
    return out if out.ndim else float(out)


def _scaled_upper_gamma_cf(a: float, x: np.ndarray) -> np.ndarray:
    """Gamma(a, x) * x**(-a) * exp(x) by the Legendre continued fraction.

    Modified Lentz iteration; machine accuracy for x >= ~0.3 at any
    nonpositive order (iteration count grows like 50/x as x -> 0).
    """
    tiny = 1e-300
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    live = np.ones(x.shape, dtype=bool)
    for i in range(1, 501):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        np.copyto(d, tiny, where=np.abs(d) < tiny)
        c = b + an / c
        np.copyto(c, tiny, where=np.abs(c) < tiny)
        d = 1.0 / d
        delta = d * c
        h = np.where(live, h * delta, h)
        live &= np.abs(delta - 1.0) >= 1e-16
        if not live.any():
            break
    return h


def _log_scaled_upper_gamma(a: float, x: np.ndarray) -> np.ndarray:
    """log of Gamma(a, x) * x**(-a) * exp(x) for x > 0, any real order a.

    a > 0 goes through the regularized function; nonpositive orders use the
    continued fraction except at small x, where the downward recurrence
    G(a) = (x G(a+1) - 1)/a is seeded at the first order in (-1, 0] (so the
    seed never crosses a positive power of 1/x and cannot overflow).
    G(0) reverts to the exponential integral E1.
    """
    x = np.asarray(x, dtype=float)
    if a > 0:
        with np.errstate(divide="ignore"):
            return np.log(gammaincc(a, x)) + gammaln(a) - a * np.log(x) + x
    out = np.empty_like(x)
    cf = x >= 0.3
    if cf.any():
        out[cf] = np.log(np.maximum(_scaled_upper_gamma_cf(a, x[cf]), np.finfo(float).tiny))
    if not cf.all():
        xr = x[~cf]
        m = int(math.floor(-a))
        seed_order = a + m
        if abs(seed_order) < 1e-12:
            scaled = np.exp(xr + np.log(exp1(np.maximum(xr, np.finfo(float).tiny))))
        else:
            up = gammaincc(seed_order + 1.0, xr) * np.exp(
                gammaln(seed_order + 1.0) - (seed_order + 1.0) * np.log(xr) + xr
            )
            scaled = (xr * up - 1.0) / seed_order
        for j in range(1, m + 1):
            scaled = (xr * scaled - 1.0) / (seed_order - j)
        out[~cf] = np.log(np.maximum(scaled, np.finfo(float).tiny))
    return out


def upper_gamma(a: float, x) -> np.ndarray:
    """Unregularized upper incomplete gamma, valid for any real order a.

    The nonpositive-order values diverge as x -> 0 and may round to inf;
    they are never NaN.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("upper_gamma requires x >= 0")
    if a > 0:
        return gammaincc(a, x) * math.exp(gammaln(a))
    xs = np.maximum(x, np.finfo(float).tiny)
    with np.errstate(over="ignore"):
        return np.exp(_log_scaled_upper_gamma(a, xs) + a * np.log(xs) - xs)


def thz_snr_kernel(params: AlphaMuParams, pe: PointingErrorParams) -> FoxHUnivariateSpec:
    """Mellin-Barnes kernel of the pointing-impaired hop SNR density.

    Phi(s) = Gamma(phi/alpha - mu - s) Gamma(-s) / Gamma(1 + phi/alpha - mu - s),
    evaluated at y = B x**(alpha/2) / (s0**alpha gbar**(alpha/2)).
    """
    shift = pe.phi / params.alpha - params.mu
    return FoxHUnivariateSpec(
        numerator=(GammaTriple(shift, -1.0), GammaTriple(0.0, -1.0)),
        denominator=(GammaTriple(1.0 + shift, -1.0),),
    )


def _thz_argument(snr, params: AlphaMuParams, pe: PointingErrorParams, avg_snr: float):
    half_alpha = params.alpha / 2.0
    return (
        params.b_const
        * np.asarray(snr, dtype=float) ** half_alpha
        / (pe.s0**params.alpha * avg_snr**half_alpha)
    )


def snr_pdf_thz(
    snr, params: AlphaMuParams, pe: PointingErrorParams, avg_snr: float
):
    """Density of gamma = avg_snr * (R h_p)**2, via the Mellin-Barnes kernel."""
    if avg_snr <= 0:
        raise ValueError("avg_snr must be positive")
    spec = thz_snr_kernel(params, pe)
    am = params.alpha * params.mu
    log_front = (
        math.log(pe.phi)
        + math.log(params.a_const)
        - math.log(2.0 * params.alpha)
        - am * math.log(pe.s0)
        - (am / 2.0) * math.log(avg_snr)
    )
    front = math.exp(log_front)
    snr_arr = np.atleast_1d(np.asarray(snr, dtype=float))
    out = np.zeros_like(snr_arr)
    for i, x in enumerate(snr_arr):
        if x <= 0:
            continue
        y = float(_thz_argument(x, params, pe, avg_snr))
        h = fox_h_univariate(spec, y)
        out[i] = front * x ** (am / 2.0 - 1.0) * h.value
    if np.ndim(snr) == 0:
        return float(out[0])
    return out


def snr_cdf_thz(
    snr, params: AlphaMuParams, pe: PointingErrorParams, avg_snr: float
):
    """Exact hop-SNR CDF P(mu, y) + y**(phi/alpha) Gamma(mu - phi/alpha, y) / Gamma(mu).

    Closed form obtained by integrating the pointing attenuation out of the
    conditional envelope CDF; used as the Monte Carlo conditioning function
    and as the independent oracle for the kernel route.
    """
    if avg_snr <= 0:
        raise ValueError("avg_snr must be positive")
    snr_arr = np.asarray(snr, dtype=float)
    scalar = snr_arr.ndim == 0
    snr_arr = np.atleast_1d(snr_arr)
    out = np.zeros_like(snr_arr)
    pos = snr_arr > 0
    if np.any(pos):
        y = _thz_argument(snr_arr[pos], params, pe, avg_snr)
        # past y ~ 600 both terms have saturated: P(mu, y) = 1 exactly in
        # doubles and the correction underflows, while y**ratio may overflow
        live = y < 600.0
        ratio = pe.phi / params.alpha
        tail_order = params.mu - ratio
        values = np.ones_like(y)
        yl = np.maximum(y[live], np.finfo(float).tiny)
        # tail term y**ratio Gamma(mu - ratio, y) / Gamma(mu) assembled in
        # logs: the two factors overflow/underflow separately for small y
        log_tail = (
            params.mu * np.log(yl)
            - yl
            + _log_scaled_upper_gamma(tail_order, yl)
            - gammaln(params.mu)
        )
        values[live] = gammainc(params.mu, yl) + np.exp(log_tail)
        out[pos] = values
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# deterministic link budgets
# ---------------------------------------------------------------------------


def dbm_to_watt(power_dbm: float) -> float:
    return 10.0 ** ((power_dbm - 30.0) / 10.0)


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


def path_gain_rf(
    distance_m: float, freq_hz: float, antenna_gain_dbi: float = 0.0
) -> float:
    """Linear power gain of the access link (urban micro path loss model).

    Loss in dB is 32.4 + 17.3 log10(d/m) + 20 log10(f/GHz); the supplied
    antenna gain is the combined transmit+receive figure in dB.  The loss
    model is calibrated for distances between 1 m and 10 km.
    """
    if not 1.0 <= distance_m <= 1e4:
        raise ValueError(f"distance {distance_m} m outside the model range [1, 1e4] m")
    if freq_hz <= 0:
        raise ValueError("frequency must be positive")
    loss_db = (
        32.4
        + 17.3 * math.log10(distance_m)
        + 20.0 * math.log10(freq_hz / 1e9)
    )
    return db_to_linear(antenna_gain_dbi - loss_db)


def path_gain_thz(
    distance_m: float,
    freq_hz: float,
    antenna_gain_dbi: float = 0.0,
    absorption_per_m: float = 2.8e-4,
) -> float:
    """Amplitude response of the line-of-sight hop.

    h = (c g / (4 pi f d)) exp(-kappa d / 2) with g the combined
    transmit+receive antenna power gain converted to the amplitude domain
    (10**(G/20)) and kappa the molecular absorption coefficient; the power
    gain is the square of the returned value.
    """
    if distance_m <= 0 or freq_hz <= 0:
        raise ValueError("distance and frequency must be positive")
    g = db_to_linear(antenna_gain_dbi / 2.0)
    spreading = SPEED_OF_LIGHT * g / (4.0 * math.pi * freq_hz * distance_m)
    return spreading * math.exp(-absorption_per_m * distance_m / 2.0)


def noise_power_w(bandwidth_hz: float, noise_figure_db: float = 5.0) -> float:
    """Thermal noise floor kT*B*F with kT = -174 dBm/Hz."""
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    noise_dbm = -174.0 + 10.0 * math.log10(bandwidth_hz) + noise_figure_db
    return dbm_to_watt(noise_dbm)


@dataclass(frozen=True)
class LinkBudget:
    """Transmit power, per-hop power gains and noise variances, relay constant.

    ``relay_c`` left as None selects the semi-blind fixed-gain choice
    C = 1 + E[gamma_r], resolved when a scenario is compiled (the expectation
    depends on the receive array).
    """

    tx_power_w: float
    rf_path_gain: float
    thz_path_gain: float
    rf_noise_var_w: float
    thz_noise_var_w: float
    relay_c: float | None = None

    def __post_init__(self) -> None:
        for name in (
            "tx_power_w",
            "rf_path_gain",
            "thz_path_gain",
            "rf_noise_var_w",
            "thz_noise_var_w",
        ):
            value = float(getattr(self, name))
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"LinkBudget.{name} must be positive, got {value!r}")
            object.__setattr__(self, name, value)
        if self.relay_c is not None and not self.relay_c > 0:
            raise ValueError("relay_c must be positive when given")

    @property
    def avg_snr_rf(self) -> float:
        return self.tx_power_w * self.rf_path_gain / self.rf_noise_var_w

    @property
    def avg_snr_thz(self) -> float:
        return self.tx_power_w * self.thz_path_gain / self.thz_noise_var_w


def link_budget(
    tx_power_dbm: float,
    *,
    rf_distance_m: float,
    rf_freq_hz: float = 6e9,
    rf_antenna_gain_dbi: float = 52.0,
    rf_bandwidth_hz: float = 20e6,
    rf_noise_figure_db: float = 5.0,
    thz_distance_m: float = 50.0,
    thz_freq_hz: float = 0.275e12,
    thz_antenna_gain_dbi: float = 110.0,
    thz_bandwidth_hz: float = 10e9,
    thz_noise_figure_db: float = 5.0,
    thz_absorption_per_m: float = 2.8e-4,
    relay_c: float | None = None,
) -> LinkBudget:
    """Assemble both hop budgets from geometry; defaults match the demo layout."""
    amplitude = path_gain_thz(
        thz_distance_m, thz_freq_hz, thz_antenna_gain_dbi, thz_absorption_per_m
    )
    return LinkBudget(
        tx_power_w=dbm_to_watt(tx_power_dbm),
        rf_path_gain=path_gain_rf(rf_distance_m, rf_freq_hz, rf_antenna_gain_dbi),
        thz_path_gain=amplitude**2,
        rf_noise_var_w=noise_power_w(rf_bandwidth_hz, rf_noise_figure_db),
        thz_noise_var_w=noise_power_w(thz_bandwidth_hz, thz_noise_figure_db),
        relay_c=relay_c,
    )


def budget_from_avg_snrs(
    avg_snr_rf: float, avg_snr_thz: float, relay_c: float | None = None
) -> LinkBudget:
    """Budget with unit power and noise so the average SNRs are set directly."""
    return LinkBudget(
        tx_power_w=1.0,
        rf_path_gain=avg_snr_rf,
        thz_path_gain=avg_snr_thz,
        rf_noise_var_w=1.0,
        thz_noise_var_w=1.0,
        relay_c=relay_c,
    )
