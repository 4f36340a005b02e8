"""Shared scenario builders and closed-form quadrature oracles.

The oracles never touch the Mellin-Barnes route: they integrate the
closed-form hop densities/CDFs directly, so kernel-vs-oracle agreement is
a genuine two-route cross-check.
"""
import math

import numpy as np
import pytest
from hypothesis import settings
from scipy.integrate import quad, simpson
from scipy.special import gammaln

from thzrelay.analytics import compile_link, end_to_end_pdf
from thzrelay.channels import (
    AlphaMuParams,
    PointingErrorParams,
    budget_from_avg_snrs,
    db_to_linear,
    snr_cdf_rf,
    snr_cdf_thz,
    snr_pdf_rf,
    snr_pdf_thz,
)
from thzrelay.montecarlo import Scenario

settings.register_profile("suite", deadline=None, max_examples=50)
settings.load_profile("suite")


def make_scenario(n, snr_db, rf=(1.0, 1.0), thz=(2.0, 2.6), phi=4.0, relay_c=None,
                  snr_thz_db=None):
    """Uniform-branch scenario with equal hop SNRs unless told otherwise."""
    thz_db = snr_db if snr_thz_db is None else snr_thz_db
    return Scenario.uniform(
        n,
        AlphaMuParams(*rf),
        AlphaMuParams(*thz),
        PointingErrorParams(phi=phi),
        budget_from_avg_snrs(
            db_to_linear(snr_db), db_to_linear(thz_db), relay_c=relay_c
        ),
    )


GAMMA_TH = db_to_linear(5.0)

# regression bundle roster shared by the density-normalization and
# analytics-vs-simulation grids
BUNDLES = {
    "n1_rayleigh": dict(n=1, rf=(1.0, 1.0), thz=(2.0, 2.6), phi=4.0),
    "n5_rayleigh": dict(n=5, rf=(1.0, 1.0), thz=(2.0, 2.6), phi=4.0),
    "n2_nakagami": dict(n=2, rf=(2.0, 1.2), thz=(2.0, 2.6), phi=14.0625),
    "n1_thzlim": dict(n=1, rf=(2.0, 2.0), thz=(1.0, 1.5), phi=3.0),
    "n3_fixedc": dict(n=3, rf=(1.5, 1.5), thz=(1.5, 1.5), phi=6.25, relay_c=50.0),
}


def oracle_outage(gamma_th, scenario):
    """P(end-to-end SNR <= gamma_th) by hop decomposition.

    Conditioning on the excess first-hop SNR e = g_r - gamma_th > 0, the link
    fails iff the second hop satisfies g_t <= gamma_th C / e.
    """
    link = compile_link(scenario)
    head = float(snr_cdf_rf(gamma_th, link.rf, link.avg_snr_rf))

    def integrand(t):
        e = math.exp(t)
        f_r = float(snr_pdf_rf(gamma_th + e, link.rf, link.avg_snr_rf))
        if f_r == 0.0:
            return 0.0
        f_t = float(snr_cdf_thz(gamma_th * link.relay_c / e, link.thz,
                                scenario.pointing, link.avg_snr_thz))
        return f_r * f_t * e

    lo = math.log(gamma_th) - 45.0
    hi = math.log(link.avg_snr_rf) + 12.0
    tail, _ = quad(integrand, lo, hi, limit=500, epsabs=1e-13, epsrel=1e-11)
    return head + tail


def oracle_ber(mod, scenario):
    """Average BER as the (p, q)-weight integral over the outage curve."""

    def integrand(t):
        g = math.exp(t)
        w = mod.q**mod.p * g**mod.p * math.exp(-mod.q * g - gammaln(mod.p)) / 2.0
        return w * oracle_outage(g, scenario)

    hi = math.log(200.0 / mod.q)
    val, _ = quad(integrand, -40.0, hi, limit=200, epsabs=1e-12, epsrel=1e-9)
    return val


def oracle_capacity(scenario):
    """E[log2(1 + g)] as the survival-function integral."""
    link = compile_link(scenario)

    def integrand(t):
        x = math.exp(t)
        return (1.0 - oracle_outage(x, scenario)) / (1.0 + x) * x

    hi = math.log(max(link.avg_snr_rf, link.avg_snr_thz)) + 14.0
    val, _ = quad(integrand, -40.0, hi, limit=200, epsabs=1e-12, epsrel=1e-9)
    return val / math.log(2.0)


def oracle_outage_no_pointing(gamma_th, scenario):
    """Second route for the pointing-free limit: the THz hop is a plain
    alpha-mu SNR, so its density reuses the first-hop closed form."""
    link = compile_link(scenario)

    def integrand(t):
        g2 = math.exp(t)
        f_t = float(snr_pdf_rf(g2, link.thz, link.avg_snr_thz))
        if f_t == 0.0:
            return 0.0
        scaled = gamma_th * (g2 + link.relay_c) / g2
        return f_t * float(snr_cdf_rf(scaled, link.rf, link.avg_snr_rf)) * g2

    center = math.log(link.avg_snr_thz)
    val, _ = quad(integrand, center - 60.0, center + 30.0, limit=400,
                  epsabs=1e-13, epsrel=1e-11)
    return val


def simpson_pdf_mass(scenario, nodes=81):
    """Integral of the end-to-end density over its support, fixed Simpson."""
    link = compile_link(scenario)
    ts = np.linspace(math.log(1e-8), math.log(link.avg_snr_rf) + 9.0, nodes)
    zs = np.exp(ts)
    fs = np.asarray(end_to_end_pdf(zs, scenario)) * zs
    return float(simpson(fs, x=ts))


@pytest.fixture(scope="session")
def golden_scenarios():
    from thzrelay.channels import link_budget

    return {
        "fig2a_n1_20db": make_scenario(1, 20.0),
        "fig2a_n3_30db": make_scenario(3, 30.0),
        "fig2b_n2_25db": make_scenario(2, 25.0, rf=(2.0, 1.2), phi=14.0625),
        "thzlim_n1_15db": make_scenario(1, 15.0, rf=(2.0, 2.0), thz=(1.0, 1.5), phi=3.0),
        "fig2c_75m_10dbm": Scenario.uniform(
            1,
            AlphaMuParams(1.5, 1.5),
            AlphaMuParams(1.5, 1.5),
            PointingErrorParams(phi=36.0),
            link_budget(10.0, rf_distance_m=75.0, relay_c=7.0e6),
        ),
    }
