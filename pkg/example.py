#!/usr/bin/env python3
"""
Example script showing the three models on simulated data.
This can be used as a quick test to verify your setup is working.
"""

from exactmeta.bivariate import fit_ml_bivar, p_value_bivar
from exactmeta.network import basis_contrast, ci_contrast
from exactmeta.simulate import gen_bivariate, gen_network, gen_univariate
from exactmeta.univariate import ci_mu

if __name__ == "__main__":
    # Univariate: five trials, true mu = -0.8
    uni = gen_univariate(5, 0.1, seed=1).data
    interval = ci_mu(uni, B=500, seed=1)
    print(f"mu: ({interval.lower:.3f}, {interval.upper:.3f}), ess={interval.ess:.0f}")

    # Diagnostic accuracy: p-value at the true (muA, muB)
    dta = gen_bivariate(12, 0.5, 0.4, seed=1).data
    fit = fit_ml_bivar(dta)
    result = p_value_bivar(dta, (1.0, -1.0), B=200, seed=1)
    print(f"DTA estimate {fit.mu.round(3)}, p at truth = {result.p:.3f}")

    # Network: interval for B vs A
    network = gen_network(8, 0.3, seed=1).data
    contrast = ci_contrast(network, basis_contrast(network.p, 1), B=200, seed=1)
    print(f"B vs A: ({contrast.lower:.3f}, {contrast.upper:.3f})")
