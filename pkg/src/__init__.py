"""
fracpoisson: the multivariate alternative fractional Poisson process at fixed
times. Exact pmf, moments, deviation rate functions, sampling, the estimator of
the fractional order and Monte Carlo checks of the asymptotic results.
"""
