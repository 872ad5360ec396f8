"""
Longitudinal surrogate marker evaluation.

Dynamic linear models fitted by Kalman filtering and smoothing, proportion of
treatment effect explained (PTE) estimands, a recombination bootstrap, temporal
homogeneity tests and a trial simulator.
"""
