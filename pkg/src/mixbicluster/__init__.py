"""Bayesian biclustering of mixed-type data matrices: columns are partitioned
under a Poisson-Dirichlet process prior, with a shared Dirichlet-process layer
over the per-cluster latent values and per-type data augmentation."""

__version__ = "0.1.0"
