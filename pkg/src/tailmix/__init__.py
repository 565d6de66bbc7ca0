"""Sparse max-stable mixture models for multivariate tail dependence.

Fit mixture models of column-scaled max-stable factors to the tail of a
multivariate sample by penalized least squares on the stable tail
dependence function, discover the extreme directions of the data, and
run the surrounding simulation, cross-validation, and diagnostic
machinery.  See the README for the command-line interface.
"""

__version__ = "0.1.0"
