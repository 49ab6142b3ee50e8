"""Normal and Student-t distribution functions used by the simulation generators."""
import numpy as np
from scipy import special


def norm_cdf(x):
    return special.ndtr(x)


def norm_ppf(q):
    return special.ndtri(q)


def t_cdf(x, df):
    """Student-t CDF with ``df`` degrees of freedom."""
    return special.stdtr(df, x)


def two_sided_norm_p(z):
    """2 Phi(-|z|), computed in the lower tail so small p-values keep full precision."""
    return 2.0 * special.ndtr(-np.abs(z))


def two_sided_t_p(t, df):
    return 2.0 * special.stdtr(df, -np.abs(t))
