"""Periodic B-spline bases for time-varying coefficients.
==========================================================

Coefficients drift over the day and the year via sums of periodic cubic
B-splines. Three constructions matter: the plain periodic basis (a partition
of unity), its running sums (the last column is constant, so the penalty
shrinks toward a constant coefficient rather than toward zero), and the
diurnal x annual products that let the daily pattern change with the season.
"""

import numpy as np

from parkcast import ANNUAL_STEPS, BSplineSpec
from parkcast.basis import cumulative_basis, interaction_basis, periodic_basis_matrix

diurnal = BSplineSpec(degree=3, season_length=144.0, n_basis=12,
                      strict_partition=True)
annual = BSplineSpec(degree=3, season_length=ANNUAL_STEPS, n_basis=4)
print("diurnal: 12 splines spaced", diurnal.knot_spacing, "steps")
print("annual: 4 splines spaced", round(annual.knot_spacing, 2),
      "steps (a real-valued spacing; the year is 52594.56 ten-minute steps)")

t = np.linspace(0.0, 288.0, 1000)
plain = periodic_basis_matrix(t, diurnal)
print("\npartition of unity: max |sum - 1| =",
      f"{np.abs(plain.sum(axis=1) - 1).max():.2e}")
print("wrap-around: basis(t) == basis(t + 144):",
      np.allclose(plain, periodic_basis_matrix(t + 144.0, diurnal), atol=1e-12))

cum = cumulative_basis(t, diurnal)
print("\ncumulative basis: first column equals the plain first column:",
      np.array_equal(cum.values[:, 0], plain[:, 0]))
print("last cumulative column is constant:",
      f"max dev {np.abs(cum.values[:, -1] - 1).max():.2e}")

# interaction sets used by the model
tod = np.arange(1440) % 144
toy = np.arange(1440) * 1.0
mean_set = interaction_basis(tod, toy, diurnal, annual, "cumulative")
vol_set = interaction_basis(tod, toy, diurnal, annual, "plain")
print(f"\nmean equations use the cumulative product set: "
      f"{mean_set.columns} columns (12 diurnal x 4 annual),")
print(f"  constant column index {mean_set.constant_column} "
      "(left unpenalized so the level is not distorted)")
print(f"volatility equations use the plain product set with a constant "
      f"first column: {vol_set.columns} columns,")
print("  every value nonnegative:", bool((vol_set.values >= 0).all()),
      "- required because volatility coefficients are constrained >= 0")

# a coefficient path over one day, built from a random sparse coefficient
rng = np.random.default_rng(4)
coefs = np.zeros(mean_set.columns)
coefs[mean_set.constant_column] = 0.6           # constant part
coefs[rng.choice(mean_set.columns - 1, 3)] = rng.normal(0, 0.2, 3)
path = mean_set.values[:144] @ coefs
print("\na sparse 4-term coefficient over one day: min "
      f"{path.min():.3f}, max {path.max():.3f} (smooth by construction)")
