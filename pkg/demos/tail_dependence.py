"""
Tail dependence coefficients
============================

chi measures how often two variables are extreme together, eta tells
asymptotic dependence (eta = 1) from asymptotic independence (eta < 1).
"""
import numpy as np

from sparse_extremes import (HuslerReissModel, chi_curve, chi_hat, chi_oracle_hr,
                             consistency_check, eta_hill, rank_transform, simulate_hr_pareto)
from sparse_extremes.coefficients import chi_family

# A bivariate Husler-Reiss sample. Gamma = 1 gives chi = 2 - 2 Phi(1/2).
model = HuslerReissModel(np.array([[0.0, 1.0], [1.0, 0.0]]))
hr = rank_transform(simulate_hr_pareto(model, 20_000, seed=1))
print("chi at q = 0.99:", round(chi_hat(hr, (0, 1), 0.99).value, 3), " oracle:", round(chi_oracle_hr(1.0), 3))

# chi(q) should be flat in q for data from the limit model
for est in chi_curve(hr, 0, 1, [0.9, 0.95, 0.98, 0.99], n_boot=100, seed=0):
    print(f"  q={est.level:.2f}  chi={est.value:.3f}  band=[{est.ci_lower:.3f}, {est.ci_upper:.3f}]")

# Gaussian data are asymptotically independent: chi drifts to 0, eta stays near (1 + rho)/2
rng = np.random.default_rng(2)
gauss = rank_transform(rng.multivariate_normal([0, 0], [[1, 0.5], [0.5, 1]], size=20_000))
print("gaussian chi at q = 0.99:", round(chi_hat(gauss, (0, 1), 0.99).value, 3))
print("gaussian eta (k=400):", round(eta_hill(gauss, (0, 1), 400).value, 3), " expected about 0.75")
print("HR eta (k=400):", round(eta_hill(hr, (0, 1), 400).value, 3))

# Every coefficient family estimated from one sample is internally consistent
x = rng.standard_t(3, size=(2000, 4))
x[:, 1] += x[:, 0]
fam = chi_family(rank_transform(x), 0.9)
print("chi of {0,1}:", round(fam[(0, 1)], 3), " of {0,1,2}:", round(fam[(0, 1, 2)], 3))
print("consistency violations:", consistency_check(fam))
