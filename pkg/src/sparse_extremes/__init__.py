"""Sparse structures in multivariate extremes.

Empirical tail dependence, clustering and PCA of extremal angles, detection of
groups of concomitant extremes, and Husler-Reiss graphical models.
"""
from .ingest import (
    DataError,
    ExceedanceSet,
    ObservationMatrix,
    StandardizedSample,
    extract_exceedances,
    exceedances_at_quantile,
    k_from_quantile,
    rank_transform,
    read_csv,
    write_csv,
)
from .coefficients import (
    ChiEstimate,
    EtaEstimate,
    chi_curve,
    chi_hat,
    chi_matrix,
    consistency_check,
    empirical_exponent_measure,
    eta_hill,
)
from .angular import AngularCloud, ClusterResult, angular_dissimilarity, centers_to_faces, spherical_kmeans
from .epca import ExtremalPCA, estimate_sigma, pca_loss, reconstruct, subspace_distance
from .faceset import Face, FaceSet
from .faces import (
    apriori_faces,
    euclid_simplex_projection,
    goix_faces,
    greedy_adjust_face,
    meyer_faces,
    simpson_faces,
    simpson_region_mass,
)
from .models import (
    HuslerReissModel,
    LogisticModel,
    MaxLinearModel,
    RecursiveMLModel,
    chi_oracle_hr,
    hr_exponent_density,
    hr_pareto_density,
    logistic_exponent_density,
    recursive_to_max_linear,
    simulate_hr_pareto,
    simulate_logistic,
    simulate_max_linear,
    simulate_max_linear_limit,
    simulate_recursive_ml,
)
from .graphical import (
    ExtremalGraph,
    FittedModel,
    censored_clique_loglik,
    chi_weights,
    ci_pattern,
    fit_clique,
    fit_graph,
    greedy_block_search,
    hr_precision,
    model_chi_matrix,
    mst_learn,
    threshold_from_quantile,
    tree_density,
    tree_gamma,
)

__version__ = "0.1.0"
