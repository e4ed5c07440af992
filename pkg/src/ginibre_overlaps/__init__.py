"""Eigenvector overlaps of non-Hermitian random matrices.

Samplers, dense and Schur-chain overlap computations, closed-form
conditional expectations, Monte Carlo estimators, eigenvalue dynamics under
matrix Ornstein-Uhlenbeck flows, eigenvector angles and independent
quadrature oracles.
"""

from .errors import (ArgumentTooLarge, BackendFailure, CollisionDetected, ConfigInvalid, DecompositionFailed,
                     DegenerateSpectrum, DeltaDegenerate, EmptyWindow, GapTooSmall, InsufficientSamples,
                     InsufficientSteps, NonConvergence, OverlapError, ToleranceNotReached)
from .rand_ensembles import (ENSEMBLE_KINDS, EnsembleSpec, RngStream, sample_conditioned_radii_origin,
                             sample_kostlan_radii, sample_matrix, sample_schur_T)
from .spectral import (EigenSystem, Spectrum, condition_numbers, diagonal_overlaps, eigendecompose, overlaps,
                       sample_overlaps)
from .schur_chain import (chain_overlaps, chain_overlaps_batch, quenched_diag_expectation, quenched_diag_sample,
                          quenched_offdiag_expectation, quenched_second_moments)
from .formulas import (mean_diag_asymptotic, mean_diag_exact, mean_offdiag_asymptotic, mean_offdiag_exact_origin,
                       second_moment_asymptotic, second_moment_exact_origin)
from .estimators import (Ball, DiskWindow, EstimateWithCI, KSReport, PairWindow, conditional_diag_stats,
                         conditional_pair_stats, extremes_scan, ks_distance, pseudospectrum_volume)
from .dynamics import FlowConfig, empirical_brackets, evolve_ou, track_eigenvalue_paths
from .angles import angle_distribution_test, eigenvector_angle, phi_inverse, phi_map

__version__ = "0.1.0"
