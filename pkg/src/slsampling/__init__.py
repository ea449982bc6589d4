"""Discontinuous Sturm-Liouville problems with an eigenparameter-dependent
boundary condition, their spectra, and Lagrange-type sampling of the
associated integral transform."""

from .classical import (BandlimitedSamples, LevinsonBoundError, kramer_reconstruct,
                        levinson_G, levinson_reconstruct, sinc_kernel, wks_reconstruct)
from .eigensolve import (Bracket, DoubleRootError, RootCountShortfall, SolverSettings, Spectrum,
                         SpectrumEntry, SpectrumError, asymptotic_seeds, compute_spectrum,
                         refine_root, scan_brackets)
from .hilbert import (BoundaryFunctionals, HVector, eigenvector, eigenvector_norm, functionals,
                      indefinite_inner_product, inner_product, orthogonality_matrix,
                      quadrature_rule)
from .problem import (PolySegment, PotentialSpec, ProblemError, ProblemSpec, SpectralParameter,
                      TableSegment, ValidatedProblem, eval_q, reference_problem, validate)
from .sampling import (ReconstructionReport, SourceFunction, TransformSamples, canonical_product,
                       forward_transform, reconstruct, reconstruct_normalized, sample_transform,
                       truncation_report)
from .shooting import (IntegrationError, PiecewiseSolution, ShotState, integrate_segment, omega,
                       omega_derivative, shoot_left, shoot_right, wronskian)

__version__ = "0.1.0"
