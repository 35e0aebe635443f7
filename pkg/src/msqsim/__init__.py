"""msqsim: multi-spatial-mode squeezed light simulator.

Gaussian-state simulation of a travelling-wave four-wave-mixing amplifier
with bichromatic-local-oscillator homodyne detection over arbitrary
transverse LO shapes.
"""

__version__ = "0.1.0"

from .grid import ModeIndex, TransverseGrid, make_grid
from .state import (GaussianState, check_uncertainty, symplectic_form,
                    symplectic_spectrum, vacuum)
from .program import Element, ProgramError, SymplecticProgram, dense_realize
from .optics import (BandOverlap, FourierTransform, FresnelSlice, GainProfile,
                     Loss, MediumSpec, OverlapGeometry, PhaseMask, SpatialLoss,
                     SqueezeLayer, band_overlap, build_medium, fresnel_slice,
                     gain_region_aperture, gain_to_squeeze, loss,
                     squeeze_layer, squeeze_to_gain)
from .detection import (JointVariances, LocalOscillator, LoSeedSpec, MaskSpec,
                        PhaseFit, build_lo, correct_electronic_noise,
                        dense_variance, duan_witness, fit_phase_curve,
                        from_db, homodyne_variance, implicit_variance,
                        joint_pair_variances, lo_mismatch_study, optimal_phase,
                        phase_scan, to_db)
from .config import (ConfigError, ExperimentConfig, parse_config,
                     serialize_config)
from .experiments import (GaussianFit, Pipeline, ScanPoint, ScanResult,
                          build_pipeline, coherence_length, fit_gaussian,
                          fit_gaussian_rotated, halving_width,
                          mode_count_measured, mode_count_theory,
                          phase_scan_experiment, plateau_width, position_scan,
                          width_scan)
