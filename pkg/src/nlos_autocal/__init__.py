"""Self-calibrating non-line-of-sight transient reconstruction.

A differentiable three-bounce transient forward model, closed-form adjoint
gradients, and an alternating Adam loop that jointly recovers the hidden
volume and miscalibrated scan/detection positions from the measurements
alone, plus the simulator and analysis harness used to validate it.
"""

from ._kernels import available_backends, get_backend
from .analysis import (boundary_energy, directional_rmse, noise_sensitivity_sweep,
                       pattern_recovery_test, recoverability_heatmap,
                       recoverability_profile, scan_rmse, volume_correlation)
from .backprojection import (backproject, bandpass_filter, bandpass_kernel,
                             initial_volume, scale_to_measurements)
from .errors import (BackendUnavailableError, DegenerateGeometryError,
                     DimensionMismatchError, GradientError, InvariantError,
                     MissingFileError, NlosError, SizeMismatchError,
                     ValidationError)
from .forward import (DEFAULT_TRUNCATION_SIGMAS, ForwardWorkspace,
                      forward_gaussian, forward_rect_oracle, loss)
from .gradients import GradientBundle, grad_loss, grad_rho_only
from .io import Dataset, load_dataset, unrectify_confocal, write_dataset, write_report
from .optim import (AdamState, AutocalSchedule, ScanBatchSampler, adam_step,
                    autocal, reconstruct_only)
from .simulate import (PerturbationSpec, ScanGrid, desk_scene, make_phantom,
                       perturb, scenario, synthesize)
from .types import (CalibrationState, IterationRecord, OptimizationReport,
                    SceneConfig, SPEED_OF_LIGHT, TransientSet, Volume,
                    default_sigma, total_path_length, voxel_center)

__version__ = "0.1.0"
