"""fleethi: unsupervised health-index estimation from condition-monitoring data.

A causally structured convolutional autoencoder distills a scalar degradation
latent from sensor windows, shaped by soft constraints encoding general
degradation knowledge. The package also ships residual and supervised
baselines, additive-noise-model structure discovery, Weibull expected-HI
fitting, HI quality criteria, an RUL prognostics harness, and a synthetic
fleet generator for desk-scale verification.
"""

from .fleet import CycleRecord, FleetDataset, Unit
from .datagen import (GeneratorConfig, NoiseLevels, MaintenancePolicy,
                      degradation_curve, generate_fleet, fleet_mixing)
from .ingest import (Scaler, WindowSet, DataError, load_fleet, save_fleet,
                     fit_scaler, apply_scaler, inverse_scaler, downsample,
                     window_sliding, window_per_cycle, compute_capacity)
from .causal import Dag3, DagScore, RegressorSpec, enumerate_dags, score_dag, rank_structures
from .models import (NetworkSpec, TrainConfig, ConstraintSpec, TrainingError,
                     build_network, train, encode, reconstruct, predict,
                     loss_reconstruction, loss_correlation, loss_negative_gradient,
                     loss_functional, save_checkpoint, load_checkpoint)
from .hi import (HITrajectory, PcaFit, HiNormalizer, compute_residual, fit_pca,
                 residual_to_hi, latent_to_hi, to_soh)
from .weibull import (WeibullFit, WeibullMLE, FitError, crossing_times, fit_weibull,
                      fit_eta_curve, fit_expected_hi, g_of_t)
from .metrics import (MetricReport, monotonicity, trendability, prognosability,
                      mutual_info_score, mape, evaluate_fleet_hi, aggregate_runs)
from .prognostics import (RulDataset, RULReport, build_rul_dataset, build_rul_model,
                          train_rul, evaluate_rul, average_improvement)
from .config import ConfigError, load_config, save_config, loads_config, dumps_config

__version__ = "0.1.0"
