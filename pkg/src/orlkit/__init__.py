"""Desk-scale offline RL toolkit.

TD3 with an adaptively weighted, sample-based reverse-KL behavior-cloning
regularizer, the comparison baselines, dataset tooling, native toy
environments, and an experiment CLI.
"""

from .agents import (DeterministicPolicy, Td3Agent, Td3Hyperparams, TrainLog,
                     TrainRecord, critic_target, load_policy, save_agent,
                     smoothed_target_action, train, train_bc_only)
from .behavior import (BETA_MAX, BETA_MIN, GaussianBehaviorModel, WeightConfig,
                       beta_hat, calibrate_weights, compute_lambda,
                       fit_behavior, gaussian_nll, load_behavior,
                       save_behavior)
from .data import (EPS_NORM, DatasetFormatError, DatasetTruncatedError,
                   DatasetVersionError, Manifest, Minibatch, NormStats,
                   OfflineDataset, SourceInfo, Transition, compute_norm_stats,
                   denormalize_state, export_csv, import_csv, load_dataset,
                   mix_datasets, normalize_state, sample_minibatch,
                   save_dataset, subset_dataset)
from .envs import (EnvSpec, EpisodeResult, EvalResult, PointMass2D,
                   TwinPeaks1D, collect_dataset, ensure_reference_returns,
                   evaluate_policy, make_env, measure_reference_returns,
                   normalized_score, pointmass_step, rollout, scripted_policy,
                   twinpeaks_reward, twinpeaks_step)
from .nets import (AdamState, CheckpointError, MlpNet, TrainingDiverged,
                   adam_step, grad_check, load_net, make_rng, mlp_backward,
                   mlp_forward, polyak_update, save_net)
from .regularizers import (LOG_STD_MAX, LOG_STD_MIN, RegularizerSpec,
                           StochasticPolicy, forward_kl_bc_loss, mse_bc_loss,
                           reverse_kl_stochastic_loss, rkl_contrastive_loss)

__version__ = "0.1.0"
