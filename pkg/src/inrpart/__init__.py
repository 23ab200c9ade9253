"""Partitioned implicit neural representations on a numpy autodiff core.

Subpackages by capability:

- autodiff: dense-MLP reverse mode, Adam, finite-difference gradient oracle
- models: sinusoidal / harmonic-embedding coordinate MLPs and capacity tables
- partition: grid and segmentation-map head-selector masks
- trainer: single and partitioned image fitting, PSNR/SSIM
- meta: first-order learned initializations, plain and partitioned
- hypothesis_lab: boundary-count convergence sweeps and exponent fits
- spectra: amplitude spectra of images versus their grid sub-parts
- cli: experiment front-end (`inrpart <subcommand>`)
"""

from .autodiff import (AdamState, ParamSet, Tape, adam_step, backward, forward,
                       grad_check, load_weights, mse_loss, save_weights)
from .errors import (ConfigError, InputError, PartitionError, TrainingError,
                     UsageError)
from .models import CAPACITY, ModelConfig, build, capacity_for, embed_harmonic
from .partition import (GridSpec, OversegParams, PartitionMask,
                        connected_relabel, full_mask, greedy_merge, overseg,
                        pog, pos)
from .trainer import (FitReport, ImageField, fit_partitioned, fit_single, psnr,
                      ssim)

__version__ = "0.1.0"
