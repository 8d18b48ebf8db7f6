"""pfkit: Wasserstein-type privacy sensitivities, noise calibration, and a
dataset-dependent iteration accountant for correlated-data privacy."""

from .core import (DiscreteDistribution, Framework, Guarantee, NoiseSpec,
                   SecretPair, conditioned_query_distribution, gaussian_noise,
                   gen_cauchy_noise, laplace_noise, make_distribution)
from .divergences import (CloseAdversaryParams, clipped_legendre,
                          close_adversary_additive_penalty,
                          close_adversary_penalty, convert_approx_renyi_to_pp,
                          convert_renyi_to_pp, gaussian_shift_divergence,
                          gen_cauchy_normalizer, gen_cauchy_shift_bound,
                          laplace_shift_divergence, legendre,
                          numeric_renyi_divergence, parallel_compose,
                          shift_envelope, shifted_noise_divergence)
from .mechanisms import (CalibratedMechanism, InfeasibleCalibration, apply,
                         approx_gaussian_mechanism, approx_laplace_mechanism,
                         cauchy_mechanism_epsilon, gaussian_mechanism,
                         laplace_mechanism, sample)
from .pabi import (PabiSchedule, SgdParams, allocation_global_uniform,
                   allocation_naive, allocation_tail_uniform,
                   gaussian_prior_shifts, independent_prior_bound, pabi_bound,
                   privacy_loss_curve, sgd_shift_sequence,
                   uniform_allocation_bound)
from .priors import (GaussianPrior, diffusion_sensitivity,
                     gaussian_attribute_sensitivity, weak_dependence_bound)
from .transport import (AtomCapExceeded, SensitivityReport,
                        framework_sensitivity, noise_aware_cost,
                        proximity_threshold, wasserstein_inf, wasserstein_p,
                        wasserstein_p_1d)

__version__ = "0.1.0"
