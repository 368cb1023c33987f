"""Fast Fourier interpolation between uniform and scattered points on the circle."""

from .core import (FfiaPlan, InverseCoeffs, direct_forward_oracle, direct_inverse_oracle,
                   forward_apply, inverse_apply, plan_forward, plan_inverse,
                   precompute_inverse_coeffs, uniform_grid)
from .exceptions import (DegenerateConfigurationError, DomainError, FfiaError,
                         InvalidArgumentError, SingularKernelError, TranslationError)
from .special import choose_parameters, total_error_bound
from .transforms import clear_plan_cache, dft_forward, dft_inverse, inufft, nufft, spectral_sum

__version__ = "0.1.0"

__all__ = [
    "FfiaPlan", "InverseCoeffs", "plan_forward", "plan_inverse", "forward_apply",
    "inverse_apply", "precompute_inverse_coeffs", "direct_forward_oracle",
    "direct_inverse_oracle", "uniform_grid", "choose_parameters", "total_error_bound",
    "nufft", "inufft", "dft_forward", "dft_inverse", "spectral_sum", "clear_plan_cache",
    "FfiaError", "InvalidArgumentError", "DomainError", "SingularKernelError",
    "DegenerateConfigurationError", "TranslationError",
]
