"""topoforge: SIMP topology optimization with a diffusion-transformer surrogate.

Subpackages and modules:

* ``fem`` — plane-stress finite elements on regular grids
* ``simp`` — compliance minimization (sensitivities, filtering, OC update)
* ``problem`` — problem definitions (anchors, supports, loads)
* ``sampler`` — randomized problem/dataset generation
* ``store`` — binary dataset format
* ``diffusion`` — noise schedules, forward process, DDPM/DDIM steps
* ``dit`` — the diffusion-transformer denoiser, training and sampling
* ``metrics`` — evaluation metrics and suite reports
* ``cli`` — command-line entry point
* ``service`` — local HTTP design service
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as kernel_backend  # noqa: F401
