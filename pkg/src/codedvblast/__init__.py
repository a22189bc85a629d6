"""Average power and rate allocation for coded ZF V-BLAST.

Streams are detected by zero-forcing nulling with successive interference
cancellation.  In i.i.d. Rayleigh fading stream ``i`` behaves like an
MRC combiner of order ``n - m + i``, so its outage probability is the
regularized lower incomplete gamma function of
``(e^R_i - 1) / (alpha_i snr)``.  The package minimizes the system outage
over the average per-stream powers (APA), rates (ARA) or both (APRA), and
provides Monte Carlo checks, sensitivity analysis, dual problems and SNR
sweeps.
"""

from .apa import *  # noqa: F401,F403
from .apra import *  # noqa: F401,F403
from .ara import *  # noqa: F401,F403
from .channel import *  # noqa: F401,F403
from .duality import *  # noqa: F401,F403
from .errors import (  # noqa: F401
    AllocationError,
    ConfigError,
    DegenerateWarning,
    FormulaWarning,
    InfeasibleError,
    SolverError,
    ValidityWarning,
)
from .experiments import *  # noqa: F401,F403
from .outage import *  # noqa: F401,F403
from .robustness import *  # noqa: F401,F403

__version__ = "0.1.0"
