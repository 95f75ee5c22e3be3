"""Composite fading with shadowed double scattering: sampling, closed-form and
quadrature statistics, multi-link selection, moment fitting, goodness of fit
and trace replay."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BinningError,
    ClosedFormPole,
    DomainError,
    EvalError,
    FitDiverged,
    InsufficientLength,
    LengthMismatch,
    MomentDivergence,
    MomentOutOfRange,
    ParseError,
    SeriesInapplicable,
    ShadowScatterError,
    UnitError,
)
from .model import (  # noqa: E402
    DEFAULT_SEED,
    DoubleShadowParams,
    SampleBatch,
    SingleShadowParams,
    mean_snr,
    moment,
    sample,
    validate,
)
from .analytics import EvalOptions, bep_bpsk, capacity, cdf, outage, pdf, sf  # noqa: E402
from .selection import SelectionParams, asnr, cdf_out, pdf_out, simulate_selection  # noqa: E402
from .fitgof import FitResult, fit_moments, gof_table, kl_divergence, ks_test  # noqa: E402
from .traces import PowerTrace, StrategyConfig, load_trace, replay  # noqa: E402
