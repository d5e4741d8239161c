"""Synthesis of shallow CO2-leakage velocity maps and paired seismic gathers.

The package relocates a leakage perturbation from a generated velocity map
into the shallow layer, aligns its velocity distribution to layer targets
by empirical quantile mapping, and models the matching surface gathers with
an explicit 2D acoustic finite-difference scheme.
"""

from .errors import (
    BelowThreshold,
    CflViolation,
    DivergenceDetected,
    EmptyLeakage,
    GeometryMismatch,
    LeakSynthError,
    MapFormatError,
    NoMassAboveThreshold,
    OutOfGrid,
    SingleRowLeakage,
)
from .velocity_model import (
    LayerProfile,
    Perturbation,
    VelocityMap,
    layer_samples,
    load_map,
    load_perturbation,
    recompose,
    save_map,
    save_perturbation,
    subtract_baseline,
)
from .leakage import (
    CroppedLeakage,
    SplitLeakage,
    crop_leakage,
    default_crop_threshold,
    move_to_boundary,
    split_horizontal,
)
from .align import (
    AlignSpec,
    EmpiricalCdf,
    align_perturbation,
    build_cdf,
    map_value,
)
from .generator import ProposalParams, import_maps, propose_map
from .wave import (
    SeismicGather,
    ShotGeometry,
    SimConfig,
    batch_forward,
    check_cfl,
    ricker,
    simulate,
    step,
)
from .metrics import LossWeights, MetricReport, finetune_loss, mae, mse, ssim

__version__ = "0.1.0"
