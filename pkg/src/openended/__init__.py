"""Learning from datasets whose inputs map to several conflicting outputs.

A set of K networks is trained episode by episode; each episode goes to the
member that already fits it best, so conflicting target functions end up in
different members.
"""

from .bounds import BoundBreakdown, BoundInputs, domain_term, instance_term, subjective_term, total_bound
from .data import (
    Domain,
    DomainSet,
    Episode,
    OpenDataset,
    TaskKind,
    conflict_profile,
    mapping_rank,
    regression_suite,
    sample_dataset,
    sample_episode,
    toy_classification_suite,
)
from .metrics import (
    DomainEval,
    expected_global_error_estimate,
    global_empirical_error,
    mod_err,
    sub_err,
)
from .nnet import (
    Activation,
    LayerShape,
    Loss,
    Network,
    SgdConfig,
    forward,
    init_network,
    loss_and_grad,
    sgd_step,
)
from .subjective import (
    Allocation,
    HypothesisSet,
    categorical_posterior_argmax,
    empirical_subjective,
    expected_subjective_estimate,
    gaussian_posterior_argmax,
)
from .training import TrainConfig, TrainReport, episodic_error, oracle_mtl_train, osl_train, vanilla_train

__version__ = "0.1.0"
