"""Renyi divergences, Renyi differential privacy and generalized adversarial robustness."""

from rdpbridge.divergence import KL, MAX, DivergenceOrder, DivergenceResult, kl_divergence, max_divergence, renyi_divergence
from rdpbridge.equivalence import EquivalenceVerdict, FiniteInstance, evaluate_claim, random_instance_sweep
from rdpbridge.errors import CapabilityError, DomainError, ParameterError, UnsupportedPairError
from rdpbridge.measures import Categorical, Dirac, Empirical, IsotropicGaussian, LabelDistribution, ProductLaplace
from rdpbridge.mechanisms import (
    EXACT,
    AdditiveNoise,
    Deterministic,
    FiniteTable,
    InputNoise,
    Linear,
    MonteCarlo,
    Noise,
    OutputNoise,
    Table,
    Threshold1D,
    apply,
    label_distribution,
)
from rdpbridge.metrics import FiniteSpace, MetricSpec
from rdpbridge.privacy import SearchBudget, certify_classical_dp, certify_metric_dp, certify_rdp
from rdpbridge.robustness import (
    AttackBudget,
    FiniteWeighted,
    RobustnessBudget,
    Sampler,
    check_classic_robustness,
    check_generalized_robustness,
    craft_adversarial,
    prediction_change_risk,
)

__version__ = "0.1.0"
