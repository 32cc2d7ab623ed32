"""Discrete meta-learning for submodular maximization: train a shared
initial set over many tasks, complete it with a few greedy picks when a new
task arrives, and verify the training guarantees against exact small-instance
oracles.
"""

from .core import (
    Budget,
    DomainError,
    ElementSet,
    GroundSet,
    MetaSolution,
    SetFunction,
)
from .greedy import GreedyTrace, complete_at_test, greedy, lazy_greedy, random_select
from .meta import (
    MethodResult,
    TrainedInitializer,
    TwoStageArtifact,
    apply_two_stage,
    greedy_train_baseline,
    meta_greedy,
    randomized_meta_greedy,
    replacement_greedy_two_stage,
    run_method_suite,
    task_first_greedy,
    train_first_greedy,
)
from .objectives import (
    AreaCoverageObjective,
    BestAugmentationObjective,
    FacilityLocationObjective,
    ModularObjective,
    RecommendationObjective,
    SyntheticCoverageObjective,
    TaskAverageObjective,
    best_augmentation_value,
    build_counterexample,
    convenience_score,
)
from .verify import (
    BruteForceResult,
    ProbeReport,
    SizingError,
    best_of_two_certificate,
    brute_force_meta_opt,
    brute_force_single_opt,
    check_monotone,
    check_submodular,
    randomized_lower_bound,
    two_phase_lower_bound,
)

__version__ = "0.1.0"
