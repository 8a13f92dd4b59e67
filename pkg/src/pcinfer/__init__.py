"""Uniquely predictive probabilistic theories and PCI inference."""

from .dsl import load_theory, parse_situation, parse_theory, print_theory
from .engine import Prediction, combine, pci_predict
from .schema import (
    AtomSet,
    FeatureDef,
    FeatureSpace,
    IntervalSet,
    Schema,
    implies,
    satisfies,
    shared_features,
)
from .theory import (
    PredictiveTheory,
    Rule,
    TheoryError,
    build_theory,
    check_uniquely_predictive,
    msr_set,
    separable_ordering,
)

__all__ = [
    "AtomSet",
    "FeatureDef",
    "FeatureSpace",
    "IntervalSet",
    "Prediction",
    "PredictiveTheory",
    "Rule",
    "Schema",
    "TheoryError",
    "build_theory",
    "check_uniquely_predictive",
    "combine",
    "implies",
    "load_theory",
    "msr_set",
    "parse_situation",
    "parse_theory",
    "pci_predict",
    "print_theory",
    "satisfies",
    "separable_ordering",
    "shared_features",
]
