"""Constrained clustering likelihood (CCL) with a numpy MLP and a KCL baseline."""

from .constraints import ConstraintSet, NoiseModel, apply_noise, constraint_quality, constraints_from_labels
from .loss import LossKind, PairLabel, batch_loss, ccl_pair_loss, kcl_pair_loss, pair_similarity_prob, pairwise_loss
from .metrics import brute_force_accuracy, clustering_accuracy, confusion, evaluate, nmi

__version__ = "0.1.0"
