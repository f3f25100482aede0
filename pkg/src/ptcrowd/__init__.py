"""Crowdsourced classification with skip options, spammers and prospect-theory workers."""
from .analytics import asymptotic_pc, exact_pc
from .behavior import PaymentConfig, PTParams, confidence_threshold
from .crowd import AnswerMatrix, CrowdConfig, generate_crowd, run_session
from .fusion import ASPT, ExcludeAllDefinitive, HonestAssumed, MajorityVote, assign_weights, classify, fuse_word
from .inference import estimate_crowd

__version__ = "0.1.0"

__all__ = [
    "ASPT", "AnswerMatrix", "CrowdConfig", "ExcludeAllDefinitive", "HonestAssumed", "MajorityVote",
    "PTParams", "PaymentConfig", "assign_weights", "asymptotic_pc", "classify", "confidence_threshold",
    "estimate_crowd", "exact_pc", "fuse_word", "generate_crowd", "run_session",
]
