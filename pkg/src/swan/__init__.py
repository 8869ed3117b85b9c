"""AMR-anchored sentence watermarking: a keyed bank of AMR templates steers
generation, and paragraph-level template hits drive a one-proportion z-test."""

__version__ = "0.1.0"

from .amr import AmrGraph, Constant, Edge, canonicalize, parse_penman, serialize_penman, to_triples
from .bank import BankParams, TemplateBank, abstract_template, build_bank, load_bank, save_bank
from .detector import DetectConfig, DetectionReport, detect, score_document, segment_sentences, z_score
from .errors import SwanError
from .evalkit import binomial_auc, roc, simulate_detection
from .injector import InjectionConfig, InjectionSession, inject
from .matcher import MatchConfig, MatchScore, best_bank_score, s2match

__all__ = [
    "AmrGraph",
    "Constant",
    "Edge",
    "canonicalize",
    "parse_penman",
    "serialize_penman",
    "to_triples",
    "BankParams",
    "TemplateBank",
    "abstract_template",
    "build_bank",
    "load_bank",
    "save_bank",
    "DetectConfig",
    "DetectionReport",
    "detect",
    "score_document",
    "segment_sentences",
    "z_score",
    "SwanError",
    "binomial_auc",
    "roc",
    "simulate_detection",
    "InjectionConfig",
    "InjectionSession",
    "inject",
    "MatchConfig",
    "MatchScore",
    "best_bank_score",
    "s2match",
]
