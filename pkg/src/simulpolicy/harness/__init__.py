"""Corpus evaluation: manifests, audio I/O, synthetic backends, sweeps."""

from .audio_io import read_wav, write_wav
from .evaluate import (
    CascadeBackend,
    CorpusReport,
    EndToEndBackend,
    SweepConfig,
    evaluate_corpus,
    offline_bleu,
    sweep,
    utterance_rng,
    write_summary,
    write_sweep_csv,
    write_utterances_jsonl,
)
from .manifest import Utterance, load_manifest, write_manifest
from .synthetic import (
    SyntheticTranslator,
    SyntheticTranslatorSpec,
    is_unstable_token,
    make_cascade_corpus,
    make_e2e_corpus,
    synthetic_audio,
    synthetic_logits,
)
