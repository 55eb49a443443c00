"""tokenlab: a desk-scale laboratory for token dynamics.

A language agent is treated as a discrete-time stochastic dynamical system
over a finite alphabet: states are C-token windows, the update consumes the
model's next-token distribution, and everything downstream — meaning
classes, reachable sets, controllability certificates, adversary/safeguard
games — is computed exactly or with calibrated Monte Carlo on instances
small enough to enumerate.
"""

from .tokens import (Alphabet, Sentence, Corpus, MeaningfulSet, make_sentence,
                     build_sigma, is_member, save_alphabet, load_alphabet,
                     save_corpus, load_corpus)
from .dynamics import (Context, SamplerConfig, T_ZERO, T_INF,
                       temper_distribution, next_token_distribution, step,
                       window_sentence, rollout, RolloutResult,
                       empirical_first_token_prior, sentence_probability,
                       conversation_step, attention_sensitivity, attentive,
                       Transcript, transcript_text, export_transcript,
                       load_transcript, replay_transcript)
from .models import (Discriminant, TabularModel, NGramModel, ModKModel,
                     MeaningHead, random_tabular, random_deterministic_tabular,
                     make_modk, train_ngram, train_meaning_head,
                     axis_alignment, serialize_model, deserialize_model,
                     save_model, load_model, model_hash, save_labeled,
                     load_labeled)
from .meaning import (MeaningClass, MeaningClassifier, classify, equivalent,
                      quotient, WellTrainedReport, well_trained_check,
                      EntropyReport, annotation_entropy)
from .reachability import (ReachEntry, ReachReport, reach_exact, reach_mc,
                           prompt_reach, dense_transitions, save_reach_report)
from .control import (Certificate, ControlPlan, deterministic_table,
                      check_thm1, check_thm2, simulate_plan, synthesize_phi_u,
                      bfs_oracle, bfs_block_distances, ProbeReport,
                      postulate_probe)
from .safeguard import (ToxicSpec, toxic_spec, CensorDecision, censor,
                        state_toxic, provisional_toxic_score,
                        toxic_state_mask, censor_input, GameValue,
                        adversary_value_iteration, game_tree_value,
                        ComparisonReport, compare_scenarios, DefenderDecision,
                        defender_step, AbsorptionReport,
                        absorption_probability, absorption_exact,
                        save_game_spec, load_game_spec)
from .util import (encode_window, decode_window, all_window_digits,
                   tv_distance, wilson_interval, sha256_text)

__version__ = "0.1.0"

__all__ = [
    "Alphabet", "Sentence", "Corpus", "MeaningfulSet", "make_sentence",
    "build_sigma", "is_member", "save_alphabet", "load_alphabet",
    "save_corpus", "load_corpus",
    "Context", "SamplerConfig", "T_ZERO", "T_INF", "temper_distribution",
    "next_token_distribution", "step", "window_sentence", "rollout",
    "RolloutResult", "empirical_first_token_prior", "sentence_probability",
    "conversation_step", "attention_sensitivity", "attentive", "Transcript",
    "transcript_text", "export_transcript", "load_transcript",
    "replay_transcript",
    "Discriminant", "TabularModel", "NGramModel", "ModKModel", "MeaningHead",
    "random_tabular", "random_deterministic_tabular", "make_modk",
    "train_ngram", "train_meaning_head", "axis_alignment", "serialize_model",
    "deserialize_model", "save_model", "load_model", "model_hash",
    "save_labeled", "load_labeled",
    "MeaningClass", "MeaningClassifier", "classify", "equivalent", "quotient",
    "WellTrainedReport", "well_trained_check", "EntropyReport",
    "annotation_entropy",
    "ReachEntry", "ReachReport", "reach_exact", "reach_mc", "prompt_reach",
    "dense_transitions", "save_reach_report",
    "Certificate", "ControlPlan", "deterministic_table", "check_thm1",
    "check_thm2", "simulate_plan", "synthesize_phi_u", "bfs_oracle",
    "bfs_block_distances", "ProbeReport", "postulate_probe",
    "ToxicSpec", "toxic_spec", "CensorDecision", "censor", "state_toxic",
    "provisional_toxic_score", "toxic_state_mask", "censor_input",
    "GameValue", "adversary_value_iteration", "game_tree_value",
    "ComparisonReport", "compare_scenarios", "DefenderDecision",
    "defender_step", "AbsorptionReport", "absorption_probability",
    "absorption_exact", "save_game_spec", "load_game_spec",
    "encode_window", "decode_window", "all_window_digits", "tv_distance",
    "wilson_interval", "sha256_text",
]
