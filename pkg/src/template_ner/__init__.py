"""Template-based named entity recognition.

NER as a ranking problem: every candidate span is spliced into statement
templates ("X is a location entity", "X is not a named entity"), a
generative sequence-to-sequence scorer assigns each filled template the sum
of its per-token conditional log-probabilities given the sentence, and the
span takes the label of its best-scoring template. Because labels enter
through natural words rather than an output layer, the same model transfers
to new label sets by plain fine-tuning.
"""

from .corpus import (
    Corpus,
    CorpusStats,
    DownsampleResult,
    EntitySpan,
    LabeledSentence,
    bio_from_spans,
    corpus_stats,
    downsample_in_domain,
    format_stats,
    parse_conll,
    read_conll,
    relabel,
    sample_few_shot,
    spans_from_bio,
    to_conll,
    write_conll,
)
from .decoder import (
    DecodeConfig,
    ScoredCandidate,
    classify_span,
    decode_corpus,
    decode_sentence,
    decode_sentence_candidates,
    ensemble_decode,
    enumerate_spans,
    resolve_overlaps,
)
from .errors import (
    BioError,
    ConllParseError,
    ProtocolError,
    ScorerError,
    TemplateError,
    TemplateNerError,
    TransportError,
)
from .evaluation import (
    EvalReport,
    evaluate,
    evaluate_with_buckets,
    format_report,
    frequency_buckets,
    per_type_report,
    report_to_dict,
)
from .external import ExternalScorer
from .pairs import (
    PairBuildResult,
    TrainingPair,
    build_training_pairs,
    read_pairs,
    write_pairs,
)
from .scorer import (
    BOS,
    EOS,
    PAD,
    UNK,
    GenerativeScorer,
    TargetScore,
    TinySeq2Seq,
    TrainConfig,
    TrainStats,
    Vocab,
    fine_tune,
    fit,
    loss,
)
from .templates import (
    NONE_LABEL,
    FilledTemplate,
    LabelWordMap,
    TemplateSpec,
    builtin_templates,
    default_label_words,
    fill,
    get_builtin_template,
    load_template_config,
    match_filled,
)

__version__ = "0.1.0"
