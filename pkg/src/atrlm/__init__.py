"""Language modeling and LM-fused decoding for text recognition systems.

The package covers the text side of a recognition pipeline: n-gram
language models trained from line corpora and stored as ARPA files,
tokenizers at character, subword, and word granularity, a prefix beam
search that fuses those models into CTC emission matrices (optionally
constrained by a lexicon trie), an adapter that makes seq2seq output
matrices decodable by the same search, error-rate metrics with a grid
tuner, and a synthetic emission generator for controlled experiments.
"""

from .decoder import (
    BeamHypothesis,
    DecodeConfig,
    DecodeResult,
    beam_decode,
    beam_search,
    decode_batch,
    greedy_ctc,
    greedy_s2s,
)
from .errors import (
    BadMagic,
    DataError,
    DegenerateCounts,
    DuplicateId,
    DuplicateUnit,
    EmptyCorpus,
    MalformedArpa,
    MalformedManifest,
    MalformedVocab,
    MissingField,
    MissingScore,
    MissingTrie,
    ModeMismatch,
    OrderMismatch,
    OrderOutOfRange,
    ShapeMismatch,
    ToolkitError,
    TrieWithoutLexiconLevel,
    UnknownCharacter,
    UnnormalizedRows,
    UnsupportedDtype,
    UsageError,
    VocabMismatch,
    VocabTooSmall,
)
from .io import (
    BLANK_SYMBOL,
    EOS_SYMBOL,
    MODE_CTC,
    MODE_S2S,
    DatasetManifest,
    EmissionMatrix,
    ManifestItem,
    check_normalized,
    load_manifest,
    read_emissions,
    read_vocab_sidecar,
    save_manifest,
    write_emissions,
    write_vocab_sidecar,
)
from .lexicon import (
    Lexicon,
    LexiconTrie,
    build_lexicon,
    build_trie,
    load_lexicon,
    save_lexicon,
    unit_scores_from_lm,
)
from .lm import (
    BOS,
    EOS,
    MAX_ORDER,
    SMOOTHING_KNESER_NEY,
    SMOOTHING_NONE,
    SMOOTHING_WITTEN_BELL,
    SMOOTHINGS,
    UNK,
    CountTable,
    NGramModel,
    count_ngrams,
    estimate,
    perplexity,
    read_arpa,
    score_sequence,
    write_arpa,
)
from .metrics import (
    OBJECTIVES,
    EditCounts,
    EvalReport,
    TuneGrid,
    TunePoint,
    TuneResult,
    edit_distance,
    evaluate,
    tune,
)
from .s2s_adapter import AdapterConfig, adapt
from .simulate import NoiseModel, build_vocab, synthesize, synthesize_corpus
from .tokenizer import (
    LEVEL_CHARACTER,
    LEVEL_SUBWORD,
    LEVEL_WORD,
    LEVELS,
    SPACE_MARKER,
    SPACE_MODE_SENTENCEPIECE,
    SPACE_MODE_SEPARATE,
    SubwordModel,
    detokenize,
    load_subword_model,
    normalize,
    save_subword_model,
    tokenize,
    tokenize_chars,
    tokenize_subwords,
    tokenize_words,
    train_subword,
)

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig",
    "BadMagic",
    "BeamHypothesis",
    "BLANK_SYMBOL",
    "BOS",
    "CountTable",
    "DataError",
    "DatasetManifest",
    "DecodeConfig",
    "DecodeResult",
    "DegenerateCounts",
    "DuplicateId",
    "DuplicateUnit",
    "EditCounts",
    "EmissionMatrix",
    "EmptyCorpus",
    "EOS",
    "EOS_SYMBOL",
    "EvalReport",
    "Lexicon",
    "LexiconTrie",
    "LEVEL_CHARACTER",
    "LEVEL_SUBWORD",
    "LEVEL_WORD",
    "LEVELS",
    "MalformedArpa",
    "MalformedManifest",
    "MalformedVocab",
    "ManifestItem",
    "MAX_ORDER",
    "MissingField",
    "MissingScore",
    "MissingTrie",
    "MODE_CTC",
    "MODE_S2S",
    "ModeMismatch",
    "NGramModel",
    "NoiseModel",
    "OBJECTIVES",
    "OrderMismatch",
    "OrderOutOfRange",
    "ShapeMismatch",
    "SMOOTHING_KNESER_NEY",
    "SMOOTHING_NONE",
    "SMOOTHING_WITTEN_BELL",
    "SMOOTHINGS",
    "SPACE_MARKER",
    "SPACE_MODE_SENTENCEPIECE",
    "SPACE_MODE_SEPARATE",
    "SubwordModel",
    "ToolkitError",
    "TrieWithoutLexiconLevel",
    "TuneGrid",
    "TunePoint",
    "TuneResult",
    "UNK",
    "UnknownCharacter",
    "UnnormalizedRows",
    "UnsupportedDtype",
    "UsageError",
    "VocabMismatch",
    "VocabTooSmall",
    "adapt",
    "beam_decode",
    "beam_search",
    "build_lexicon",
    "build_trie",
    "build_vocab",
    "check_normalized",
    "count_ngrams",
    "decode_batch",
    "detokenize",
    "edit_distance",
    "estimate",
    "evaluate",
    "greedy_ctc",
    "greedy_s2s",
    "load_manifest",
    "load_lexicon",
    "load_subword_model",
    "normalize",
    "perplexity",
    "read_arpa",
    "read_emissions",
    "read_vocab_sidecar",
    "save_lexicon",
    "save_manifest",
    "save_subword_model",
    "score_sequence",
    "synthesize",
    "synthesize_corpus",
    "tokenize",
    "tokenize_chars",
    "tokenize_subwords",
    "tokenize_words",
    "train_subword",
    "tune",
    "unit_scores_from_lm",
    "write_arpa",
    "write_emissions",
    "write_vocab_sidecar",
]
