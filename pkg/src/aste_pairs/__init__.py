"""Two-stage aspect sentiment triplet extraction with perceivable pair markers."""
from .corpus import AnnotatedSentence, Span, Triplet, Vocabulary, build_vocab, load_split, parse_line
from .extraction import SpanSets, decode_spans, encode_spans
from .pairing import build_attention_field, build_compound, build_pairs
from .evaluation import EvalReport, score
from .pipeline import RunConfig, train_extraction, train_matching, pipeline_predict

__version__ = "0.1.0"
