"""ukil: an end-to-end legal-assistant pipeline for Bangladeshi statute law.

Subsystems: corpus building and validation (corpus, scraper), the
instruction-tuning dataset (prompts, encoding), adapter fine-tuning
(adapters, quantization, training, toybase), similarity evaluation
(metrics, evaluation), serving (generation, service), and expert-survey
analytics (survey).
"""

__version__ = "0.1.0"

from .corpus import Act, CorpusStats, Section, ValidationReport, clean_text  # noqa: F401
from .metrics import cosine_similarity, jaccard  # noqa: F401
from .prompts import PromptRecord, SplitSpec  # noqa: F401
