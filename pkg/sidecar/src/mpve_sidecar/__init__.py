"""HTTP sidecar wrapping the NLP models the engine keeps out of process:
dependency parsing to CoNLL-U, sentence/word embeddings, and open-set
detection over frame directories."""

__version__ = "0.1.0"
