"""Transformer bridge for the statute-retrieval pipeline.

Consumes training-set and query-set JSONL plus term-injection reports,
fine-tunes a pre-trained masked-language model with a single linear
head, and writes prediction and embedding CSVs in the pipeline's
exchange formats.  All communication with the pipeline goes through
files; nothing here imports it.
"""

__version__ = "0.1.0"
