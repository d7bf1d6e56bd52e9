"""Inference: prediction matrices and article embeddings."""

import numpy as np
import torch

from .formats import (
    read_corpus_articles,
    read_queries,
    write_embedding_csv,
    write_prediction_csv,
)
from .model import load_classifier


def _pooled_batches(clf, tokenizer, texts, max_seq_len, batch_size):
    out = []
    with torch.no_grad():
        for start in range(0, len(texts), batch_size):
            batch = tokenizer(texts[start:start + batch_size],
                              return_tensors="pt", padding=True,
                              truncation=True, max_length=max_seq_len)
            out.append(clf.pooled(**batch))
    return torch.cat(out)


def predict_queries(checkpoint_dir, queries_path, out_path,
                    max_seq_len: int = 256, batch_size: int = 64) -> None:
    """Score a query set and write the prediction CSV.

    Softmax probabilities by default; checkpoints trained with the
    sigmoid flag emit per-class sigmoids renormalized per row.
    """
    tokenizer, clf, labels, sigmoid_normalize = load_classifier(checkpoint_dir)
    queries = read_queries(queries_path)
    pooled = _pooled_batches(clf, tokenizer, [t for _, t in queries],
                             max_seq_len, batch_size)
    with torch.no_grad():
        logits = clf.head(pooled)
        probs = torch.sigmoid(logits) if sigmoid_normalize \
            else torch.softmax(logits, dim=-1)
    rows = probs.double().numpy()
    write_prediction_csv([qid for qid, _ in queries], labels, rows, out_path)


def export_embeddings(checkpoint_dir, corpus_path, out_path,
                      max_seq_len: int = 256, batch_size: int = 64) -> None:
    """Write the pooled [CLS] embedding of every article to a CSV."""
    tokenizer, clf, _, _ = load_classifier(checkpoint_dir)
    articles = read_corpus_articles(corpus_path)
    pooled = _pooled_batches(clf, tokenizer, [t for _, t in articles],
                             max_seq_len, batch_size)
    matrix = np.asarray(pooled.double().numpy())
    write_embedding_csv([aid for aid, _ in articles], matrix, out_path)
