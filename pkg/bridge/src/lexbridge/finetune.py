"""Fine-tuning loop for the article classifier."""

import random
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import torch
from torch import nn

from .formats import (
    BridgeError,
    article_sort_key,
    read_injection_terms,
    read_training_units,
    write_training_log,
)
from .model import ArticleClassifier, extend_vocabulary, load_base, save_classifier

LOG_FILE = "training_log.jsonl"


@dataclass(frozen=True)
class FineTuneConfig:
    base_model: str
    epochs: int = 10
    learning_rate: float = 2e-5
    batch_size: int = 256
    max_seq_len: int = 256
    injected_terms: Optional[str] = None
    scope: str = "all"
    seed: int = 0
    sigmoid_normalize: bool = False

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise BridgeError(f"epochs must be >= 1, got {self.epochs}")
        if not 1e-5 <= self.learning_rate <= 5e-5:
            raise BridgeError(
                f"learning rate {self.learning_rate} is outside [1e-5, 5e-5]")
        if self.batch_size < 1:
            raise BridgeError(f"batch size must be >= 1, got {self.batch_size}")
        if self.max_seq_len < 2:
            raise BridgeError(
                f"max sequence length must be >= 2, got {self.max_seq_len}")


def fine_tune(training_path, config: FineTuneConfig, out_dir) -> Path:
    """Train a classifier on a training-set file and save a checkpoint.

    The label space is the sorted set of article ids present in the
    training set.  Writes the checkpoint plus a per-epoch loss log and
    returns the checkpoint directory.
    """
    torch.manual_seed(config.seed)
    units = read_training_units(training_path)
    labels = sorted({aid for aid, _ in units}, key=article_sort_key)
    label_of = {aid: i for i, aid in enumerate(labels)}

    tokenizer, encoder = load_base(config.base_model)
    if config.injected_terms:
        terms = read_injection_terms(config.injected_terms)
        extend_vocabulary(tokenizer, encoder, terms, seed=config.seed)

    clf = ArticleClassifier(encoder, len(labels))
    clf.train()
    optimizer = torch.optim.AdamW(clf.parameters(), lr=config.learning_rate)
    loss_fn = nn.CrossEntropyLoss()
    shuffler = random.Random(config.seed)

    texts = [text for _, text in units]
    targets = [label_of[aid] for aid, _ in units]
    order = list(range(len(units)))
    log: List[dict] = []
    for epoch in range(1, config.epochs + 1):
        shuffler.shuffle(order)
        total = 0.0
        n_batches = 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            batch = tokenizer([texts[i] for i in idx], return_tensors="pt",
                              padding=True, truncation=True,
                              max_length=config.max_seq_len)
            target = torch.tensor([targets[i] for i in idx])
            optimizer.zero_grad()
            loss = loss_fn(clf(**batch), target)
            loss.backward()
            optimizer.step()
            total += float(loss.detach())
            n_batches += 1
        log.append({"epoch": epoch, "mean_loss": total / n_batches,
                    "n_batches": n_batches,
                    "learning_rate": config.learning_rate})

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_classifier(clf, tokenizer, labels, config.sigmoid_normalize, out_dir)
    write_training_log(log, out_dir / LOG_FILE)
    return out_dir
