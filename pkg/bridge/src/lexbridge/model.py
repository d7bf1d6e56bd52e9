"""Model assembly: vocabulary extension and the classifier head."""

import json
from pathlib import Path
from typing import List, Sequence, Tuple

import torch
from torch import nn
from transformers import AutoModel, AutoTokenizer

from .formats import BridgeError

ENCODER_DIR = "encoder"
HEAD_FILE = "head.pt"
META_FILE = "classifier.json"


def load_base(model_dir):
    """Tokenizer and encoder from a local pre-trained model directory."""
    tokenizer = AutoTokenizer.from_pretrained(model_dir)
    encoder = AutoModel.from_pretrained(model_dir)
    return tokenizer, encoder


def extend_vocabulary(tokenizer, encoder, terms: Sequence[str],
                      seed: int = 0, noise_std: float = 0.01) -> int:
    """Append terms to the tokenizer and grow the embedding matrix.

    Every term must be new: the injection report is built against the
    base vocabulary, so an already-known term means the report and the
    model disagree.  New embedding rows start at the mean of the
    existing rows plus small seeded gaussian noise.

    Returns the number of added tokens (always len(terms)).
    """
    terms = list(terms)
    known = [t for t in terms if t in tokenizer.get_vocab()]
    if known:
        raise BridgeError(
            f"terms already in the vocabulary: {sorted(known)[:5]}"
            f"{'...' if len(known) > 5 else ''}")
    n_added = tokenizer.add_tokens(terms)
    if n_added != len(terms):
        raise BridgeError(
            f"tokenizer accepted {n_added} of {len(terms)} terms")
    if n_added:
        old = encoder.get_input_embeddings().weight.detach()
        mean = old.mean(dim=0)
        encoder.resize_token_embeddings(len(tokenizer), mean_resizing=False)
        gen = torch.Generator().manual_seed(seed)
        noise = torch.randn((n_added, mean.shape[0]), generator=gen) * noise_std
        with torch.no_grad():
            encoder.get_input_embeddings().weight[-n_added:] = mean + noise
    return n_added


class ArticleClassifier(nn.Module):
    """Encoder plus one linear layer over the pooled [CLS] embedding."""

    def __init__(self, encoder, n_classes: int):
        super().__init__()
        self.encoder = encoder
        self.head = nn.Linear(encoder.config.hidden_size, n_classes)

    def pooled(self, **batch) -> torch.Tensor:
        out = self.encoder(**batch)
        pooled = getattr(out, "pooler_output", None)
        if pooled is None:
            pooled = out.last_hidden_state[:, 0]
        return pooled

    def forward(self, **batch) -> torch.Tensor:
        return self.head(self.pooled(**batch))


def save_classifier(clf: ArticleClassifier, tokenizer, labels: List[str],
                    sigmoid_normalize: bool, out_dir) -> Path:
    out_dir = Path(out_dir)
    encoder_dir = out_dir / ENCODER_DIR
    encoder_dir.mkdir(parents=True, exist_ok=True)
    clf.encoder.save_pretrained(encoder_dir)
    tokenizer.save_pretrained(encoder_dir)
    torch.save(clf.head.state_dict(), out_dir / HEAD_FILE)
    meta = {"labels": labels, "sigmoid_normalize": sigmoid_normalize,
            "hidden_size": clf.encoder.config.hidden_size}
    with open(out_dir / META_FILE, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    return out_dir


def load_classifier(checkpoint_dir) -> Tuple[object, ArticleClassifier,
                                             List[str], bool]:
    checkpoint_dir = Path(checkpoint_dir)
    meta_path = checkpoint_dir / META_FILE
    if not meta_path.is_file():
        raise BridgeError(f"{checkpoint_dir}: not a classifier checkpoint")
    with open(meta_path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    labels = [str(x) for x in meta["labels"]]
    tokenizer, encoder = load_base(checkpoint_dir / ENCODER_DIR)
    clf = ArticleClassifier(encoder, len(labels))
    state = torch.load(checkpoint_dir / HEAD_FILE, weights_only=True)
    head_rows = state["weight"].shape[0]
    if head_rows != len(labels):
        raise BridgeError(
            f"{checkpoint_dir}: head has {head_rows} outputs for "
            f"{len(labels)} labels")
    clf.head.load_state_dict(state)
    clf.eval()
    return tokenizer, clf, labels, bool(meta.get("sigmoid_normalize", False))
