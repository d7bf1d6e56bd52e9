import os

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TOKENIZERS_PARALLELISM", "false")

import pytest
import torch
from tokenizers import BertWordPieceTokenizer
from transformers import BertConfig, BertModel, BertTokenizerFast
from transformers.utils import logging as hf_logging

hf_logging.set_verbosity_error()
hf_logging.disable_progress_bar()

# enough Italian-ish words that toy corpora tokenize without [UNK]
BASE_VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "il", "la", "di", "del", "della", "sono", "deve", "parte", "cosa",
    "contratto", "vendita", "obbligazione", "pegno", "ipoteca", "danno",
    "tutela", "possesso", "eredita", "donazione", "prova", "titolo",
    "bene", "diritto", "legge", "atto",
    "##o", "##i", "##re",
]


@pytest.fixture(scope="session")
def tiny_base(tmp_path_factory):
    """A small randomly initialized BERT checkpoint, built offline."""
    root = tmp_path_factory.mktemp("tinybert")
    vocab_path = root / "vocab.txt"
    vocab_path.write_text("\n".join(BASE_VOCAB) + "\n", encoding="utf-8")
    wp = BertWordPieceTokenizer(vocab=str(vocab_path), lowercase=True)
    wp.save(str(root / "tokenizer.json"))
    tokenizer = BertTokenizerFast(tokenizer_file=str(root / "tokenizer.json"),
                                  vocab_file=str(vocab_path),
                                  do_lower_case=True)
    config = BertConfig(vocab_size=len(BASE_VOCAB), hidden_size=32,
                        num_hidden_layers=1, num_attention_heads=2,
                        intermediate_size=64, max_position_embeddings=64)
    torch.manual_seed(0)
    BertModel(config).save_pretrained(root)
    tokenizer.save_pretrained(root)
    return root
