#!/usr/bin/env python3
"""Build the tiny BERT parity fixture under tests/data/tiny_bert.

A randomly initialized 2-layer BertModel is converted with
convert_bert_checkpoint.py, and its eval-mode outputs for a few id
sequences are frozen in expected.json.
"""

import json
import sys
from pathlib import Path

import torch
from transformers import BertConfig, BertModel

sys.path.insert(0, str(Path(__file__).resolve().parent))
from convert_bert_checkpoint import convert  # noqa: E402

VOCAB = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "play", "some", "jazz", "book", "a", "table", "#",
         "search", "creative", "work", "##s", "the", "for", "me", "weather"]

SEQUENCES = [
    [2, 5, 6, 7, 3],
    [2, 8, 9, 10, 17, 18, 11, 12, 13, 14, 3],
    [2, 19, 15, 3],
]


def main():
    out = Path(__file__).resolve().parent.parent / "tests" / "data" / "tiny_bert"
    out.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(0)
    config = BertConfig(vocab_size=len(VOCAB), hidden_size=8, num_hidden_layers=2, num_attention_heads=2,
                        intermediate_size=16, max_position_embeddings=16, initializer_range=0.5)
    model = BertModel(config).double().eval()
    # Non-trivial LayerNorm parameters so the parity test exercises them.
    with torch.no_grad():
        for name, p in model.named_parameters():
            if "LayerNorm" in name:
                p.add_(0.1 * torch.randn_like(p))

    vocab_file = out / "vocab.txt"
    vocab_file.write_text("\n".join(VOCAB) + "\n")
    convert(model, vocab_file, out)

    expected = []
    with torch.no_grad():
        for ids in SEQUENCES:
            result = model(torch.tensor([ids]))
            expected.append({
                "ids": ids,
                "hidden_states": result.last_hidden_state[0].tolist(),
                "pooled": result.pooler_output[0].tolist(),
            })
        # Right-padded batch with an attention mask: valid rows must match the
        # unpadded run above.
        width = max(len(s) for s in SEQUENCES)
        padded = torch.tensor([s + [0] * (width - len(s)) for s in SEQUENCES])
        mask = (padded != 0).long()
        batch = model(padded, attention_mask=mask)
        for i, ids in enumerate(SEQUENCES):
            diff = (batch.last_hidden_state[i, : len(ids)] - torch.tensor(expected[i]["hidden_states"])).abs().max()
            assert diff < 1e-6, diff
    (out / "expected.json").write_text(json.dumps(expected) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
