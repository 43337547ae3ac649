#!/usr/bin/env python3
"""Convert a Hugging Face BERT checkpoint into the directory layout the C++
encoder loads: config.json, vocab.txt and weights.bin (IAWB blob).

    python tools/convert_bert_checkpoint.py bert-large-uncased pretrained/bert-large-uncased
"""

import argparse
import json
import shutil
import struct
from pathlib import Path

import numpy as np

MAGIC = b"IAWB"
VERSION = 1

CONFIG_KEYS = [
    "vocab_size",
    "hidden_size",
    "num_hidden_layers",
    "num_attention_heads",
    "intermediate_size",
    "max_position_embeddings",
    "type_vocab_size",
    "layer_norm_eps",
    "hidden_dropout_prob",
    "attention_probs_dropout_prob",
    "initializer_range",
]


def encoder_tensors(state_dict):
    """Yield (name, 2-D float array) in the encoder's naming scheme.

    nn.Linear stores weights as [out, in]; the C++ side keeps [in, out].
    Vectors become single-row matrices. Prediction heads are dropped.
    """
    for name, tensor in state_dict.items():
        if name.startswith("bert."):
            name = name[len("bert."):]
        if not name.startswith(("embeddings.", "encoder.", "pooler.")):
            continue
        if name.endswith("position_ids"):
            continue
        array = tensor.detach().cpu().double().numpy()
        if array.ndim == 1:
            array = array.reshape(1, -1)
        elif not name.startswith("embeddings."):
            array = array.T
        yield name, np.ascontiguousarray(array)


def write_weights(tensors, path, dtype=np.float64):
    tensors = list(tensors)
    with open(path, "wb") as out:
        out.write(MAGIC)
        out.write(struct.pack("<IQ", VERSION, len(tensors)))
        for name, array in tensors:
            encoded = name.encode("utf-8")
            rows, cols = array.shape
            out.write(struct.pack("<I", len(encoded)))
            out.write(encoded)
            out.write(struct.pack("<BQQ", np.dtype(dtype).itemsize, rows, cols))
            out.write(array.astype(dtype).tobytes(order="C"))


def write_config(hf_config, path, pooler=True):
    config = {key: getattr(hf_config, key) for key in CONFIG_KEYS}
    if getattr(hf_config, "hidden_act", "gelu") != "gelu":
        raise SystemExit(f"unsupported activation {hf_config.hidden_act!r}; only exact gelu is implemented")
    config["pooler"] = pooler
    path.write_text(json.dumps(config, indent=2) + "\n")


def convert(model, vocab_file, out_dir, dtype=np.float64):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    state = model.state_dict()
    pooler = any(k.startswith(("pooler.", "bert.pooler.")) for k in state)
    write_config(model.config, out_dir / "config.json", pooler=pooler)
    write_weights(encoder_tensors(state), out_dir / "weights.bin", dtype)
    if Path(vocab_file).resolve() != (out_dir / "vocab.txt").resolve():
        shutil.copyfile(vocab_file, out_dir / "vocab.txt")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("source", help="model name or local directory understood by transformers")
    parser.add_argument("out", help="output directory")
    parser.add_argument("--float32", action="store_true", help="store weights as float32 (half the size)")
    args = parser.parse_args()

    from transformers import BertModel, BertTokenizer

    model = BertModel.from_pretrained(args.source)
    tokenizer = BertTokenizer.from_pretrained(args.source)
    staging = Path(args.out)
    staging.mkdir(parents=True, exist_ok=True)
    tokenizer.save_vocabulary(str(staging))
    convert(model, staging / "vocab.txt", staging, np.float32 if args.float32 else np.float64)
    print(f"wrote {staging}")


if __name__ == "__main__":
    main()
