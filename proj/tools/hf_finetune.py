#!/usr/bin/env python3
"""External trainer for the `external` finetune adapter.

    hf_finetune.py train --train train.csv --model-dir DIR --seed S \
        --batch-size B --epochs E [--backbone NAME] [--learning-rate LR]
    hf_finetune.py predict --model-dir DIR --input input.csv --output labels.txt

Needs torch and transformers, and the backbone weights in the local
Hugging Face cache or reachable online.
"""

import argparse
import csv
import random
import sys

LABELS = ["Direct", "Reporting", "None"]


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def set_seed(seed):
    import numpy as np
    import torch

    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def train(args):
    import torch
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    set_seed(args.seed)
    rows = read_csv(args.train)
    seen = {r["label"] for r in rows}
    labels = LABELS if seen <= set(LABELS) else sorted(seen)
    index = {l: i for i, l in enumerate(labels)}

    tok = AutoTokenizer.from_pretrained(args.backbone)
    model = AutoModelForSequenceClassification.from_pretrained(
        args.backbone,
        num_labels=len(labels),
        id2label=dict(enumerate(labels)),
        label2id=index,
        ignore_mismatched_sizes=True,
    )
    opt = torch.optim.Adam(model.parameters(), lr=args.learning_rate)
    model.train()
    gen = random.Random(args.seed)
    for _ in range(args.epochs):
        order = list(range(len(rows)))
        gen.shuffle(order)
        for start in range(0, len(order), args.batch_size):
            batch = [rows[i] for i in order[start : start + args.batch_size]]
            enc = tok([r["text"] for r in batch], truncation=True, max_length=128, padding=True, return_tensors="pt")
            target = torch.tensor([index[r["label"]] for r in batch])
            loss = model(**enc, labels=target).loss
            opt.zero_grad()
            loss.backward()
            opt.step()
    model.save_pretrained(args.model_dir)
    tok.save_pretrained(args.model_dir)


def predict(args):
    import torch
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    tok = AutoTokenizer.from_pretrained(args.model_dir)
    model = AutoModelForSequenceClassification.from_pretrained(args.model_dir)
    model.eval()
    rows = read_csv(args.input)
    out = []
    with torch.no_grad():
        for start in range(0, len(rows), 32):
            batch = rows[start : start + 32]
            enc = tok([r["text"] for r in batch], truncation=True, max_length=128, padding=True, return_tensors="pt")
            for i in model(**enc).logits.argmax(dim=-1).tolist():
                out.append(model.config.id2label[i])
    with open(args.output, "w", encoding="utf-8") as f:
        f.write("\n".join(out) + ("\n" if out else ""))


def main(argv):
    p = argparse.ArgumentParser()
    sub = p.add_subparsers(dest="cmd", required=True)
    t = sub.add_parser("train")
    t.add_argument("--train", required=True)
    t.add_argument("--model-dir", required=True)
    t.add_argument("--seed", type=int, default=42)
    t.add_argument("--batch-size", type=int, default=4)
    t.add_argument("--epochs", type=int, default=4)
    t.add_argument("--backbone", default="distilbert-base-uncased")
    t.add_argument("--learning-rate", type=float, default=2e-5)
    pr = sub.add_parser("predict")
    pr.add_argument("--model-dir", required=True)
    pr.add_argument("--input", required=True)
    pr.add_argument("--output", required=True)
    args = p.parse_args(argv)
    train(args) if args.cmd == "train" else predict(args)


if __name__ == "__main__":
    main(sys.argv[1:])
