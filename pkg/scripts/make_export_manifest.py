#!/usr/bin/env python3
"""Generate an embedding-export manifest for a tokenized corpus.

Samples the negative rationale position sets exactly as the training
pipeline will (same seeded draw per sample), so the exporter's variant rows
cover everything an imported-features run needs.  The manifest is consumed
by the separate `embed-export` tool.
"""

import argparse
import json
from pathlib import Path

from rationale_frontier.corpus import TokenizedSample
from rationale_frontier.featurize import sample_negatives


def load_tokenized(path):
    samples = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            rec = json.loads(line)
            samples.append(TokenizedSample(
                id=rec["id"], tokens=tuple(rec["tokens"]), label=rec["label"],
                rationale=tuple(rec["rationale"]), split=rec.get("split"),
            ))
    return samples


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", required=True,
                        help="tokenized corpus JSONL (id/tokens/label/"
                             "rationale/split records)")
    parser.add_argument("--encoder", required=True,
                        help="path or name of the pretrained encoder")
    parser.add_argument("--out-dir", required=True,
                        help="directory the exporter should write FMAT files to")
    parser.add_argument("--manifest", required=True, help="output manifest path")
    parser.add_argument("--m", type=int, default=3,
                        help="sample-rationale count (1 positive + m-1 negatives)")
    parser.add_argument("--seed", type=int, default=0,
                        help="negative-rationale sampling seed (must match "
                             "the experiment config's variant_seed)")
    parser.add_argument("--pooling", default="cls_token",
                        choices=["cls_token", "pooled_output"])
    args = parser.parse_args()

    negative_masks = {}
    for s in load_tokenized(args.corpus):
        if s.rationale_size == 0:
            continue
        masks = []
        for positions in sample_negatives(s, args.m, args.seed):
            mask = [0] * s.num_tokens
            for i in positions:
                mask[i] = 1
            masks.append(mask)
        if masks:
            negative_masks[s.id] = masks

    manifest = {
        "corpus_path": str(Path(args.corpus).resolve()),
        "encoder_path": args.encoder,
        "out_dir": str(Path(args.out_dir).resolve()),
        "pooling": args.pooling,
        "negative_masks": negative_masks,
    }
    with open(args.manifest, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    print(f"wrote {args.manifest}: negatives for {len(negative_masks)} samples")


if __name__ == "__main__":
    main()
