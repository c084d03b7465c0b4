#!/usr/bin/env python3
"""Run the TF-IDF frontier experiment on the Movie Reviews rationale corpus.

The corpus is not bundled; prepare it under data/movie_reviews/ as

    corpus.jsonl   one record per document:
                   {"id": str, "tokens": [str], "label_votes": [str],
                    "annotator_masks": [[0|1]], "split": "train"|"test"}
    labels.json    {"names": ["NEG", "POS"], "rationale_bearing": [0, 1]}

then invoke this script.  It mirrors the desk-scale setup: TF-IDF features,
two negative rationales per sample (m=3), at most 15 frontier models, and
LIME explanations on a fixed 50-document test subset.
"""

import argparse
import json
import time
from pathlib import Path

from rationale_frontier.pipeline import ExperimentConfig, run_experiment

DEFAULT_DATA = Path(__file__).resolve().parent.parent / "data" / "movie_reviews"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data", default=str(DEFAULT_DATA),
                        help="directory holding corpus.jsonl and labels.json")
    parser.add_argument("--out", default="runs/movie_reviews")
    parser.add_argument("--k", type=int, default=200, help="TF-IDF SVD rank")
    parser.add_argument("--budget", type=int, default=15)
    parser.add_argument("--subset", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    data = Path(args.data)
    if not (data / "corpus.jsonl").exists():
        raise SystemExit(
            f"corpus not found at {data / 'corpus.jsonl'}; see the module "
            "docstring for the expected layout"
        )

    cfg = ExperimentConfig(
        corpus_path=str(data / "corpus.jsonl"),
        labels_path=str(data / "labels.json"),
        out_dir=args.out,
        featurizer={"kind": "tfidf", "k": args.k},
        m=3,
        budget=args.budget,
        subset_size=args.subset,
        split_seed=args.seed,
        variant_seed=args.seed,
        explain_seed=args.seed,
        subset_seed=args.seed,
    )
    start = time.perf_counter()
    artifact = run_experiment(cfg)
    elapsed = time.perf_counter() - start

    with open(artifact.directory / "summary.json", encoding="utf-8") as f:
        summary = json.load(f)
    deltas = summary["chosen_deltas"]
    print(f"run directory:   {artifact.directory}")
    print(f"frontier points: {len(artifact.frontier.points)}")
    print(f"elapsed:         {elapsed:.0f}s")
    print(f"baseline acc={summary['baseline']['accuracy']:.4f} "
          f"auprc={summary['baseline']['mean_auprc']:.4f}")
    print(f"selected acc={summary['chosen']['accuracy']:.4f} "
          f"auprc={summary['chosen']['mean_auprc']:.4f} "
          f"(w1={deltas['w1']:.3f})")
    print(f"deltas   acc={deltas['acc_pct_delta']:+.2f}pp "
          f"auprc={deltas['auprc_pct_delta']:+.2f}pp "
          f"rel={deltas['auprc_rel_pct_delta']:+.2f}%")


if __name__ == "__main__":
    main()
