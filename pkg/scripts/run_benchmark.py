#!/usr/bin/env python3
"""End-to-end benchmark: rank the ground-truth CVEs against the full catalog
with one or more embedding models and compare the metrics against the
reference values recorded for the shipped configuration.

Requires downloaded corpora (see scripts/download_corpora.py) and, for the
transformer models, the worker package (`pip install -e worker`) with network
access to fetch model weights on first use. Public corpora and model versions
drift, so reference comparisons use a +/-0.05 band and report deltas rather
than hard-failing.

Example:
    python scripts/run_benchmark.py \
        --capec corpora/capec_latest.xml \
        --nvd-dir corpora/ \
        --gt ground_truth.csv \
        --models all-distilroberta-v1 basel/ATTACK-BERT \
        --workdir bench/
"""

import argparse
import sys
from pathlib import Path

from capecmatch.corpus import (
    filter_non_deprecated,
    load_ground_truth,
    parse_capec_catalog,
    parse_nvd_feed,
    scoring_records,
)
from capecmatch.embedding import MemoizingProvider, WorkerProvider, default_worker_command
from capecmatch.evaluation import sweep_report, write_metrics_report
from capecmatch.ranking import MODE_BASE, MODE_HYBRID, rank_corpus, write_rankings
from capecmatch.textnorm import default_normalizer, load_acronyms

# Expected results for the shipped configuration (example-instance ground
# truth, 559-pattern catalog). Drift in public corpora or encoder versions
# moves these; deltas are reported, the invariant suite stays authoritative.
REFERENCE = {
    ("all-distilroberta-v1", MODE_BASE): {"recall@10": 0.778},
    ("basel/ATTACK-BERT", MODE_HYBRID): {"recall@1": 0.445, "mrr": 0.587},
}
BAND = 0.05


def load_corpus(args):
    patterns = filter_non_deprecated(parse_capec_catalog(args.capec))
    print(f"catalog: {len(patterns)} non-deprecated patterns")
    gt = load_ground_truth(args.gt)
    wanted = gt.cve_ids()
    vulns = []
    feeds = sorted(Path(args.nvd_dir).glob("nvdcve-*.json*"))
    if not feeds:
        raise SystemExit(f"no NVD feeds found under {args.nvd_dir}")
    for feed in feeds:
        for record in scoring_records(parse_nvd_feed(feed)):
            if record.cve_id in wanted:
                vulns.append(record)
    found = {v.cve_id for v in vulns}
    missing = sorted(wanted - found)
    if missing:
        print(f"warning: {len(missing)} ground-truth CVEs not in the feeds: {missing[:5]}...")
        gt = type(gt).from_pairs((c, p) for c, p in gt.pairs if c in found)
    print(f"corpus: {len(vulns)} CVEs, ground truth {len(gt)} pairs")
    return vulns, patterns, gt


def evaluate_model(model, mode, vulns, patterns, gt, workdir, kmax):
    label = f"{model.replace('/', '_')}-{mode}"
    normalizer = default_normalizer()
    acronyms = load_acronyms(normalizer=normalizer) if mode == MODE_HYBRID else None
    provider = MemoizingProvider(WorkerProvider(default_worker_command(model)))
    try:
        rankings = rank_corpus(
            vulns, patterns, provider, acronyms, mode=mode, normalizer=normalizer
        )
    finally:
        provider.inner.close()
    write_rankings(workdir / f"rankings-{label}.csv", rankings)
    report = sweep_report(rankings, gt, kmax, model=label)
    write_metrics_report(workdir / f"report-{label}.csv", report)
    return report


def check_reference(model, mode, report):
    expected = REFERENCE.get((model, mode))
    if not expected:
        return
    observed = {
        "recall@1": report.per_k[1].recall,
        "recall@10": report.per_k[10].recall if 10 in report.per_k else None,
        "mrr": report.mrr,
    }
    for key, reference in expected.items():
        value = observed.get(key)
        if value is None:
            continue
        delta = value - reference
        status = "within band" if abs(delta) <= BAND else "OUTSIDE band (corpus/model drift?)"
        print(f"  {key}: {value:.3f} vs reference {reference:.3f} (delta {delta:+.3f}, {status})")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--capec", required=True)
    parser.add_argument("--nvd-dir", required=True)
    parser.add_argument("--gt", required=True, help="ground-truth CSV (cve_id,capec_id)")
    parser.add_argument("--models", nargs="+", default=["all-distilroberta-v1"])
    parser.add_argument("--kmax", type=int, default=10)
    parser.add_argument("--workdir", default="bench")
    args = parser.parse_args()

    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    vulns, patterns, gt = load_corpus(args)

    for model in args.models:
        print(f"\n=== {model} ===")
        reports = {}
        for mode in (MODE_BASE, MODE_HYBRID):
            report = evaluate_model(model, mode, vulns, patterns, gt, workdir, args.kmax)
            reports[mode] = report
            print(
                f"{mode:>6}: R@1 {report.per_k[1].recall:.3f}  "
                f"R@{args.kmax} {report.per_k[args.kmax].recall:.3f}  MRR {report.mrr:.3f}"
            )
            check_reference(model, mode, report)
        gain = reports[MODE_HYBRID].mrr - reports[MODE_BASE].mrr
        verdict = "improves" if gain > 0 else "does NOT improve"
        print(f"hybrid keyword scoring {verdict} MRR ({gain:+.3f})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
