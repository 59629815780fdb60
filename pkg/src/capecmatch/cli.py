"""Command-line surface: ingest, gt1, embed, rank, evaluate, stats.

Exit codes: 0 success, 1 usage error, 2 data error, 3 provider error.
All outputs are machine-readable (CSV, JSON lines, or the binary vector
cache); plotting is left to external tools.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .corpus import (
    build_gt1,
    filter_non_deprecated,
    load_ground_truth,
    parse_capec_catalog,
    parse_nvd_feed,
    read_patterns,
    read_vulnerabilities,
    scoring_records,
    write_ground_truth,
    write_patterns,
    write_vulnerabilities,
)
from .embedding import (
    SCORED_ATTRIBUTES,
    CacheBackedProvider,
    EmbeddingProvider,
    HashedBagOfWordsProvider,
    MemoizingProvider,
    WorkerProvider,
    default_worker_command,
    embedding_input_text,
    text_key,
    write_cache,
)
from .errors import DataError, EvaluationError, ProviderError
from .evaluation import (
    load_threat_mapping,
    ranking_map,
    sweep_report,
    threat_precision_at_k,
    threat_recall_at_k,
    threat_vulnerabilities,
    unmapped_gt_patterns,
    write_metrics_report,
)
from .nvdstats import cwe_coverage_by_year, write_year_coverage
from .ranking import MODE_BASE, MODE_HYBRID, rank_corpus, read_rankings, write_rankings
from .textnorm import ACRONYMS_FILE, default_normalizer, load_acronyms

logger = logging.getLogger(__name__)

CORPUS_DIR_ENV = "CAPECMATCH_CORPUS_DIR"
VULNS_FILE = "vulnerabilities.jsonl"
PATTERNS_FILE = "patterns.jsonl"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PROVIDER = 3

PROVIDER_TEST_HASH = "test-hash"
PROVIDER_EXTERNAL_CACHE = "external-cache"
PROVIDER_WORKER = "worker"


class CliUsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage errors exit 1 instead of 2."""

    def error(self, message):
        raise CliUsageError(message)


@dataclass
class RunConfig:
    """Resolved settings for a ranking run."""

    corpus_dir: Path
    provider: str
    cache_path: Path | None
    worker_cmd: str | None
    model: str | None
    mode: str
    acronyms_path: Path
    strip_versions: bool

    def __post_init__(self):
        if self.provider == PROVIDER_EXTERNAL_CACHE and self.cache_path is None:
            raise CliUsageError("--provider external-cache requires --cache")
        if self.provider == PROVIDER_WORKER and not (self.worker_cmd or self.model):
            raise CliUsageError("--provider worker requires --model or --worker-cmd")
        if self.mode == MODE_HYBRID and not self.acronyms_path.exists():
            raise CliUsageError(f"acronym dictionary not found: {self.acronyms_path}")


def _corpus_dir(args) -> Path:
    if args.corpus:
        return Path(args.corpus)
    env = os.environ.get(CORPUS_DIR_ENV)
    if env:
        return Path(env)
    raise CliUsageError(f"--corpus not given and {CORPUS_DIR_ENV} is not set")


def _load_corpus(corpus_dir: Path):
    vulns_path = corpus_dir / VULNS_FILE
    patterns_path = corpus_dir / PATTERNS_FILE
    for path in (vulns_path, patterns_path):
        if not path.exists():
            raise DataError(f"corpus file not found: {path} (run `capecmatch ingest`)")
    vulns = scoring_records(read_vulnerabilities(vulns_path))
    patterns = filter_non_deprecated(read_patterns(patterns_path))
    return vulns, patterns


def _make_provider(config: RunConfig) -> EmbeddingProvider:
    if config.provider == PROVIDER_TEST_HASH:
        return MemoizingProvider(HashedBagOfWordsProvider())
    if config.provider == PROVIDER_EXTERNAL_CACHE:
        return CacheBackedProvider(config.cache_path, expected_model_id=config.model)
    if config.provider == PROVIDER_WORKER:
        command = config.worker_cmd or default_worker_command(config.model)
        return MemoizingProvider(WorkerProvider(command))
    raise CliUsageError(f"unknown provider {config.provider!r}")


def _close_provider(provider: EmbeddingProvider) -> None:
    inner = getattr(provider, "inner", provider)
    close = getattr(inner, "close", None)
    if close is not None:
        close()


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_ingest(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    vulns = []
    for feed in args.nvd or []:
        vulns.extend(parse_nvd_feed(feed))
    write_vulnerabilities(out_dir / VULNS_FILE, vulns)
    patterns = parse_capec_catalog(args.capec) if args.capec else []
    write_patterns(out_dir / PATTERNS_FILE, patterns)
    rejected = sum(1 for v in vulns if v.rejected)
    print(
        f"ingested {len(vulns)} CVE records ({rejected} rejected/reserved) and "
        f"{len(patterns)} attack patterns into {out_dir}"
    )
    return EXIT_OK


def cmd_gt1(args) -> int:
    patterns = filter_non_deprecated(parse_capec_catalog(args.capec))
    extras = []
    if args.extra:
        extras = sorted(load_ground_truth(args.extra).pairs)
    gt = build_gt1(patterns, extras)
    write_ground_truth(args.out, gt)
    print(f"wrote {len(gt)} ground-truth pairs to {args.out}")
    return EXIT_OK


def _corpus_texts(vulns, patterns, strip_versions: bool) -> list[tuple[str, str]]:
    """(key, text) pairs for everything the ranking pipeline will embed."""
    texts: dict[str, str] = {}
    for v in vulns:
        text = embedding_input_text(v.description, strip_versions)
        texts[text_key(text)] = text
    for ap in patterns:
        for attribute in SCORED_ATTRIBUTES:
            value = getattr(ap, attribute)
            if value and value.strip():
                text = embedding_input_text(value, strip_versions)
                texts[text_key(text)] = text
    return sorted(texts.items())


def cmd_embed(args) -> int:
    corpus_dir = _corpus_dir(args)
    vulns, patterns = _load_corpus(corpus_dir)
    if args.provider == PROVIDER_TEST_HASH:
        provider = HashedBagOfWordsProvider()
    elif args.provider == PROVIDER_WORKER:
        command = args.worker_cmd or default_worker_command(args.model or "")
        if not args.worker_cmd and not args.model:
            raise CliUsageError("embed --provider worker requires --model or --worker-cmd")
        provider = WorkerProvider(command)
    else:
        raise CliUsageError("embed supports --provider test-hash or worker")
    try:
        entries = _corpus_texts(vulns, patterns, args.strip_versions)
        count = write_cache(entries, provider, args.out)
    finally:
        _close_provider(provider)
    print(f"embedded {count} texts with {provider.model_id} into {args.out}")
    return EXIT_OK


def cmd_rank(args) -> int:
    config = RunConfig(
        corpus_dir=_corpus_dir(args),
        provider=args.provider,
        cache_path=Path(args.cache) if args.cache else None,
        worker_cmd=args.worker_cmd,
        model=args.model,
        mode=args.mode,
        acronyms_path=Path(args.acronyms),
        strip_versions=args.strip_versions,
    )
    vulns, patterns = _load_corpus(config.corpus_dir)
    if not patterns:
        raise DataError("corpus has no non-deprecated attack patterns")
    if args.cve:
        wanted = {c.upper() for c in args.cve}
        by_id = {v.cve_id: v for v in vulns}
        missing = sorted(wanted - by_id.keys())
        if missing:
            raise DataError(f"unknown CVE ids: {', '.join(missing)}")
        vulns = [by_id[c] for c in sorted(wanted)]
    normalizer = default_normalizer()
    dictionary = (
        load_acronyms(config.acronyms_path, normalizer=normalizer)
        if config.mode == MODE_HYBRID
        else None
    )
    provider = _make_provider(config)
    try:
        errors: list[tuple[str, Exception]] = []
        rankings = rank_corpus(
            vulns,
            patterns,
            provider,
            dictionary,
            mode=config.mode,
            strip_versions=config.strip_versions,
            normalizer=normalizer,
            errors=errors,
        )
    finally:
        _close_provider(provider)
    write_rankings(args.out, rankings)
    print(f"ranked {len(patterns)} patterns for {len(rankings)} CVEs into {args.out}")
    if errors:
        for cve_id, exc in errors:
            print(f"warning: could not rank {cve_id}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def cmd_evaluate(args) -> int:
    rankings = ranking_map(read_rankings(args.rankings))
    gt = load_ground_truth(args.gt)
    missing = sorted(gt.cve_ids() - rankings.keys())
    if missing:
        raise EvaluationError(
            f"ground-truth CVEs missing from rankings: {', '.join(missing)}"
        )
    if args.threat_map:
        mapping = load_threat_mapping(args.threat_map)
        unmapped = unmapped_gt_patterns(gt, mapping)
        if unmapped:
            print(
                "warning: no threat mapping for ground-truth patterns: "
                + ", ".join(unmapped),
                file=sys.stderr,
            )
        import csv as _csv

        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = _csv.writer(fh, lineterminator="\n")
            writer.writerow(["model", "threat_id", "K", "recall", "precision"])
            for threat_id in mapping.threat_ids():
                if not threat_vulnerabilities(gt, mapping, threat_id):
                    continue
                for k in range(1, args.kmax + 1):
                    recall = threat_recall_at_k(rankings, gt, mapping, threat_id, k)
                    precision = threat_precision_at_k(rankings, gt, mapping, threat_id, k)
                    writer.writerow([args.model, threat_id, k, repr(recall), repr(precision)])
        print(f"wrote threat-grouped metrics to {args.out}")
        return EXIT_OK
    report = sweep_report(rankings, gt, args.kmax, model=args.model)
    write_metrics_report(args.out, report)
    print(
        f"wrote metrics for K=1..{args.kmax} (MRR {report.mrr:.4f}, "
        f"{report.n_vulnerabilities} CVEs, {report.n_associations} associations) to {args.out}"
    )
    return EXIT_OK


def cmd_stats(args) -> int:
    records = []
    paths: list[Path] = []
    if args.nvd_dir:
        base = Path(args.nvd_dir)
        if not base.is_dir():
            raise DataError(f"not a directory: {base}")
        paths.extend(sorted(p for p in base.iterdir() if p.suffix in (".json", ".gz")))
    paths.extend(Path(p) for p in args.nvd or [])
    if not paths:
        raise CliUsageError("stats needs --nvd-dir or --nvd")
    for path in paths:
        records.extend(parse_nvd_feed(path))
    rows = cwe_coverage_by_year(records)
    write_year_coverage(args.out, rows)
    print(f"wrote per-year CWE coverage for {len(records)} CVEs to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="capecmatch", description=__doc__)
    parser.add_argument("--version", action="version", version=f"capecmatch {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse NVD/CAPEC inputs into the corpus cache")
    p.add_argument("--nvd", action="append", help="NVD JSON feed (repeatable; .gz ok)")
    p.add_argument("--capec", help="CAPEC XML catalog")
    p.add_argument("--out", required=True, help="corpus output directory")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("gt1", help="build the ground truth from Example Instances")
    p.add_argument("--capec", required=True, help="CAPEC XML catalog")
    p.add_argument("--extra", help="CSV of extra pairs to add (cve_id,capec_id)")
    p.add_argument("--out", required=True, help="ground-truth CSV to write")
    p.set_defaults(func=cmd_gt1)

    p = sub.add_parser("embed", help="embed the corpus into a vector cache")
    p.add_argument("--corpus", help=f"corpus directory (default ${CORPUS_DIR_ENV})")
    p.add_argument(
        "--provider",
        choices=[PROVIDER_TEST_HASH, PROVIDER_WORKER],
        default=PROVIDER_TEST_HASH,
    )
    p.add_argument("--model", help="worker model id (e.g. all-distilroberta-v1)")
    p.add_argument("--worker-cmd", help="override the worker launch command")
    p.add_argument("--out", required=True, help="vector cache to write")
    p.add_argument(
        "--no-strip-versions",
        dest="strip_versions",
        action="store_false",
        help="embed raw texts without removing version tokens",
    )
    p.set_defaults(func=cmd_embed, strip_versions=True)

    p = sub.add_parser("rank", help="rank attack patterns for each corpus CVE")
    p.add_argument("--corpus", help=f"corpus directory (default ${CORPUS_DIR_ENV})")
    p.add_argument("--mode", choices=[MODE_BASE, MODE_HYBRID], default=MODE_HYBRID)
    p.add_argument(
        "--provider",
        choices=[PROVIDER_TEST_HASH, PROVIDER_EXTERNAL_CACHE, PROVIDER_WORKER],
        default=PROVIDER_TEST_HASH,
    )
    p.add_argument("--cache", help="vector cache (for --provider external-cache)")
    p.add_argument("--model", help="model id (worker launch / cache validation)")
    p.add_argument("--worker-cmd", help="override the worker launch command")
    p.add_argument("--cve", action="append", help="rank only these CVE ids (repeatable)")
    p.add_argument("--acronyms", default=str(ACRONYMS_FILE), help="acronym dictionary CSV")
    p.add_argument("--out", required=True, help="ranking CSV to write")
    p.add_argument(
        "--no-strip-versions",
        dest="strip_versions",
        action="store_false",
        help="embed raw texts without removing version tokens",
    )
    p.set_defaults(func=cmd_rank, strip_versions=True)

    p = sub.add_parser("evaluate", help="compute metrics for a ranking CSV")
    p.add_argument("--rankings", required=True, help="ranking CSV from `rank`")
    p.add_argument("--gt", required=True, help="ground-truth CSV")
    p.add_argument("--kmax", type=int, default=10, help="largest K in the sweep")
    p.add_argument("--model", default="model", help="model label for the report")
    p.add_argument("--threat-map", help="capec_id,threat_id CSV for grouped metrics")
    p.add_argument("--out", required=True, help="report CSV to write")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="per-year share of CVEs with CWE references")
    p.add_argument("--nvd-dir", help="directory of NVD feeds")
    p.add_argument("--nvd", action="append", help="individual NVD feed (repeatable)")
    p.add_argument("--out", required=True, help="stats CSV to write")
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliUsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CliUsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
