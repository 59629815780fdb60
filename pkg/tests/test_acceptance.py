"""Acceptance suite: one test per release criterion, each printing a
pass/fail line (run with `pytest tests/test_acceptance.py -v -s`).
"""

import random
import time
from contextlib import contextmanager

import pytest

from capecmatch.corpus import GroundTruth, VulnerabilityRecord, AttackPattern
from capecmatch.corpus import (
    read_patterns,
    read_vulnerabilities,
    write_ground_truth,
    write_patterns,
    write_vulnerabilities,
    load_ground_truth,
)
from capecmatch.embedding import (
    HashedBagOfWordsProvider,
    MemoizingProvider,
    read_cache,
    write_cache,
)
from capecmatch.evaluation import (
    ThreatMapping,
    f1_at_k,
    mrr,
    precision_at_k,
    read_metrics_report,
    recall_at_k,
    sweep_report,
    threat_precision_at_k,
    threat_recall_at_k,
    write_metrics_report,
)
from capecmatch.keywords import MAX_KEYWORD_SCORE, AcronymOutcome, keyword_score
from capecmatch.nvdstats import cwe_coverage_by_year, read_year_coverage, write_year_coverage
from capecmatch.ranking import (
    MODE_BASE,
    rank_corpus,
    read_rankings,
    write_rankings,
)
from capecmatch.textnorm import default_normalizer, load_acronyms

from conftest import make_random_instance, make_synthetic_corpus
from oracle import (
    brute_f1_at_k,
    brute_mrr,
    brute_precision_at_k,
    brute_recall_at_k,
    brute_threat_precision_at_k,
    brute_threat_recall_at_k,
)

NORM = default_normalizer()
ACRONYMS = load_acronyms(normalizer=NORM)


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[acceptance] {name}: FAIL")
        raise
    print(f"[acceptance] {name}: PASS")


# ---------------------------------------------------------------------------
# Criterion 1: metric oracle suite (>=200 random instances, exact agreement)
# ---------------------------------------------------------------------------

def test_metric_oracle_suite():
    with criterion("metric oracle suite (200+ random instances, tol 1e-12, <5s)"):
        rng = random.Random(987654321)
        started = time.perf_counter()
        instances = 0
        for _ in range(220):
            rankings, pairs = make_random_instance(rng, max_vulns=6, max_patterns=10)
            gt = GroundTruth.from_pairs(pairs)
            n_patterns = len(next(iter(rankings.values())))
            for k in range(1, n_patterns + 1):
                recall = recall_at_k(rankings, gt, k)
                precision = precision_at_k(rankings, gt, k)
                assert abs(recall - brute_recall_at_k(rankings, pairs, k)) <= 1e-12
                assert abs(precision - brute_precision_at_k(rankings, pairs, k)) <= 1e-12
                assert (
                    abs(f1_at_k(recall, precision) - brute_f1_at_k(recall, precision))
                    <= 1e-12
                )
            assert abs(mrr(rankings, gt) - brute_mrr(rankings, pairs)) <= 1e-12

            # Threat-grouped variants over a random pattern -> threat mapping.
            capec_ids = sorted({capec for _, capec in pairs})
            mapping = {cid: f"TH-{rng.randint(1, 3):02d}" for cid in capec_ids}
            threat_map = ThreatMapping(mapping=mapping)
            for threat_id in sorted(set(mapping.values())):
                vulns = {c for c, p in pairs if mapping.get(p) == threat_id}
                if not vulns:
                    continue
                for k in (1, 2, 5):
                    assert (
                        abs(
                            threat_recall_at_k(rankings, gt, threat_map, threat_id, k)
                            - brute_threat_recall_at_k(rankings, pairs, mapping, threat_id, k)
                        )
                        <= 1e-12
                    )
                    assert (
                        abs(
                            threat_precision_at_k(rankings, gt, threat_map, threat_id, k)
                            - brute_threat_precision_at_k(
                                rankings, pairs, mapping, threat_id, k
                            )
                        )
                        <= 1e-12
                    )
            instances += 1
        elapsed = time.perf_counter() - started
        assert instances >= 200
        assert elapsed < 5.0, f"oracle suite took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# Criterion 2: hand-derived synthetic fixture
# ---------------------------------------------------------------------------

def test_synthetic_fixture(synthetic_instance):
    with criterion("synthetic fixture (R@1=P@1=0.5, R@3=1, P@3=1/3, MRR=5/6)"):
        rankings, pairs = synthetic_instance
        gt = GroundTruth.from_pairs(pairs)
        assert recall_at_k(rankings, gt, 1) == 0.5
        assert precision_at_k(rankings, gt, 1) == 0.5
        assert recall_at_k(rankings, gt, 3) == 1.0
        assert precision_at_k(rankings, gt, 3) == pytest.approx(1.0 / 3.0, abs=1e-15)
        assert mrr(rankings, gt) == pytest.approx(5.0 / 6.0, abs=1e-15)


# ---------------------------------------------------------------------------
# Criterion 3: keyword suite
# ---------------------------------------------------------------------------

_KW_WORDS = (
    "alpha bravo charlie delta echo foxtrot xss sqli injection overflow "
    "default password username stored reflected remote buffer session gallery"
).split()


def test_keyword_suite():
    with criterion("keyword suite (10k random pairs bounded; exact fixtures)"):
        rng = random.Random(24601)
        for i in range(10_000):
            description = " ".join(
                rng.choice(_KW_WORDS) for _ in range(rng.randint(1, 14))
            )
            name = " ".join(rng.choice(_KW_WORDS) for _ in range(rng.randint(1, 5)))
            alternates = [
                " ".join(rng.choice(_KW_WORDS) for _ in range(rng.randint(1, 4)))
                for _ in range(rng.randint(0, 2))
            ]
            v = VulnerabilityRecord(
                cve_id=f"CVE-2020-{10_000 + i}", description=description
            )
            ap = AttackPattern(
                capec_id=f"CAPEC-{1 + i % 700}", name=name, alternate_terms=alternates
            )
            result = keyword_score(v, ap, ACRONYMS, NORM)
            assert 0.0 <= result.score <= MAX_KEYWORD_SCORE

        acronym_vuln = VulnerabilityRecord(
            cve_id="CVE-2016-1000113",
            description="XSS and SQLi in huge IT gallery v1.1.5 for Joomla",
        )
        xss_pattern = AttackPattern(
            capec_id="CAPEC-63", name="Cross-Site Scripting (XSS)"
        )
        acronym_result = keyword_score(acronym_vuln, xss_pattern, ACRONYMS, NORM)
        assert acronym_result.score == MAX_KEYWORD_SCORE
        assert acronym_result.acronym_outcome is AcronymOutcome.FULL_ACRONYM_MATCH

        cisco_vuln = VulnerabilityRecord(
            cve_id="CVE-2006-5288",
            description=(
                "Cisco 2700 Series Wireless Location Appliances before 2.1.34.0 "
                'have a default administrator username "root" and password '
                '"password", which allows remote attackers to obtain '
                "administrative privileges."
            ),
        )
        defaults_pattern = AttackPattern(
            capec_id="CAPEC-70", name="Try Common or Default Usernames and Passwords"
        )
        ratio_result = keyword_score(cisco_vuln, defaults_pattern, ACRONYMS, NORM)
        assert ratio_result.score == 0.2


# ---------------------------------------------------------------------------
# Criterion 4: pipeline invariants with the deterministic test provider
# ---------------------------------------------------------------------------

def _rankings_bytes(tmp_path, name, rankings):
    path = tmp_path / name
    write_rankings(path, rankings)
    return path.read_bytes()


def test_pipeline_invariants(tmp_path):
    with criterion(
        "pipeline invariants (hybrid>=base, bit-identical reruns/shuffles, "
        "R@1==P@1, recall monotone, 65x559 scoring <60s)"
    ):
        rng = random.Random(5151)
        vulns, patterns = make_synthetic_corpus(rng, n_vulns=65, n_patterns=559)

        provider = MemoizingProvider(HashedBagOfWordsProvider())
        # Warm the memo so the timed region measures scoring, not embedding.
        from capecmatch.embedding import SCORED_ATTRIBUTES, embedding_input_text

        for v in vulns:
            provider.embed(embedding_input_text(v.description, True))
        for ap in patterns:
            for attribute in SCORED_ATTRIBUTES:
                text = getattr(ap, attribute)
                if text and text.strip():
                    provider.embed(embedding_input_text(text, True))

        started = time.perf_counter()
        hybrid = rank_corpus(vulns, patterns, provider, ACRONYMS, normalizer=NORM)
        elapsed = time.perf_counter() - started
        assert elapsed < 60.0, f"scoring took {elapsed:.1f}s"

        base = rank_corpus(vulns, patterns, provider, mode=MODE_BASE)
        base_scores = {
            (e.cve_id, e.capec_id): e.overall_score
            for rl in base
            for e in rl.entries
        }
        for ranked in hybrid:
            for entry in ranked.entries:
                assert entry.overall_score >= base_scores[(entry.cve_id, entry.capec_id)]
                assert entry.overall_score == entry.base_score + entry.keyword_score

        # Bit-identical across a rerun and across a pattern-order shuffle.
        first = _rankings_bytes(tmp_path, "run1.csv", hybrid)
        second = _rankings_bytes(
            tmp_path,
            "run2.csv",
            rank_corpus(vulns, patterns, provider, ACRONYMS, normalizer=NORM),
        )
        shuffled_patterns = patterns[:]
        random.Random(99).shuffle(shuffled_patterns)
        third = _rankings_bytes(
            tmp_path,
            "run3.csv",
            rank_corpus(vulns, shuffled_patterns, provider, ACRONYMS, normalizer=NORM),
        )
        assert first == second == third

        # Evaluation invariants on a synthetic ground truth over this corpus.
        pairs = set()
        for v in vulns[:20]:
            for capec in rng.sample([p.capec_id for p in patterns], rng.randint(1, 3)):
                pairs.add((v.cve_id, capec))
        gt = GroundTruth.from_pairs(pairs)
        report = sweep_report(hybrid, gt, 15, model="hashbow-256")
        assert report.per_k[1].recall == report.per_k[1].precision
        recalls = [report.per_k[k].recall for k in sorted(report.per_k)]
        assert recalls == sorted(recalls)


# ---------------------------------------------------------------------------
# Criterion 5: format round-trips
# ---------------------------------------------------------------------------

def test_format_round_trips(tmp_path):
    with criterion("format round-trips (corpus cache, TLEC1, all CSVs)"):
        rng = random.Random(8080)
        vulns, patterns = make_synthetic_corpus(rng, n_vulns=5, n_patterns=8)
        vulns[0].cwe_refs = ["CWE-79", "CWE-89"]

        vpath = tmp_path / "vulnerabilities.jsonl"
        write_vulnerabilities(vpath, vulns)
        assert read_vulnerabilities(vpath) == vulns

        ppath = tmp_path / "patterns.jsonl"
        write_patterns(ppath, patterns)
        assert read_patterns(ppath) == patterns

        provider = HashedBagOfWordsProvider()
        entries = [(f"key-{i}", v.description) for i, v in enumerate(vulns)]
        cpath = tmp_path / "vectors.tlec"
        write_cache(entries, provider, cpath)
        loaded = read_cache(cpath)
        for key, text in entries:
            assert loaded[key] == provider.embed(text)

        rankings = rank_corpus(
            vulns, patterns, MemoizingProvider(provider), ACRONYMS, normalizer=NORM
        )
        rpath = tmp_path / "rankings.csv"
        write_rankings(rpath, rankings)
        reloaded = read_rankings(rpath)
        assert [rl.cve_id for rl in reloaded] == [rl.cve_id for rl in rankings]
        for original, back in zip(rankings, reloaded):
            assert original.entries == back.entries

        pairs = {(vulns[0].cve_id, patterns[0].capec_id), (vulns[1].cve_id, patterns[2].capec_id)}
        gt = GroundTruth.from_pairs(pairs)
        gpath = tmp_path / "gt.csv"
        write_ground_truth(gpath, gt)
        assert load_ground_truth(gpath) == gt

        report = sweep_report(rankings, gt, 5, model="hashbow-256")
        mpath = tmp_path / "report.csv"
        write_metrics_report(mpath, report)
        assert read_metrics_report(mpath) == report

        stats = cwe_coverage_by_year(vulns)
        spath = tmp_path / "stats.csv"
        write_year_coverage(spath, stats)
        assert read_year_coverage(spath) == stats
