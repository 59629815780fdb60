import json
import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from capecmatch import AttackPattern, VulnerabilityRecord


# ---------------------------------------------------------------------------
# Input document builders
# ---------------------------------------------------------------------------

def make_nvd_11_feed(entries):
    """entries: list of (cve_id, description, [cwe values])."""
    items = []
    for cve_id, description, cwes in entries:
        items.append(
            {
                "cve": {
                    "CVE_data_meta": {"ID": cve_id, "ASSIGNER": "cve@mitre.org"},
                    "problemtype": {
                        "problemtype_data": [
                            {"description": [{"lang": "en", "value": c} for c in cwes]}
                        ]
                        if cwes
                        else []
                    },
                    "description": {
                        "description_data": [{"lang": "en", "value": description}]
                    },
                },
                "publishedDate": "2020-01-01T00:00Z",
            }
        )
    return {
        "CVE_data_type": "CVE",
        "CVE_data_format": "MITRE",
        "CVE_data_version": "4.0",
        "CVE_Items": items,
    }


def make_nvd_20_feed(entries):
    vulns = []
    for cve_id, description, cwes in entries:
        vulns.append(
            {
                "cve": {
                    "id": cve_id,
                    "descriptions": [{"lang": "en", "value": description}],
                    "weaknesses": [
                        {
                            "source": "nvd@nist.gov",
                            "type": "Primary",
                            "description": [{"lang": "en", "value": c} for c in cwes],
                        }
                    ]
                    if cwes
                    else [],
                }
            }
        )
    return {
        "resultsPerPage": len(vulns),
        "startIndex": 0,
        "totalResults": len(vulns),
        "format": "NVD_CVE",
        "version": "2.0",
        "vulnerabilities": vulns,
    }


CAPEC_NS = "http://capec.mitre.org/capec-3"


def make_capec_catalog(patterns):
    """patterns: list of dicts with keys id, name, status and optional
    description, steps [(phase, desc, [techniques])], prerequisites,
    mitigations, resources, alternate_terms, examples."""
    chunks = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<Attack_Pattern_Catalog xmlns="{CAPEC_NS}" Name="CAPEC" Version="3.9">',
        "<Attack_Patterns>",
    ]
    for p in patterns:
        chunks.append(
            f'<Attack_Pattern ID="{p["id"]}" Name="{p["name"]}" '
            f'Abstraction="Standard" Status="{p.get("status", "Stable")}">'
        )
        if p.get("description"):
            chunks.append(f"<Description>{p['description']}</Description>")
        if p.get("alternate_terms"):
            chunks.append("<Alternate_Terms>")
            for term in p["alternate_terms"]:
                chunks.append(f"<Alternate_Term><Term>{term}</Term></Alternate_Term>")
            chunks.append("</Alternate_Terms>")
        if p.get("prerequisites"):
            chunks.append("<Prerequisites>")
            for pre in p["prerequisites"]:
                chunks.append(f"<Prerequisite>{pre}</Prerequisite>")
            chunks.append("</Prerequisites>")
        if p.get("steps"):
            chunks.append("<Execution_Flow>")
            for i, (phase, desc, techniques) in enumerate(p["steps"], start=1):
                chunks.append(f'<Attack_Step><Step>{i}</Step><Phase>{phase}</Phase>')
                chunks.append(f"<Description>{desc}</Description>")
                for tech in techniques:
                    chunks.append(f"<Technique>{tech}</Technique>")
                chunks.append("</Attack_Step>")
            chunks.append("</Execution_Flow>")
        if p.get("mitigations"):
            chunks.append("<Mitigations>")
            for m in p["mitigations"]:
                chunks.append(f"<Mitigation>{m}</Mitigation>")
            chunks.append("</Mitigations>")
        if p.get("resources"):
            chunks.append("<Resources_Required>")
            for r in p["resources"]:
                chunks.append(f"<Resource>{r}</Resource>")
            chunks.append("</Resources_Required>")
        if p.get("examples"):
            chunks.append("<Example_Instances>")
            for ex in p["examples"]:
                chunks.append(f"<Example>{ex}</Example>")
            chunks.append("</Example_Instances>")
        chunks.append("</Attack_Pattern>")
    chunks.append("</Attack_Patterns>")
    chunks.append(
        '<Categories><Category ID="1000" Name="Ignore me" Status="Stable">'
        "<Summary>Category entries are not attack patterns.</Summary></Category></Categories>"
    )
    chunks.append(
        '<Views><View ID="2000" Name="Ignore me too" Type="Graph" Status="Stable"></View></Views>'
    )
    chunks.append("</Attack_Pattern_Catalog>")
    return "\n".join(chunks)


@pytest.fixture
def nvd_11_file(tmp_path):
    def write(entries, name="nvd11.json"):
        path = tmp_path / name
        path.write_text(json.dumps(make_nvd_11_feed(entries)), encoding="utf-8")
        return path

    return write


@pytest.fixture
def capec_file(tmp_path):
    def write(patterns, name="capec.xml"):
        path = tmp_path / name
        path.write_text(make_capec_catalog(patterns), encoding="utf-8")
        return path

    return write


# ---------------------------------------------------------------------------
# Synthetic scoring corpus
# ---------------------------------------------------------------------------

_WORDS = (
    "buffer overflow injection remote attacker crafted packet memory handler "
    "request response server client session token password username network "
    "protocol parser header field kernel driver module script page upload file "
    "path directory traversal privilege escalation denial service crash leak "
    "disclosure bypass authentication authorization certificate validation "
    "query database command shell code execution heap stack pointer integer "
    "string format cookie browser plugin interface configuration default"
).split()


def random_sentence(rng, lo=6, hi=20):
    return " ".join(rng.choice(_WORDS) for _ in range(rng.randint(lo, hi)))


def make_synthetic_corpus(rng, n_vulns, n_patterns):
    vulns = [
        VulnerabilityRecord(
            cve_id=f"CVE-20{10 + i % 15:02d}-{1000 + i}",
            description=random_sentence(rng),
        )
        for i in range(n_vulns)
    ]
    patterns = []
    for i in range(n_patterns):
        patterns.append(
            AttackPattern(
                capec_id=f"CAPEC-{i + 1}",
                name=random_sentence(rng, 2, 5).title(),
                status="Stable",
                description=random_sentence(rng),
                execution_flow=random_sentence(rng) if rng.random() < 0.8 else "",
                prerequisites=random_sentence(rng, 3, 8) if rng.random() < 0.6 else "",
                mitigations=random_sentence(rng, 3, 8) if rng.random() < 0.6 else "",
                resources=random_sentence(rng, 3, 8) if rng.random() < 0.4 else "",
                alternate_terms=(
                    [random_sentence(rng, 1, 3).title()] if rng.random() < 0.3 else []
                ),
            )
        )
    return vulns, patterns


@pytest.fixture
def synthetic_corpus():
    rng = random.Random(20240521)
    return make_synthetic_corpus(rng, n_vulns=6, n_patterns=12)


# ---------------------------------------------------------------------------
# The hand-derived evaluation instance used across evaluation tests
# ---------------------------------------------------------------------------

@pytest.fixture
def synthetic_instance():
    rankings = {
        "CVE-2001-1001": ["CAPEC-1", "CAPEC-5", "CAPEC-2"],
        "CVE-2001-1002": ["CAPEC-9", "CAPEC-3"],
        "CVE-2001-1003": ["CAPEC-4", "CAPEC-7", "CAPEC-8"],
    }
    pairs = {
        ("CVE-2001-1001", "CAPEC-1"),
        ("CVE-2001-1001", "CAPEC-2"),
        ("CVE-2001-1002", "CAPEC-3"),
        ("CVE-2001-1003", "CAPEC-4"),
    }
    return rankings, pairs


def make_random_instance(rng, max_vulns=6, max_patterns=10):
    """Random rankings + ground truth where every gt CVE has at least one hit."""
    n_vulns = rng.randint(1, max_vulns)
    n_patterns = rng.randint(2, max_patterns)
    capec_ids = [f"CAPEC-{i + 1}" for i in range(n_patterns)]
    rankings = {}
    pairs = set()
    for i in range(n_vulns):
        cve_id = f"CVE-2020-{1000 + i}"
        order = capec_ids[:]
        rng.shuffle(order)
        rankings[cve_id] = order
        for capec_id in rng.sample(capec_ids, rng.randint(1, min(3, n_patterns))):
            pairs.add((cve_id, capec_id))
    return rankings, pairs
