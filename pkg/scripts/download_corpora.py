#!/usr/bin/env python3
"""Download the public corpora the pipeline consumes.

Fetches NVD JSON 1.1 year feeds and the CAPEC XML catalog into a target
directory. The library itself never touches the network; run this once and
point `capecmatch ingest` at the files.

Usage:
    python scripts/download_corpora.py --out corpora/ --years 2002 2024
    python scripts/download_corpora.py --out corpora/ --capec-only
"""

import argparse
import sys
import urllib.request
from pathlib import Path

NVD_FEED_URL = "https://nvd.nist.gov/feeds/json/cve/1.1/nvdcve-1.1-{year}.json.gz"
CAPEC_URL = "https://capec.mitre.org/data/xml/capec_latest.xml"


def fetch(url: str, dest: Path) -> None:
    print(f"fetching {url} -> {dest}")
    request = urllib.request.Request(url, headers={"User-Agent": "capecmatch-fetch"})
    with urllib.request.urlopen(request, timeout=120) as response, open(dest, "wb") as fh:
        fh.write(response.read())


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="download directory")
    parser.add_argument(
        "--years", nargs=2, type=int, metavar=("FIRST", "LAST"), default=(2002, 2024)
    )
    parser.add_argument("--capec-only", action="store_true")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    fetch(CAPEC_URL, out / "capec_latest.xml")
    if not args.capec_only:
        first, last = args.years
        for year in range(first, last + 1):
            fetch(NVD_FEED_URL.format(year=year), out / f"nvdcve-1.1-{year}.json.gz")
    print("done")
    return 0


if __name__ == "__main__":
    sys.exit(main())
