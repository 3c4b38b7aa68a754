#!/usr/bin/env python3
"""End-to-end toy experiment on a synthetic corpus, driven through the CLI.

Builds 20 marker-tagged videos, ingests them with the stub detector, trains
the tiny backbone, evaluates the test split, writes the comparison report,
and runs a one-shot prediction. Everything lands under --workdir (default: a
fresh ./toy_run directory).

    python3 scripts/toy_pipeline.py [--workdir DIR] [--epochs N] [--seed S]
"""

import argparse
import sys
from pathlib import Path

from veriframe.cli import run
from veriframe.media import save_png
from veriframe.synthetic import make_corpus, make_face_image


def sh(argv):
    print("veriframe", " ".join(argv), file=sys.stderr)
    code = run(argv)
    if code != 0:
        sys.exit(code)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--workdir", default="toy_run")
    parser.add_argument("--epochs", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    workdir = Path(args.workdir)
    corpus = workdir / "corpus"
    crops = workdir / "crops"
    artifact = workdir / "artifact"
    reports = workdir / "reports"

    print(f"building synthetic corpus under {corpus}", file=sys.stderr)
    make_corpus(corpus, n_videos=20, frames_per_video=10, seed=args.seed)

    sh(["ingest",
        "--manifest", str(corpus / "manifest.csv"),
        "--video-root", str(corpus / "videos"),
        "--output-root", str(crops),
        "--seed", str(args.seed)])

    sh(["train",
        "--index", str(crops / "index.csv"),
        "--out", str(artifact),
        "--backbone", "tiny_test",
        "--epochs", str(args.epochs),
        "--lr", "1e-3",
        "--seed", str(args.seed)])

    sh(["evaluate",
        "--artifact", str(artifact),
        "--index", str(crops / "index.csv"),
        "--n", "128",
        "--seed", str(args.seed),
        "--out-dir", str(reports)])

    sh(["report", "--out-dir", str(reports / "reference")])

    probe = workdir / "probe.png"
    save_png(
        make_face_image(size=(340, 340),
                        faces=[(30, 40, 120, 120, True)], seed=9),
        probe,
    )
    sh(["predict", "--artifact", str(artifact), "--file", str(probe),
        "--seed", "1"])

    print(f"\nartifacts under {workdir}/ "
          f"(evaluation: {reports}/report.csv)", file=sys.stderr)


if __name__ == "__main__":
    main()
