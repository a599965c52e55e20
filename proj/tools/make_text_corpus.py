#!/usr/bin/env python3
"""Build the bundled ~1 MB character corpus from public-domain Project
Gutenberg play texts (as shipped in the `shakespeare` 0.6 sdist on PyPI).

    pip download --no-deps --no-binary :all: shakespeare==0.6
    tar xzf shakespeare-0.6.tar.gz
    python3 tools/make_text_corpus.py shakespeare-0.6/shksprdata/texts data/text/shakespeare.txt
"""
import pathlib
import sys

PLAYS = [
    "hamlet", "macbeth", "lear", "othello", "romeo_and_juliet",
    "julius_caesar", "tempest", "midsummer_nights_dream",
]


def main(src, out):
    src = pathlib.Path(src)
    parts = []
    for name in PLAYS:
        text = (src / f"{name}_gut.txt").read_bytes().decode("utf-8")
        parts.append(text.replace("\r\n", "\n").strip() + "\n")
    corpus = "\n\n".join(parts)
    pathlib.Path(out).write_text(corpus, encoding="utf-8")
    print(len(corpus.encode("utf-8")), "bytes,", len(set(corpus)), "distinct characters")


if __name__ == "__main__":
    main(*sys.argv[1:3])
