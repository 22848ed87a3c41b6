# Copyright 2026 The DMDK Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Regenerates the toy corpus in data/sample. Output is deterministic."""

import json
import pathlib
import random

HERE = pathlib.Path(__file__).resolve().parent
OUT = HERE / "sample"
TOKENS, WIDTH = 4, 16

RECORDS = [
    ("r1", "the heart is normal in size .",
     [("heart", "ANATOMY"), ("normal", "OBSERVATION")]),
    ("r2", "the lungs are clear .",
     [("lungs", "ANATOMY"), ("clear", "OBSERVATION")]),
    ("r3", "mild cardiomegaly is present .",
     [("mild", "OBSERVATION_MODIFIER"), ("cardiomegaly", "OBSERVATION")]),
    ("r4", "small left pleural effusion .",
     [("small", "OBSERVATION_MODIFIER"), ("left", "ANATOMY_MODIFIER"),
      ("pleural", "ANATOMY"), ("effusion", "OBSERVATION")]),
    ("r5", "no pneumothorax is seen .",
     [("no", "UNCERTAINTY"), ("pneumothorax", "OBSERVATION")]),
    ("r6", "calcified granuloma in the right lung .",
     [("calcified granuloma", "OBSERVATION"), ("right", "ANATOMY_MODIFIER"),
      ("lung", "ANATOMY")]),
    ("r7", "the trachea is midline .",
     [("trachea", "ANATOMY"), ("midline", "OBSERVATION")]),
    ("r8", "patchy opacity in the left lung base .",
     [("patchy", "OBSERVATION_MODIFIER"), ("opacity", "OBSERVATION"),
      ("left", "ANATOMY_MODIFIER"), ("lung", "ANATOMY"), ("base", "ANATOMY")]),
]


def write_fmat(path, rows):
    with open(path, "w") as f:
        f.write(f"FMAT v1 {len(rows)} {len(rows[0])}\n")
        for row in rows:
            f.write(" ".join(repr(v) for v in row) + "\n")


def main():
    rng = random.Random(20261015)
    OUT.mkdir(exist_ok=True)
    (OUT / "features").mkdir(exist_ok=True)
    tagged, untagged = [], []
    for rid, report, ents in RECORDS:
        rows = [[round(rng.gauss(0.0, 1.0), 6) for _ in range(WIDTH)] for _ in range(TOKENS)]
        write_fmat(OUT / "features" / f"{rid}.fmat", rows)
        base = {"id": rid, "features": [f"features/{rid}.fmat"], "report": report}
        untagged.append(base)
        tagged.append({**base, "entities": [{"text": t, "type": k} for t, k in ents]})
    for name, recs in (("corpus.jsonl", tagged), ("untagged.jsonl", untagged)):
        with open(OUT / name, "w") as f:
            for r in recs:
                f.write(json.dumps(r) + "\n")
    with open(OUT / "refs.jsonl", "w") as f:
        for rid, report, _ in RECORDS:
            f.write(json.dumps({"id": rid, "text": report}) + "\n")


if __name__ == "__main__":
    main()
