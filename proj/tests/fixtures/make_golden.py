"""Independent oracle for the annotation fixture.

Recomputes the tallies and prior graphs of annotations_50.jsonl from scratch
and writes the golden graph files the unit and CLI tests compare against.
"""
import json
import math
import struct
from collections import Counter
from pathlib import Path

HERE = Path(__file__).parent


def load():
    return [json.loads(l) for l in (HERE / "annotations_50.jsonl").read_text().splitlines() if l.strip()]


def top_k(counter, k):
    return [n for n, _ in sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[:k]]


def js(p, q):
    m = [(a + b) / 2 for a, b in zip(p, q)]
    def kl(x):
        return sum(a * math.log2(a / b) for a, b in zip(x, m) if a > 0)
    return 0.5 * kl(p) + 0.5 * kl(q)


def frame(header, values):
    header = dict(header, payload_values=len(values))
    text = json.dumps(header, sort_keys=True, separators=(",", ":"))
    return text.encode() + b"\n" + b"".join(struct.pack("<d", v) for v in values)


def main():
    recs = load()
    classes = sorted({r["class"] for r in recs} | {x["object_class"] for r in recs for x in r["relations"]})
    attrs = top_k(Counter(a for r in recs for a in r["attributes"]), 200)
    preds = top_k(Counter(x["predicate"] for r in recs for x in r["relations"]), 200)
    ci = {c: i for i, c in enumerate(classes)}
    C, K = len(classes), len(attrs)
    freq = [[0] * K for _ in range(C)]
    for r in recs:
        for a in r["attributes"]:
            freq[ci[r["class"]]][attrs.index(a)] += 1
    triples = Counter()
    for r in recs:
        for x in r["relations"]:
            triples[(ci[r["class"]], preds.index(x["predicate"]), ci[x["object_class"]])] += 1

    dist = [[v / sum(row) for v in row] if sum(row) else None for row in freq]
    attr = [[0.0] * C for _ in range(C)]
    for i in range(C):
        for j in range(C):
            if dist[i] is not None and dist[j] is not None:
                attr[i][j] = js(dist[i], dist[j])

    raw = [[0.0] * C for _ in range(C)]
    for (s, _, o), n in triples.items():
        raw[s][o] += n
    sym = [[raw[i][j] + raw[j][i] if i != j else raw[i][i] for j in range(C)] for i in range(C)]
    rel = [[v / sum(row) if sum(row) else 0.0 for v in row] for row in sym]

    base = {"format": "hkrm-graph", "version": 1, "num_classes": C, "class_names": classes, "similarity": False}
    (HERE / "attribute_graph.bin").write_bytes(frame(dict(base, kind="attribute"), [v for row in attr for v in row]))
    (HERE / "relationship_graph.bin").write_bytes(frame(dict(base, kind="relationship"), [v for row in rel for v in row]))

    print("classes", classes)
    print("attrs", attrs)
    print("preds", preds)
    for row in attr:
        print("attr", ["%.17g" % v for v in row])
    for row in rel:
        print("rel", ["%.17g" % v for v in row])


if __name__ == "__main__":
    main()
