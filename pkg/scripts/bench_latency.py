"""Desk-scale latency check: p50 of single-object reads and individuation
over a 10,000-individual store.

    python3 scripts/bench_latency.py [--rows N] [--ops N]
"""

import argparse
import os
import random
import statistics
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from unistore import Store


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--rows", type=int, default=10_000)
    parser.add_argument("--ops", type=int, default=200)
    args = parser.parse_args()

    rng = random.Random(7400)
    store = Store()
    sess = store.system_session()
    store.define_concept(sess, "Record", [
        {"name": "label", "type": "text"},
        {"name": "code", "type": "integer"},
    ])
    t0 = time.perf_counter()
    ids = [store.create(sess, "Record", {"label": f"rec-{i:05d}", "code": i})
           for i in range(args.rows)]
    print(f"built {args.rows} rows in {time.perf_counter() - t0:.2f}s "
          f"(head {store.head})")

    reads = []
    for _ in range(args.ops):
        ident = rng.choice(ids)
        t = time.perf_counter()
        store.get_object(ident)
        reads.append((time.perf_counter() - t) * 1000)

    finds = []
    for _ in range(max(20, args.ops // 4)):
        i = rng.randrange(args.rows)
        t = time.perf_counter()
        store.individuate(f"label = 'rec-{i:05d}'", "Record")
        finds.append((time.perf_counter() - t) * 1000)

    print(f"single-object read  p50 {statistics.median(reads):8.3f} ms  "
          f"max {max(reads):8.3f} ms")
    print(f"individuate         p50 {statistics.median(finds):8.3f} ms  "
          f"max {max(finds):8.3f} ms")


if __name__ == "__main__":
    main()
