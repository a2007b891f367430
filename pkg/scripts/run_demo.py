"""End-to-end walkthrough on an in-memory store: apply the shipped packs,
seed the demo corporation, then showcase queries, access scenarios, appraisal
and what-if moves.

    python3 scripts/run_demo.py [--employees N]
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from unistore import Store
from unistore import appraisal as app
from unistore.packs import apply_all_shipped, seed_demo

PACKS = os.path.join(os.path.dirname(__file__), "..", "packs")


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--employees", type=int, default=60)
    args = parser.parse_args()

    store = Store()
    apply_all_shipped(store, None, PACKS)
    print(f"packs applied, state {store.head}")
    seed_demo(store, args.employees)
    print(f"seeded {args.employees} employees, state {store.head}, "
          f"content hash {store.snapshot().content_hash[:16]}")

    root = store.individuate("name = 'Corporation'", "OrgUnit")
    params = app.stored_params(store)
    nodes = app.build_unit_nodes(store, store.head, params)

    print("\nunit scores:")
    for uid in sorted(nodes):
        score = app.unit_score(nodes[uid], params)
        name = store.describe(uid).values["name"]
        print(f"  {name:<20} F = {score.value:.3f} "
              f"(e={score.breakdown['e']}, v={score.breakdown['v']})")

    content = store.content_at(store.head)
    vacancy = next(p for p in sorted(store.extent("Position"))
                   if content.assign_by_position.get(p) is None)
    unit = content.individuals[vacancy].values["unit"]
    print(f"\ncandidates for vacancy {vacancy} "
          f"({store.describe(unit).values['name']}):")
    for row in app.rank_candidates(store, vacancy)[:5]:
        print(f"  {row['name']:<28} match {row['match']:.2f}")

    best = app.rank_candidates(store, vacancy)[0]
    before = app.appraise_unit(store, unit, params).value
    after = app.appraise_unit(store, unit, params,
                              moves=[(best["employee"], vacancy)]).value
    print(f"\nwhat-if: move {best['name']} into the vacancy: "
          f"F {before:.3f} -> {after:.3f} (log head unchanged: {store.head})")

    session = store.open_session("emp0001")
    print(f"\nsession for emp0001: scenario {session.profile.scenario}, "
          f"metadata_admin {session.profile.metadata_admin}")


if __name__ == "__main__":
    main()
