"""Regenerate the packaged gl(1|1) fixtures from the seeded sampler.

    python scripts/make_fixtures.py [--check]

With --check nothing is written; the script exits 1 if a shipped file differs.
"""

import argparse
import sys

from bvflow.gl11 import FIXTURE_DIR, dump_fixture, sample_gl11

RECIPES = {
    "dim2": dict(dim=2, seed=0),
    "dim4-nilpotent": dict(dim=4, seed=0, nilpotent=True),
    "dim4": dict(dim=4, seed=0, nilpotent=False),
    "dim4-gauge": dict(dim=4, seed=1, degrees=(-2, -1, 0, 1)),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args(argv)
    stale = []
    for name, kw in RECIPES.items():
        text = dump_fixture(sample_gl11(**kw))
        path = FIXTURE_DIR / f"gl11_{name}.json"
        if args.check:
            if not path.exists() or path.read_text() != text:
                stale.append(name)
        else:
            path.write_text(text)
            print(f"wrote {path}")
    if stale:
        print("stale fixtures: " + ", ".join(stale))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
