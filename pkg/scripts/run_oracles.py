"""Run every oracle suite at its default size and print one summary line each."""

import argparse
import sys

from glmbkit.oracles import SUITES


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("suites", nargs="*", default=sorted(SUITES))
    args = p.parse_args()
    ok = True
    for name in args.suites:
        rep = SUITES[name](seed=args.seed)
        print(rep.summary(), flush=True)
        ok &= rep.ok
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
