#!/usr/bin/env python3
"""Write a demo dataset (CSV + schema JSON) with a planted linear signal."""

import argparse
from pathlib import Path

from margsyn.dataset import write_csv
from margsyn.demo import make_demo_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="demo_data")
    ap.add_argument("-m", type=int, default=4, help="number of features")
    ap.add_argument("-n", type=int, default=2000, help="number of rows")
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = make_demo_dataset(m=args.m, n=args.n, seed=args.seed)
    write_csv(ds, out / "demo.csv")
    ds.schema.to_file(out / "schema.json")
    print(f"wrote {ds.n} rows to {out/'demo.csv'} and the schema to {out/'schema.json'}")


if __name__ == "__main__":
    main()
