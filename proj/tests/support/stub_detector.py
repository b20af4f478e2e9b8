#!/usr/bin/env python3
"""Scripted stand-in for an external detector.

usage: stub_detector.py MODE predict --model M --images DIR --out DIR
       stub_detector.py MODE train --model M --manifest CSV --out-model M2 [extra...]

MODE is one of: echo (copy the HMAP model file to every output), fail
(exit 3), sleep (never finishes in time), flaky (fail on the first call
per model, then behave like echo), silent (exit 0 but write nothing).
"""
import argparse
import pathlib
import shutil
import sys
import time


def main() -> int:
    mode = sys.argv[1]
    parser = argparse.ArgumentParser()
    parser.add_argument("command", choices=["predict", "train"])
    parser.add_argument("--model", required=True)
    parser.add_argument("--images")
    parser.add_argument("--out")
    parser.add_argument("--manifest")
    parser.add_argument("--out-model")
    args, extra = parser.parse_known_args(sys.argv[2:])

    if mode == "fail":
        print("stub failure requested", file=sys.stderr)
        return 3
    if mode == "sleep":
        time.sleep(30)
        return 0
    if mode == "flaky":
        marker = pathlib.Path(args.model + ".attempted")
        if not marker.exists():
            marker.write_text("1")
            return 4
    if mode == "silent":
        return 0

    if args.command == "predict":
        out = pathlib.Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for image in sorted(pathlib.Path(args.images).glob("*.pgm")):
            shutil.copyfile(args.model, out / (image.stem + ".hmap"))
        return 0

    shutil.copyfile(args.model, args.out_model)
    rows = pathlib.Path(args.manifest).read_text().splitlines()
    pathlib.Path(args.out_model + ".log").write_text(
        "rows=%d\nextra=%s\n" % (len(rows) - 1, " ".join(extra)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
