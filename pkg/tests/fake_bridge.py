"""Scriptable stand-in for an out-of-process segmentation backend.

Reads newline-delimited JSON requests on stdin and misbehaves on demand:
the per-client backend_options block carries a "mode" string selecting the
reply shape, so one script covers the happy path and every failure branch.
"""

import json
import sys


def reply(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def full_mask(req):
    return {
        "bbox": [0, 0, req["width"], req["height"]],
        "pixel_count": req["width"] * req["height"],
    }


def main():
    buffered = []
    for line in sys.stdin:
        if not line.strip():
            continue
        req = json.loads(line)
        mode = req.get("backend_options", {}).get("mode", "ok")
        rid = req["id"]
        if mode == "ok":
            reply({"id": rid, "masks": [full_mask(req)]})
        elif mode == "empty":
            reply({"id": rid, "masks": []})
        elif mode == "error":
            reply({"id": rid, "error": "model exploded"})
        elif mode == "bad-mask":
            reply({"id": rid, "masks": [
                {"bbox": [0, 0, req["width"] + 5, 1], "pixel_count": 1}
            ]})
        elif mode == "both":
            reply({"id": rid, "masks": [], "error": "confused"})
        elif mode == "unknown-id":
            reply({"id": rid + "-mangled", "masks": [full_mask(req)]})
        elif mode == "garbage":
            sys.stdout.write("not json at all\n")
            sys.stdout.flush()
        elif mode == "silent":
            pass
        elif mode == "exit":
            return
        elif mode == "reverse":
            # hold requests until two are in flight, then answer backwards
            buffered.append(req)
            if len(buffered) == 2:
                for held in reversed(buffered):
                    reply({"id": held["id"], "masks": [full_mask(held)]})
                buffered.clear()
        else:
            reply({"id": rid, "error": f"unknown test mode {mode!r}"})


if __name__ == "__main__":
    main()
