#!/usr/bin/env python3
"""Drive the human end yourself against the trained robot.

Starts the real-time server on localhost. Open the printed URL in a
browser (build the frontend first: `cd frontend && npm install && npm run
build`) or connect any websocket client to /ws speaking the JSON protocol:

    -> {"type": "hello"}
    -> {"type": "start", "map_id": "train01"}
    -> {"type": "input", "fx": 0.5, "fy": -1.0, "seq": 1}   (repeat at >= 10 Hz)
    <- {"type": "state", ...} at 30 Hz, {"type": "episode_end", ...}

Needs demo_outputs/codp_h_demo.ckpt from 04_train_policy.py.
"""

import pathlib
import sys

from copolicy.cli import main

ckpt = pathlib.Path("demo_outputs/codp_h_demo.ckpt")
if not ckpt.exists():
    sys.exit("run 04_train_policy.py first")

sys.exit(main(["serve", "--checkpoint", str(ckpt), "--port", "8765"]))
