"""Be the prime: play an episode against a trained helper in your browser.

    python3 demos/06_play_against_helper.py runs/joint_full_s0/checkpoint.bin

You see which objects are good (green) and bad (red); the helper does not.
It only watches what you do. A well-trained helper reads your reaction to
the episode's first object and then forages for you: collect the first
object if it is good, refuse to move if it is bad, and let the helper do
the rest.

Requires the browser UI bundle (cd frontend && npm install && npm run
build); without it, the page at / explains the raw WebSocket protocol.
"""

import sys
from pathlib import Path

from forage.serve import serve_forever

checkpoint = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs/joint_full_s0/checkpoint.bin")
if not checkpoint.exists():
    sys.exit(f"no checkpoint at {checkpoint}; train one first (see demo 04)")

print("arrow keys move, space stays; reward: +1 good, -1 bad, -0.1 per move\n")
sys.exit(serve_forever(checkpoint, port=8765))
