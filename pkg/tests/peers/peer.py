"""Scripted peer for the external model protocol; behaviour chosen by argv[1]."""

import sys

mode = sys.argv[1] if len(sys.argv) > 1 else "uniform"
print("HELLO wrong-protocol" if mode == "badhello" else "HELLO topobi-lm 1", flush=True)
steps = 0
for line in sys.stdin:
    if not line.startswith("MASK"):
        continue
    ids = line.split()[2:]
    steps += 1
    if mode == "malformed":
        print("LOGITS zero:one", flush=True)
    elif mode == "missing":
        print("LOGITS " + " ".join(f"{i}:0" for i in ids[1:]), flush=True)
    elif mode == "die" and steps > 2:
        sys.exit(3)
    elif mode == "offmask":
        # a huge score on every id, masked-out ones included
        print("LOGITS " + " ".join(f"{i}:{1e6 if str(i) not in ids else 0.0}" for i in range(287)), flush=True)
    else:
        print("LOGITS " + " ".join(f"{i}:0" for i in ids), flush=True)
