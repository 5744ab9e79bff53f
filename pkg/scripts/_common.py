import argparse
import json
from pathlib import Path


def parser(doc: str, steps: int) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=doc)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--steps", type=int, default=steps, help="environment steps per environment")
    p.add_argument("--out", type=Path, default=None)
    return p


def dump(out: Path | None, name: str, payload) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(json.dumps(payload, indent=1) + "\n")
    print(f"wrote {out / name}")
