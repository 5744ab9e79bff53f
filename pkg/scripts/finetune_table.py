"""Transfer SmallMass -> SmallDrag and measure the return on SmallMass before
and after fine-tuning, for last-layer and full-network fine-tuning."""

import time

from _common import dump, parser

from mtcc import TrainConfig, evaluate, train_single, transfer_and_finetune

EVAL_SEED = 10_000


def main():
    p = parser(__doc__, 200_000)
    p.add_argument("--finetune-steps", type=int, default=100_000)
    args = p.parse_args()
    rows = []
    print(f"{'seed':>4}  {'mode':<12} {'SmallMass pre':>14} {'SmallMass post':>15} {'SmallDrag post':>15}")
    for s in args.seeds:
        source, _ = train_single("SmallMass", TrainConfig(total_env_steps=args.steps, seed=s), time.perf_counter)
        pre = evaluate(source.actor, "SmallMass", 0, 20, EVAL_SEED + s).mean_return
        for full in (False, True):
            cfg = TrainConfig(total_env_steps=args.finetune_steps, seed=s)
            tuned, _ = transfer_and_finetune(source, "SmallDrag", cfg, full_network=full, clock=time.perf_counter)
            post = evaluate(tuned.actor, "SmallMass", 0, 20, EVAL_SEED + s).mean_return
            target = evaluate(tuned.actor, "SmallDrag", 0, 20, EVAL_SEED + s).mean_return
            mode = "full" if full else "last-layer"
            print(f"{s:>4}  {mode:<12} {pre:>14.2f} {post:>15.2f} {target:>15.2f}")
            rows.append({"seed": s, "mode": mode, "source_pre": pre, "source_post": post, "target": target})
    dump(args.out, "finetune_table.json", rows)


if __name__ == "__main__":
    main()
