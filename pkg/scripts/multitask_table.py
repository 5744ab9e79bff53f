"""Vanilla multi-task A2C against per-variant scratch training at a matched
per-environment step budget."""

import time

import numpy as np
from _common import dump, parser

from mtcc import SIX_VARIANTS, TrainConfig, evaluate, train_single, train_vanilla_multitask

EVAL_SEED = 10_000


def main():
    args = parser(__doc__, 50_000).parse_args()
    cfg = TrainConfig(total_env_steps=args.steps, eval_every=max(1, args.steps // 5))
    scratch = {e: [] for e in SIX_VARIANTS}
    multi = {e: [] for e in SIX_VARIANTS}
    for s in args.seeds:
        t0 = time.perf_counter()
        mt, _ = train_vanilla_multitask(list(SIX_VARIANTS), cfg.replace(seed=s), clock=time.perf_counter)
        for i, env in enumerate(SIX_VARIANTS):
            ck, _ = train_single(env, cfg.replace(seed=s), time.perf_counter)
            scratch[env].append(evaluate(ck.actor, env, 0, 20, EVAL_SEED + s).mean_return)
            multi[env].append(evaluate(mt.actor, env, i, 20, EVAL_SEED + s).mean_return)
        print(f"seed {s} done in {time.perf_counter() - t0:.0f}s")
    print(f"{'env':<11} {'scratch':>10} {'multitask':>10} {'ratio':>7}")
    table = []
    for e in SIX_VARIANTS:
        a, b = float(np.mean(scratch[e])), float(np.mean(multi[e]))
        print(f"{e:<11} {a:>10.2f} {b:>10.2f} {b / a:>7.3f}")
        table.append({"env": e, "scratch": scratch[e], "multitask": multi[e]})
    dump(args.out, "multitask_table.json", table)


if __name__ == "__main__":
    main()
