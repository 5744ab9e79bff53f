"""Train one teacher per variant, distil all six into a multi-head student and
report the KL reduction and student/teacher return ratios."""

import time

from _common import dump, parser

from mtcc import SIX_VARIANTS, DistillConfig, TrainConfig, evaluate, train_distill_multitask, train_single
from mtcc.checkpoint import save_checkpoint

EVAL_SEED = 10_000


def main():
    p = parser(__doc__, 200_000)
    p.add_argument("--distill-steps", type=int, default=50_000)
    args = p.parse_args()
    seed = args.seeds[0]
    teachers = []
    for env in SIX_VARIANTS:
        t0 = time.perf_counter()
        ck, _ = train_single(env, TrainConfig(total_env_steps=args.steps, seed=seed), time.perf_counter)
        teachers.append(ck)
        if args.out:
            save_checkpoint(ck, args.out / f"teacher_{env}.json")
        print(f"teacher {env}: {time.perf_counter() - t0:.0f}s")
    cfg = DistillConfig(total_env_steps=args.distill_steps, seed=seed)
    student, _ = train_distill_multitask(list(SIX_VARIANTS), teachers, cfg, time.perf_counter)
    kl = student.extra["kl"]
    print(f"{'env':<11} {'KL start':>9} {'KL end':>9} {'teacher':>9} {'student':>9}")
    rows = []
    for i, (env, t) in enumerate(zip(SIX_VARIANTS, teachers)):
        tr = evaluate(t.actor, env, 0, 20, EVAL_SEED).mean_return
        sr = evaluate(student.actor, env, i, 20, EVAL_SEED).mean_return
        print(f"{env:<11} {kl[env]['initial']:>9.4f} {kl[env]['final']:>9.4f} {tr:>9.2f} {sr:>9.2f}")
        rows.append({"env": env, **kl[env], "teacher": tr, "student": sr})
    if args.out:
        save_checkpoint(student, args.out / "student.json")
    dump(args.out, "distill_six.json", rows)


if __name__ == "__main__":
    main()
