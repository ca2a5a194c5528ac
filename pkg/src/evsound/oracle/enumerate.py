"""Every branch schedule a loop-free bundle can follow."""

from __future__ import annotations

from ..dynexec import ScheduleExhausted, run
from ..ir.model import Bundle
from ..monitor import MonitoringScheme


DEFAULT_CAP = 12


class BranchCapExceeded(RuntimeError):
    pass


def enumerate_executions(b: Bundle, max_branches: int = DEFAULT_CAP) -> list[tuple[bool, ...]]:
    """All complete schedules, ordered lexicographically (false before true).

    A prefix is extended only when the interpreter asks for another bit, so
    every returned schedule is consumed exactly.
    """
    empty = MonitoringScheme()
    done = []
    stack = [()]
    while stack:
        prefix = stack.pop()
        try:
            run(b, empty, prefix)
        except ScheduleExhausted:
            if len(prefix) >= max_branches:
                raise BranchCapExceeded(
                    f"an execution needs more than {max_branches} branch decisions"
                ) from None
            stack.append(prefix + (True,))
            stack.append(prefix + (False,))
            continue
        done.append(prefix)
    return sorted(done)


def random_schedules(b: Bundle, n: int, seed: int, max_branches: int = 64) -> list[tuple[bool, ...]]:
    """``n`` complete schedules drawn with fair coin flips, duplicates dropped."""
    import random

    rng = random.Random(seed)
    empty = MonitoringScheme()
    out: list = []
    for _ in range(n):
        prefix: tuple = ()
        while True:
            try:
                run(b, empty, prefix)
                break
            except ScheduleExhausted:
                if len(prefix) >= max_branches:
                    raise BranchCapExceeded(
                        f"an execution needs more than {max_branches} branch decisions"
                    ) from None
                prefix += (rng.random() < 0.5,)
        if prefix not in out:
            out.append(prefix)
    return out
