"""Shared plumbing for the test suite: corpus loading and one-call runs."""
import os

from skn import parse_program, check_program, fixpoint, lower_program

PROGRAM_DIR = os.path.join(os.path.dirname(__file__), "programs")

CORPUS = [
    "coin-flip.skn",
    "coins.skn",
    "connect.skn",
    "equal.skn",
    "sum-swap.skn",
    "two-valued.skn",
    "option-map.skn",
]

# factor-free (or 0/1-factor) programs usable under any semiring
IDEMPOTENT_CORPUS = [f for f in CORPUS if f != "coins.skn"]


def load(name: str) -> str:
    with open(os.path.join(PROGRAM_DIR, name), encoding="utf-8") as fh:
        return fh.read()


def checked(source: str):
    return check_program(parse_program(source))


def run_source(source: str, spec, mode: str = "monomorphize",
               epsilon=None, max_iters: int = 10000):
    lowered = lower_program(checked(source), mode, spec)
    return lowered, fixpoint(lowered, spec, epsilon=epsilon, max_iters=max_iters)
