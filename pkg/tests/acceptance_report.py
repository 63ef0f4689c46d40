"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

RESULTS: dict[int, tuple[str, bool | None, str]] = {}


def record(number: int, title: str, passed: bool | None, detail: str = "") -> None:
    """Store the outcome; ``passed=None`` marks a skipped optional criterion."""
    RESULTS[number] = (title, passed, detail)


def lines() -> list[str]:
    out = []
    for k in sorted(RESULTS):
        title, passed, detail = RESULTS[k]
        tag = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        out.append(f"[{tag}] criterion {k:>2}: {title}" + (f" | {detail}" if detail else ""))
    return out
