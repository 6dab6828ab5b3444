"""Collects one line per acceptance criterion for the terminal summary."""
RESULTS = []


def record(number: int, passed: bool, detail: str) -> str:
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    RESULTS.append((number, line))
    print(line)
    return line
