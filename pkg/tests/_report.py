"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

LINES = []


def record(number, title, checks):
    """``checks`` is a list of ``(label, ok, detail)``; returns overall success."""
    ok = all(c[1] for c in checks)
    lines = [f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {title}"]
    lines += [f"    failed {label}: {detail}" for label, passed, detail in checks if not passed]
    LINES.extend(lines)
    print("\n".join(lines))
    return ok
