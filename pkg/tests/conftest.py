import pytest

_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """``record(number, passed, detail, part=None)``: one summary line per criterion."""
    store = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number, passed, detail, part=None):
        store.setdefault(number, {})[part] = (bool(passed), detail)
        tag = f"{number}{part or ''}"
        print(f"criterion {tag}: {'PASS' if passed else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_ACCEPTANCE, None)
    if not store:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(store):
        parts = store[number]
        ok = all(p for p, _ in parts.values())
        if list(parts) == [None]:
            detail = parts[None][1]
        else:
            detail = "; ".join(f"({k}) {'PASS' if p else 'FAIL'} {d}" for k, (p, d) in sorted(parts.items()))
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
