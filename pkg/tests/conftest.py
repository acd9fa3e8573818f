import pytest

from roundtable.model import StoryText

STORY_BODY = (
    "Once upon a time there was a boy named Tom. "
    "He lived in a small house near the river. "
    "Tom was happy every morning. "
    "One day he found a strange stone. "
    "The stone glowed at night."
)


@pytest.fixture
def story():
    return StoryText("s1", STORY_BODY, "en")


ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        ok, title, detail = ACCEPTANCE_RESULTS[num]
        line = f"{'PASS' if ok else 'FAIL'}  criterion {num:>2}: {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
