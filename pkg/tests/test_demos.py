import runpy
from pathlib import Path

import pytest

DEMOS = sorted((Path(__file__).parent.parent / "demos").glob("*.py"))


@pytest.mark.parametrize("script", DEMOS, ids=lambda p: p.stem)
def test_demo_runs_offline(script, capsys):
    runpy.run_path(str(script), run_name="__main__")
    assert capsys.readouterr().out
