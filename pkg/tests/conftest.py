from __future__ import annotations

import shutil
from pathlib import Path

import pytest

from posterkit.forge import BackgroundSource, FontLibrary, ForgeAssets, Grammar

DEJAVU = Path("/usr/share/fonts/truetype/dejavu")
CLASSIC_FONTS = ("DejaVuSans.ttf", "DejaVuSerif.ttf")
STYLIZED_FONTS = ("DejaVuSansMono-Bold.ttf", "DejaVuSerif-Bold.ttf")


def _find_font(name: str) -> Path | None:
    direct = DEJAVU / name
    if direct.exists():
        return direct
    for root in ("/usr/share/fonts", "/usr/local/share/fonts"):
        hits = sorted(Path(root).rglob(name)) if Path(root).is_dir() else []
        if hits:
            return hits[0]
    return None


@pytest.fixture(scope="session")
def font_dir(tmp_path_factory) -> Path:
    """A small font directory: two classic fonts at the top, two stylized ones in stylized/."""
    root = tmp_path_factory.mktemp("fonts")
    (root / "stylized").mkdir()
    for names, dest in ((CLASSIC_FONTS, root), (STYLIZED_FONTS, root / "stylized")):
        for name in names:
            src = _find_font(name)
            if src is None:
                pytest.skip(f"font {name} not installed")
            shutil.copy(src, dest / name)
    return root


@pytest.fixture(scope="session")
def library(font_dir) -> FontLibrary:
    return FontLibrary.from_directory(font_dir)


@pytest.fixture(scope="session")
def assets(library) -> ForgeAssets:
    return ForgeAssets(library, Grammar.from_directory(), BackgroundSource())


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
