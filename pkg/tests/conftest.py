import pytest

from gsos import load_bundled_spec
from gsos.presheaf import make_presheaf


@pytest.fixture(scope="session")
def ccs():
    return load_bundled_spec("ccs")


@pytest.fixture(scope="session")
def toy():
    return load_bundled_spec("toy")


@pytest.fixture(scope="session")
def ccs_labels(ccs):
    return ccs.labels


@pytest.fixture()
def paper_lts():
    """A 3-state system: x <-a_bar- y =b=> z (parallel b edges), a-loop on z."""
    from gsos.presheaf import labelset

    return make_presheaf(
        labelset("a", "a_bar", "b"),
        ("x", "y", "z"),
        {"a_bar": ("e",), "b": ("f", "f2"), "a": ("g",)},
        {"a_bar": {"e": "y"}, "b": {"f": "y", "f2": "y"}, "a": {"g": "z"}},
        {"a_bar": {"e": "x"}, "b": {"f": "z", "f2": "z"}, "a": {"g": "z"}},
    )


@pytest.fixture()
def sync_ambient(ccs_labels):
    """Five states, e1: x1 -a_bar-> y1 and e2: x3 -a-> y2."""
    return make_presheaf(
        ccs_labels,
        ("x1", "x2", "x3", "y1", "y2"),
        {"a_bar": ("e1",), "a": ("e2",)},
        {"a_bar": {"e1": "x1"}, "a": {"e2": "x3"}},
        {"a_bar": {"e1": "y1"}, "a": {"e2": "y2"}},
    )


@pytest.fixture()
def rsync_ambient(ccs_labels):
    """Three states, e1: x -a_bar-> y1 and e2: x -a-> y2 share their source."""
    return make_presheaf(
        ccs_labels,
        ("x", "y1", "y2"),
        {"a_bar": ("e1",), "a": ("e2",)},
        {"a_bar": {"e1": "x"}, "a": {"e2": "x"}},
        {"a_bar": {"e1": "y1"}, "a": {"e2": "y2"}},
    )
