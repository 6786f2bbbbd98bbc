import os

import pytest

from shuffle.data import data_from_dict
from shuffle.surface import collect_macros, parse_inference, parse_model, resolve_model

CORPUS = os.path.join(os.path.dirname(__file__), "..", "src", "shuffle", "corpus")


def corpus_text(name):
    with open(os.path.join(CORPUS, name)) as fh:
        return fh.read()


def load_model(name="burglary.shm"):
    return resolve_model(parse_model(corpus_text(name)))


def load_defs(*names):
    defs, macros = [], {}
    for name in names:
        items = parse_inference(corpus_text(name), macros)
        macros.update(collect_macros(items))
        defs += items
    return defs


def burglary_data(calls, n=None, **observed):
    n = len(calls) if n is None else n
    obs = dict(observed)
    if calls is not None:
        obs["calls"] = list(calls)
    return {"domains": {"People": {"min": 0, "max": n - 1}}, "observed": obs}


@pytest.fixture(scope="session")
def burglary():
    return load_model()


@pytest.fixture
def make_data(burglary):
    def make(calls, n=None, **observed):
        return data_from_dict(burglary_data(calls, n, **observed), burglary)
    return make
