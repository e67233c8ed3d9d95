import os
import pytest

os.environ.setdefault('DIALRANK_NO_PROGRESS', '1')


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='Also run the slow end-to-end tests on full size corpora.')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip = pytest.mark.skip(reason='slow, use --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)
