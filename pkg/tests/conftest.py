import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "src", "string_bound")))
os.environ.setdefault("QT_QPA_PLATFORM", "offscreen")

import numpy as np
import pytest
from PyQt5 import QtWidgets
from PyQt5.QtCore import QSettings

from geometry import DomainSpec
from pathspace import Grid
from potential import PotentialSpec


# Session-scoped QApplication fixture to ensure a single instance across tests.
@pytest.fixture(scope="session", autouse=True)
def qt_app():
    app = QtWidgets.QApplication.instance() or QtWidgets.QApplication(sys.argv)
    yield app
    app.quit()


class DummySettings:
    """A dummy settings class to simulate QSettings behavior in memory."""

    def __init__(self):
        self.data = {}

    def setValue(self, key, value):
        self.data[key] = value

    def value(self, key, defaultValue=None):
        return self.data.get(key, defaultValue)

    def remove(self, key):
        self.data.pop(key, None)


@pytest.fixture
def dummy_qsettings(monkeypatch):
    dummy = DummySettings()
    monkeypatch.setattr(QSettings, "__init__", lambda self, org, app: None)
    monkeypatch.setattr(QSettings, "setValue", lambda self, key, value: dummy.setValue(key, value))
    monkeypatch.setattr(QSettings, "value", lambda self, key, defaultValue=None: dummy.value(key, defaultValue))
    monkeypatch.setattr(QSettings, "remove", lambda self, key: dummy.remove(key))
    return dummy


# Small models shared by the numerical tests.
@pytest.fixture
def unit_interval():
    return DomainSpec.interval(0.0, 1.0)


@pytest.fixture
def small_grid():
    return Grid(15, np.array([0.5]), np.array([0.5]))


@pytest.fixture
def zero_potential(unit_interval):
    return PotentialSpec.zero(unit_interval)
