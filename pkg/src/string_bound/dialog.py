"""
dialog.py

This module defines the ParamsDialog class, which lets the user edit the
viewer's simulation parameters (penalization strength, time step, grid
size, seed and frame interval). Changes are saved persistently using
QSettings.
"""

import logging
from typing import Any, Dict, Tuple

from PyQt5 import QtWidgets
from PyQt5.QtGui import QDoubleValidator, QIntValidator
from PyQt5.QtWidgets import QMessageBox

from config import DEFAULT_VIEWER_PARAMS, MIN_NODES, save_viewer_settings

# Set up a module-level logger.
logger = logging.getLogger(__name__)

# field -> (label, tooltip, is_integer)
FIELDS = {
    "n": ("Penalization n", "Strength of the exterior penalty (n > 0)", False),
    "dt": ("Time step dt", "Must satisfy dt <= 1/(4n)", False),
    "M": ("Grid nodes M", f"Interior nodes, at least {MIN_NODES}", True),
    "seed": ("Seed", "Master seed of the noise stream", True),
    "frame_interval_ms": ("Frame interval (ms)", "Pause between displayed frames", True),
}


def validate_params(params: Dict[str, Any]) -> Tuple[bool, str]:
    """
    Validate viewer parameters.

    Returns:
        tuple: (is_valid (bool), error_message (str))
    """
    if params["n"] <= 0:
        return False, "Penalization n must be greater than zero."
    if params["dt"] <= 0:
        return False, "Time step dt must be greater than zero."
    if params["dt"] > 1.0 / (4.0 * params["n"]):
        return (
            False,
            f"Time step dt={params['dt']:g} is too large for n={params['n']:g}; "
            f"the limit is 1/(4n) = {1.0 / (4.0 * params['n']):g}.",
        )
    if params["M"] < MIN_NODES:
        return False, f"Grid needs at least {MIN_NODES} nodes."
    if params["seed"] < 0 or params["frame_interval_ms"] < 0:
        return False, "Seed and frame interval must be non-negative."
    return True, ""


# -------- Simulation Parameter Dialog --------
class ParamsDialog(QtWidgets.QDialog):
    """
    ParamsDialog shows the current viewer parameters, validates edits and
    stores them in the parent's viewer_params and in QSettings.
    """

    def __init__(self, parent: QtWidgets.QWidget) -> None:
        super().__init__(parent)
        self.setWindowTitle("Simulation Parameters")
        self.parent = parent
        self.edits: Dict[str, QtWidgets.QLineEdit] = {}
        logger.debug("Loaded viewer params: %s", self.parent.viewer_params)
        self.initUI()

    def initUI(self) -> None:
        layout = QtWidgets.QVBoxLayout(self)
        form = QtWidgets.QFormLayout()
        for key, (label, tooltip, is_integer) in FIELDS.items():
            edit = QtWidgets.QLineEdit(str(self.parent.viewer_params.get(key, DEFAULT_VIEWER_PARAMS[key])))
            if is_integer:
                edit.setValidator(QIntValidator(0, 2_000_000_000, self))
            else:
                validator = QDoubleValidator(0.0, 1e12, 12, self)
                validator.setNotation(QDoubleValidator.ScientificNotation)
                edit.setValidator(validator)
            edit.setToolTip(tooltip)
            form.addRow(label, edit)
            self.edits[key] = edit
        layout.addLayout(form)

        btn_layout = QtWidgets.QHBoxLayout()
        reset_btn = QtWidgets.QPushButton("Default")
        reset_btn.clicked.connect(self.reset_to_default)
        btn_layout.addWidget(reset_btn)

        save_btn = QtWidgets.QPushButton("Save Changes")
        save_btn.clicked.connect(self.save_changes)
        btn_layout.addWidget(save_btn)
        layout.addLayout(btn_layout)

    def collect(self) -> Dict[str, Any]:
        """Current field values; unparsable entries fall back to the stored ones."""
        params = dict(self.parent.viewer_params)
        for key, (_, _, is_integer) in FIELDS.items():
            text = self.edits[key].text()
            try:
                params[key] = int(text) if is_integer else float(text)
            except ValueError:
                logger.warning("Ignoring unparsable value %r for %s", text, key)
        return params

    def reset_to_default(self) -> None:
        for key, edit in self.edits.items():
            edit.setText(str(DEFAULT_VIEWER_PARAMS[key]))

    def save_changes(self) -> None:
        params = self.collect()
        valid, message = validate_params(params)
        if not valid:
            QMessageBox.warning(self, "Invalid Parameters", message)
            return
        self.parent.viewer_params = params
        try:
            save_viewer_settings(params)
        except Exception as e:
            QMessageBox.critical(self, "Error", f"Failed to save parameters:\n{e}")
            return
        logger.info("Viewer parameters saved: %s", params)
        self.accept()
