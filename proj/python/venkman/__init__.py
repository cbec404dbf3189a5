"""Harden, verify and simulate programs for the venkman toy ISA."""

import json as _json

from . import _venkman
from ._venkman import VenkmanError, assemble, attack_program, disassemble, format_program, presets

__all__ = [
    "VenkmanError",
    "Transformed",
    "assemble",
    "attack",
    "attack_program",
    "disassemble",
    "format_program",
    "presets",
    "report",
    "run",
    "transform",
    "verify",
]


class Transformed:
    """A laid-out image plus the configuration and stats that produced it."""

    def __init__(self, image, meta):
        self.image = image
        self.config = meta["config"]
        self.stats = meta["stats"]
        self.exempt_functions = meta["exempt_functions"]

    @property
    def policy(self):
        return {"config": self.config, "exempt_functions": self.exempt_functions}


def transform(source, preset="+fence", bundle_size=32):
    image, meta = _venkman.transform(source, preset, bundle_size)
    return Transformed(image, _json.loads(meta))


def verify(image, policy=None):
    """Verify an image. `policy` is a Transformed, a policy dict, or None for
    the aligned defaults."""
    if isinstance(image, Transformed):
        policy = image.policy if policy is None else policy
        image = image.image
    if isinstance(policy, Transformed):
        policy = policy.policy
    return _json.loads(_venkman.verify(image, _json.dumps(policy or {})))


def run(image, inputs=None, sim=None):
    if isinstance(image, Transformed):
        image = image.image
    return _json.loads(_venkman.run(image, _json.dumps(inputs or {}), _json.dumps(sim or {})))


def attack(mode="baseline", config=None, bundle_size=32):
    return _json.loads(_venkman.attack(mode, _json.dumps(config or {}), bundle_size))


def report(corpus, bundle_size=32, run_attack=True):
    return _json.loads(_venkman.report(str(corpus), bundle_size, run_attack))
