"""Invertible maps between constrained hyperparameters and the unconstrained space they are optimised/sampled in
"""
import numpy as np


class Transform:
    """Identity transform, base of the others"""
    name = 'identity'

    def forward(self, value):
        """Constrained value -> unconstrained coordinate"""
        return np.asarray(value, dtype=float)

    def inverse(self, theta):
        """Unconstrained coordinate -> constrained value"""
        return np.asarray(theta, dtype=float)

    def grad(self, theta):
        """d(value)/d(theta) at `theta`"""
        return np.ones_like(np.asarray(theta, dtype=float))

    def __repr__(self):
        return self.name


class LogTransform(Transform):
    """value = offset + exp(theta), for quantities bounded below by `offset`"""

    def __init__(self, offset=0.0):
        self.offset = offset
        self.name = 'log' if offset == 0 else f'log(x-{offset:g})'

    def forward(self, value):
        value = np.asarray(value, dtype=float)
        if np.any(value <= self.offset):
            raise ValueError(f"Value {value} outside domain of {self.name} transform")
        return np.log(value - self.offset)

    def inverse(self, theta):
        return self.offset + np.exp(theta)

    def grad(self, theta):
        return np.exp(theta)


IDENTITY = Transform()
LOG = LogTransform()
LOG_NU = LogTransform(offset=1.0)

_by_name = {t.name: t for t in (IDENTITY, LOG, LOG_NU)}


def get_transform(name):
    """Look up a transform by its name (as written into JSON)"""
    try:
        return _by_name[name]
    except KeyError:
        raise ValueError(f"Unknown transform '{name}'") from None
