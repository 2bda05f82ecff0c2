"""Enumerations shared across the solver modules."""

import enum


class ElementKind(enum.Enum):
    TRIANGLE = "tri"
    SQUARE = "quad"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"tri": cls.TRIANGLE, "triangle": cls.TRIANGLE, "triangles": cls.TRIANGLE,
                   "quad": cls.SQUARE, "square": cls.SQUARE, "squares": cls.SQUARE}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown element kind {value!r}") from None

    @property
    def num_vertices(self):
        return 3 if self is ElementKind.TRIANGLE else 4


class HybridizationType(enum.Enum):
    """Choice of globally coupled traces.

    TYPE_I uses (u_check, phi_hat), TYPE_II uses (sigma_check, u_hat) and
    TYPE_III uses (u_check, u_hat).
    """

    TYPE_I = 1
    TYPE_II = 2
    TYPE_III = 3

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("TYPE", "").replace("_", "")
        table = {"1": cls.TYPE_I, "I": cls.TYPE_I, "2": cls.TYPE_II, "II": cls.TYPE_II,
                 "3": cls.TYPE_III, "III": cls.TYPE_III}
        try:
            return table[key]
        except KeyError:
            raise ValueError(f"unknown hybridization {value!r}") from None

    @property
    def tangential_unknown(self):
        """'u' if the tangential global unknown is u_check.t, 'sigma' if it is sigma_check."""
        return "sigma" if self is HybridizationType.TYPE_II else "u"

    @property
    def normal_unknown(self):
        """'u' if the normal global unknown is u_hat.n, 'phi' if it is phi_hat."""
        return "phi" if self is HybridizationType.TYPE_I else "u"


class BoundaryKind(enum.Enum):
    ELECTRIC = "electric"
    MAGNETIC = "magnetic"
    DIRICHLET = "dirichlet"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown boundary kind {value!r}") from None
