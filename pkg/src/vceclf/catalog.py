"""Class catalog: the ordered class list that fixes column order everywhere."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

DEFAULT_CLASSES = (
    "Angioectasia",
    "Bleeding",
    "Erosion",
    "Erythema",
    "Foreign Body",
    "Lymphangiectasia",
    "Normal",
    "Polyp",
    "Ulcer",
    "Worms",
)


@dataclass(frozen=True)
class ClassCatalog:
    names: tuple[str, ...] = DEFAULT_CLASSES

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if len(names) < 2:
            raise ValueError(f"a catalog needs at least 2 classes, got {len(names)}")
        for name in names:
            if not isinstance(name, str) or not name.strip():
                raise ValueError(f"class names must be non-empty strings, got {name!r}")
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate class names: {dupes}")

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "ClassCatalog":
        return cls(tuple(names))

    @property
    def k(self) -> int:
        return len(self.names)

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None


DEFAULT_CATALOG = ClassCatalog()
