"""Closed token vocabulary for bipartite circuit sequences.

Tokens fall into five disjoint categories: circuit type, device, net, pin
(edge) and the single ``TRUNCATE`` terminator. Ids are assigned in a fixed
order so that the same caps always produce the same id mapping.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigurationError, NotInVocabulary

CIRCUIT_TYPES: tuple[str, ...] = (
    "OpAmp",
    "Mirror",
    "Comparator",
    "Mixer",
    "LDO",
    "Oscillator",
    "Filter",
    "BGR",
    "PowerAmp",
    "VoltageRegulator",
    "PowerConverter",
    "PLL",
    "SwitchedCap",
    "DataConverter",
    "General",
)
CIRCUIT_PREFIX = "CIRCUIT_"
TRUNCATE = "TRUNCATE"
VSS = "VSS"
VDD = "VDD"

FAMILIES: tuple[str, ...] = ("NM", "PM", "NPN", "R", "C", "L", "DIO")
MOS_FAMILIES = frozenset({"NM", "PM"})
PASSIVE_FAMILIES = frozenset({"R", "C", "L"})

# family -> pin-token prefix
PIN_PREFIX = {"NM": "M", "PM": "M", "NPN": "B", "R": "R", "C": "C", "L": "L", "DIO": "D"}
# terminal roles in canonical letter order
ROLE_ORDER = {"M": "GDSB", "B": "CBE", "D": "PN"}
# symmetric two-terminal passives use one connection role
PASSIVE_ROLE = "C"

DEFAULT_LIMITS = {"NM": 35, "PM": 35, "NPN": 20, "R": 20, "C": 20, "L": 20, "DIO": 20}
DEFAULT_NET_LIMITS = {"VIN": 4, "VOUT": 4, "NET": 64}

_DEVICE_RE = re.compile(r"^(NM|PM|NPN|R|C|L|DIO)([1-9][0-9]*)$")
_NET_RE = re.compile(r"^(VSS|VDD|VIN|VOUT|NET)([1-9][0-9]*)?$")


class TokenCategory(enum.Enum):
    CIRCUIT_TYPE = "CircuitType"
    DEVICE = "Device"
    NET = "Net"
    PIN = "Pin"
    TRUNCATE = "Truncate"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Token:
    text: str
    category: TokenCategory
    id: int


def pin_token_set(family: str) -> list[str]:
    """Pin tokens usable with a device family, in canonical order.

    MOSFETs and BJTs get one token per non-empty subset of their terminal
    roles (a merged token such as ``M_GD`` binds several roles to one net).
    Diodes get ``D_P``/``D_N``; R, C and L share a single symmetric token.
    """
    if family not in PIN_PREFIX:
        raise NotInVocabulary(f"unknown device family {family!r}")
    prefix = PIN_PREFIX[family]
    if family in PASSIVE_FAMILIES:
        return [f"{prefix}_{PASSIVE_ROLE}"]
    roles = ROLE_ORDER[prefix]
    if family == "DIO":
        return [f"D_{r}" for r in roles]
    out = []
    for size in range(1, len(roles) + 1):
        for combo in combinations(roles, size):
            out.append(f"{prefix}_{''.join(combo)}")
    return out


def pin_roles(pin_text: str) -> tuple[str, frozenset[str]]:
    """Split a pin token into its prefix and role set, e.g. ``M_GD -> ('M', {G, D})``."""
    prefix, _, suffix = pin_text.partition("_")
    if not suffix or prefix not in ROLE_ORDER and prefix not in {"R", "C", "L"}:
        raise NotInVocabulary(f"not a pin token: {pin_text!r}")
    return prefix, frozenset(suffix)


def required_roles(family: str) -> frozenset[str]:
    """Roles a device must have bound for full terminal coverage (passives excluded)."""
    if family in PASSIVE_FAMILIES:
        return frozenset()
    return frozenset(ROLE_ORDER[PIN_PREFIX[family]])


def split_device(text: str) -> tuple[str, int] | None:
    m = _DEVICE_RE.match(text)
    return (m.group(1), int(m.group(2))) if m else None


def split_net(text: str) -> tuple[str, int] | None:
    m = _NET_RE.match(text)
    if not m:
        return None
    kind, idx = m.group(1), m.group(2)
    if kind in (VSS, VDD):
        return (kind, 0) if idx is None else None
    if idx is None:
        return None
    return kind, int(idx)


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[Token, ...]
    device_limits: Mapping[str, int]
    net_limits: Mapping[str, int]
    circuit_types: tuple[str, ...] = CIRCUIT_TYPES
    _by_text: dict[str, Token] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        self._by_text.update({t.text: t for t in self.tokens})

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, text: object) -> bool:
        return text in self._by_text

    def __getitem__(self, text: str) -> Token:
        try:
            return self._by_text[text]
        except KeyError:
            raise NotInVocabulary(f"token not in vocabulary: {text!r}") from None

    def id(self, text: str) -> int:
        return self[text].id

    def text(self, token_id: int) -> str:
        return self.tokens[token_id].text

    def classify(self, text: str) -> TokenCategory:
        return self[text].category

    def encode(self, texts: Iterable[str]) -> list[int]:
        return [self[t].id for t in texts]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i].text for i in ids]

    @property
    def truncate_id(self) -> int:
        return self._by_text[TRUNCATE].id

    @cached_property
    def category_ids(self) -> dict[TokenCategory, np.ndarray]:
        out = {}
        for cat in TokenCategory:
            out[cat] = np.array([t.id for t in self.tokens if t.category is cat], dtype=np.int64)
        return out

    @cached_property
    def family_pin_ids(self) -> dict[str, list[int]]:
        return {fam: [self.id(p) for p in pin_token_set(fam)] for fam in self.device_limits}

    def dump(self) -> str:
        """Render the vocabulary as ``<id>\\t<text>\\t<category>`` lines."""
        return "".join(f"{t.id}\t{t.text}\t{t.category}\n" for t in self.tokens)


def build_vocabulary(
    limits: Mapping[str, int] | Iterable[tuple[str, int]] | None = None,
    net_limits: Mapping[str, int] | None = None,
) -> Vocabulary:
    """Build the vocabulary for the given per-family instance caps.

    ``limits`` overrides entries of :data:`DEFAULT_LIMITS`; it may be given as
    a list of ``(family, cap)`` pairs, in which case repeated families are a
    configuration error.
    """
    caps = dict(DEFAULT_LIMITS)
    if limits is not None:
        pairs = list(limits.items()) if isinstance(limits, Mapping) else list(limits)
        seen: set[str] = set()
        for family, cap in pairs:
            if family in seen:
                raise ConfigurationError(f"duplicate device family {family!r}")
            seen.add(family)
            if family not in DEFAULT_LIMITS:
                raise ConfigurationError(f"unknown device family {family!r}")
            caps[family] = cap
    nets = dict(DEFAULT_NET_LIMITS)
    nets.update(net_limits or {})
    for name, cap in [*caps.items(), *nets.items()]:
        if int(cap) < 1:
            raise ConfigurationError(f"limit for {name} must be >= 1, got {cap}")

    texts: list[tuple[str, TokenCategory]] = []
    texts += [(CIRCUIT_PREFIX + t, TokenCategory.CIRCUIT_TYPE) for t in CIRCUIT_TYPES]
    for fam in FAMILIES:
        texts += [(f"{fam}{i}", TokenCategory.DEVICE) for i in range(1, caps[fam] + 1)]
    texts += [(VSS, TokenCategory.NET), (VDD, TokenCategory.NET)]
    for kind in ("VIN", "VOUT", "NET"):
        texts += [(f"{kind}{i}", TokenCategory.NET) for i in range(1, nets[kind] + 1)]
    pins: list[str] = []
    for fam in FAMILIES:
        pins += [p for p in pin_token_set(fam) if p not in pins]
    texts += [(p, TokenCategory.PIN) for p in pins]
    texts.append((TRUNCATE, TokenCategory.TRUNCATE))

    tokens = tuple(Token(text, cat, i) for i, (text, cat) in enumerate(texts))
    return Vocabulary(tokens=tokens, device_limits=caps, net_limits=nets)


def classify_token(text: str, vocab: Vocabulary | None = None) -> TokenCategory:
    """Category of ``text``; raises :class:`NotInVocabulary` for unknown tokens."""
    return (vocab or default_vocabulary()).classify(text)


_DEFAULT: Vocabulary | None = None


def default_vocabulary() -> Vocabulary:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = build_vocabulary()
    return _DEFAULT


def load_vocabulary_dump(text: str) -> list[tuple[int, str, str]]:
    rows = []
    for line in text.splitlines():
        if line:
            i, tok, cat = line.split("\t")
            rows.append((int(i), tok, cat))
    return rows
