"""Card identities, multisets, combo classification and the covering order.

GuanDan is played with a double deck: 54 distinct identities, two copies
each.  Index layout is fixed everywhere (vectors, wire protocol, replay
logs): rank-major 2..A over suits H,S,D,C at indices 0-51, Black Joker at
52, Red Joker at 53.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

NUM_CARDS = 54
DECK_COPIES = 2

SUITS = "HSDC"
RANK_NAMES = ["2", "3", "4", "5", "6", "7", "8", "9", "10", "J", "Q", "K", "A"]
RANK_2, RANK_A = 0, 12
RANK_BJ, RANK_RJ = 13, 14
BJ_INDEX, RJ_INDEX = 52, 53

# Natural point of a rank (2..10 -> 2..10, J=11 ... A=14), used by the
# tribute-return bound ("point not surpassing 10").
RANK_POINT = {r: r + 2 for r in range(13)}

FULL_DECK_COUNTS = bytes([DECK_COPIES] * NUM_CARDS)


def card_index(rank: int, suit: int) -> int:
    if rank == RANK_BJ:
        return BJ_INDEX
    if rank == RANK_RJ:
        return RJ_INDEX
    return rank * 4 + suit


def card_rank(index: int) -> int:
    if index == BJ_INDEX:
        return RANK_BJ
    if index == RJ_INDEX:
        return RANK_RJ
    return index // 4


def card_suit(index: int) -> int | None:
    """Suit of a card index; jokers have no suit."""
    if index >= 52:
        return None
    return index % 4


def card_str(index: int) -> str:
    if index == BJ_INDEX:
        return "BJ"
    if index == RJ_INDEX:
        return "RJ"
    return SUITS[index % 4] + RANK_NAMES[index // 4]


def parse_card(token: str) -> int:
    """Parse "H2", "S10", "BJ", "RJ" into a card index."""
    token = token.strip().upper()
    if token == "BJ":
        return BJ_INDEX
    if token == "RJ":
        return RJ_INDEX
    if len(token) < 2 or token[0] not in SUITS:
        raise ValueError(f"bad card token: {token!r}")
    rank_name = token[1:]
    if rank_name not in RANK_NAMES:
        raise ValueError(f"bad card rank: {token!r}")
    return card_index(RANK_NAMES.index(rank_name), SUITS.index(token[0]))


class CardSet:
    """Immutable multiset over the 54 card identities, counts in {0,1,2}.

    The universal card-group representation: hands, plays, and played
    history all use it.  Backed by a bytes buffer so that hashing,
    equality and set-membership are cheap.
    """

    __slots__ = ("counts",)

    def __init__(self, counts: bytes):
        if len(counts) != NUM_CARDS:
            raise ValueError(f"CardSet needs {NUM_CARDS} counts, got {len(counts)}")
        if any(c > DECK_COPIES for c in counts):
            raise ValueError("card count exceeds the two copies in a double deck")
        self.counts = counts

    @classmethod
    def empty(cls) -> "CardSet":
        return cls(bytes(NUM_CARDS))

    @classmethod
    def from_indices(cls, indices) -> "CardSet":
        buf = bytearray(NUM_CARDS)
        for i in indices:
            buf[i] += 1
        return cls(bytes(buf))

    @classmethod
    def from_tokens(cls, text: str) -> "CardSet":
        """Build from whitespace/comma separated card tokens ("H2 S9 BJ")."""
        tokens = text.replace(",", " ").split()
        return cls.from_indices(parse_card(t) for t in tokens)

    @classmethod
    def full_deck(cls) -> "CardSet":
        return cls(FULL_DECK_COUNTS)

    def size(self) -> int:
        return sum(self.counts)

    def count(self, index: int) -> int:
        return self.counts[index]

    def indices(self) -> list[int]:
        """Card indices with multiplicity, ascending."""
        out = []
        for i, c in enumerate(self.counts):
            out.extend([i] * c)
        return out

    def add(self, index: int, n: int = 1) -> "CardSet":
        buf = bytearray(self.counts)
        buf[index] += n
        return CardSet(bytes(buf))

    def remove(self, index: int, n: int = 1) -> "CardSet":
        buf = bytearray(self.counts)
        if buf[index] < n:
            raise ValueError(f"cannot remove {n}x {card_str(index)}: not held")
        buf[index] -= n
        return CardSet(bytes(buf))

    def union(self, other: "CardSet") -> "CardSet":
        return CardSet(bytes(a + b for a, b in zip(self.counts, other.counts)))

    def difference(self, other: "CardSet") -> "CardSet":
        buf = bytearray(NUM_CARDS)
        for i in range(NUM_CARDS):
            d = self.counts[i] - other.counts[i]
            if d < 0:
                raise ValueError("difference would go negative")
            buf[i] = d
        return CardSet(bytes(buf))

    def contains(self, other: "CardSet") -> bool:
        return all(a >= b for a, b in zip(self.counts, other.counts))

    def rank_counts(self) -> list[int]:
        """Histogram over the 15 ranks (2..A, BJ, RJ)."""
        h = [0] * 15
        c = self.counts
        for r in range(13):
            b = r * 4
            h[r] = c[b] + c[b + 1] + c[b + 2] + c[b + 3]
        h[RANK_BJ] = c[BJ_INDEX]
        h[RANK_RJ] = c[RJ_INDEX]
        return h

    def __eq__(self, other) -> bool:
        return isinstance(other, CardSet) and self.counts == other.counts

    def __hash__(self) -> int:
        return hash(self.counts)

    def __repr__(self) -> str:
        return f"CardSet({' '.join(card_str(i) for i in self.indices())})"


class ComboKind(IntEnum):
    PASS = 0
    SINGLE = 1
    PAIR = 2
    TRIPLE = 3
    TUBE = 4          # three consecutive pairs, 6 cards
    PLATE = 5         # two consecutive triples, 6 cards
    FULL_HOUSE = 6
    STRAIGHT = 7
    BOMB = 8          # 4-10 cards of one rank
    STRAIGHT_FLUSH = 9
    JOKER_BOMB = 10   # both BJ + both RJ

KIND_NAMES = {
    ComboKind.PASS: "Pass",
    ComboKind.SINGLE: "Single",
    ComboKind.PAIR: "Pair",
    ComboKind.TRIPLE: "Triple",
    ComboKind.TUBE: "Tube",
    ComboKind.PLATE: "Plate",
    ComboKind.FULL_HOUSE: "FullHouse",
    ComboKind.STRAIGHT: "Straight",
    ComboKind.BOMB: "Bomb",
    ComboKind.STRAIGHT_FLUSH: "StraightFlush",
    ComboKind.JOKER_BOMB: "JokerBomb",
}
KIND_BY_NAME = {v: k for k, v in KIND_NAMES.items()}

# Kinds compared by rank ordinal (level elevation applies); sequence kinds
# compare by window position in natural order with A allowed as 1.
RANK_KEY_KINDS = frozenset(
    [ComboKind.SINGLE, ComboKind.PAIR, ComboKind.TRIPLE, ComboKind.FULL_HOUSE, ComboKind.BOMB]
)
SEQ_KEY_KINDS = frozenset(
    [ComboKind.TUBE, ComboKind.PLATE, ComboKind.STRAIGHT, ComboKind.STRAIGHT_FLUSH]
)

# Sequence coordinates: A(low)=0, 2=1, ..., K=12, A(high)=13.
SEQ_LEN = {ComboKind.STRAIGHT: 5, ComboKind.STRAIGHT_FLUSH: 5, ComboKind.TUBE: 3, ComboKind.PLATE: 2}
SEQ_MULT = {ComboKind.STRAIGHT: 1, ComboKind.STRAIGHT_FLUSH: 1, ComboKind.TUBE: 2, ComboKind.PLATE: 3}


def seq_rank(pos: int) -> int:
    """Rank index occupying a sequence position (0=A-as-1 ... 13=A-high)."""
    return RANK_A if pos in (0, 13) else pos - 1


def seq_windows(kind: ComboKind) -> range:
    """Start positions of the consecutive windows a sequence kind may use."""
    return range(0, 14 - SEQ_LEN[kind] + 1)


def single_order(rank: int, level: int) -> int:
    """Total ordinal of a rank for rank-compared kinds under a level.

    RJ > BJ > level rank > A > K > ... > 2 (the level rank vacates its
    natural slot).
    """
    if rank == RANK_RJ:
        return 14
    if rank == RANK_BJ:
        return 13
    if rank == level:
        return 12
    return rank if rank < level else rank - 1


def wild_index(level: int) -> int:
    """The wild card: the Heart of the current level rank."""
    return level * 4  # suit H = 0


@dataclass(frozen=True)
class Combo:
    """A classified legal play: exact card multiset + type + comparison key.

    ``key_rank`` is the rank index for rank-compared kinds, the sequence
    start position (A-as-1 coordinates) for sequence kinds, the bomb rank
    for bombs, and 0 for Pass/JokerBomb.  ``wild_assignment`` is one
    representative mapping (wild card -> impersonated card index); combos
    that differ only in assignment are the same action.
    """

    kind: ComboKind
    cards: CardSet
    key_rank: int
    wild_assignment: tuple[tuple[int, int], ...] = ()

    @property
    def size(self) -> int:
        return self.cards.size()

    def is_pass(self) -> bool:
        return self.kind == ComboKind.PASS

    def is_bomb_class(self) -> bool:
        return self.kind in (ComboKind.BOMB, ComboKind.STRAIGHT_FLUSH, ComboKind.JOKER_BOMB)

    def identity(self) -> tuple:
        """Dedup/action identity: concrete multiset + kind + key."""
        return (self.cards.counts, int(self.kind), self.key_rank)

    def __str__(self) -> str:
        return combo_str(self)


PASS = Combo(ComboKind.PASS, CardSet.empty(), 0)


def combo_str(combo: Combo) -> str:
    """Canonical display form: "Pass", "Pair:KK", "Bomb:9999", "Straight:34567".

    Rank-only, matching how plays read at the table; use
    :func:`combo_str_full` when suits matter.
    """
    if combo.kind == ComboKind.PASS:
        return "Pass"
    ranks = "".join(RANK_NAMES[card_rank(i)] if card_rank(i) < 13
                    else ("BJ" if card_rank(i) == RANK_BJ else "RJ")
                    for i in combo.cards.indices())
    return f"{KIND_NAMES[combo.kind]}:{ranks}"


def combo_str_full(combo: Combo) -> str:
    """Suit-explicit form: "StraightFlush:H5 H6 H7 H8 H9"."""
    if combo.kind == ComboKind.PASS:
        return "Pass"
    cards = " ".join(card_str(i) for i in combo.cards.indices())
    return f"{KIND_NAMES[combo.kind]}:{cards}"


def parse_combo(text: str, level: int) -> Combo:
    """Parse "Pass" or "Kind:CARDS" where CARDS are suited tokens or bare ranks.

    Bare ranks get representative suits (S, then C, D, H round-robin).  The
    multiset must classify as the named kind under ``level``; when several
    keys are possible the highest is taken.
    """
    text = text.strip()
    if text.lower() == "pass":
        return PASS
    if ":" not in text:
        raise ValueError(f"bad combo (want Kind:CARDS): {text!r}")
    kind_name, card_text = text.split(":", 1)
    kind = KIND_BY_NAME.get(kind_name.strip())
    if kind is None:
        raise ValueError(f"unknown combo kind: {kind_name!r}")
    cards = _parse_combo_cards(card_text)
    options = [c for c in classify(cards, level) if c.kind == kind]
    if not options:
        raise ValueError(f"{card_text!r} does not form a {kind_name}")
    return max(options, key=lambda c: c.key_rank)


def _parse_combo_cards(card_text: str) -> CardSet:
    card_text = card_text.strip()
    if " " in card_text or "," in card_text:
        return CardSet.from_tokens(card_text)
    # Compact form: suited tokens or bare ranks, e.g. "KK", "9999", "H9H10".
    tokens: list[str] = []
    i = 0
    text = card_text.upper()
    while i < len(text):
        if text[i : i + 2] in ("BJ", "RJ"):
            tokens.append(text[i : i + 2])
            i += 2
        elif text[i] in SUITS and i + 1 < len(text):
            if text[i + 1 : i + 3] == "10":
                tokens.append(text[i : i + 3])
                i += 3
            else:
                tokens.append(text[i : i + 2])
                i += 2
        elif text[i : i + 2] == "10":
            tokens.append(text[i : i + 2])
            i += 2
        elif text[i] in "23456789JQKA":
            tokens.append(text[i])
            i += 1
        else:
            raise ValueError(f"bad card text: {card_text!r}")
    buf = bytearray(NUM_CARDS)
    suit_rr = [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]  # per-rank round robin
    indices = []
    rep_suits = [1, 3, 2, 0]  # S, C, D, H for bare ranks
    for tok in tokens:
        if tok in ("BJ", "RJ"):
            indices.append(BJ_INDEX if tok == "BJ" else RJ_INDEX)
        elif tok[0] in SUITS:
            indices.append(parse_card(tok))
        else:
            rank = RANK_NAMES.index(tok)
            placed = False
            for probe in range(8):
                suit = rep_suits[(suit_rr[rank] + probe) % 4]
                idx = card_index(rank, suit)
                if buf[idx] + sum(1 for j in indices if j == idx) < DECK_COPIES:
                    indices.append(idx)
                    suit_rr[rank] += probe + 1
                    placed = True
                    break
            if not placed:
                raise ValueError(f"too many {tok} cards")
    return CardSet.from_indices(indices)


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------
#
# A multiset forms kind K at key k iff its natural cards (everything except
# the Heart-of-level wilds) embed into K's rank profile and the wilds
# exactly fill the remaining slots.  Wilds impersonate any non-joker card;
# they never impersonate for Singles (a lone wild plays as the level card)
# and cannot stand in for jokers.

def classify(cards: CardSet, level: int) -> set[Combo]:
    """Every (kind, key_rank) interpretation the exact multiset can form.

    Returns the empty set when the multiset forms no legal type.
    """
    n = cards.size()
    if n == 0:
        raise ValueError("classify: empty card set")
    if n > 10:
        return set()

    results: dict[tuple[int, int], Combo] = {}
    widx = wild_index(level)
    w = cards.counts[widx]
    nat = list(cards.rank_counts())
    nat[level] -= w  # natural count excludes the wilds
    support = [r for r in range(15) if nat[r]]

    if n == 1:
        c = Combo(ComboKind.SINGLE, cards, card_rank(cards.indices()[0]))
        return {c}

    def fits(profile: dict[int, int]) -> tuple[tuple[int, int], ...] | None:
        """Wild assignment realizing the profile, or None.

        Every natural card must occupy a profile slot, wilds fill the rest,
        and wilds never fill joker slots.
        """
        for r in support:
            if r not in profile:
                return None
        deficit = 0
        assignment = []
        for r, need in profile.items():
            gap = need - nat[r]
            if gap < 0:
                return None
            if gap and r >= RANK_BJ:
                return None
            deficit += gap
            if gap:
                assignment.extend([(widx, card_index(r, 1))] * gap)
        if deficit != w:
            return None
        return tuple(assignment)

    def put(kind: ComboKind, key: int, profile: dict[int, int]):
        a = fits(profile)
        if a is not None:
            results.setdefault((int(kind), key), Combo(kind, cards, key, a))

    if n == 2:
        for r in range(13):
            if nat[r] + w >= 2:
                put(ComboKind.PAIR, r, {r: 2})
        for r in (RANK_BJ, RANK_RJ):
            if nat[r] == 2:
                put(ComboKind.PAIR, r, {r: 2})
    elif n == 3:
        for r in range(13):
            if nat[r] + w >= 3:
                put(ComboKind.TRIPLE, r, {r: 3})
    elif n == 5:
        if len(support) <= 2:
            for r3 in range(13):
                if nat[r3] + w < 3:
                    continue
                for r2 in range(13):
                    if r2 != r3 and nat[r2] + w >= 2:
                        put(ComboKind.FULL_HOUSE, r3, {r3: 3, r2: 2})
        for start in seq_windows(ComboKind.STRAIGHT):
            put(
                ComboKind.STRAIGHT,
                start,
                {seq_rank(start + i): 1 for i in range(5)},
            )
        _classify_straight_flush(cards, w, widx, results)
    elif n == 6:
        for start in seq_windows(ComboKind.TUBE):
            put(ComboKind.TUBE, start, {seq_rank(start + i): 2 for i in range(3)})
        for start in seq_windows(ComboKind.PLATE):
            put(ComboKind.PLATE, start, {seq_rank(start + i): 3 for i in range(2)})
    if 4 <= n <= 10:
        if n == 4 and nat[RANK_BJ] == 2 and nat[RANK_RJ] == 2:
            results[(int(ComboKind.JOKER_BOMB), 0)] = Combo(
                ComboKind.JOKER_BOMB, cards, 0
            )
        for r in range(13):
            if nat[r] + w >= n:
                put(ComboKind.BOMB, r, {r: n})

    return set(results.values())


def _classify_straight_flush(
    cards: CardSet, w: int, widx: int, results: dict
) -> None:
    """Suit-level check: naturals sit on distinct window slots, wilds fill."""
    counts = cards.counts
    for start in seq_windows(ComboKind.STRAIGHT_FLUSH):
        window = [seq_rank(start + i) for i in range(5)]
        for suit in range(4):
            need = [card_index(r, suit) for r in window]
            covered = 0
            ok = True
            for idx in need:
                if idx != widx and counts[idx] > 1:
                    ok = False  # duplicate cannot fill a slot twice
                    break
                covered += counts[idx] if idx != widx else 0
            if not ok or covered + w != 5:
                continue
            need_set = set(need)
            if any(
                counts[idx] and idx != widx and idx not in need_set
                for idx in range(NUM_CARDS)
            ):
                continue
            results.setdefault(
                (int(ComboKind.STRAIGHT_FLUSH), start),
                Combo(
                    ComboKind.STRAIGHT_FLUSH,
                    cards,
                    start,
                    tuple(
                        (widx, idx)
                        for idx in need
                        if idx != widx and counts[idx] == 0
                    ),
                ),
            )


# ---------------------------------------------------------------------------
# Covering order
# ---------------------------------------------------------------------------

def _bomb_tier(combo: Combo) -> int:
    """Position on the bomb ladder; 0 for non-bombs.

    4-card bomb < 5-card bomb < straight flush < 6..10-card bombs <
    joker bomb.
    """
    if combo.kind == ComboKind.JOKER_BOMB:
        return 9
    if combo.kind == ComboKind.STRAIGHT_FLUSH:
        return 3
    if combo.kind == ComboKind.BOMB:
        size = combo.size
        return size - 3 if size <= 5 else size - 2
    return 0


def covers(a: Combo, b: Combo, level: int) -> bool:
    """Whether playing ``a`` covers (beats) ``b`` under the current level."""
    if a.kind == ComboKind.PASS or b.kind == ComboKind.PASS:
        return False
    ta, tb = _bomb_tier(a), _bomb_tier(b)
    if ta != tb:
        return ta > tb
    if ta > 0:
        if a.kind == ComboKind.JOKER_BOMB:
            return False  # equal joker bombs
        if a.kind == ComboKind.BOMB:
            return single_order(a.key_rank, level) > single_order(b.key_rank, level)
        return a.key_rank > b.key_rank  # straight flush: by points
    if a.kind != b.kind or a.size != b.size:
        return False
    if a.kind in RANK_KEY_KINDS:
        return single_order(a.key_rank, level) > single_order(b.key_rank, level)
    return a.key_rank > b.key_rank


def compare(a: Combo, b: Combo, level: int) -> bool:
    """Alias for :func:`covers`; reads better at some call sites."""
    return covers(a, b, level)


def sort_key(combo: Combo, level: int) -> tuple:
    """Deterministic ordering for printing action sets: size, kind, key, cards."""
    key = (
        single_order(combo.key_rank, level)
        if combo.kind in RANK_KEY_KINDS
        else combo.key_rank
    )
    return (combo.size, int(combo.kind), key, combo.cards.counts)


def all_level_ranks() -> range:
    """Valid level ranks (2..A, never jokers)."""
    return range(13)
