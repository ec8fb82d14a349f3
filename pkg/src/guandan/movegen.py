"""Legal-move generation.

Two independent routes to the same answer:

* the fast path (:func:`legal_leads` / :func:`legal_follows`) builds each
  combo kind structurally from per-rank suit availability, threading a
  wild budget through the slots;
* :func:`oracle_legal_actions` brute-forces every non-empty sub-multiset
  of a small hand through :func:`guandan.cards.classify`.

Actions are concrete card multisets: a Pair of 9s from Spades is a
different action from the Heart/Club one.  The two routes must agree as
sets of ``(cards, kind, key)`` identities.
"""

from __future__ import annotations

from .cards import (
    BJ_INDEX,
    NUM_CARDS,
    PASS,
    RANK_BJ,
    RANK_RJ,
    RJ_INDEX,
    CardSet,
    Combo,
    ComboKind,
    card_index,
    classify,
    covers,
    seq_rank,
    seq_windows,
    single_order,
    sort_key,
    wild_index,
)

BOMB_SIZES = range(4, 11)


def _rank_suits(hand: CardSet, level: int) -> list[list[tuple[int, int]]]:
    """Per rank 0..12: available (card_index, count) pairs, wilds excluded."""
    widx = wild_index(level)
    out = []
    for r in range(13):
        row = []
        for s in range(4):
            idx = card_index(r, s)
            if idx != widx and hand.counts[idx]:
                row.append((idx, hand.counts[idx]))
        out.append(row)
    return out


def _pick(options: list[tuple[int, int]], k: int):
    """Distinct multisets of k cards drawn from (index, max_count) options."""
    n = len(options)

    def rec(i: int, left: int, acc: list[int]):
        if left == 0:
            yield tuple(acc)
            return
        if i == n:
            return
        idx, cap = options[i]
        for take in range(min(cap, left), -1, -1):
            acc.extend([idx] * take)
            yield from rec(i + 1, left - take, acc)
            if take:
                del acc[-take:]

    yield from rec(0, k, [])


def _rank_units(options, size: int, max_wilds: int):
    """(cards, wilds_used) ways to build ``size`` cards of one rank."""
    units = []
    for u in range(0, max_wilds + 1):
        if size - u < 0:
            break
        for nat in _pick(options, size - u):
            units.append((nat, u))
    return units


def _emit(out: list[Combo], kind: ComboKind, key: int, naturals, wilds: int, widx: int):
    cards = CardSet.from_indices(list(naturals) + [widx] * wilds)
    out.append(Combo(kind, cards, key))


def legal_leads(hand: CardSet, level: int) -> list[Combo]:
    """Every distinct combo the hand can open a trick with."""
    out: list[Combo] = []
    widx = wild_index(level)
    w = hand.counts[widx]
    suits = _rank_suits(hand, level)

    # Singles: one per distinct card identity, wild plays as the level rank.
    for idx in range(NUM_CARDS):
        if hand.counts[idx]:
            out.append(
                Combo(
                    ComboKind.SINGLE,
                    CardSet.from_indices([idx]),
                    RANK_BJ if idx == BJ_INDEX else RANK_RJ if idx == RJ_INDEX else idx // 4,
                )
            )

    for r in range(13):
        for nat, u in _rank_units(suits[r], 2, min(w, 2)):
            _emit(out, ComboKind.PAIR, r, nat, u, widx)
        for nat, u in _rank_units(suits[r], 3, min(w, 2)):
            _emit(out, ComboKind.TRIPLE, r, nat, u, widx)
    if hand.counts[BJ_INDEX] == 2:
        out.append(Combo(ComboKind.PAIR, CardSet.from_indices([BJ_INDEX] * 2), RANK_BJ))
    if hand.counts[RJ_INDEX] == 2:
        out.append(Combo(ComboKind.PAIR, CardSet.from_indices([RJ_INDEX] * 2), RANK_RJ))

    out.extend(_bomb_class(hand, level))

    # Full houses: triple part and pair part split the wild budget.
    for r3 in range(13):
        for nat3, u3 in _rank_units(suits[r3], 3, min(w, 2)):
            for r2 in range(13):
                if r2 == r3:
                    continue
                for nat2, u2 in _rank_units(suits[r2], 2, min(w - u3, 2)):
                    _emit(
                        out,
                        ComboKind.FULL_HOUSE,
                        r3,
                        list(nat3) + list(nat2),
                        u3 + u2,
                        widx,
                    )

    # Straights: one card per consecutive rank, any suit or a wild.
    for start in seq_windows(ComboKind.STRAIGHT):
        slots = [seq_rank(start + i) for i in range(5)]
        _seq_product(out, ComboKind.STRAIGHT, start, slots, 1, suits, w, widx)

    # Tubes and plates: per-rank units of 2 or 3 cards.
    for start in seq_windows(ComboKind.TUBE):
        slots = [seq_rank(start + i) for i in range(3)]
        _seq_product(out, ComboKind.TUBE, start, slots, 2, suits, w, widx)
    for start in seq_windows(ComboKind.PLATE):
        slots = [seq_rank(start + i) for i in range(2)]
        _seq_product(out, ComboKind.PLATE, start, slots, 3, suits, w, widx)

    # Full houses reach the same multiset through different pair-rank
    # profiles when wilds cover the whole pair; collapse those.
    seen = set()
    unique = []
    for c in out:
        ident = c.identity()
        if ident not in seen:
            seen.add(ident)
            unique.append(c)
    unique.sort(key=lambda c: sort_key(c, level))
    return unique


def _seq_product(out, kind, key, slots, mult, suits, w, widx) -> None:
    """Cartesian build of a sequence kind over its rank slots."""
    per_slot = []
    for r in slots:
        units = _rank_units(suits[r], mult, min(w, 2))
        if not units:
            return
        per_slot.append(units)

    def rec(i: int, used_wilds: int, acc: list[int]):
        if i == len(per_slot):
            cards = CardSet.from_indices(acc + [widx] * used_wilds)
            out.append(Combo(kind, cards, key))
            return
        for nat, u in per_slot[i]:
            if used_wilds + u <= w:
                rec(i + 1, used_wilds + u, acc + list(nat))

    rec(0, 0, [])


def _bomb_class(hand: CardSet, level: int) -> list[Combo]:
    """All bombs, straight flushes and the joker bomb in the hand."""
    out: list[Combo] = []
    widx = wild_index(level)
    w = hand.counts[widx]
    suits = _rank_suits(hand, level)

    for r in range(13):
        total = sum(c for _, c in suits[r]) + w
        for size in BOMB_SIZES:
            if size > total:
                break
            for nat, u in _rank_units(suits[r], size, min(w, 2)):
                _emit(out, ComboKind.BOMB, r, nat, u, widx)

    # Straight flushes: per window and suit, each slot is the exact suited
    # card or a wild.
    for start in seq_windows(ComboKind.STRAIGHT_FLUSH):
        ranks = [seq_rank(start + i) for i in range(5)]
        for s in range(4):
            need = [card_index(r, s) for r in ranks]

            def rec(i: int, used_wilds: int, acc: list[int]):
                if i == 5:
                    cards = CardSet.from_indices(acc + [widx] * used_wilds)
                    out.append(Combo(ComboKind.STRAIGHT_FLUSH, cards, start))
                    return
                idx = need[i]
                if idx != widx and hand.counts[idx]:
                    rec(i + 1, used_wilds, acc + [idx])
                if used_wilds < w:
                    rec(i + 1, used_wilds + 1, acc)

            rec(0, 0, [])

    if hand.counts[BJ_INDEX] == 2 and hand.counts[RJ_INDEX] == 2:
        out.append(
            Combo(
                ComboKind.JOKER_BOMB,
                CardSet.from_indices([BJ_INDEX, BJ_INDEX, RJ_INDEX, RJ_INDEX]),
                0,
            )
        )
    return out


def legal_follows(hand: CardSet, to_beat: Combo, level: int) -> list[Combo]:
    """Pass plus every combo in the hand that covers ``to_beat``."""
    if to_beat.is_pass():
        raise ValueError("to_beat must be a real combo; use legal_leads to open")
    out: list[Combo] = [PASS]
    widx = wild_index(level)
    w = hand.counts[widx]
    suits = _rank_suits(hand, level)

    candidates: list[Combo] = []
    kind = to_beat.kind
    if kind == ComboKind.SINGLE:
        floor = single_order(to_beat.key_rank, level)
        for idx in range(NUM_CARDS):
            if not hand.counts[idx]:
                continue
            r = RANK_BJ if idx == BJ_INDEX else RANK_RJ if idx == RJ_INDEX else idx // 4
            if single_order(r, level) > floor:
                candidates.append(Combo(ComboKind.SINGLE, CardSet.from_indices([idx]), r))
    elif kind == ComboKind.PAIR:
        floor = single_order(to_beat.key_rank, level)
        for r in range(13):
            if single_order(r, level) > floor:
                for nat, u in _rank_units(suits[r], 2, min(w, 2)):
                    _emit(candidates, ComboKind.PAIR, r, nat, u, widx)
        for r, idx in ((RANK_BJ, BJ_INDEX), (RANK_RJ, RJ_INDEX)):
            if single_order(r, level) > floor and hand.counts[idx] == 2:
                candidates.append(Combo(ComboKind.PAIR, CardSet.from_indices([idx] * 2), r))
    elif kind == ComboKind.TRIPLE:
        floor = single_order(to_beat.key_rank, level)
        for r in range(13):
            if single_order(r, level) > floor:
                for nat, u in _rank_units(suits[r], 3, min(w, 2)):
                    _emit(candidates, ComboKind.TRIPLE, r, nat, u, widx)
    elif kind == ComboKind.FULL_HOUSE:
        floor = single_order(to_beat.key_rank, level)
        for r3 in range(13):
            if single_order(r3, level) <= floor:
                continue
            for nat3, u3 in _rank_units(suits[r3], 3, min(w, 2)):
                for r2 in range(13):
                    if r2 == r3:
                        continue
                    for nat2, u2 in _rank_units(suits[r2], 2, min(w - u3, 2)):
                        _emit(
                            candidates,
                            ComboKind.FULL_HOUSE,
                            r3,
                            list(nat3) + list(nat2),
                            u3 + u2,
                            widx,
                        )
    elif kind in (ComboKind.STRAIGHT, ComboKind.TUBE, ComboKind.PLATE):
        mult = {ComboKind.STRAIGHT: 1, ComboKind.TUBE: 2, ComboKind.PLATE: 3}[kind]
        length = {ComboKind.STRAIGHT: 5, ComboKind.TUBE: 3, ComboKind.PLATE: 2}[kind]
        for start in seq_windows(kind):
            if start <= to_beat.key_rank:
                continue
            slots = [seq_rank(start + i) for i in range(length)]
            _seq_product(candidates, kind, start, slots, mult, suits, w, widx)

    # Bomb-class escalation is always on the table; covers() sorts out the
    # ladder when to_beat is itself a bomb.
    candidates.extend(_bomb_class(hand, level))

    seen = set()
    for c in candidates:
        if covers(c, to_beat, level):
            ident = c.identity()
            if ident not in seen:
                seen.add(ident)
                out.append(c)

    out[1:] = sorted(out[1:], key=lambda c: sort_key(c, level))
    return out


def legal_actions(hand: CardSet, to_beat: Combo | None, level: int) -> list[Combo]:
    """Legal plays for the seat to act; leading when ``to_beat`` is None."""
    if to_beat is None or to_beat.is_pass():
        return legal_leads(hand, level)
    return legal_follows(hand, to_beat, level)


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

def _sub_multisets(hand: CardSet):
    """All non-empty sub-multisets, as count buffers."""
    present = [(i, hand.counts[i]) for i in range(NUM_CARDS) if hand.counts[i]]
    buf = bytearray(NUM_CARDS)

    def rec(i: int):
        if i == len(present):
            yield bytes(buf)
            return
        idx, cap = present[i]
        for take in range(cap + 1):
            buf[idx] = take
            yield from rec(i + 1)
        buf[idx] = 0

    for counts in rec(0):
        if any(counts):
            yield counts


def oracle_legal_actions(
    hand: CardSet, to_beat: Combo | None, level: int
) -> list[Combo]:
    """Definitional answer: classify every sub-multiset, filter by covering.

    Exponential in hand size; meant for hands of roughly 12 cards or fewer.
    """
    if hand.size() > 14:
        raise ValueError("oracle is exponential; hand too large")
    out: list[Combo] = []
    following = to_beat is not None and not to_beat.is_pass()
    if following:
        out.append(PASS)
    for counts in _sub_multisets(hand):
        for combo in classify(CardSet(counts), level):
            if following:
                if covers(combo, to_beat, level):
                    out.append(combo)
            else:
                out.append(combo)
    out_real = [c for c in out if not c.is_pass()]
    out_real.sort(key=lambda c: sort_key(c, level))
    return ([PASS] if following else []) + out_real


def action_identities(actions: list[Combo]) -> set[tuple]:
    """Comparable form of an action list: set of (cards, kind, key)."""
    return {c.identity() for c in actions}
